use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("distribution is empty")]
    EmptyDistribution,

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sinkhorn did not converge after {iterations} iterations (marginal violation {violation:e})")]
    Convergence { iterations: usize, violation: f64 },

    #[error("invalid weights: {0}")]
    Weight(String),

    #[error("metric undefined: group {group} {reason}")]
    UndefinedMetric { group: String, reason: &'static str },

    #[error("invalid config field `{field}`: {constraint}")]
    Config { field: String, constraint: String },

    #[error("group {group} was reported by no client")]
    MissingGroup { group: String },

    #[error("missing required columns: {}", missing.join(", "))]
    Schema { missing: Vec<String> },

    #[error("partition failed: {0}")]
    Partition(String),

    #[error("round {round} failed: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    ConfigParse(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            constraint: constraint.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
