//! Experiment configuration: a flat TOML key/value file.
//!
//! Every key is optional; omitted keys take the defaults below.
//!
//! | key | default | constraint |
//! |-----|---------|------------|
//! | `dataset` | `"adult"` | `adult` or `compas` |
//! | `data_path` | dataset default under the data dir | |
//! | `mode` | `"multi-group"` | `multi-group` or `two-group` |
//! | `clients` | 4 | >= 2 |
//! | `alpha` | 0.5 | > 0 |
//! | `rounds` | 50 | >= 0 |
//! | `local_epochs` | 15 | >= 1 |
//! | `beta` | 0.4 | in [0, 1] |
//! | `n_bins` | 100 | >= 2 |
//! | `xi` | 0.15 | in [0, 1) |
//! | `epsilon` | 1.0 | > 0, in bin widths |
//! | `lr` | 0.005 | >= 0 |
//! | `batch_size` | 16 | >= 1 |
//! | `optimizer` | `"sgd"` | `sgd` or `adam` |
//! | `seed` | 0 | |
//! | `repeats` | 5 | >= 1 |
//! | `output` | `"results"` | |
//! | `test_fraction` | 0.3 | in (0, 1) |
//! | `sinkhorn_max_iters` | 1000 | >= 1 |
//! | `sinkhorn_tol` | 1e-6 | > 0 |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::GroupMode;
use crate::error::{Error, Result};

/// Environment variable naming the directory that holds dataset files.
pub const DATA_DIR_ENV: &str = "WASSFFED_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Adult,
    Compas,
}

impl DatasetName {
    pub fn default_file(self) -> &'static str {
        match self {
            // A directory holding adult.data and adult.test.
            DatasetName::Adult => "",
            DatasetName::Compas => "compas-scores-two-years.csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetName,
    pub data_path: Option<PathBuf>,
    pub mode: GroupMode,
    pub clients: usize,
    pub alpha: f64,
    pub rounds: usize,
    pub local_epochs: usize,
    pub beta: f64,
    pub n_bins: usize,
    pub xi: f64,
    pub epsilon: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub repeats: usize,
    pub output: PathBuf,
    pub test_fraction: f64,
    pub sinkhorn_max_iters: usize,
    pub sinkhorn_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetName::Adult,
            data_path: None,
            mode: GroupMode::MultiGroup,
            clients: 4,
            alpha: 0.5,
            rounds: 50,
            local_epochs: 15,
            beta: 0.4,
            n_bins: 100,
            xi: 0.15,
            epsilon: 1.0,
            lr: 0.005,
            batch_size: 16,
            optimizer: OptimizerKind::Sgd,
            seed: 0,
            repeats: 5,
            output: PathBuf::from("results"),
            test_fraction: 0.3,
            sinkhorn_max_iters: 1000,
            sinkhorn_tol: 1e-6,
        }
    }
}

fn check(ok: bool, field: &str, constraint: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, constraint))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        check(self.clients >= 2, "clients", "must be at least 2")?;
        check(self.alpha.is_finite() && self.alpha > 0.0, "alpha", "must be > 0")?;
        check(self.local_epochs >= 1, "local_epochs", "must be at least 1")?;
        check((0.0..=1.0).contains(&self.beta), "beta", "must lie in [0, 1]")?;
        check(self.n_bins >= 2, "n_bins", "must be at least 2")?;
        check((0.0..1.0).contains(&self.xi), "xi", "must lie in [0, 1)")?;
        check(self.epsilon.is_finite() && self.epsilon > 0.0, "epsilon", "must be > 0")?;
        check(self.lr.is_finite() && self.lr >= 0.0, "lr", "must be >= 0")?;
        check(self.batch_size >= 1, "batch_size", "must be at least 1")?;
        check(self.repeats >= 1, "repeats", "must be at least 1")?;
        check(
            self.test_fraction > 0.0 && self.test_fraction < 1.0,
            "test_fraction",
            "must lie in (0, 1)",
        )?;
        check(self.sinkhorn_max_iters >= 1, "sinkhorn_max_iters", "must be at least 1")?;
        check(
            self.sinkhorn_tol.is_finite() && self.sinkhorn_tol > 0.0,
            "sinkhorn_tol",
            "must be > 0",
        )?;
        Ok(())
    }

    /// Resolves the dataset location: an explicit absolute `data_path` wins;
    /// relative paths and the dataset default resolve against `data_dir`.
    pub fn resolve_data_path(&self, data_dir: &Path) -> PathBuf {
        match &self.data_path {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => data_dir.join(p),
            None => data_dir.join(self.dataset.default_file()),
        }
    }

    /// Sets one field from its textual value, as used by sweeps and CLI
    /// overrides; `k` is an alias for `local_epochs`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
        }
        let mut next = self.clone();
        match key {
            "beta" => next.beta = parse(key, value)?,
            "k" | "local_epochs" => next.local_epochs = parse(key, value)?,
            "n_bins" => next.n_bins = parse(key, value)?,
            "xi" => next.xi = parse(key, value)?,
            "alpha" => next.alpha = parse(key, value)?,
            "clients" => next.clients = parse(key, value)?,
            "epsilon" => next.epsilon = parse(key, value)?,
            "rounds" => next.rounds = parse(key, value)?,
            "seed" => next.seed = parse(key, value)?,
            "repeats" => next.repeats = parse(key, value)?,
            "lr" => next.lr = parse(key, value)?,
            "batch_size" => next.batch_size = parse(key, value)?,
            "test_fraction" => next.test_fraction = parse(key, value)?,
            "sinkhorn_max_iters" => next.sinkhorn_max_iters = parse(key, value)?,
            "sinkhorn_tol" => next.sinkhorn_tol = parse(key, value)?,
            "optimizer" => {
                next.optimizer = match value.trim() {
                    "sgd" => OptimizerKind::Sgd,
                    "adam" => OptimizerKind::Adam,
                    _ => return Err(Error::config(key, "expected `sgd` or `adam`")),
                }
            }
            other => {
                return Err(Error::config(
                    other,
                    "unknown parameter; expected one of beta, k, n_bins, xi, alpha, clients, \
                     epsilon, rounds, seed, repeats, lr, batch_size, test_fraction, \
                     sinkhorn_max_iters, sinkhorn_tol, optimizer",
                ))
            }
        }
        next.validate()?;
        *self = next;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let text = c.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = ExperimentConfig::from_toml_str("dataset = \"compas\"\nbeta = 0.2\n").unwrap();
        assert_eq!(c.dataset, DatasetName::Compas);
        assert_eq!(c.beta, 0.2);
        assert_eq!(c.local_epochs, 15);
    }

    #[test]
    fn invalid_fields_are_named() {
        for (text, field) in [
            ("beta = 1.5", "beta"),
            ("xi = 1.0", "xi"),
            ("epsilon = 0.0", "epsilon"),
            ("local_epochs = 0", "local_epochs"),
            ("n_bins = 1", "n_bins"),
            ("clients = 1", "clients"),
        ] {
            match ExperimentConfig::from_toml_str(text) {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("betta = 0.3"),
            Err(Error::ConfigParse(_))
        ));
    }

    #[test]
    fn set_by_name() {
        let mut c = ExperimentConfig::default();
        c.set("k", "3").unwrap();
        c.set("clients", "20").unwrap();
        assert_eq!((c.local_epochs, c.clients), (3, 20));
        assert!(c.set("gamma", "1").is_err());
        assert!(c.set("beta", "2").is_err());
    }

    #[test]
    fn data_path_resolution() {
        let mut c = ExperimentConfig::default();
        c.dataset = DatasetName::Compas;
        assert_eq!(
            c.resolve_data_path(Path::new("/d")),
            PathBuf::from("/d/compas-scores-two-years.csv")
        );
        c.data_path = Some(PathBuf::from("/abs/file.csv"));
        assert_eq!(c.resolve_data_path(Path::new("/d")), PathBuf::from("/abs/file.csv"));
    }
}
