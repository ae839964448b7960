pub mod config;
pub mod data;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod fairness;
pub mod ot;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
