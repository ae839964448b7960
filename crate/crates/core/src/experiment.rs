//! Repeated, seeded experiment runs on a loaded dataset.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DatasetName, ExperimentConfig};
use crate::data::{dirichlet_partition, load_adult, load_compas, train_test_split, PartitionSpec, TabularDataset};
use crate::engine::{derive_seed, run_fedavg, run_wassffed, ProtocolSettings, RoundRecord, Stream};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    WassFFed,
    FedAvg,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::WassFFed => "wassffed",
            Method::FedAvg => "fedavg",
        }
    }
}

pub fn load_dataset(config: &ExperimentConfig, data_dir: &Path) -> Result<TabularDataset> {
    let path = config.resolve_data_path(data_dir);
    match config.dataset {
        DatasetName::Adult => load_adult(&path, config.mode),
        DatasetName::Compas => load_compas(&path, config.mode),
    }
}

/// Client shards and the held-out test set for one seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub clients: Vec<TabularDataset>,
    pub test: TabularDataset,
}

pub fn prepare(dataset: &TabularDataset, config: &ExperimentConfig, seed: u64) -> Result<Prepared> {
    let (train, test) = train_test_split(
        dataset,
        config.test_fraction,
        derive_seed(seed, 0, 0, Stream::Split),
    )?;
    let spec = PartitionSpec {
        client_count: config.clients,
        alpha: config.alpha,
        seed: derive_seed(seed, 0, 0, Stream::Partition),
    };
    let shards = dirichlet_partition(&train, &spec)?;
    Ok(Prepared {
        clients: shards.iter().map(|idx| train.subset(idx)).collect(),
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub records: Vec<RoundRecord>,
}

impl RepeatResult {
    pub fn final_record(&self) -> &RoundRecord {
        self.records.last().expect("a run always records the warm-up round")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Mean and sample standard deviation; `sd` is 0 for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub method: Method,
    pub repeats: Vec<RepeatResult>,
    pub accuracy: MeanSd,
    pub dp: MeanSd,
    pub eop: MeanSd,
    pub wall_clock_secs: f64,
}

/// Runs `config.repeats` seeds (`config.seed + i`) of `method` in parallel.
pub fn run_experiment(
    dataset: &TabularDataset,
    config: &ExperimentConfig,
    method: Method,
) -> Result<RunResult> {
    config.validate()?;
    let start = Instant::now();
    let repeats: Vec<RepeatResult> = (0..config.repeats)
        .into_par_iter()
        .map(|i| {
            let seed = config.seed.wrapping_add(i as u64);
            let prepared = prepare(dataset, config, seed)?;
            let settings = ProtocolSettings::from_config(config, seed);
            let out = match method {
                Method::WassFFed => run_wassffed(&prepared.clients, &prepared.test, &settings)?,
                Method::FedAvg => run_fedavg(&prepared.clients, &prepared.test, &settings)?,
            };
            Ok(RepeatResult {
                repeat: i,
                seed,
                records: out.records,
            })
        })
        .collect::<Result<_>>()?;
    let finals = |f: fn(&RoundRecord) -> f64| -> MeanSd {
        MeanSd::of(&repeats.iter().map(|r| f(r.final_record())).collect::<Vec<_>>())
    };
    let accuracy = finals(|r| r.accuracy);
    let dp = finals(|r| r.dp);
    let eop = finals(|r| r.eop);
    Ok(RunResult {
        config: config.clone(),
        method,
        repeats,
        accuracy,
        dp,
        eop,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
