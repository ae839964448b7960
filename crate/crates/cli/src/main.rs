mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use wassffed_core::config::DATA_DIR_ENV;
use wassffed_core::experiment::{load_dataset, run_experiment, Method, RunResult};
use wassffed_core::{Error, ExperimentConfig};

use report::Row;

const SWEEPABLE: [&str; 6] = ["beta", "k", "n_bins", "xi", "alpha", "clients"];

#[derive(Parser)]
#[command(name = "wassffed", version = report::VERSION, about = "Fair federated learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the fair protocol for every repeat of a config.
    Run(Common),
    /// Run the plain FedAvg baseline (no transport, utility loss only).
    Baseline(Common),
    /// Run one experiment per value of a single parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of beta, k, n_bins, xi, alpha, clients.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, value_enum, default_value_t = MethodArg::Wassffed)]
        method: MethodArg,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config file; omitted keys take their defaults.
    config: PathBuf,
    /// Master seed; repeat `i` uses `seed + i`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Directory holding the dataset files.
    #[arg(long, env = DATA_DIR_ENV, default_value = "data")]
    data_dir: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Wassffed,
    Fedavg,
    Both,
}

impl MethodArg {
    fn methods(self) -> &'static [Method] {
        match self {
            MethodArg::Wassffed => &[Method::WassFFed],
            MethodArg::Fedavg => &[Method::FedAvg],
            MethodArg::Both => &[Method::WassFFed, Method::FedAvg],
        }
    }
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::from_file(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output = out.clone();
        }
        for kv in &self.overrides {
            let Some((key, value)) = kv.split_once('=') else {
                bail!(Error::Config {
                    field: kv.clone(),
                    constraint: "override must look like key=value".into(),
                });
            };
            config.set(key.trim(), value)?;
        }
        Ok(config)
    }
}

/// Metrics are rates in [0, 1] and losses are finite.
fn check_invariants(result: &RunResult) -> Vec<String> {
    let mut problems = Vec::new();
    for rep in &result.repeats {
        for r in &rep.records {
            let rates = [("accuracy", r.accuracy), ("dp", r.dp), ("eop", r.eop)];
            for (name, v) in rates {
                if !(0.0..=1.0).contains(&v) {
                    problems.push(format!("repeat {} round {}: {name} = {v}", rep.repeat, r.round));
                }
            }
            let losses = [Some(r.utility_loss), r.fairness_loss, r.client_w1, r.barycenter_objective];
            if losses.iter().flatten().any(|v| !v.is_finite()) {
                problems.push(format!("repeat {} round {}: non-finite loss", rep.repeat, r.round));
            }
        }
    }
    problems
}

fn execute(
    data_dir: &Path,
    base: &ExperimentConfig,
    sweep: Option<(&str, &[String])>,
    methods: &[Method],
) -> Result<Vec<String>> {
    let configs: Vec<(Option<&str>, ExperimentConfig)> = match sweep {
        None => vec![(None, base.clone())],
        Some((param, values)) => values
            .iter()
            .map(|v| {
                let mut c = base.clone();
                c.set(param, v)?;
                Ok((Some(v.as_str()), c))
            })
            .collect::<Result<_>>()?,
    };
    let dataset = load_dataset(base, data_dir).with_context(|| format!("loading {:?} data", base.dataset))?;

    let mut results = Vec::new();
    for (value, config) in &configs {
        for &method in methods {
            let result = run_experiment(&dataset, config, method)?;
            let tag = value.map(|v| format!(" {}={v}", sweep.unwrap().0)).unwrap_or_default();
            log::info!(
                "{}{tag}: acc {:.4}±{:.4} dp {:.4}±{:.4} eop {:.4}±{:.4} in {:.1}s",
                method.name(),
                result.accuracy.mean,
                result.accuracy.sd,
                result.dp.mean,
                result.dp.sd,
                result.eop.mean,
                result.eop.sd,
                result.wall_clock_secs,
            );
            results.push((value.map(|v| (sweep.unwrap().0, v)), result));
        }
    }

    let rows: Vec<Row> = results
        .iter()
        .map(|(param, result)| Row { param: *param, result })
        .collect();
    report::write_all(&base.output, base, sweep, &rows)?;
    println!("wrote {}", base.output.display());
    Ok(results.iter().flat_map(|(_, r)| check_invariants(r)).collect())
}

fn dispatch(cli: Cli) -> Result<Vec<String>> {
    match cli.command {
        Command::Run(common) => {
            let config = common.config()?;
            execute(&common.data_dir, &config, None, &[Method::WassFFed])
        }
        Command::Baseline(common) => {
            let mut config = common.config()?;
            config.beta = 1.0;
            execute(&common.data_dir, &config, None, &[Method::FedAvg])
        }
        Command::Sweep {
            common,
            param,
            values,
            method,
        } => {
            if !SWEEPABLE.contains(&param.as_str()) {
                bail!(Error::Config {
                    field: param,
                    constraint: format!("not sweepable; expected one of {}", SWEEPABLE.join(", ")),
                });
            }
            let config = common.config()?;
            execute(&common.data_dir, &config, Some((&param, &values)), method.methods())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(problems) if problems.is_empty() => ExitCode::SUCCESS,
        Ok(problems) => {
            for p in &problems {
                eprintln!("invariant violated: {p}");
            }
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = matches!(
                e.downcast_ref::<Error>(),
                Some(Error::Config { .. } | Error::ConfigParse(_))
            );
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}
