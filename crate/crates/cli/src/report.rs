//! Result files: `config.snapshot`, `rounds.csv` and `summary.csv`.
//!
//! Files are written to a temporary name and renamed into place. Nothing
//! time-dependent goes into them, so reruns of a config are byte-identical.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use wassffed_core::experiment::RunResult;
use wassffed_core::ExperimentConfig;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("WASSFFED_GIT_DESCRIBE"), ")");

/// One finished run, tagged with the swept parameter when there is one.
pub struct Row<'a> {
    pub param: Option<(&'a str, &'a str)>,
    pub result: &'a RunResult,
}

pub fn write_all(dir: &Path, base: &ExperimentConfig, sweep: Option<(&str, &[String])>, rows: &[Row]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_atomic(&dir.join("config.snapshot"), snapshot(base, sweep).as_bytes())?;
    write_atomic(&dir.join("rounds.csv"), &rounds_csv(rows)?)?;
    write_atomic(&dir.join("summary.csv"), &summary_csv(rows)?)?;
    Ok(())
}

fn snapshot(config: &ExperimentConfig, sweep: Option<(&str, &[String])>) -> String {
    let mut text = format!("# wassffed {VERSION}\n");
    if let Some((param, values)) = sweep {
        text.push_str(&format!("# sweep {param} = [{}]\n", values.join(", ")));
    }
    text.push_str(&config.to_toml_string());
    text
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn rounds_csv(rows: &[Row]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method",
        "param",
        "value",
        "repeat",
        "seed",
        "round",
        "accuracy",
        "dp",
        "eop",
        "utility_loss",
        "fairness_loss",
        "client_w1",
        "barycenter_objective",
    ])?;
    for row in rows {
        let (param, value) = row.param.unwrap_or(("", ""));
        for rep in &row.result.repeats {
            for r in &rep.records {
                w.write_record([
                    row.result.method.name().to_string(),
                    param.to_string(),
                    value.to_string(),
                    rep.repeat.to_string(),
                    rep.seed.to_string(),
                    r.round.to_string(),
                    r.accuracy.to_string(),
                    r.dp.to_string(),
                    r.eop.to_string(),
                    r.utility_loss.to_string(),
                    opt(r.fairness_loss),
                    opt(r.client_w1),
                    opt(r.barycenter_objective),
                ])?;
            }
        }
    }
    Ok(w.into_inner()?)
}

/// Final metrics per repeat, then `mean` and `sd` rows per run.
fn summary_csv(rows: &[Row]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "param", "value", "repeat", "seed", "accuracy", "dp", "eop"])?;
    for row in rows {
        let (param, value) = row.param.unwrap_or(("", ""));
        let method = row.result.method.name();
        for rep in &row.result.repeats {
            let last = rep.final_record();
            w.write_record([
                method,
                param,
                value,
                &rep.repeat.to_string(),
                &rep.seed.to_string(),
                &last.accuracy.to_string(),
                &last.dp.to_string(),
                &last.eop.to_string(),
            ])?;
        }
        let r = row.result;
        for (label, pick) in [("mean", 0), ("sd", 1)] {
            let stat = |m: wassffed_core::experiment::MeanSd| if pick == 0 { m.mean } else { m.sd };
            w.write_record([
                method,
                param,
                value,
                label,
                "",
                &stat(r.accuracy).to_string(),
                &stat(r.dp).to_string(),
                &stat(r.eop).to_string(),
            ])?;
        }
    }
    Ok(w.into_inner()?)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}
