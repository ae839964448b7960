//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release -p wassffed-core --test acceptance`. Set
//! `WASSFFED_DATA_DIR` to point at another dataset directory, or
//! `ACCEPTANCE_ONLY=5,6` to run a subset.

mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use common::{
    brute_dp, brute_eop, combined_gradient_error, lp_barycenter, lp_transport, random_histogram,
    rng, shards, synthetic,
};
use rand::Rng;
use wassffed_core::config::{DatasetName, DATA_DIR_ENV};
use wassffed_core::data::TabularDataset;
use wassffed_core::engine::{run_fedavg, run_wassffed, ProtocolSettings};
use wassffed_core::experiment::{load_dataset, run_experiment, Method, RunResult};
use wassffed_core::fairness::{metric_dp, metric_eop, GroupLabel, GroupedPredictions, Prediction};
use wassffed_core::ot::{barycenter, sinkhorn_solve, transport_cost, wasserstein_1d, Histogram, SinkhornParams};
use wassffed_core::ExperimentConfig;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn config(dataset: DatasetName, repeats: usize) -> ExperimentConfig {
    ExperimentConfig {
        dataset,
        repeats,
        ..ExperimentConfig::default()
    }
}

fn load(c: &ExperimentConfig) -> TabularDataset {
    load_dataset(c, &data_dir()).expect("dataset files are required for criteria 1-4")
}

fn summary(r: &RunResult) -> String {
    format!(
        "acc {:.4}±{:.4} dp {:.4}±{:.4} eop {:.4}±{:.4}",
        r.accuracy.mean, r.accuracy.sd, r.dp.mean, r.dp.sd, r.eop.mean, r.eop.sd
    )
}

fn check(failures: &mut Vec<String>, ok: bool, what: String) {
    if !ok {
        failures.push(what);
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let c = config(DatasetName::Adult, 5);
    let data = load(&c);
    let base = run_experiment(&data, &c, Method::FedAvg).unwrap();
    let fair = run_experiment(&data, &c, Method::WassFFed).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut failures = Vec::new();
    check(&mut failures, (0.82..=0.86).contains(&base.accuracy.mean), "FedAvg acc outside [0.82, 0.86]".into());
    check(&mut failures, (0.16..=0.27).contains(&base.dp.mean), "FedAvg dp outside [0.16, 0.27]".into());
    check(&mut failures, fair.accuracy.mean >= base.accuracy.mean - 0.04, "acc drop above 0.04".into());
    check(&mut failures, fair.dp.mean <= 0.6 * base.dp.mean, "dp above 0.6x FedAvg".into());
    check(
        &mut failures,
        fair.eop.mean <= 0.85 * base.eop.mean,
        format!("eop {:.4} above 0.85x FedAvg ({:.4})", fair.eop.mean, 0.85 * base.eop.mean),
    );
    check(&mut failures, secs <= 600.0, format!("runtime {secs:.0}s above 10 min"));
    outcome(
        failures.is_empty(),
        format!(
            "FedAvg {} | WassFFed {} | {secs:.0}s{}",
            summary(&base),
            summary(&fair),
            if failures.is_empty() { String::new() } else { format!(" | {}", failures.join("; ")) }
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let c = config(DatasetName::Compas, 5);
    let data = load(&c);
    let base = run_experiment(&data, &c, Method::FedAvg).unwrap();
    let fair = run_experiment(&data, &c, Method::WassFFed).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut failures = Vec::new();
    check(&mut failures, (0.64..=0.71).contains(&base.accuracy.mean), "FedAvg acc outside [0.64, 0.71]".into());
    check(
        &mut failures,
        (0.24..=0.36).contains(&base.dp.mean),
        format!("FedAvg dp {:.4} outside [0.24, 0.36]", base.dp.mean),
    );
    check(&mut failures, fair.dp.mean <= 0.55 * base.dp.mean, "dp above 0.55x FedAvg".into());
    check(
        &mut failures,
        fair.accuracy.mean >= base.accuracy.mean - 0.06,
        format!("acc drop {:.4} above 0.06", base.accuracy.mean - fair.accuracy.mean),
    );
    check(&mut failures, secs <= 180.0, format!("runtime {secs:.0}s above 3 min"));
    outcome(
        failures.is_empty(),
        format!(
            "FedAvg {} | WassFFed {} | {secs:.0}s{}",
            summary(&base),
            summary(&fair),
            if failures.is_empty() { String::new() } else { format!(" | {}", failures.join("; ")) }
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut c = config(DatasetName::Adult, 3);
    let data = load(&c);
    let mut rows = Vec::new();
    for beta in [0.1, 0.4, 0.9] {
        c.beta = beta;
        let r = run_experiment(&data, &c, Method::WassFFed).unwrap();
        rows.push((beta, r.accuracy.mean, r.dp.mean));
    }
    let pass = rows
        .windows(2)
        .all(|w| w[1].1 >= w[0].1 - 0.02 && w[1].2 >= w[0].2 - 0.02);
    let detail = rows
        .iter()
        .map(|(b, a, d)| format!("beta {b}: acc {a:.4} dp {d:.4}"))
        .collect::<Vec<_>>()
        .join(" | ");
    outcome(pass, detail)
}

fn criterion_4() -> Outcome {
    let mut c = config(DatasetName::Compas, 5);
    let data = load(&c);
    let mut dp = BTreeMap::new();
    for clients in [2, 20] {
        c.clients = clients;
        let fair = run_experiment(&data, &c, Method::WassFFed).unwrap();
        let base = run_experiment(&data, &c, Method::FedAvg).unwrap();
        dp.insert(clients, (fair.dp.mean, base.dp.mean));
    }
    let (f2, b2) = dp[&2];
    let (f20, b20) = dp[&20];
    let pass = f20 <= f2 + 0.02 && f2 < b2 && f20 < b20;
    outcome(
        pass,
        format!("2 clients: WassFFed dp {f2:.4} vs FedAvg {b2:.4} | 20 clients: WassFFed dp {f20:.4} vs FedAvg {b20:.4}"),
    )
}

fn criterion_5() -> Outcome {
    let mut r = rng(501);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = 2 + case % 7;
        let a = random_histogram(&mut r, n, case % 3 == 0);
        let b = random_histogram(&mut r, n, case % 4 == 0);
        worst = worst.max((wasserstein_1d(&a, &b).unwrap() - lp_transport(&a, &b)).abs());
    }
    outcome(worst <= 1e-9, format!("200 pairs, max |W1 - LP| = {worst:.2e}"))
}

fn criterion_6() -> Outcome {
    let mut r = rng(601);
    let params = SinkhornParams {
        epsilon: 0.01,
        max_iters: 20_000,
        tol: 1e-7,
    };
    let (mut worst_gap, mut worst_violation) = (0.0f64, 0.0f64);
    for case in 0..50 {
        let a = random_histogram(&mut r, 8, case % 2 == 0);
        let b = random_histogram(&mut r, 8, case % 3 == 0);
        let (plan, _) = sinkhorn_solve(&a, &b, &params).unwrap();
        let lp = lp_transport(&a, &b);
        worst_gap = worst_gap.max((transport_cost(&plan) - lp) / lp.max(1e-12));
        worst_violation = worst_violation.max(plan.marginal_violation());
    }
    outcome(
        worst_gap <= 0.02 && worst_violation <= 1e-6,
        format!("50 pairs, worst relative excess {worst_gap:.2e}, worst marginal violation {worst_violation:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let mut r = rng(701);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let hists: Vec<Histogram> = (0..3).map(|_| random_histogram(&mut r, 8, case % 2 == 1)).collect();
        let weights = vec![1.0 / 3.0; 3];
        let result = barycenter(&hists, &weights, 0.01, 20_000, 1e-7).unwrap();
        let lp = lp_barycenter(&hists, &weights);
        worst = worst.max(result.objective / lp - 1.0);
    }
    outcome(worst <= 0.05, format!("20 instances, worst objective excess {:.3}%", 100.0 * worst))
}

fn criterion_8() -> Outcome {
    let mut r = rng(801);
    let data = synthetic(200, 3, 802);
    let (mut points, mut worst) = (0, 0.0f64);
    while points < 100 {
        if let Some(err) = combined_gradient_error(&mut r, &data) {
            worst = worst.max(err);
            points += 1;
        }
    }
    outcome(worst <= 1e-4, format!("100 points, worst relative error {worst:.2e}"))
}

fn criterion_9() -> Outcome {
    let data = synthetic(500, 3, 901);
    let clients = shards(&data.subset(&(0..400).collect::<Vec<_>>()), 4);
    let test = data.subset(&(400..500).collect::<Vec<_>>());
    let mut c = ExperimentConfig {
        rounds: 5,
        local_epochs: 2,
        n_bins: 20,
        beta: 1.0,
        ..ExperimentConfig::default()
    };
    c.lr = 0.05;
    let mut identical = 0;
    for seed in [1, 2, 3] {
        let s = ProtocolSettings::from_config(&c, seed);
        let fair = run_wassffed(&clients, &test, &s).unwrap();
        let plain = run_fedavg(&clients, &test, &s).unwrap();
        let same = fair.records.len() == plain.records.len()
            && fair.records.iter().zip(&plain.records).all(|(a, b)| {
                a.params == b.params
                    && a.accuracy.to_bits() == b.accuracy.to_bits()
                    && a.dp.to_bits() == b.dp.to_bits()
                    && a.eop.to_bits() == b.eop.to_bits()
                    && a.utility_loss.to_bits() == b.utility_loss.to_bits()
            });
        identical += same as usize;
    }
    outcome(identical == 3, format!("{identical}/3 seeds bit-identical"))
}

fn criterion_10() -> Outcome {
    let mut r = rng(1001);
    let mut mismatches = 0;
    for _ in 0..500 {
        let k = r.random_range(2..6);
        let groups = (0..k)
            .map(|g| {
                let n = r.random_range(1..40);
                let mut preds: Vec<Prediction> =
                    (0..n).map(|_| Prediction::from_score(r.random(), r.random_bool(0.5))).collect();
                preds[0].actual = true;
                (GroupLabel::new(g, format!("g{g}")), preds)
            })
            .collect();
        let preds = GroupedPredictions::new(groups);
        let dp_ok = (metric_dp(&preds).unwrap() - brute_dp(&preds)).abs() <= 1e-12;
        let eop_ok = (metric_eop(&preds).unwrap() - brute_eop(&preds)).abs() <= 1e-12;
        mismatches += (!(dp_ok && eop_ok)) as usize;
    }
    outcome(mismatches == 0, format!("500 instances, {mismatches} mismatches"))
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (id, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {verdict} ({:.1}s): {}",
            start.elapsed().as_secs_f64(),
            result.detail
        );
        if !result.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
