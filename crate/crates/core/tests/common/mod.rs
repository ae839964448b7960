#![allow(dead_code)]

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wassffed_core::data::TabularDataset;
use wassffed_core::engine::{combined_loss_and_gradient, ModelParams};
use wassffed_core::fairness::{FairnessLossTerm, GroupLabel, GroupedPredictions};
use wassffed_core::ot::{bin_center, sinkhorn_plan, Histogram};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random histogram; roughly a third of the bins are empty when `sparse`.
pub fn random_histogram(rng: &mut ChaCha8Rng, n: usize, sparse: bool) -> Histogram {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if sparse && rng.random::<f64>() < 0.33 {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        if w.iter().sum::<f64>() > 1e-3 {
            return Histogram::from_weights(&w).unwrap();
        }
    }
}

fn cost(i: usize, j: usize, n: usize) -> f64 {
    (bin_center(i, n) - bin_center(j, n)).abs()
}

/// Exact optimal transport cost between two histograms by linear programming.
pub fn lp_transport(a: &Histogram, b: &Histogram) -> f64 {
    let n = a.bin_count();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let t: Vec<Vec<_>> = (0..n)
        .map(|i| (0..n).map(|j| lp.add_var(cost(i, j, n), (0.0, f64::INFINITY))).collect())
        .collect();
    for i in 0..n {
        let row: Vec<_> = (0..n).map(|j| (t[i][j], 1.0)).collect();
        lp.add_constraint(&row[..], ComparisonOp::Eq, a.masses()[i]);
    }
    // The last column constraint is implied by the others.
    for j in 0..n - 1 {
        let col: Vec<_> = (0..n).map(|i| (t[i][j], 1.0)).collect();
        lp.add_constraint(&col[..], ComparisonOp::Eq, b.masses()[j]);
    }
    lp.solve().unwrap().objective()
}

/// Optimal value of `min_B sum_a w_a OT(h_a, B)` over histograms `B` on the
/// same grid.
pub fn lp_barycenter(hists: &[Histogram], weights: &[f64]) -> f64 {
    let n = hists[0].bin_count();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let bary: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    for (h, &w) in hists.iter().zip(weights) {
        let t: Vec<Vec<_>> = (0..n)
            .map(|i| (0..n).map(|j| lp.add_var(w * cost(i, j, n), (0.0, f64::INFINITY))).collect())
            .collect();
        for i in 0..n {
            let row: Vec<_> = (0..n).map(|j| (t[i][j], 1.0)).collect();
            lp.add_constraint(&row[..], ComparisonOp::Eq, h.masses()[i]);
        }
        for j in 0..n {
            let mut col: Vec<_> = (0..n).map(|i| (t[i][j], 1.0)).collect();
            col.push((bary[j], -1.0));
            lp.add_constraint(&col[..], ComparisonOp::Eq, 0.0);
        }
    }
    lp.solve().unwrap().objective()
}

/// Largest gap over every ordered pair of groups, scanned directly.
pub fn pairwise_gap(rates: &[f64]) -> f64 {
    let mut best = 0.0_f64;
    for a in rates {
        for b in rates {
            best = best.max((a - b).abs());
        }
    }
    best
}

pub fn brute_dp(preds: &GroupedPredictions) -> f64 {
    let rates: Vec<f64> = preds
        .groups
        .iter()
        .map(|(_, p)| p.iter().filter(|x| x.predicted).count() as f64 / p.len() as f64)
        .collect();
    pairwise_gap(&rates)
}

pub fn brute_eop(preds: &GroupedPredictions) -> f64 {
    let rates: Vec<f64> = preds
        .groups
        .iter()
        .map(|(_, p)| {
            let pos: Vec<_> = p.iter().filter(|x| x.actual).collect();
            pos.iter().filter(|x| x.predicted).count() as f64 / pos.len() as f64
        })
        .collect();
    pairwise_gap(&rates)
}

/// Two-group logistic data: the label depends on the features and the
/// protected group shifts the first feature.
pub fn synthetic(n: usize, dim: usize, seed: u64) -> TabularDataset {
    let mut r = rng(seed);
    let truth: Vec<f64> = (0..dim).map(|k| if k % 2 == 0 { 1.5 } else { -1.0 }).collect();
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        let g = r.random_bool(0.4) as usize;
        let row: Vec<f64> = (0..dim)
            .map(|k| {
                let x: f64 = r.random::<f64>() * 2.0 - 1.0;
                if k == 0 {
                    x + g as f64
                } else {
                    x
                }
            })
            .collect();
        let z: f64 = row.iter().zip(&truth).map(|(x, w)| x * w).sum::<f64>() - 0.5;
        labels.push(r.random::<f64>() < 1.0 / (1.0 + (-2.0 * z).exp()));
        groups.push(g);
        features.extend(row);
    }
    TabularDataset::new(
        features,
        (0..dim).map(|k| format!("x{k}")).collect(),
        labels,
        groups,
        vec![GroupLabel::new(0, "a"), GroupLabel::new(1, "b")],
        "synthetic",
    )
    .unwrap()
}

/// Splits `data` into `parts` interleaved shards.
pub fn shards(data: &TabularDataset, parts: usize) -> Vec<TabularDataset> {
    (0..parts)
        .map(|p| {
            let idx: Vec<usize> = (p..data.len()).step_by(parts).collect();
            data.subset(&idx)
        })
        .collect()
}

pub fn random_params(r: &mut ChaCha8Rng, dim: usize) -> ModelParams {
    ModelParams {
        weights: (0..dim).map(|_| r.random::<f64>() * 2.0 - 1.0).collect(),
        bias: r.random::<f64>() - 0.5,
    }
}

pub fn term(r: &mut ChaCha8Rng, group: usize, n: usize) -> FairnessLossTerm {
    let source = random_histogram(r, n, false);
    let target = random_histogram(r, n, true);
    let plan = sinkhorn_plan(&source, &target, 0.05, 20_000, 1e-9).unwrap();
    FairnessLossTerm::new(GroupLabel::new(group, format!("g{group}")), plan, target).unwrap()
}

pub fn scores_are_interior(data: &TabularDataset, batch: &[usize], p: &ModelParams, n: usize) -> bool {
    batch.iter().all(|&i| {
        let x = p.weights.iter().zip(data.row(i)).map(|(w, x)| w * x).sum::<f64>() + p.bias;
        let s = 1.0 / (1.0 + (-x).exp());
        let f = s * n as f64 - (s * n as f64).floor();
        f > 1e-3 && f < 1.0 - 1e-3 && (f - 0.5).abs() > 1e-3
    })
}

pub fn perturbed(p: &ModelParams, k: usize, h: f64) -> ModelParams {
    let mut q = p.clone();
    if k < q.weights.len() {
        q.weights[k] += h;
    } else {
        q.bias += h;
    }
    q
}

pub fn component(p: &ModelParams, k: usize) -> f64 {
    if k < p.weights.len() {
        p.weights[k]
    } else {
        p.bias
    }
}

/// Largest relative error between the combined-loss gradient and central
/// differences at one random point; `None` when a score sits too close to a
/// bin boundary or center for the loss to be smooth there.
pub fn combined_gradient_error(r: &mut ChaCha8Rng, data: &TabularDataset) -> Option<f64> {
    let h = 1e-6;
    let n = r.random_range(4..20);
    let terms = vec![Some(term(r, 0, n)), Some(term(r, 1, n))];
    let batch: Vec<usize> = (0..16).map(|_| r.random_range(0..data.len())).collect();
    let params = random_params(r, data.dim());
    let beta = r.random::<f64>();
    if !scores_are_interior(data, &batch, &params, n) {
        return None;
    }
    let loss = |p: &ModelParams| combined_loss_and_gradient(data, &batch, p, beta, &terms, &[]).0;
    let (_, grad) = combined_loss_and_gradient(data, &batch, &params, beta, &terms, &[]);
    let worst = (0..=data.dim())
        .map(|k| {
            let fd = (loss(&perturbed(&params, k, h)) - loss(&perturbed(&params, k, -h))) / (2.0 * h);
            let g = component(&grad, k);
            (fd - g).abs() / g.abs().max(1e-6)
        })
        .fold(0.0, f64::max);
    Some(worst)
}
