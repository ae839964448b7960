//! Seeded inputs shared by the benchmarks in `benches/`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wassffed_core::data::TabularDataset;
use wassffed_core::fairness::GroupLabel;
use wassffed_core::ot::Histogram;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Histogram with every bin occupied.
pub fn histogram(rng: &mut ChaCha8Rng, bins: usize) -> Histogram {
    let w: Vec<f64> = (0..bins).map(|_| rng.random::<f64>() + 0.01).collect();
    Histogram::from_weights(&w).unwrap()
}

/// Two-group logistic data with `dim` uniform features.
pub fn dataset(rows: usize, dim: usize, seed: u64) -> TabularDataset {
    let mut r = rng(seed);
    let mut features = Vec::with_capacity(rows * dim);
    let mut labels = Vec::with_capacity(rows);
    let mut groups = Vec::with_capacity(rows);
    for _ in 0..rows {
        let g = r.random_bool(0.3) as usize;
        let row: Vec<f64> = (0..dim).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let z = row.iter().sum::<f64>() + 0.5 * g as f64;
        labels.push(r.random::<f64>() < 1.0 / (1.0 + (-z).exp()));
        groups.push(g);
        features.extend(row);
    }
    TabularDataset::new(
        features,
        (0..dim).map(|k| format!("x{k}")).collect(),
        labels,
        groups,
        vec![GroupLabel::new(0, "a"), GroupLabel::new(1, "b")],
        "bench",
    )
    .unwrap()
}
