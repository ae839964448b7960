use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use super::dataset::TabularDataset;
use crate::error::{Error, Result};

pub const MAX_PARTITION_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub client_count: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.client_count < 2 {
            return Err(Error::config("clients", "must be at least 2"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config("alpha", "must be a positive real"));
        }
        Ok(())
    }
}

/// Symmetric Dirichlet draw via normalized Gamma variates. `None` when
/// every variate underflows to zero.
fn dirichlet(alpha: f64, k: usize, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).ok()?;
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    (total > 0.0 && total.is_finite()).then(|| draws.iter().map(|d| d / total).collect())
}

/// Splits sample indices across clients with Dirichlet-skewed group mixes.
///
/// For each sensitive group independently, client proportions are drawn
/// from `Dir(alpha)` and every sample of the group is assigned to a client
/// by a categorical draw with those proportions. The whole partition is
/// redrawn if any client ends up empty.
pub fn dirichlet_partition(dataset: &TabularDataset, spec: &PartitionSpec) -> Result<Vec<Vec<usize>>> {
    spec.validate()?;
    let p = spec.client_count;
    if dataset.len() < p {
        return Err(Error::Partition(format!(
            "{} samples cannot fill {p} clients",
            dataset.len()
        )));
    }
    let mut by_group: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..dataset.len() {
        by_group.entry(dataset.group(i)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..MAX_PARTITION_REDRAWS {
        let mut clients = vec![Vec::new(); p];
        for members in by_group.values() {
            let Some(proportions) = dirichlet(spec.alpha, p, &mut rng) else {
                continue;
            };
            let pick = WeightedIndex::new(&proportions)
                .map_err(|e| Error::Partition(format!("bad proportions: {e}")))?;
            for &i in members {
                clients[pick.sample(&mut rng)].push(i);
            }
        }
        let assigned: usize = clients.iter().map(Vec::len).sum();
        if assigned == dataset.len() && clients.iter().all(|c| !c.is_empty()) {
            for c in &mut clients {
                c.sort_unstable();
            }
            return Ok(clients);
        }
    }
    Err(Error::Partition(format!(
        "every one of {MAX_PARTITION_REDRAWS} draws left a client empty (alpha = {})",
        spec.alpha
    )))
}

/// Disjoint, exhaustive train/test index split stratified by (label, group).
///
/// The test set gets `round(n * test_fraction)` samples, allocated to the
/// strata by largest remainder. If any stratum has fewer than two samples the
/// split falls back to a global shuffle.
pub fn train_test_split_indices(
    dataset: &TabularDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config("test_fraction", "must lie strictly between 0 and 1"));
    }
    let n = dataset.len();
    let test_total = (n as f64 * test_fraction).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut strata: BTreeMap<(bool, usize), Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        strata.entry((dataset.label(i), dataset.group(i))).or_default().push(i);
    }
    if strata.values().any(|s| s.len() < 2) {
        log::warn!("a (label, group) stratum has fewer than 2 samples; using an unstratified split");
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let test = all.split_off(n - test_total);
        return Ok(sorted_pair(all, test));
    }

    let quotas: Vec<f64> = strata
        .values()
        .map(|s| s.len() as f64 * test_total as f64 / n as f64)
        .collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    // Largest fractional part first; ties by stratum order.
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let short = test_total - take.iter().sum::<usize>();
    for &k in order.iter().take(short) {
        take[k] += 1;
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (members, k) in strata.into_values().zip(take) {
        let mut members = members;
        members.shuffle(&mut rng);
        let held = members.split_off(members.len() - k);
        train.extend(members);
        test.extend(held);
    }
    Ok(sorted_pair(train, test))
}

fn sorted_pair(mut a: Vec<usize>, mut b: Vec<usize>) -> (Vec<usize>, Vec<usize>) {
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Stratified train/test split; see [`train_test_split_indices`].
pub fn train_test_split(
    dataset: &TabularDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(TabularDataset, TabularDataset)> {
    let (train, test) = train_test_split_indices(dataset, test_fraction, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}
