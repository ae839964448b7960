use serde::{Deserialize, Serialize};

use super::grid_cost;
use super::histogram::Histogram;
use crate::error::{Error, Result};

pub const DEFAULT_MARGINAL_TOL: f64 = 1e-6;

/// A nonnegative coupling between two histograms on the same grid.
///
/// Rows index source bins, columns index target bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    bin_count: usize,
    entries: Vec<f64>,
    source: Histogram,
    target: Histogram,
    epsilon: f64,
}

impl TransportPlan {
    pub(crate) fn from_parts(
        entries: Vec<f64>,
        source: Histogram,
        target: Histogram,
        epsilon: f64,
    ) -> Self {
        let bin_count = source.bin_count();
        debug_assert_eq!(entries.len(), bin_count * bin_count);
        Self {
            bin_count,
            entries,
            source,
            target,
            epsilon,
        }
    }

    /// Builds a plan from a row-major `n x n` matrix whose entries sum to one;
    /// the marginals are read off the matrix.
    pub fn from_matrix(bin_count: usize, entries: Vec<f64>, epsilon: f64) -> Result<Self> {
        if entries.len() != bin_count * bin_count {
            return Err(Error::Shape(format!(
                "plan has {} entries, expected {}",
                entries.len(),
                bin_count * bin_count
            )));
        }
        if let Some(e) = entries.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::Domain(format!("plan entry {e} is not a nonnegative real")));
        }
        let rows: Vec<f64> = entries.chunks(bin_count).map(|r| r.iter().sum()).collect();
        let cols: Vec<f64> = (0..bin_count)
            .map(|j| (0..bin_count).map(|i| entries[i * bin_count + j]).sum())
            .collect();
        let source = Histogram::new(rows)?;
        let target = Histogram::new(cols)?;
        Ok(Self::from_parts(entries, source, target, epsilon))
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.bin_count + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.bin_count..(i + 1) * self.bin_count]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn source(&self) -> &Histogram {
        &self.source
    }

    pub fn target(&self) -> &Histogram {
        &self.target
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Largest absolute deviation of a row or column sum from its marginal.
    pub fn marginal_violation(&self) -> f64 {
        let n = self.bin_count;
        let mut worst = 0.0f64;
        for i in 0..n {
            let row: f64 = self.row(i).iter().sum();
            worst = worst.max((row - self.source.masses()[i]).abs());
        }
        for j in 0..n {
            let col: f64 = (0..n).map(|i| self.get(i, j)).sum();
            worst = worst.max((col - self.target.masses()[j]).abs());
        }
        worst
    }
}

/// Total cost `sum_ij |c_i - c_j| T(i, j)` of a plan.
pub fn transport_cost(plan: &TransportPlan) -> f64 {
    let n = plan.bin_count();
    let mut cost = 0.0;
    for i in 0..n {
        for (j, t) in plan.row(i).iter().enumerate() {
            cost += grid_cost(i, j, n) * t;
        }
    }
    cost
}
