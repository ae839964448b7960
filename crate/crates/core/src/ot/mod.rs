//! Optimal transport on a fixed one-dimensional grid.
//!
//! Everything here works on histograms over `N_B` uniform bins of `[0, 1]`
//! with ground cost `|c_i - c_j|` between bin centers:
//!
//! - [`wasserstein_1d`]: exact W1 via the CDF closed form.
//! - [`sinkhorn_plan`]: entropic transport plan, log-domain dual updates.
//! - [`barycenter`]: fixed-support barycenter by iterative Bregman projections.
//!
//! Zero-mass bins are carried as `-inf` log-potentials, never smoothed.

mod barycenter;
mod histogram;
mod plan;
mod sinkhorn;
mod wasserstein;

pub use barycenter::{barycenter, BarycenterResult};
pub use histogram::{
    bin_center, bin_index, count_scores, make_histogram, BinCounts, Histogram, NORMALIZATION_TOL,
};
pub use plan::{transport_cost, TransportPlan, DEFAULT_MARGINAL_TOL};
pub use sinkhorn::{sinkhorn_last_iterate, sinkhorn_plan, sinkhorn_solve, SinkhornParams, SinkhornState};
pub use wasserstein::wasserstein_1d;

/// Ground cost between bin centers `i` and `j`.
#[inline]
pub(crate) fn grid_cost(i: usize, j: usize, bin_count: usize) -> f64 {
    (i as f64 - j as f64).abs() / bin_count as f64
}

/// `ln sum_i exp(x_i)` over `len` terms, tolerant of `-inf` entries.
#[cfg(test)]
fn logsumexp_by(len: usize, f: impl Fn(usize) -> f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for i in 0..len {
        max = max.max(f(i));
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = (0..len).map(|i| (f(i) - max).exp()).sum();
    max + sum.ln()
}

/// `ln(exp(a) + exp(b))`, tolerant of `-inf`.
#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `y_i = LSE_j(x_j - rate * |i - j|)`: the log-domain product with the
/// kernel `exp(-C / eps)` on the grid, where `rate = 1 / (N_B * eps)`.
///
/// The kernel is a two-sided geometric filter, so one sweep in each
/// direction replaces the dense sum.
pub(crate) fn log_kernel_apply(x: &[f64], rate: f64, out: &mut [f64]) {
    let n = x.len();
    debug_assert_eq!(out.len(), n);
    if n == 0 {
        return;
    }
    // out_i = LSE over j <= i
    let mut acc = f64::NEG_INFINITY;
    for i in 0..n {
        acc = log_add(acc - rate, x[i]);
        out[i] = acc;
    }
    // add the terms with j > i
    let mut acc = f64::NEG_INFINITY;
    for i in (0..n - 1).rev() {
        acc = log_add(acc, x[i + 1]) - rate;
        out[i] = log_add(out[i], acc);
    }
}
