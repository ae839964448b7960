use serde::{Deserialize, Serialize};

use super::histogram::{ensure_same_bins, Histogram};
use super::wasserstein::wasserstein_1d;
use super::log_kernel_apply;
use crate::error::{Error, Result};

const WEIGHT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycenterResult {
    pub barycenter: Histogram,
    /// `sum_a weights[a] * W1(barycenter, hists[a])`, exact (not entropic).
    pub objective: f64,
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Fixed-support entropic Wasserstein barycenter on the inputs' grid.
///
/// Iterative Bregman projections in the log domain: each input `a` keeps a
/// coupling `diag(u_a) K diag(v_a)` with `K = exp(-C / eps)`. The `u` step
/// projects onto the input marginal, the `v` step onto the shared barycenter
/// marginal `B = d * prod_a (K^T u_a)^{w_a}`. The debiasing factor `d` solves
/// `d * (K d) = B`, which removes the entropic blur: identical inputs return
/// themselves for every `eps`. Stops once every input marginal is matched
/// within `tol`; otherwise returns the last iterate after `max_iters`.
pub fn barycenter(
    hists: &[Histogram],
    weights: &[f64],
    epsilon: f64,
    max_iters: usize,
    tol: f64,
) -> Result<BarycenterResult> {
    let first = hists.first().ok_or(Error::EmptyDistribution)?;
    for h in &hists[1..] {
        ensure_same_bins(first, h)?;
    }
    if weights.len() != hists.len() {
        return Err(Error::Weight(format!(
            "{} weights for {} histograms",
            weights.len(),
            hists.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Weight("weights must be nonnegative reals".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::Weight(format!("weights sum to {total}, expected 1")));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();

    let n = first.bin_count();
    let m = hists.len();
    let rate = 1.0 / (n as f64 * epsilon);
    let log_h: Vec<Vec<f64>> = hists
        .iter()
        .map(|h| h.masses().iter().map(|x| x.ln()).collect())
        .collect();

    let mut log_u = vec![vec![0.0; n]; m];
    let mut log_v = vec![vec![0.0; n]; m];
    let mut log_ktu = vec![vec![0.0; n]; m];
    let mut log_b = vec![0.0; n];
    let mut log_d = vec![0.0; n];
    let mut log_kd = vec![0.0; n];
    // log (K v_a)_i, reused between the convergence check and the next u step.
    let mut log_kv = vec![vec![0.0; n]; m];
    for a in 0..m {
        log_kernel_apply(&log_v[a], rate, &mut log_kv[a]);
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        for a in 0..m {
            for i in 0..n {
                log_u[a][i] = log_h[a][i] - log_kv[a][i];
            }
            log_kernel_apply(&log_u[a], rate, &mut log_ktu[a]);
        }
        for j in 0..n {
            log_b[j] = log_d[j] + (0..m).map(|a| weights[a] * log_ktu[a][j]).sum::<f64>();
        }
        // The debiasing residual `|d * (K d) - B|` joins the marginal errors.
        let mut violation = 0.0f64;
        log_kernel_apply(&log_d, rate, &mut log_kd);
        for j in 0..n {
            let residual = (log_d[j] + log_kd[j]).exp() - log_b[j].exp();
            if residual.is_finite() {
                violation = violation.max(residual.abs());
            }
            log_d[j] = 0.5 * (log_d[j] + log_b[j] - log_kd[j]);
        }
        for a in 0..m {
            for j in 0..n {
                log_v[a][j] = log_b[j] - log_ktu[a][j];
            }
            log_kernel_apply(&log_v[a], rate, &mut log_kv[a]);
            for i in 0..n {
                let row = (log_u[a][i] + log_kv[a][i]).exp();
                let row = if row.is_nan() { 0.0 } else { row };
                violation = violation.max((row - hists[a].masses()[i]).abs());
            }
        }
        if violation <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("barycenter stopped after {iterations} iterations without reaching tol {tol:e}");
    }

    let peak = log_b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let unnormalized: Vec<f64> = log_b.iter().map(|l| (l - peak).exp()).collect();
    let barycenter = Histogram::from_weights(&unnormalized)?;
    let objective = hists
        .iter()
        .zip(&weights)
        .map(|(h, w)| Ok(w * wasserstein_1d(&barycenter, h)?))
        .sum::<Result<f64>>()?;
    Ok(BarycenterResult {
        barycenter,
        objective,
        weights,
        iterations,
        converged,
    })
}
