use serde::{Deserialize, Serialize};

use super::histogram::{ensure_same_bins, Histogram};
use super::plan::{TransportPlan, DEFAULT_MARGINAL_TOL};
use super::log_kernel_apply;
use crate::error::{Error, Result};

const RELAXATION_PROBE: usize = 20;
const REPROBE_PERIOD: usize = 200;
const MAX_RELAXATION: f64 = 1.9;
const DIVERGENCE: f64 = 1e3;
const ANNEALING_FACTOR: f64 = 2.0;
const STAGE_TOL: f64 = 1e-4;

/// Regularization strength and stopping rule for entropic transport.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornParams {
    pub epsilon: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            max_iters: 1000,
            tol: DEFAULT_MARGINAL_TOL,
        }
    }
}

impl SinkhornParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Domain(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Domain("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Dual potentials after the last accepted update.
///
/// `f` is indexed by target bin and `g` by source bin. Bins with zero mass
/// carry `-inf` potentials; every other entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornState {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub iteration: usize,
    pub marginal_violation: f64,
    pub converged: bool,
}

/// Entropic transport plan from `source` to `target`.
pub fn sinkhorn_plan(
    source: &Histogram,
    target: &Histogram,
    epsilon: f64,
    max_iters: usize,
    tol: f64,
) -> Result<TransportPlan> {
    let params = SinkhornParams {
        epsilon,
        max_iters,
        tol,
    };
    sinkhorn_solve(source, target, &params).map(|(plan, _)| plan)
}

/// Runs the log-domain Sinkhorn iterations and returns the plan with the
/// final dual state.
///
/// Each iteration sets
/// `f_j = eps * (ln b_j - LSE_i((g_i - C_ij) / eps))` and then
/// `g_i = eps * (ln a_i - LSE_j((f_j - C_ij) / eps))`. The solver stops once
/// every row and column sum is within `tol` of its marginal.
/// Plan entries are `exp((f_j + g_i - C_ij) / eps)`.
///
/// Updates are over-relaxed, `x <- x + w * (update - x)`, which keeps the
/// fixed point and speeds up small `eps`. Should the iterates blow up, the
/// solver restarts from zero potentials with plain updates.
///
/// For `eps` below one bin width the solve is warm-started from a sequence
/// of coarser problems, halving `eps` each stage.
pub fn sinkhorn_solve(
    source: &Histogram,
    target: &Histogram,
    params: &SinkhornParams,
) -> Result<(TransportPlan, SinkhornState)> {
    let (plan, state) = sinkhorn_last_iterate(source, target, params)?;
    if !state.converged {
        return Err(Error::Convergence {
            iterations: state.iteration,
            violation: state.marginal_violation,
        });
    }
    Ok((plan, state))
}

/// Like [`sinkhorn_solve`], but hitting `max_iters` is not an error: the
/// last iterate comes back with `converged == false`.
pub fn sinkhorn_last_iterate(
    source: &Histogram,
    target: &Histogram,
    params: &SinkhornParams,
) -> Result<(TransportPlan, SinkhornState)> {
    ensure_same_bins(source, target)?;
    params.validate()?;
    let n = source.bin_count();
    let eps = params.epsilon;
    let problem = Problem {
        log_a: source.masses().iter().map(|m| m.ln()).collect(),
        log_b: target.masses().iter().map(|m| m.ln()).collect(),
        a: source.masses(),
        b: target.masses(),
    };

    // Potentials divided by the current stage's eps.
    let mut g = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut iteration = 0;
    let mut violation = f64::INFINITY;
    let mut stage_eps = eps;
    for next in annealing_schedule(eps, n) {
        rescale(&mut f, stage_eps / next);
        rescale(&mut g, stage_eps / next);
        stage_eps = next;
        let final_stage = next == eps;
        let tol = if final_stage { params.tol } else { params.tol.max(STAGE_TOL) };
        let (v, used) = problem.run(&mut f, &mut g, 1.0 / (n as f64 * next), tol, params.max_iters - iteration);
        iteration += used;
        violation = v;
        if iteration >= params.max_iters && !final_stage {
            // Out of budget before reaching the requested eps.
            violation = f64::INFINITY;
            rescale(&mut f, stage_eps / eps);
            rescale(&mut g, stage_eps / eps);
            break;
        }
    }

    let entries = plan_entries(&f, &g, 1.0 / (n as f64 * eps), n);
    let plan = TransportPlan::from_parts(entries, source.clone(), target.clone(), eps);
    let state = SinkhornState {
        marginal_violation: plan.marginal_violation(),
        f: f.iter().map(|v| v * eps).collect(),
        g: g.iter().map(|v| v * eps).collect(),
        iteration,
        converged: violation <= params.tol,
    };
    Ok((plan, state))
}

/// Decreasing eps values ending at `eps`; a single stage unless `eps` is
/// below one bin width.
fn annealing_schedule(eps: f64, n: usize) -> Vec<f64> {
    let mut stages = vec![eps];
    let mut e = 1.0 / n as f64;
    let mut coarse = Vec::new();
    while e > eps * ANNEALING_FACTOR {
        coarse.push(e);
        e /= ANNEALING_FACTOR;
    }
    coarse.append(&mut stages);
    coarse
}

fn rescale(v: &mut [f64], factor: f64) {
    for x in v.iter_mut().filter(|x| x.is_finite()) {
        *x *= factor;
    }
}

struct Problem<'a> {
    log_a: Vec<f64>,
    log_b: Vec<f64>,
    a: &'a [f64],
    b: &'a [f64],
}

impl Problem<'_> {
    /// Iterates at a fixed `rate = 1 / (n * eps)` until every marginal error
    /// is at most `tol` or `budget` runs out. Returns the error and the number
    /// of iterations used.
    fn run(&self, f: &mut [f64], g: &mut [f64], rate: f64, tol: f64, budget: usize) -> (f64, usize) {
        let n = f.len();
        // lse_col[j] = LSE_i(g_i - C_ij / eps), lse_row[i] = LSE_j(f_j - C_ij / eps)
        let mut lse_col = vec![0.0; n];
        let mut lse_row = vec![0.0; n];
        log_kernel_apply(g, rate, &mut lse_col);
        let mut violation = f64::INFINITY;
        let mut omega = 1.0;
        let mut history = Vec::new();
        let mut iteration = 0;

        while violation > tol && iteration < budget {
            iteration += 1;
            if (iteration - 1) % REPROBE_PERIOD == 0 {
                omega = 1.0;
            }
            for j in 0..n {
                f[j] = relax(f[j], self.log_b[j] - lse_col[j], omega);
            }
            log_kernel_apply(f, rate, &mut lse_row);
            for i in 0..n {
                g[i] = relax(g[i], self.log_a[i] - lse_row[i], omega);
            }
            log_kernel_apply(g, rate, &mut lse_col);
            let rows = (0..n).map(|i| ((g[i] + lse_row[i]).exp() - self.a[i]).abs());
            violation = (0..n)
                .map(|j| ((f[j] + lse_col[j]).exp() - self.b[j]).abs())
                .chain(rows)
                .fold(0.0, f64::max);
            history.push(violation);
            if (iteration - 1) % REPROBE_PERIOD == RELAXATION_PROBE - 1 {
                // Plain Sinkhorn contracts at roughly `kappa` per iteration; the
                // matching over-relaxation factor is 2 / (1 + sqrt(1 - kappa)).
                let span = RELAXATION_PROBE / 2;
                let kappa = (violation / history[iteration - 1 - span]).powf(1.0 / span as f64);
                if kappa.is_finite() && kappa > 0.0 && kappa < 1.0 {
                    omega = (2.0 / (1.0 + (1.0 - kappa).sqrt())).min(MAX_RELAXATION);
                }
            } else if omega != 1.0
                && (iteration - 1) % RELAXATION_PROBE == RELAXATION_PROBE - 1
                && (iteration - 1) % REPROBE_PERIOD >= 4 * RELAXATION_PROBE - 1
                && window_min(&history, iteration, 0) >= window_min(&history, iteration, 1)
            {
                // No progress over a whole window: plain updates until the next probe.
                omega = 1.0;
            }
            if omega != 1.0 && (violation.is_nan() || violation > DIVERGENCE) {
                // Relaxation blew up: restart plain iterations from zero potentials.
                omega = 1.0;
                for v in f.iter_mut().chain(g.iter_mut()) {
                    if v.is_finite() {
                        *v = 0.0;
                    }
                }
                log_kernel_apply(g, rate, &mut lse_col);
            }
        }
        (violation, iteration)
    }
}

/// Smallest error in the `back`-th most recent full window.
fn window_min(history: &[f64], iteration: usize, back: usize) -> f64 {
    let end = iteration - back * RELAXATION_PROBE;
    history[end - RELAXATION_PROBE..end].iter().copied().fold(f64::INFINITY, f64::min)
}

/// `old + omega * (new - old)`; zero-mass bins keep their `-inf` potential.
#[inline]
fn relax(old: f64, new: f64, omega: f64) -> f64 {
    if new == f64::NEG_INFINITY || old == f64::NEG_INFINITY {
        new
    } else {
        old + omega * (new - old)
    }
}

fn plan_entries(f: &[f64], g: &[f64], rate: f64, n: usize) -> Vec<f64> {
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        if g[i] == f64::NEG_INFINITY {
            continue;
        }
        for j in 0..n {
            if f[j] == f64::NEG_INFINITY {
                continue;
            }
            let cost = (i as f64 - j as f64).abs() * rate;
            entries[i * n + j] = (f[j] + g[i] - cost).exp();
        }
    }
    entries
}
