use std::collections::BTreeMap;

use super::model::ModelParams;
use crate::error::{Error, Result};
use crate::fairness::{GroupId, GroupLabel};
use crate::ot::{
    barycenter, sinkhorn_last_iterate, BarycenterResult, BinCounts, Histogram, SinkhornParams,
    TransportPlan,
};

/// Raw per-group score counts uploaded by one client.
pub type GroupCounts = BTreeMap<GroupId, BinCounts>;

/// Sums every client's counts per group and normalizes.
///
/// Every group in `groups` must have at least one count overall.
pub fn server_aggregate_distributions(
    reports: &[GroupCounts],
    groups: &[GroupLabel],
    bin_count: usize,
) -> Result<BTreeMap<GroupId, Histogram>> {
    let mut sums: BTreeMap<GroupId, BinCounts> = BTreeMap::new();
    for report in reports {
        for (&g, counts) in report {
            match sums.get_mut(&g) {
                Some(acc) => acc.merge(counts)?,
                None => {
                    if counts.bin_count() != bin_count {
                        return Err(Error::Shape(format!(
                            "report with {} bins, expected {bin_count}",
                            counts.bin_count()
                        )));
                    }
                    sums.insert(g, counts.clone());
                }
            }
        }
    }
    let mut global = BTreeMap::new();
    for label in groups {
        let counts = sums.get(&label.id).filter(|c| c.total() > 0).ok_or_else(|| {
            Error::MissingGroup {
                group: label.name.clone(),
            }
        })?;
        global.insert(label.id, counts.normalize()?);
    }
    Ok(global)
}

/// Sample-weighted parameter average.
///
/// The result does not depend on the order of the clients, and identical
/// inputs come back unchanged.
pub fn fedavg_aggregate(params_list: &[ModelParams], sample_counts: &[usize]) -> Result<ModelParams> {
    let first = params_list
        .first()
        .ok_or_else(|| Error::config("clients", "cannot aggregate an empty parameter list"))?;
    if sample_counts.len() != params_list.len() {
        return Err(Error::Shape(format!(
            "{} sample counts for {} parameter sets",
            sample_counts.len(),
            params_list.len()
        )));
    }
    if sample_counts.contains(&0) {
        return Err(Error::Weight("every client needs a positive sample count".into()));
    }
    if params_list.iter().any(|p| p.dim() != first.dim()) {
        return Err(Error::Shape("parameter dimensions differ across clients".into()));
    }
    if params_list.iter().all(|p| p == first) {
        return Ok(first.clone());
    }
    let total: usize = sample_counts.iter().sum();
    let lambdas: Vec<f64> = sample_counts
        .iter()
        .map(|&n| n as f64 / total as f64)
        .collect();
    let mut terms = vec![0.0; params_list.len()];
    let mut combine = |pick: &dyn Fn(&ModelParams) -> f64| -> f64 {
        for (t, (p, l)) in terms.iter_mut().zip(params_list.iter().zip(&lambdas)) {
            *t = l * pick(p);
        }
        terms.sort_by(f64::total_cmp);
        terms.iter().sum()
    };
    let weights = (0..first.dim()).map(|k| combine(&|p| p.weights[k])).collect();
    let bias = combine(&|p| p.bias);
    Ok(ModelParams { weights, bias })
}

/// What the server sends back after a round.
#[derive(Debug, Clone)]
pub struct Broadcast {
    pub barycenter: BarycenterResult,
    /// Per client, a plan for each group that client reported.
    pub plans: Vec<BTreeMap<GroupId, TransportPlan>>,
    pub params: ModelParams,
    /// `W1(S^a, B)` per group, from the aggregated reports.
    pub group_w1: BTreeMap<GroupId, f64>,
}

#[derive(Debug, Clone)]
pub struct ServerState {
    pub round: usize,
    pub groups: Vec<GroupLabel>,
    pub bin_count: usize,
    pub ot: SinkhornParams,
    pub reports: Vec<GroupCounts>,
    pub global: BTreeMap<GroupId, Histogram>,
    pub barycenter: Option<Histogram>,
    pub params: Option<ModelParams>,
    pub client_weights: Vec<f64>,
}

impl ServerState {
    pub fn new(groups: Vec<GroupLabel>, bin_count: usize, ot: SinkhornParams) -> Self {
        Self {
            round: 0,
            groups,
            bin_count,
            ot,
            reports: Vec::new(),
            global: BTreeMap::new(),
            barycenter: None,
            params: None,
            client_weights: Vec::new(),
        }
    }

    /// One server step: global histograms, their barycenter with uniform
    /// group weights, a plan from each client's own group histogram to the
    /// barycenter, and the aggregated parameters.
    pub fn round(
        &mut self,
        reports: Vec<GroupCounts>,
        params_list: &[ModelParams],
        sample_counts: &[usize],
    ) -> Result<Broadcast> {
        self.ot.validate()?;
        let global = server_aggregate_distributions(&reports, &self.groups, self.bin_count)?;
        let hists: Vec<Histogram> = global.values().cloned().collect();
        let lambda = vec![1.0 / hists.len() as f64; hists.len()];
        let bary = barycenter(
            &hists,
            &lambda,
            self.ot.epsilon,
            self.ot.max_iters,
            self.ot.tol,
        )?;

        let mut plans = Vec::with_capacity(reports.len());
        for report in &reports {
            let mut client_plans = BTreeMap::new();
            for (&g, counts) in report {
                if counts.total() == 0 {
                    continue;
                }
                let (plan, state) =
                    sinkhorn_last_iterate(&counts.normalize()?, &bary.barycenter, &self.ot)?;
                if !state.marginal_violation.is_finite() {
                    return Err(Error::Convergence {
                        iterations: state.iteration,
                        violation: state.marginal_violation,
                    });
                }
                if !state.converged {
                    log::warn!(
                        "round {}: plan for group {g} stopped at marginal error {:.2e}",
                        self.round,
                        state.marginal_violation
                    );
                }
                client_plans.insert(g, plan);
            }
            plans.push(client_plans);
        }

        let params = fedavg_aggregate(params_list, sample_counts)?;
        let total: usize = sample_counts.iter().sum();
        let mut group_w1 = BTreeMap::new();
        for (&g, h) in &global {
            group_w1.insert(g, crate::ot::wasserstein_1d(h, &bary.barycenter)?);
        }

        self.client_weights = sample_counts
            .iter()
            .map(|&n| n as f64 / total as f64)
            .collect();
        self.reports = reports;
        self.global = global;
        self.barycenter = Some(bary.barycenter.clone());
        self.params = Some(params.clone());
        self.round += 1;
        Ok(Broadcast {
            barycenter: bary,
            plans,
            params,
            group_w1,
        })
    }
}
