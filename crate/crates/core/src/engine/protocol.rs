use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::ModelParams;
use super::rng::{stream_rng, Stream};
use super::server::{fedavg_aggregate, GroupCounts, ServerState};
use super::train::{combined_loss_and_gradient, train_local, utility_loss, TrainOptions};
use crate::config::ExperimentConfig;
use crate::data::{randomized_response, TabularDataset};
use crate::error::{Error, Result};
use crate::fairness::{
    metric_dp, metric_eop, FairnessLossTerm, GroupId, GroupedPredictions, Prediction,
};
use crate::ot::{bin_index, BinCounts, Histogram, SinkhornParams, TransportPlan};

/// Everything a protocol run needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSettings {
    pub rounds: usize,
    pub beta: f64,
    pub bin_count: usize,
    pub xi: f64,
    pub ot: SinkhornParams,
    pub train: TrainOptions,
    pub seed: u64,
}

impl ProtocolSettings {
    /// The config's `epsilon` is measured in bin widths; the solvers get it
    /// in score units.
    pub fn from_config(config: &ExperimentConfig, seed: u64) -> Self {
        Self {
            rounds: config.rounds,
            beta: config.beta,
            bin_count: config.n_bins,
            xi: config.xi,
            ot: SinkhornParams {
                epsilon: config.epsilon / config.n_bins as f64,
                max_iters: config.sinkhorn_max_iters,
                tol: config.sinkhorn_tol,
            },
            train: TrainOptions {
                epochs: config.local_epochs,
                lr: config.lr,
                batch_size: config.batch_size,
                optimizer: config.optimizer,
            },
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub data: TabularDataset,
    pub params: ModelParams,
    /// Indexed by group id; `None` during warm-up.
    pub terms: Option<Vec<Option<FairnessLossTerm>>>,
    /// Per sample, the bin its score fell in when the terms were installed.
    pub anchors: Vec<usize>,
}

impl ClientState {
    pub fn new(id: usize, data: TabularDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Partition(format!("client {id} has no samples")));
        }
        let params = ModelParams::zeros(data.dim());
        Ok(Self {
            id,
            data,
            params,
            terms: None,
            anchors: Vec::new(),
        })
    }

    /// Group ids with at least one local sample.
    pub fn present_groups(&self) -> Vec<GroupId> {
        self.data
            .group_sizes()
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(g, _)| g)
            .collect()
    }

    pub fn scores_by_group(&self) -> BTreeMap<GroupId, Vec<f64>> {
        let mut out: BTreeMap<GroupId, Vec<f64>> = BTreeMap::new();
        for i in 0..self.data.len() {
            out.entry(self.data.group(i))
                .or_default()
                .push(self.params.score(self.data.row(i)));
        }
        out
    }

    /// Replaces the fairness terms with plans to `barycenter`; groups
    /// without a plan get no term. Each sample is anchored to the plan row
    /// of its bin under the current params.
    pub fn install_plans(
        &mut self,
        plans: BTreeMap<GroupId, TransportPlan>,
        barycenter: &Histogram,
    ) -> Result<()> {
        let labels = self.data.group_labels();
        let mut terms: Vec<Option<FairnessLossTerm>> = vec![None; labels.len()];
        for (g, plan) in plans {
            let label = labels
                .get(g)
                .ok_or_else(|| Error::Shape(format!("plan for unknown group {g}")))?;
            terms[g] = Some(FairnessLossTerm::new(label.clone(), plan, barycenter.clone())?);
        }
        let n = barycenter.bin_count();
        self.anchors = (0..self.data.len())
            .map(|i| bin_index(self.params.score(self.data.row(i)), n))
            .collect();
        self.terms = Some(terms);
        Ok(())
    }

    /// Fairness loss of the current params on all local samples, if terms
    /// are installed.
    pub fn fairness_loss(&self) -> Option<f64> {
        let terms = self.terms.as_deref()?;
        let all: Vec<usize> = (0..self.data.len()).collect();
        let (loss, _) =
            combined_loss_and_gradient(&self.data, &all, &self.params, 0.0, terms, &self.anchors);
        Some(loss)
    }
}

/// Utility-only local training.
pub fn local_train_utility<R: Rng + ?Sized>(
    client: &mut ClientState,
    opts: &TrainOptions,
    rng: &mut R,
) -> Result<()> {
    train_local(&client.data, &mut client.params, 1.0, &[], &[], opts, rng)
}

/// Local training on `beta * utility + (1 - beta) * fairness` with the
/// installed terms held fixed.
pub fn local_train_combined<R: Rng + ?Sized>(
    client: &mut ClientState,
    beta: f64,
    opts: &TrainOptions,
    rng: &mut R,
) -> Result<()> {
    let terms = client.terms.as_deref().unwrap_or(&[]);
    train_local(
        &client.data,
        &mut client.params,
        beta,
        terms,
        &client.anchors,
        opts,
        rng,
    )
}

/// Per present group, counts of randomized-response binned scores.
pub fn client_report<R: Rng + ?Sized>(
    client: &ClientState,
    bin_count: usize,
    xi: f64,
    rng: &mut R,
) -> Result<GroupCounts> {
    let mut report = GroupCounts::new();
    for i in 0..client.data.len() {
        let s = client.params.score(client.data.row(i));
        let bin = randomized_response(bin_index(s, bin_count), bin_count, xi, rng);
        match report.get_mut(&client.data.group(i)) {
            Some(c) => c.increment(bin),
            None => {
                let mut c = BinCounts::zeros(bin_count)?;
                c.increment(bin);
                report.insert(client.data.group(i), c);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub dp: f64,
    pub eop: f64,
}

/// Accuracy and group-fairness gaps of `params` on `test`.
pub fn evaluate(params: &ModelParams, test: &TabularDataset) -> Result<Evaluation> {
    let labels = test.group_labels();
    let mut groups: Vec<(_, Vec<Prediction>)> =
        labels.iter().map(|l| (l.clone(), Vec::new())).collect();
    let mut correct = 0usize;
    for i in 0..test.len() {
        let p = Prediction::from_score(params.score(test.row(i)), test.label(i));
        correct += (p.predicted == p.actual) as usize;
        groups[test.group(i)].1.push(p);
    }
    let grouped = GroupedPredictions::new(groups);
    Ok(Evaluation {
        accuracy: correct as f64 / test.len() as f64,
        dp: metric_dp(&grouped)?,
        eop: metric_eop(&grouped)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub accuracy: f64,
    pub dp: f64,
    pub eop: f64,
    /// Mean over clients of the local utility loss after training.
    pub utility_loss: f64,
    /// Mean over clients of the local fairness loss after training.
    pub fairness_loss: Option<f64>,
    /// Per group, W1 between the aggregated reports and the barycenter.
    pub group_w1: Option<BTreeMap<GroupId, f64>>,
    /// Mean over clients and their groups of W1 between the client's
    /// reported histogram and the barycenter.
    pub client_w1: Option<f64>,
    pub barycenter_objective: Option<f64>,
    /// Global params the metrics were computed from.
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub final_params: ModelParams,
}

impl RunOutput {
    pub fn final_record(&self) -> &RoundRecord {
        self.records.last().expect("a run always records the warm-up round")
    }
}

/// WassFFed: warm-up, then `rounds` rounds of report, barycenter and plans,
/// and fairness-aware local training.
pub fn run_wassffed(
    datasets: &[TabularDataset],
    test: &TabularDataset,
    settings: &ProtocolSettings,
) -> Result<RunOutput> {
    run_protocol(datasets, test, settings, true)
}

/// FedAvg on the utility loss alone, with the same seeds and schedule.
pub fn run_fedavg(
    datasets: &[TabularDataset],
    test: &TabularDataset,
    settings: &ProtocolSettings,
) -> Result<RunOutput> {
    let mut settings = settings.clone();
    settings.beta = 1.0;
    run_protocol(datasets, test, &settings, false)
}

fn run_protocol(
    datasets: &[TabularDataset],
    test: &TabularDataset,
    s: &ProtocolSettings,
    fair: bool,
) -> Result<RunOutput> {
    if !(0.0..=1.0).contains(&s.beta) {
        return Err(Error::config("beta", "must lie in [0, 1]"));
    }
    if !(0.0..1.0).contains(&s.xi) {
        return Err(Error::config("xi", "must lie in [0, 1)"));
    }
    let mut clients: Vec<ClientState> = datasets
        .iter()
        .enumerate()
        .map(|(p, d)| ClientState::new(p, d.clone()))
        .collect::<Result<_>>()?;
    let group_labels = test.group_labels().to_vec();
    let sample_counts: Vec<usize> = clients.iter().map(|c| c.data.len()).collect();
    let mut server = ServerState::new(group_labels, s.bin_count, s.ot);

    clients.par_iter_mut().try_for_each(|c| {
        let mut rng = stream_rng(s.seed, c.id, 0, Stream::Train);
        local_train_utility(c, &s.train, &mut rng)
    })?;
    let mut records = vec![close_round(0, &mut clients, &sample_counts, test, None)?];

    for t in 1..=s.rounds {
        let round = |e: Error| Error::Round {
            round: t,
            source: Box::new(e),
        };
        let ot = if fair {
            let reports: Vec<GroupCounts> = clients
                .par_iter()
                .map(|c| {
                    let mut rng = stream_rng(s.seed, c.id, t, Stream::Report);
                    client_report(c, s.bin_count, s.xi, &mut rng)
                })
                .collect::<Result<_>>()
                .map_err(round)?;
            let params: Vec<ModelParams> = clients.iter().map(|c| c.params.clone()).collect();
            let broadcast = server
                .round(reports.clone(), &params, &sample_counts)
                .map_err(round)?;
            let bary = broadcast.barycenter.barycenter.clone();
            let client_w1 = mean_client_w1(&reports, &bary).map_err(round)?;
            for (c, plans) in clients.iter_mut().zip(broadcast.plans) {
                c.params = broadcast.params.clone();
                c.install_plans(plans, &bary).map_err(round)?;
            }
            Some(OtDiagnostics {
                group_w1: broadcast.group_w1,
                client_w1,
                objective: broadcast.barycenter.objective,
            })
        } else {
            None
        };
        clients
            .par_iter_mut()
            .try_for_each(|c| {
                let mut rng = stream_rng(s.seed, c.id, t, Stream::Train);
                local_train_combined(c, s.beta, &s.train, &mut rng)
            })
            .map_err(round)?;
        records.push(close_round(t, &mut clients, &sample_counts, test, ot).map_err(round)?);
    }
    let final_params = records.last().map(|r| r.params.clone()).unwrap();
    Ok(RunOutput {
        records,
        final_params,
    })
}

struct OtDiagnostics {
    group_w1: BTreeMap<GroupId, f64>,
    client_w1: f64,
    objective: f64,
}

fn mean_client_w1(reports: &[GroupCounts], bary: &Histogram) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for counts in reports.iter().flat_map(|r| r.values()) {
        total += crate::ot::wasserstein_1d(&counts.normalize()?, bary)?;
        n += 1;
    }
    Ok(total / n as f64)
}

/// Aggregates the clients' params, evaluates them, hands them back to every
/// client and records the round.
fn close_round(
    round: usize,
    clients: &mut [ClientState],
    sample_counts: &[usize],
    test: &TabularDataset,
    ot: Option<OtDiagnostics>,
) -> Result<RoundRecord> {
    let utility =
        clients.iter().map(|c| utility_loss(&c.data, &c.params)).sum::<f64>() / clients.len() as f64;
    let fairness = match ot {
        Some(_) => {
            let mut total = 0.0;
            for c in clients.iter() {
                total += c.fairness_loss().unwrap_or(0.0);
            }
            Some(total / clients.len() as f64)
        }
        None => None,
    };
    let params: Vec<ModelParams> = clients.iter().map(|c| c.params.clone()).collect();
    let global = fedavg_aggregate(&params, sample_counts)?;
    if !global.is_finite() {
        return Err(Error::Domain("aggregated parameters are not finite".into()));
    }
    let eval = evaluate(&global, test)?;
    for c in clients.iter_mut() {
        c.params = global.clone();
    }
    let (group_w1, client_w1, objective) = match ot {
        Some(d) => (Some(d.group_w1), Some(d.client_w1), Some(d.objective)),
        None => (None, None, None),
    };
    Ok(RoundRecord {
        round,
        accuracy: eval.accuracy,
        dp: eval.dp,
        eop: eval.eop,
        utility_loss: utility,
        fairness_loss: fairness,
        group_w1,
        client_w1,
        barycenter_objective: objective,
        params: global,
    })
}
