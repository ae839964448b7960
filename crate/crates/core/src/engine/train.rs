use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{bce, ModelParams};
use crate::config::OptimizerKind;
use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::fairness::FairnessLossTerm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
}

/// Loss `beta * mean BCE + (1 - beta) * fairness` over `batch`, with its
/// gradient in the model parameters.
///
/// `terms` is indexed by group id; groups without a term add no fairness
/// loss. `anchors`, when nonempty, gives each sample's plan row by dataset
/// index; otherwise a sample uses the row of its current bin. Per-group
/// fairness averages use the group's count within `batch`. With `beta == 1`
/// the fairness terms are not evaluated at all.
pub fn combined_loss_and_gradient(
    data: &TabularDataset,
    batch: &[usize],
    params: &ModelParams,
    beta: f64,
    terms: &[Option<FairnessLossTerm>],
    anchors: &[usize],
) -> (f64, ModelParams) {
    let n = batch.len() as f64;
    let fair = beta < 1.0 && terms.iter().any(Option::is_some);
    let mut group_counts = vec![0usize; terms.len()];
    if fair {
        for &i in batch {
            if let Some(c) = group_counts.get_mut(data.group(i)) {
                *c += 1;
            }
        }
    }

    let mut grad = ModelParams::zeros(params.dim());
    let (mut utility, mut fairness) = (0.0, 0.0);
    for &i in batch {
        let x = data.row(i);
        let y = data.label(i);
        let s = params.score(x);
        utility += bce(s, y);
        let mut dz = beta * (s - y as u8 as f64) / n;
        if fair {
            let g = data.group(i);
            if let Some(Some(term)) = terms.get(g) {
                let count = group_counts[g] as f64;
                let (loss, slope) = match anchors.get(i) {
                    Some(&a) => (term.anchored_loss(s, a), term.anchored_slope(s, a)),
                    None => (term.sample_loss(s), term.sample_slope(s)),
                };
                fairness += loss / count;
                dz += (1.0 - beta) * slope / count * s * (1.0 - s);
            }
        }
        for (gw, xv) in grad.weights.iter_mut().zip(x) {
            *gw += dz * xv;
        }
        grad.bias += dz;
    }
    let loss = if fair {
        beta * utility / n + (1.0 - beta) * fairness
    } else {
        beta * utility / n
    };
    (loss, grad)
}

/// Mean binary cross-entropy of `params` on the whole dataset.
pub fn utility_loss(data: &TabularDataset, params: &ModelParams) -> f64 {
    let total: f64 = (0..data.len())
        .map(|i| bce(params.score(data.row(i)), data.label(i)))
        .sum();
    total / data.len() as f64
}

enum Optimizer {
    Sgd,
    Adam {
        m: ModelParams,
        v: ModelParams,
        t: i32,
    },
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    fn new(kind: OptimizerKind, dim: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam {
                m: ModelParams::zeros(dim),
                v: ModelParams::zeros(dim),
                t: 0,
            },
        }
    }

    fn step(&mut self, params: &mut ModelParams, grad: &ModelParams, lr: f64) {
        match self {
            Optimizer::Sgd => {
                for (w, g) in params.weights.iter_mut().zip(&grad.weights) {
                    *w -= lr * g;
                }
                params.bias -= lr * grad.bias;
            }
            Optimizer::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*t);
                let c2 = 1.0 - ADAM_BETA2.powi(*t);
                let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                };
                for k in 0..params.weights.len() {
                    update(
                        &mut params.weights[k],
                        &mut m.weights[k],
                        &mut v.weights[k],
                        grad.weights[k],
                    );
                }
                update(&mut params.bias, &mut m.bias, &mut v.bias, grad.bias);
            }
        }
    }
}

/// Minibatch descent on the combined loss for `opts.epochs` epochs.
///
/// Samples are reshuffled every epoch from `rng`. Optimizer state starts
/// fresh on every call. `terms` is only borrowed, so the plans stay frozen.
pub fn train_local<R: Rng + ?Sized>(
    data: &TabularDataset,
    params: &mut ModelParams,
    beta: f64,
    terms: &[Option<FairnessLossTerm>],
    anchors: &[usize],
    opts: &TrainOptions,
    rng: &mut R,
) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::config("beta", "must lie in [0, 1]"));
    }
    if opts.batch_size == 0 {
        return Err(Error::config("batch_size", "must be at least 1"));
    }
    if data.dim() != params.dim() {
        return Err(Error::Shape(format!(
            "data dimension {} but model dimension {}",
            data.dim(),
            params.dim()
        )));
    }
    let mut optimizer = Optimizer::new(opts.optimizer, params.dim());
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..opts.epochs {
        order.shuffle(rng);
        for batch in order.chunks(opts.batch_size) {
            let (_, grad) = combined_loss_and_gradient(data, batch, params, beta, terms, anchors);
            optimizer.step(params, &grad, opts.lr);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fairness::GroupLabel;

    fn dataset(features: Vec<f64>, dim: usize, labels: Vec<bool>) -> TabularDataset {
        let n = labels.len();
        TabularDataset::new(
            features,
            (0..dim).map(|k| format!("x{k}")).collect(),
            labels,
            vec![0; n],
            vec![GroupLabel::new(0, "all")],
            "test",
        )
        .unwrap()
    }

    fn opts(epochs: usize, lr: f64, optimizer: OptimizerKind) -> TrainOptions {
        TrainOptions {
            epochs,
            lr,
            batch_size: 2,
            optimizer,
        }
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let d = dataset(vec![1.0, -1.0, 0.5, 2.0], 2, vec![true, false]);
        let start = ModelParams {
            weights: vec![0.3, -0.2],
            bias: 0.1,
        };
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut p = start.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            train_local(&d, &mut p, 1.0, &[], &[], &opts(5, 0.0, kind), &mut rng).unwrap();
            assert_eq!(p, start);
        }
    }

    #[test]
    fn separable_pair_is_learned() {
        let d = dataset(vec![-1.0, 1.0], 1, vec![false, true]);
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut p = ModelParams::zeros(1);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            train_local(&d, &mut p, 1.0, &[], &[], &opts(200, 0.1, kind), &mut rng).unwrap();
            assert!(p.score(d.row(0)) < 0.5 && p.score(d.row(1)) > 0.5);
        }
    }

    #[test]
    fn rejects_beta_outside_unit_interval() {
        let d = dataset(vec![1.0], 1, vec![true]);
        let mut p = ModelParams::zeros(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = train_local(&d, &mut p, 1.5, &[], &[], &opts(1, 0.1, OptimizerKind::Sgd), &mut rng);
        assert!(matches!(err, Err(Error::Config { .. })));
    }
}
