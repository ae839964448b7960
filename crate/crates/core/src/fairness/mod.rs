//! Group-fairness metrics and the transport-based fairness loss.

mod loss;
mod metrics;

pub use loss::{fairness_loss, fairness_loss_gradient, FairnessLossTerm};
pub use metrics::{
    metric_dp, metric_eop, GroupId, GroupLabel, GroupedPredictions, Prediction, DECISION_THRESHOLD,
};
