use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores are kept this far away from 0 and 1 so log-losses stay finite.
pub const SCORE_MARGIN: f64 = 1e-12;

/// Logistic-regression parameters; the payload exchanged by FedAvg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ModelParams {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    #[inline]
    pub(crate) fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    #[inline]
    pub(crate) fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(SCORE_MARGIN, 1.0 - SCORE_MARGIN)
}

/// `sigmoid(w . x + b)`.
pub fn forward(params: &ModelParams, features: &[f64]) -> Result<f64> {
    if features.len() != params.dim() {
        return Err(Error::Shape(format!(
            "{} features for a model of dimension {}",
            features.len(),
            params.dim()
        )));
    }
    Ok(params.score(features))
}

/// Binary cross-entropy of one score.
#[inline]
pub(crate) fn bce(score: f64, label: bool) -> f64 {
    if label {
        -score.ln()
    } else {
        -(1.0 - score).ln()
    }
}
