use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores at or above this value are predicted positive.
pub const DECISION_THRESHOLD: f64 = 0.5;

pub type GroupId = usize;

/// A sensitive group; ids are contiguous from zero within an experiment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupLabel {
    pub id: GroupId,
    pub name: String,
}

impl GroupLabel {
    pub fn new(id: GroupId, name: impl Into<String>) -> Self {
        Self {
            id,
            name: name.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub score: f64,
    pub predicted: bool,
    pub actual: bool,
}

impl Prediction {
    pub fn from_score(score: f64, actual: bool) -> Self {
        Self {
            score,
            predicted: score >= DECISION_THRESHOLD,
            actual,
        }
    }

    /// A prediction known only by its hard label.
    pub fn from_hard(predicted: bool, actual: bool) -> Self {
        Self {
            score: if predicted { 1.0 } else { 0.0 },
            predicted,
            actual,
        }
    }
}

/// Predictions split by sensitive group.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupedPredictions {
    pub groups: Vec<(GroupLabel, Vec<Prediction>)>,
}

impl GroupedPredictions {
    pub fn new(groups: Vec<(GroupLabel, Vec<Prediction>)>) -> Self {
        Self { groups }
    }

    /// Per-group positive-prediction rates.
    pub fn positive_rates(&self) -> Result<Vec<f64>> {
        self.check_group_count()?;
        self.groups
            .iter()
            .map(|(label, preds)| {
                if preds.is_empty() {
                    return Err(Error::UndefinedMetric {
                        group: label.name.clone(),
                        reason: "has no samples",
                    });
                }
                Ok(rate(preds.iter().map(|p| p.predicted)))
            })
            .collect()
    }

    /// Per-group true-positive rates over samples whose ground truth is positive.
    pub fn true_positive_rates(&self) -> Result<Vec<f64>> {
        self.check_group_count()?;
        self.groups
            .iter()
            .map(|(label, preds)| {
                let positives: Vec<bool> =
                    preds.iter().filter(|p| p.actual).map(|p| p.predicted).collect();
                if positives.is_empty() {
                    return Err(Error::UndefinedMetric {
                        group: label.name.clone(),
                        reason: "has no positive ground-truth samples",
                    });
                }
                Ok(rate(positives.into_iter()))
            })
            .collect()
    }

    fn check_group_count(&self) -> Result<()> {
        if self.groups.len() < 2 {
            return Err(Error::UndefinedMetric {
                group: self
                    .groups
                    .first()
                    .map(|(l, _)| l.name.clone())
                    .unwrap_or_else(|| "<none>".into()),
                reason: "is the only group; at least two are required",
            });
        }
        Ok(())
    }
}

fn rate(flags: impl Iterator<Item = bool>) -> f64 {
    let (mut hits, mut total) = (0usize, 0usize);
    for f in flags {
        hits += f as usize;
        total += 1;
    }
    hits as f64 / total as f64
}

fn max_gap(rates: &[f64]) -> f64 {
    let hi = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// Largest pairwise gap in positive-prediction rate between groups.
pub fn metric_dp(preds: &GroupedPredictions) -> Result<f64> {
    Ok(max_gap(&preds.positive_rates()?))
}

/// Largest pairwise gap in true-positive rate between groups.
pub fn metric_eop(preds: &GroupedPredictions) -> Result<f64> {
    Ok(max_gap(&preds.true_positive_rates()?))
}
