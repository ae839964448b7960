use std::collections::BTreeMap;

use super::metrics::{GroupId, GroupLabel};
use crate::error::{Error, Result};
use crate::ot::{bin_center, bin_index, Histogram, TransportPlan};

/// Frozen server guidance for one sensitive group on one client.
///
/// A sample with score `s` in source bin `i` pays the expected distance
/// `sum_j |s - c_j| * Tbar(i, j)`, where `Tbar` is the plan with each row
/// normalized to a conditional distribution over barycenter bins. A bin that
/// carried no mass when the plan was built borrows the nearest row that did.
#[derive(Debug, Clone)]
pub struct FairnessLossTerm {
    group: GroupLabel,
    plan: TransportPlan,
    barycenter: Histogram,
    /// Source bin -> index into `rows`.
    row_of_bin: Vec<usize>,
    rows: Vec<RowProfile>,
}

/// Prefix sums of a normalized plan row: `mass[k] = sum_{j<k} Tbar_j` and
/// `moment[k] = sum_{j<k} Tbar_j c_j`.
#[derive(Debug, Clone)]
struct RowProfile {
    weights: Vec<f64>,
    mass: Vec<f64>,
    moment: Vec<f64>,
}

impl RowProfile {
    fn new(row: &[f64]) -> Self {
        let n = row.len();
        let total: f64 = row.iter().sum();
        let weights: Vec<f64> = row.iter().map(|t| t / total).collect();
        let mut mass = Vec::with_capacity(n + 1);
        let mut moment = Vec::with_capacity(n + 1);
        let (mut m, mut q) = (0.0, 0.0);
        mass.push(0.0);
        moment.push(0.0);
        for (j, w) in weights.iter().enumerate() {
            m += w;
            q += w * bin_center(j, n);
            mass.push(m);
            moment.push(q);
        }
        Self {
            weights,
            mass,
            moment,
        }
    }

    /// `sum_j |s - c_j| w_j` with `s` inside bin `i`.
    ///
    /// Every center left of bin `i` lies below `s` and every center right of
    /// it above, so only the diagonal term needs an explicit comparison.
    fn expected_distance(&self, s: f64, i: usize) -> f64 {
        let n = self.weights.len();
        let below = s * self.mass[i] - self.moment[i];
        let above = (self.moment[n] - self.moment[i + 1]) - s * (self.mass[n] - self.mass[i + 1]);
        below + above + self.weights[i] * (s - bin_center(i, n)).abs()
    }

    /// `sum_j sign(s - c_j) w_j` with `sign(0) = 0`.
    fn slope(&self, s: f64, i: usize) -> f64 {
        let n = self.weights.len();
        let c = bin_center(i, n);
        let diag = if s > c {
            self.weights[i]
        } else if s < c {
            -self.weights[i]
        } else {
            0.0
        };
        self.mass[i] - (self.mass[n] - self.mass[i + 1]) + diag
    }
}

impl FairnessLossTerm {
    pub fn new(group: GroupLabel, plan: TransportPlan, barycenter: Histogram) -> Result<Self> {
        let n = plan.bin_count();
        if barycenter.bin_count() != n {
            return Err(Error::Shape(format!(
                "plan has {n} bins but barycenter has {}",
                barycenter.bin_count()
            )));
        }
        let live: Vec<usize> = (0..n)
            .filter(|&i| plan.row(i).iter().sum::<f64>() > 0.0)
            .collect();
        if live.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let rows: Vec<RowProfile> = live.iter().map(|&i| RowProfile::new(plan.row(i))).collect();
        // Nearest live row; ties go to the lower bin.
        let row_of_bin = (0..n)
            .map(|i| {
                let pos = live.partition_point(|&r| r < i);
                match (pos.checked_sub(1), live.get(pos)) {
                    (_, Some(&r)) if r == i => pos,
                    (Some(lo), Some(&hi)) => {
                        if i - live[lo] <= hi - i {
                            lo
                        } else {
                            pos
                        }
                    }
                    (Some(lo), None) => lo,
                    (None, _) => pos,
                }
            })
            .collect();
        Ok(Self {
            group,
            plan,
            barycenter,
            row_of_bin,
            rows,
        })
    }

    pub fn group(&self) -> &GroupLabel {
        &self.group
    }

    pub fn plan(&self) -> &TransportPlan {
        &self.plan
    }

    pub fn barycenter(&self) -> &Histogram {
        &self.barycenter
    }

    pub fn bin_count(&self) -> usize {
        self.plan.bin_count()
    }

    /// Normalized plan row used for a sample in bin `bin`.
    pub fn conditional_row(&self, bin: usize) -> &[f64] {
        &self.rows[self.row_of_bin[bin]].weights
    }

    /// Expected transport distance of one score under the frozen plan, using
    /// the row of the score's own bin.
    pub fn sample_loss(&self, score: f64) -> f64 {
        self.anchored_loss(score, bin_index(score, self.bin_count()))
    }

    /// Derivative of [`Self::sample_loss`] in the score, holding the bin fixed.
    pub fn sample_slope(&self, score: f64) -> f64 {
        self.anchored_slope(score, bin_index(score, self.bin_count()))
    }

    /// Expected distance from `score` to the barycenter bins under the row of
    /// `anchor`, the bin the sample occupied when the plan was built.
    pub fn anchored_loss(&self, score: f64, anchor: usize) -> f64 {
        let i = bin_index(score, self.bin_count());
        self.rows[self.row_of_bin[anchor]].expected_distance(score, i)
    }

    /// Derivative of [`Self::anchored_loss`] in the score.
    pub fn anchored_slope(&self, score: f64, anchor: usize) -> f64 {
        let i = bin_index(score, self.bin_count());
        self.rows[self.row_of_bin[anchor]].slope(score, i)
    }
}

fn check_score(score: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::Domain(format!("score {score} outside [0, 1]")));
    }
    Ok(())
}

/// Wasserstein fairness loss: for every group with a term, the mean expected
/// transport distance of its scores to the barycenter, summed over groups.
///
/// Groups without a term contribute nothing. A term whose group has no scores
/// is an error.
pub fn fairness_loss(
    scores_by_group: &BTreeMap<GroupId, Vec<f64>>,
    terms: &[FairnessLossTerm],
) -> Result<f64> {
    let mut total = 0.0;
    for term in terms {
        let scores = scores_by_group
            .get(&term.group.id)
            .filter(|s| !s.is_empty())
            .ok_or(Error::EmptyDistribution)?;
        let mut acc = 0.0;
        for &s in scores {
            check_score(s)?;
            acc += term.sample_loss(s);
        }
        total += acc / scores.len() as f64;
    }
    Ok(total)
}

/// Gradient of [`fairness_loss`] with respect to a single score of a group
/// holding `group_count` samples.
pub fn fairness_loss_gradient(
    score: f64,
    term: &FairnessLossTerm,
    group_count: usize,
) -> Result<f64> {
    check_score(score)?;
    if group_count == 0 {
        return Err(Error::EmptyDistribution);
    }
    Ok(term.sample_slope(score) / group_count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::sinkhorn_plan;

    fn term_for(source: &Histogram, target: &Histogram, eps: f64) -> FairnessLossTerm {
        let plan = sinkhorn_plan(source, target, eps, 5000, 1e-9).unwrap();
        FairnessLossTerm::new(GroupLabel::new(0, "g"), plan, target.clone()).unwrap()
    }

    #[test]
    fn identity_coupling_at_centers_is_free() {
        let n = 5;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 0.2;
        }
        let plan = TransportPlan::from_matrix(n, m, 0.0).unwrap();
        let term = FairnessLossTerm::new(GroupLabel::new(0, "g"), plan, Histogram::uniform(n).unwrap())
            .unwrap();
        let scores: Vec<f64> = (0..n).map(|i| bin_center(i, n)).collect();
        let by_group = BTreeMap::from([(0, scores)]);
        assert_eq!(fairness_loss(&by_group, &[term]).unwrap(), 0.0);
    }

    #[test]
    fn forced_coupling_distance() {
        let src = Histogram::point_mass(2, 10).unwrap();
        let bary = Histogram::point_mass(7, 10).unwrap();
        let term = term_for(&src, &bary, 1.0);
        let by_group = BTreeMap::from([(0, vec![0.25])]);
        let loss = fairness_loss(&by_group, &[term]).unwrap();
        assert!((loss - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_sign_conventions() {
        let src = Histogram::point_mass(2, 10).unwrap();
        let bary = Histogram::point_mass(2, 10).unwrap();
        let term = term_for(&src, &bary, 1.0);
        assert_eq!(fairness_loss_gradient(0.25, &term, 4).unwrap(), 0.0);

        let bary = Histogram::point_mass(0, 10).unwrap();
        let term = term_for(&src, &bary, 1.0);
        // Every support center sits below the score.
        let g = fairness_loss_gradient(0.27, &term, 4).unwrap();
        assert!((g - 0.25).abs() < 1e-12);
    }

    #[test]
    fn empty_rows_borrow_the_nearest_live_row() {
        let src = Histogram::new(vec![0.0, 0.5, 0.0, 0.0, 0.5, 0.0]).unwrap();
        let bary = Histogram::new(vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.5]).unwrap();
        let term = term_for(&src, &bary, 0.05);
        assert_eq!(term.conditional_row(0), term.conditional_row(1));
        assert_eq!(term.conditional_row(2), term.conditional_row(1));
        assert_eq!(term.conditional_row(3), term.conditional_row(4));
        assert_eq!(term.conditional_row(5), term.conditional_row(4));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let src = Histogram::uniform(4).unwrap();
        let plan = sinkhorn_plan(&src, &src, 1.0, 100, 1e-9).unwrap();
        let err = FairnessLossTerm::new(GroupLabel::new(0, "g"), plan, Histogram::uniform(5).unwrap());
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn missing_scores_for_a_term() {
        let src = Histogram::uniform(4).unwrap();
        let term = term_for(&src, &src, 1.0);
        assert!(fairness_loss(&BTreeMap::new(), &[term]).is_err());
    }
}
