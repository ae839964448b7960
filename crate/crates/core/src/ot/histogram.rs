use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a normalized histogram.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Index of the bin holding `score` on a uniform grid of `bin_count` bins over `[0, 1]`.
///
/// Bins are half-open `[i/n, (i+1)/n)`; a score sitting exactly on an
/// interior boundary belongs to the right-hand bin and `1.0` belongs to the
/// last bin. The caller guarantees `score` is in `[0, 1]`.
#[inline]
pub fn bin_index(score: f64, bin_count: usize) -> usize {
    let idx = (score * bin_count as f64).floor() as usize;
    idx.min(bin_count - 1)
}

/// Center of bin `i` on the uniform `[0, 1]` grid.
#[inline]
pub fn bin_center(i: usize, bin_count: usize) -> f64 {
    (i as f64 + 0.5) / bin_count as f64
}

fn check_bin_count(bin_count: usize) -> Result<()> {
    if bin_count < 2 {
        return Err(Error::Domain(format!("bin_count must be >= 2, got {bin_count}")));
    }
    Ok(())
}

/// A probability mass vector over uniform bins on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    masses: Vec<f64>,
}

impl Histogram {
    /// Builds a histogram from masses that already sum to one.
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        check_bin_count(masses.len())?;
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::Domain(format!("histogram mass {m} is not a nonnegative real")));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Domain(format!("histogram masses sum to {total}, expected 1")));
        }
        Ok(Self { masses })
    }

    /// Normalizes nonnegative weights into a histogram.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        check_bin_count(weights.len())?;
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Domain(format!("histogram weight {w} is not a nonnegative real")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyDistribution);
        }
        Ok(Self {
            masses: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn point_mass(bin: usize, bin_count: usize) -> Result<Self> {
        check_bin_count(bin_count)?;
        if bin >= bin_count {
            return Err(Error::Domain(format!("bin {bin} out of range for {bin_count} bins")));
        }
        let mut masses = vec![0.0; bin_count];
        masses[bin] = 1.0;
        Ok(Self { masses })
    }

    pub fn uniform(bin_count: usize) -> Result<Self> {
        check_bin_count(bin_count)?;
        Ok(Self {
            masses: vec![1.0 / bin_count as f64; bin_count],
        })
    }

    pub fn bin_count(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn center(&self, i: usize) -> f64 {
        bin_center(i, self.bin_count())
    }

    /// Cumulative masses; the last entry is the total (one, up to rounding).
    pub fn cdf(&self) -> Vec<f64> {
        self.masses
            .iter()
            .scan(0.0, |acc, m| {
                *acc += m;
                Some(*acc)
            })
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| m * self.center(i))
            .sum()
    }

    /// Total-variation distance `0.5 * sum |p - q|`.
    pub fn total_variation(&self, other: &Histogram) -> Result<f64> {
        ensure_same_bins(self, other)?;
        Ok(0.5
            * self
                .masses
                .iter()
                .zip(&other.masses)
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>())
    }
}

pub(crate) fn ensure_same_bins(a: &Histogram, b: &Histogram) -> Result<()> {
    if a.bin_count() != b.bin_count() {
        return Err(Error::Shape(format!(
            "histograms have {} and {} bins",
            a.bin_count(),
            b.bin_count()
        )));
    }
    Ok(())
}

/// Raw per-bin counts prior to normalization.
///
/// This is what clients report to the server: summing counts across clients
/// and normalizing once keeps each output's multiplicity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinCounts {
    counts: Vec<u64>,
}

impl BinCounts {
    pub fn zeros(bin_count: usize) -> Result<Self> {
        check_bin_count(bin_count)?;
        Ok(Self {
            counts: vec![0; bin_count],
        })
    }

    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        check_bin_count(counts.len())?;
        Ok(Self { counts })
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn increment(&mut self, bin: usize) {
        self.counts[bin] += 1;
    }

    /// Adds another client's counts bin by bin.
    pub fn merge(&mut self, other: &BinCounts) -> Result<()> {
        if other.bin_count() != self.bin_count() {
            return Err(Error::Shape(format!(
                "bin counts have {} and {} bins",
                self.bin_count(),
                other.bin_count()
            )));
        }
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        Ok(())
    }

    pub fn normalize(&self) -> Result<Histogram> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyDistribution);
        }
        let total = total as f64;
        Ok(Histogram {
            masses: self.counts.iter().map(|&c| c as f64 / total).collect(),
        })
    }
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Domain(format!("score {s} outside [0, 1]")));
    }
    Ok(())
}

/// Bins scores in `[0, 1]` into raw counts.
pub fn count_scores(scores: &[f64], bin_count: usize) -> Result<BinCounts> {
    check_scores(scores)?;
    let mut counts = BinCounts::zeros(bin_count)?;
    for &s in scores {
        counts.increment(bin_index(s, bin_count));
    }
    Ok(counts)
}

/// Normalized histogram of scores in `[0, 1]` over `bin_count` uniform bins.
pub fn make_histogram(scores: &[f64], bin_count: usize) -> Result<Histogram> {
    count_scores(scores, bin_count)?.normalize()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_score_lands_in_its_decile() {
        let h = make_histogram(&[0.4325], 10).unwrap();
        assert_eq!(h.masses()[4], 1.0);
        assert_eq!(h.masses().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn one_goes_to_last_bin() {
        let h = make_histogram(&[1.0], 10).unwrap();
        assert_eq!(h.masses()[9], 1.0);
    }

    #[test]
    fn two_points_two_bins() {
        let h = make_histogram(&[0.05, 0.95], 10).unwrap();
        let mut expected = vec![0.0; 10];
        expected[0] = 0.5;
        expected[9] = 0.5;
        assert_eq!(h.masses(), expected.as_slice());
    }

    #[test]
    fn interior_boundary_goes_right() {
        assert_eq!(bin_index(0.5, 10), 5);
        assert_eq!(bin_index(0.0, 10), 0);
        assert_eq!(bin_index(0.25, 4), 1);
    }

    #[test]
    fn rejects_empty_and_out_of_domain() {
        assert!(matches!(make_histogram(&[], 10), Err(Error::EmptyDistribution)));
        assert!(matches!(make_histogram(&[1.5], 10), Err(Error::Domain(_))));
        assert!(matches!(make_histogram(&[-0.1], 10), Err(Error::Domain(_))));
        assert!(matches!(make_histogram(&[f64::NAN], 10), Err(Error::Domain(_))));
        assert!(matches!(make_histogram(&[0.2], 1), Err(Error::Domain(_))));
    }

    #[test]
    fn new_validates_normalization() {
        assert!(Histogram::new(vec![0.5, 0.4]).is_err());
        assert!(Histogram::new(vec![0.5, -0.1, 0.6]).is_err());
        assert!(Histogram::new(vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn counts_merge_and_normalize() {
        let mut a = BinCounts::from_counts(vec![30, 0, 0]).unwrap();
        let b = BinCounts::from_counts(vec![0, 10, 0]).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.total(), 40);
        assert_eq!(a.normalize().unwrap().masses(), &[0.75, 0.25, 0.0]);
        assert!(matches!(
            BinCounts::zeros(3).unwrap().normalize(),
            Err(Error::EmptyDistribution)
        ));
    }
}
