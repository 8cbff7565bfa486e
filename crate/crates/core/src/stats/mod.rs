//! Self-contained statistics kernels: effect sizes, rank statistics, and
//! calibration measures.
//!
//! Everything here is deterministic and allocation-only (`no_std` + `alloc`):
//! sums go through pairwise reduction, ranks break ties by averaging, and
//! sorting uses a total order on finite floats with index tiebreaks, so the
//! same inputs always produce the same bits.
//!
//! Orientation conventions, fixed once here and relied on everywhere above:
//!
//! * two-sample statistics take `(a, b)` = (valid group, hallucinated group),
//!   so a positive effect means valid scores are higher;
//! * `roc_auc` labels are `true` for the positive class, and
//!   `positive_means_high` says whether larger scores should predict it;
//! * calibration probabilities are "probability the instance is
//!   hallucinated", with `true` labels marking actual hallucinations.

pub(crate) mod special;

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::numeric::{mean, pairwise_dot, pairwise_sum};

/// Errors from the statistics kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    /// Paired inputs of different length.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    /// Not enough samples for the statistic to be defined.
    #[error("too few samples: needed {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    /// A NaN or infinite input value.
    #[error("non-finite input at index {index}")]
    NonFinite { index: usize },
    /// A two-class statistic received only one class.
    #[error("both classes must be present")]
    SingleClass,
    /// All variance terms are zero; the statistic divides by zero.
    #[error("degenerate variance: all spread terms are zero")]
    DegenerateVariance,
    /// An input that must vary is constant.
    #[error("constant input where variation is required")]
    ConstantInput,
    /// A bucket/bin count of zero.
    #[error("bucket count must be positive, got {k}")]
    InvalidBucketCount { k: usize },
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    for (index, x) in xs.iter().enumerate() {
        if !x.is_finite() {
            return Err(StatsError::NonFinite { index });
        }
    }
    Ok(())
}

fn check_lengths(a: usize, b: usize) -> Result<(), StatsError> {
    if a != b {
        return Err(StatsError::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

fn all_equal(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

/// Sample size, mean, and unbiased (n-1) variance of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance (denominator n-1).
    pub variance: f64,
}

impl GroupStats {
    /// Two-pass mean/variance; needs at least 2 finite samples.
    pub fn from_sample(xs: &[f64]) -> Result<Self, StatsError> {
        if xs.len() < 2 {
            return Err(StatsError::TooFewSamples { needed: 2, got: xs.len() });
        }
        check_finite(xs)?;
        let m = mean(xs);
        let deviations: Vec<f64> = xs.iter().map(|x| x - m).collect();
        let variance = pairwise_dot(&deviations, &deviations) / (xs.len() - 1) as f64;
        Ok(Self { n: xs.len(), mean: m, variance })
    }
}

/// Cohen's d with pooled standard deviation:
/// `(mean_a - mean_b) / s_pooled`.
///
/// Callers pass `(valid, hallucinated)`, so separation in the expected
/// direction comes out positive.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let sa = GroupStats::from_sample(a)?;
    let sb = GroupStats::from_sample(b)?;
    let pooled_var = ((sa.n - 1) as f64 * sa.variance + (sb.n - 1) as f64 * sb.variance)
        / (sa.n + sb.n - 2) as f64;
    if pooled_var <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok((sa.mean - sb.mean) / pooled_var.sqrt())
}

/// Welch's unequal-variance t-test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    /// t statistic, positive when group `a` has the larger mean.
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value; flushes to 0.0 below ~1e-308.
    pub p_two_sided: f64,
    /// `log10` of the two-sided p-value, finite even when the linear value
    /// underflows, so extreme separations stay comparable.
    pub p_log10: f64,
}

impl WelchResult {
    /// One-sided p-value for the alternative "mean(a) > mean(b)".
    pub fn p_one_sided_greater(&self) -> f64 {
        if self.t >= 0.0 {
            0.5 * self.p_two_sided
        } else {
            1.0 - 0.5 * self.p_two_sided
        }
    }
}

/// Welch's two-sample t-test (unequal variances).
///
/// Requires at least 2 samples per group and a nonzero combined spread.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult, StatsError> {
    let sa = GroupStats::from_sample(a)?;
    let sb = GroupStats::from_sample(b)?;
    let va = sa.variance / sa.n as f64;
    let vb = sb.variance / sb.n as f64;
    let se2 = va + vb;
    if se2 <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let t = (sa.mean - sb.mean) / se2.sqrt();
    let df = se2 * se2
        / (va * va / (sa.n - 1) as f64 + vb * vb / (sb.n - 1) as f64);
    let (p_two_sided, p_log10) = special::student_t_two_sided(t, df);
    Ok(WelchResult { t, df, p_two_sided, p_log10 })
}

/// Average ranks (1-based); ties share the mean of the positions they span.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).unwrap().then(i.cmp(&j)));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && xs[idx[end]] == xs[idx[start]] {
            end += 1;
        }
        // Positions start..end (0-based) share rank mean(start+1 ..= end).
        let shared = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

/// Rank-based (Mann-Whitney) ROC-AUC in O(n log n); tied scores count 1/2.
///
/// `labels[i]` is `true` for the positive class.  With
/// `positive_means_high`, the AUC is the probability that a random positive
/// outranks a random negative; otherwise the orientation is flipped.  An AUC
/// below 0.5 is reported as-is — it means the scores rank the classes in the
/// direction opposite to the one asked about.
pub fn roc_auc(scores: &[f64], labels: &[bool], positive_means_high: bool) -> Result<f64, StatsError> {
    check_lengths(scores.len(), labels.len())?;
    check_finite(scores)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(StatsError::SingleClass);
    }
    let ranks = average_ranks(scores);
    let pos_ranks: Vec<f64> = ranks
        .iter()
        .zip(labels.iter())
        .filter_map(|(&r, &l)| l.then_some(r))
        .collect();
    let u = pairwise_sum(&pos_ranks) - (n_pos * (n_pos + 1)) as f64 / 2.0;
    let auc_high = u / (n_pos as f64 * n_neg as f64);
    Ok(if positive_means_high { auc_high } else { 1.0 - auc_high })
}

/// Pearson correlation; errors on constant input.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_lengths(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: x.len() });
    }
    check_finite(x)?;
    check_finite(y)?;
    if all_equal(x) || all_equal(y) {
        return Err(StatsError::ConstantInput);
    }
    let mx = mean(x);
    let my = mean(y);
    let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let dy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let cov = pairwise_dot(&dx, &dy);
    let vx = pairwise_dot(&dx, &dx);
    let vy = pairwise_dot(&dy, &dy);
    if vx <= 0.0 || vy <= 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok((cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson on average ranks (exact under ties).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_lengths(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: x.len() });
    }
    check_finite(x)?;
    check_finite(y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Min-max rescaling of scores into "probability hallucinated":
/// the lowest score maps to 1, the highest to 0, linearly in between.
pub fn minmax_prob(values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: values.len() });
    }
    check_finite(values)?;
    let lo = values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let hi = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if lo == hi {
        return Err(StatsError::ConstantInput);
    }
    let range = hi - lo;
    Ok(values.iter().map(|&v| (1.0 - (v - lo) / range).clamp(0.0, 1.0)).collect())
}

/// Cut points for splitting `n` sorted items into `k` equal-frequency groups:
/// group `j` spans `[round(j n / k), round((j+1) n / k))`, so sizes differ by
/// at most one and the allocation is deterministic.
fn equal_frequency_boundaries(n: usize, k: usize) -> Vec<usize> {
    (0..=k).map(|j| ((j * n) as f64 / k as f64).round() as usize).collect()
}

/// One reliability bin of a calibration curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    /// Mean predicted probability within the bin.
    pub mean_predicted: f64,
    /// Fraction of the bin actually labeled positive (hallucinated).
    pub observed_rate: f64,
    pub count: usize,
}

/// Expected calibration error plus the per-bin reliability curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Count-weighted mean absolute gap between predicted and observed rates.
    pub ece: f64,
    pub bins: Vec<CalibrationBin>,
}

/// Expected calibration error over `n_bins` equal-frequency bins.
///
/// Samples are sorted by predicted probability (ties by index) and split into
/// bins of near-equal size, so every bin is populated and the binning is
/// deterministic.
pub fn ece(probs: &[f64], labels: &[bool], n_bins: usize) -> Result<CalibrationReport, StatsError> {
    check_lengths(probs.len(), labels.len())?;
    if n_bins == 0 {
        return Err(StatsError::InvalidBucketCount { k: n_bins });
    }
    if probs.len() < n_bins {
        return Err(StatsError::TooFewSamples { needed: n_bins, got: probs.len() });
    }
    check_finite(probs)?;
    let n = probs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| probs[i].partial_cmp(&probs[j]).unwrap().then(i.cmp(&j)));
    let boundaries = equal_frequency_boundaries(n, n_bins);
    let mut bins = Vec::with_capacity(n_bins);
    let mut weighted_gaps = Vec::with_capacity(n_bins);
    for w in boundaries.windows(2) {
        let members = &idx[w[0]..w[1]];
        let bin_probs: Vec<f64> = members.iter().map(|&i| probs[i]).collect();
        let mean_predicted = mean(&bin_probs);
        let positives = members.iter().filter(|&&i| labels[i]).count();
        let observed_rate = positives as f64 / members.len() as f64;
        weighted_gaps
            .push(members.len() as f64 / n as f64 * (mean_predicted - observed_rate).abs());
        bins.push(CalibrationBin { mean_predicted, observed_rate, count: members.len() });
    }
    Ok(CalibrationReport { ece: pairwise_sum(&weighted_gaps), bins })
}

/// Closed value range of one bucket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: f64,
    pub max: f64,
}

/// Equal-frequency bucketing of a value vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBuckets {
    /// Bucket index (0-based, ascending in value) for each input position.
    pub assignments: Vec<usize>,
    /// Observed [min, max] of each bucket.
    pub ranges: Vec<ValueRange>,
    /// Bucket sizes; any two differ by at most one.
    pub counts: Vec<usize>,
}

/// Splits values into `k` equal-frequency buckets by rank.
///
/// Sorting is by `(value, index)`, so ties that straddle a cut point are
/// split positionally — bucket membership is a property of the sorted
/// position, not the value.  Bucket sizes come from the same cumulative
/// rounding as [`ece`] binning and differ by at most one.
pub fn quantile_buckets(values: &[f64], k: usize) -> Result<QuantileBuckets, StatsError> {
    if k == 0 {
        return Err(StatsError::InvalidBucketCount { k });
    }
    if values.len() < k {
        return Err(StatsError::TooFewSamples { needed: k, got: values.len() });
    }
    check_finite(values)?;
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap().then(i.cmp(&j)));
    let boundaries = equal_frequency_boundaries(n, k);
    let mut assignments = vec![0usize; n];
    let mut ranges = Vec::with_capacity(k);
    let mut counts = Vec::with_capacity(k);
    for (bucket, w) in boundaries.windows(2).enumerate() {
        let members = &idx[w[0]..w[1]];
        for &i in members {
            assignments[i] = bucket;
        }
        ranges.push(ValueRange {
            min: values[members[0]],
            max: values[members[members.len() - 1]],
        });
        counts.push(members.len());
    }
    Ok(QuantileBuckets { assignments, ranges, counts })
}
