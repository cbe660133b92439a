//! Distribution distances, moment summaries, per-class count errors and
//! correlation-matrix comparison.
//!
//! The 1-D distances treat class indices `0..n` (catalog order) as the
//! support, so their values depend on catalog order.

mod report;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::MetricError;

pub use report::{
    comparison_rows, evaluate, BeliefSource, ClassErrorRow, ComparisonRow, Grouping, MeanBeliefs, MetricReport,
    OracleBeliefs,
};

const SUM_TOL: f64 = 1e-9;
const RADICAND_TOL: f64 = 1e-12;

fn check_distribution(p: &[f64], name: &str) -> Result<bool, MetricError> {
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(MetricError::Distribution(format!("{name} has entry {x}")));
    }
    let sum: f64 = p.iter().sum();
    if sum == 0.0 {
        return Ok(false);
    }
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(MetricError::Distribution(format!("{name} sums to {sum}")));
    }
    Ok(true)
}

/// Validates a pair; `Ok(false)` means both are all-zero.
fn check_pair(p: &[f64], q: &[f64]) -> Result<bool, MetricError> {
    if p.len() != q.len() {
        return Err(MetricError::Misaligned(format!("lengths {} and {}", p.len(), q.len())));
    }
    match (check_distribution(p, "p")?, check_distribution(q, "q")?) {
        (true, true) => Ok(true),
        (false, false) => Ok(false),
        (true, false) => Err(MetricError::Distribution("q is all zero while p is not".into())),
        (false, true) => Err(MetricError::Distribution("p is all zero while q is not".into())),
    }
}

fn cdf_gaps<'a>(p: &'a [f64], q: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    let mut fp = 0.0;
    let mut fq = 0.0;
    p.iter().zip(q).map(move |(a, b)| {
        fp += a;
        fq += b;
        fp - fq
    })
}

/// W1 over support `{0, …, n−1}`: Σ_k |F_p(k) − F_q(k)|.
pub fn wasserstein_1d(p: &[f64], q: &[f64]) -> Result<f64, MetricError> {
    if !check_pair(p, q)? {
        return Ok(0.0);
    }
    Ok(cdf_gaps(p, q).map(f64::abs).sum())
}

fn radicand_sqrt(r: f64) -> Result<f64, MetricError> {
    if r < -RADICAND_TOL {
        return Err(MetricError::Internal(format!("negative energy radicand {r}")));
    }
    Ok(r.max(0.0).sqrt())
}

fn mean_abs_diff(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, a) in p.iter().enumerate() {
        if *a == 0.0 {
            continue;
        }
        for (j, b) in q.iter().enumerate() {
            s += a * b * (i as f64 - j as f64).abs();
        }
    }
    s
}

/// Energy distance from expectations: √(2E|X−Y| − E|X−X′| − E|Y−Y′|).
pub fn energy_distance_direct(p: &[f64], q: &[f64]) -> Result<f64, MetricError> {
    if !check_pair(p, q)? {
        return Ok(0.0);
    }
    radicand_sqrt(2.0 * mean_abs_diff(p, q) - mean_abs_diff(p, p) - mean_abs_diff(q, q))
}

/// Energy distance via the Cramér identity: √(2 Σ_k (F_p(k) − F_q(k))²).
pub fn energy_distance_cramer(p: &[f64], q: &[f64]) -> Result<f64, MetricError> {
    if !check_pair(p, q)? {
        return Ok(0.0);
    }
    radicand_sqrt(2.0 * cdf_gaps(p, q).map(|d| d * d).sum::<f64>())
}

/// Energy distance; computed directly and cross-checked against the Cramér form.
pub fn energy_distance_1d(p: &[f64], q: &[f64]) -> Result<f64, MetricError> {
    let direct = energy_distance_direct(p, q)?;
    let cramer = energy_distance_cramer(p, q)?;
    // compare squared values: near 0 the square root amplifies rounding
    if (direct * direct - cramer * cramer).abs() > 1e-9 {
        return Err(MetricError::Internal(format!("energy paths disagree: {direct} vs {cramer}")));
    }
    Ok(direct)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased (n − 1) sample variance.
    pub variance: f64,
    /// Adjusted Fisher–Pearson skewness; needs 3 samples and nonzero variance.
    pub skewness: Option<f64>,
    /// Fisher excess kurtosis (bias-corrected); needs 4 samples and nonzero variance.
    pub excess_kurtosis: Option<f64>,
}

fn central_moments(samples: &[f64]) -> (f64, f64, f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in samples {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    (mean, m2 / n, m3 / n, m4 / n)
}

/// Like [`moment_summary`] but reports undefined higher moments as `None`
/// instead of failing. Needs at least one sample.
pub fn describe(samples: &[f64]) -> Result<MetricSummary, MetricError> {
    if samples.is_empty() {
        return Err(MetricError::TooFewSamples { need: 1, got: 0 });
    }
    let len = samples.len();
    let n = len as f64;
    let (mean, m2, m3, m4) = central_moments(samples);
    let variance = if len > 1 { m2 * n / (n - 1.0) } else { 0.0 };
    let spread = m2 > 0.0;
    let skewness = (len >= 3 && spread).then(|| {
        let g1 = m3 / m2.powf(1.5);
        g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)
    });
    let excess_kurtosis = (len >= 4 && spread).then(|| {
        let g2 = m4 / (m2 * m2) - 3.0;
        (n - 1.0) / ((n - 2.0) * (n - 3.0)) * ((n + 1.0) * g2 + 6.0)
    });
    Ok(MetricSummary {
        count: len,
        mean,
        variance,
        skewness,
        excess_kurtosis,
    })
}

/// Mean, unbiased variance, adjusted skewness (n ≥ 3) and excess kurtosis (n ≥ 4).
///
/// Fails with fewer than two samples, and with zero variance whenever a
/// higher moment would be computed.
pub fn moment_summary(samples: &[f64]) -> Result<MetricSummary, MetricError> {
    if samples.len() < 2 {
        return Err(MetricError::TooFewSamples {
            need: 2,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(MetricError::Distribution("non-finite sample".into()));
    }
    let s = describe(samples)?;
    if samples.len() >= 3 && s.skewness.is_none() {
        return Err(MetricError::ZeroVariance);
    }
    Ok(s)
}

/// Quantile by linear interpolation between order statistics: position
/// `h = (n − 1)·p` in the sorted samples.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Box statistics of `predicted − truth` for one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl ErrorStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self, MetricError> {
        if samples.is_empty() {
            return Err(MetricError::TooFewSamples { need: 1, got: 0 });
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        Ok(Self {
            mean: s.iter().sum::<f64>() / s.len() as f64,
            min: s[0],
            q1: quantile(&s, 0.25),
            median: quantile(&s, 0.5),
            q3: quantile(&s, 0.75),
            max: s[s.len() - 1],
        })
    }
}

/// Per-class statistics of `predicted[s][i] − truth[s][i]` over samples `s`.
pub fn class_error_stats(predicted: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Vec<ErrorStats>, MetricError> {
    if predicted.len() != truth.len() {
        return Err(MetricError::Misaligned(format!(
            "{} predicted vs {} truth samples",
            predicted.len(),
            truth.len()
        )));
    }
    let Some(first) = truth.first() else {
        return Err(MetricError::TooFewSamples { need: 1, got: 0 });
    };
    let n = first.len();
    if let Some(k) = (0..truth.len()).find(|&k| predicted[k].len() != n || truth[k].len() != n) {
        return Err(MetricError::Misaligned(format!("sample {k} has a different class count")));
    }
    (0..n)
        .map(|i| {
            let errs: Vec<f64> = predicted.iter().zip(truth).map(|(p, t)| p[i] - t[i]).collect();
            ErrorStats::from_samples(&errs)
        })
        .collect()
}

/// Pearson correlation matrix across classes, plus the classes with zero
/// variance (their row and column follow the identity pattern).
pub fn correlation_matrix(rows: &[Vec<f64>]) -> Result<(Array2<f64>, Vec<usize>), MetricError> {
    if rows.len() < 2 {
        return Err(MetricError::TooFewSamples {
            need: 2,
            got: rows.len(),
        });
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(MetricError::Misaligned("rows differ in class count".into()));
    }
    let m = rows.len() as f64;
    let means: Vec<f64> = (0..n).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / m).collect();
    let mut cov = Array2::<f64>::zeros((n, n));
    for r in rows {
        for i in 0..n {
            let di = r[i] - means[i];
            if di == 0.0 {
                continue;
            }
            for j in 0..n {
                cov[[i, j]] += di * (r[j] - means[j]);
            }
        }
    }
    // constant columns are detected exactly; the mean can carry rounding
    let flagged: Vec<usize> = (0..n).filter(|&i| rows.iter().all(|r| r[i] == rows[0][i])).collect();
    for &i in &flagged {
        cov[[i, i]] = 0.0;
    }
    let mut corr = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            corr[[i, j]] = if i == j {
                1.0
            } else if cov[[i, i]] <= 0.0 || cov[[j, j]] <= 0.0 {
                0.0
            } else {
                (cov[[i, j]] / (cov[[i, i]] * cov[[j, j]]).sqrt()).clamp(-1.0, 1.0)
            };
        }
    }
    Ok((corr, flagged))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationComparison {
    pub frobenius: f64,
    pub predicted: Array2<f64>,
    pub truth: Array2<f64>,
    pub flagged_predicted: Vec<usize>,
    pub flagged_truth: Vec<usize>,
}

/// ‖R_pred − R_truth‖_F over room count vectors.
pub fn correlation_frobenius(pred_rooms: &[Vec<f64>], truth_rooms: &[Vec<f64>]) -> Result<CorrelationComparison, MetricError> {
    let (predicted, flagged_predicted) = correlation_matrix(pred_rooms)?;
    let (truth, flagged_truth) = correlation_matrix(truth_rooms)?;
    if predicted.dim() != truth.dim() {
        return Err(MetricError::Misaligned("class counts differ".into()));
    }
    let frobenius = (&predicted - &truth).iter().map(|d| d * d).sum::<f64>().sqrt();
    Ok(CorrelationComparison {
        frobenius,
        predicted,
        truth,
        flagged_predicted,
        flagged_truth,
    })
}
