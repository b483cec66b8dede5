//! Regression and classification metrics and a two-sample rank test.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::special::normal_two_sided_p;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {left} predictions vs {right} truths")]
    LengthMismatch { left: usize, right: usize },
    #[error("metric needs at least one observation")]
    Empty,
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("correlation undefined for a constant vector")]
    ConstantVector,
    #[error("chance agreement is 1; kappa undefined")]
    DegenerateAgreement,
    #[error("label {0:?} not present in the confusion matrix")]
    UnknownLabel(String),
    #[error("confusion matrix must be square with one row per label")]
    BadShape,
}

fn paired(pred: &[f64], truth: &[f64]) -> Result<(), MetricError> {
    if pred.len() != truth.len() {
        return Err(MetricError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricError::Empty);
    }
    if pred.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    paired(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(total / pred.len() as f64)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    paired(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((total / pred.len() as f64).sqrt())
}

/// Population means, variances and covariance of a paired sample.
struct Moments {
    mx: f64,
    my: f64,
    vx: f64,
    vy: f64,
    cxy: f64,
}

fn moments(x: &[f64], y: &[f64]) -> Moments {
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        vx += dx * dx;
        vy += dy * dy;
        cxy += dx * dy;
    }
    Moments {
        mx,
        my,
        vx: vx / n,
        vy: vy / n,
        cxy: cxy / n,
    }
}

pub fn pearson(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    paired(pred, truth)?;
    let m = moments(pred, truth);
    if m.vx == 0.0 || m.vy == 0.0 {
        return Err(MetricError::ConstantVector);
    }
    Ok((m.cxy / (m.vx.sqrt() * m.vy.sqrt())).clamp(-1.0, 1.0))
}

/// Lin's concordance correlation coefficient with population moments.
pub fn ccc(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    paired(pred, truth)?;
    let m = moments(pred, truth);
    if m.vx == 0.0 || m.vy == 0.0 {
        return Err(MetricError::ConstantVector);
    }
    Ok(2.0 * m.cxy / (m.vx + m.vy + (m.mx - m.my).powi(2)))
}

/// Counts indexed `[predicted][truth]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self, MetricError> {
        let c = labels.len();
        if c == 0 || counts.len() != c || counts.iter().any(|r| r.len() != c) {
            return Err(MetricError::BadShape);
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != c {
            return Err(MetricError::BadShape);
        }
        Ok(Self { labels, counts })
    }

    /// Labels are the sorted union of both sides.
    pub fn from_labels<S: AsRef<str>>(pred: &[S], truth: &[S]) -> Result<Self, MetricError> {
        if pred.len() != truth.len() {
            return Err(MetricError::LengthMismatch {
                left: pred.len(),
                right: truth.len(),
            });
        }
        let labels: Vec<String> = {
            let mut l: Vec<String> = pred
                .iter()
                .chain(truth)
                .map(|s| s.as_ref().to_string())
                .collect();
            l.sort();
            l.dedup();
            l
        };
        let index: BTreeMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let mut counts = vec![vec![0u64; labels.len()]; labels.len()];
        for (p, t) in pred.iter().zip(truth) {
            counts[index[p.as_ref()]][index[t.as_ref()]] += 1;
        }
        Ok(Self { labels, counts })
    }

    /// Two-class matrix with labels `"0"` and `"1"`, both always present.
    pub fn binary(pred: &[bool], truth: &[bool]) -> Result<Self, MetricError> {
        if pred.len() != truth.len() {
            return Err(MetricError::LengthMismatch {
                left: pred.len(),
                right: truth.len(),
            });
        }
        let mut counts = vec![vec![0u64; 2]; 2];
        for (&p, &t) in pred.iter().zip(truth) {
            counts[usize::from(p)][usize::from(t)] += 1;
        }
        Ok(Self {
            labels: vec!["0".into(), "1".into()],
            counts,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn count(&self, predicted: usize, truth: usize) -> u64 {
        self.counts[predicted][truth]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    fn label_index(&self, label: &str) -> Result<usize, MetricError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| MetricError::UnknownLabel(label.to_string()))
    }

    /// `None` for an empty matrix.
    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.trace() as f64 / total as f64)
    }

    /// `None` when nothing was predicted positive.
    pub fn precision(&self, positive: &str) -> Result<Option<f64>, MetricError> {
        let k = self.label_index(positive)?;
        let predicted = self.row_sum(k);
        Ok((predicted > 0).then(|| self.counts[k][k] as f64 / predicted as f64))
    }

    /// `None` when no truth case is positive.
    pub fn recall(&self, positive: &str) -> Result<Option<f64>, MetricError> {
        let k = self.label_index(positive)?;
        let actual = self.col_sum(k);
        Ok((actual > 0).then(|| self.counts[k][k] as f64 / actual as f64))
    }
}

/// Cohen's kappa, evaluated in integer arithmetic up to a single division.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64, MetricError> {
    let total = u128::from(cm.total());
    if total == 0 {
        return Err(MetricError::Empty);
    }
    let chance: u128 = (0..cm.labels.len())
        .map(|i| u128::from(cm.row_sum(i)) * u128::from(cm.col_sum(i)))
        .sum();
    let denom = total * total - chance;
    if denom == 0 {
        return Err(MetricError::DegenerateAgreement);
    }
    let numer = (total * u128::from(cm.trace())) as i128 - chance as i128;
    Ok(numer as f64 / denom as f64)
}

/// One evaluation unit (a fold, a truncation depth) and its metric values;
/// `None` marks an undefined value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub unit: String,
    pub metrics: BTreeMap<String, Option<f64>>,
}

impl MetricRow {
    pub fn new(unit: impl Into<String>) -> Self {
        Self {
            unit: unit.into(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: Option<f64>) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied().flatten()
    }
}

/// Accuracy, kappa, precision and recall of a binary prediction, positive
/// label `"1"`.
pub fn classification_row(
    unit: impl Into<String>,
    pred: &[bool],
    truth: &[bool],
) -> Result<MetricRow, MetricError> {
    let cm = ConfusionMatrix::binary(pred, truth)?;
    Ok(MetricRow::new(unit)
        .with("accuracy", cm.accuracy())
        .with("kappa", kappa(&cm).ok())
        .with("precision", cm.precision("1")?)
        .with("recall", cm.recall("1")?))
}

/// Combined sizes up to this use the exact permutation distribution.
pub const EXACT_RANK_SUM_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RankSumMethod {
    Exact,
    NormalApprox,
}

/// Mann–Whitney rank-sum result; `u` counts pairs where group A exceeds B
/// (ties count one half).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankSumResult {
    pub u: f64,
    pub z: f64,
    pub p: f64,
    pub method: RankSumMethod,
}

/// Midranks of the pooled sample, doubled so they are integers.
fn doubled_midranks(pooled: &[f64]) -> (Vec<u64>, f64) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end, midrank doubled = start + 1 + end
        let r2 = (start + 1 + end) as u64;
        for &k in &order[start..end] {
            ranks[k] = r2;
        }
        let t = (end - start) as f64;
        tie_term += t * t * t - t;
        start = end;
    }
    (ranks, tie_term)
}

/// Exact two-sided p for the sum of `na` doubled ranks drawn from `ranks`.
fn exact_p(ranks: &[u64], na: usize, observed: u64) -> f64 {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // ways[k][s]: subsets of size k with doubled-rank sum s
    let mut ways = vec![vec![0f64; width]; na + 1];
    ways[0][0] = 1.0;
    for &r in ranks {
        for k in (1..=na).rev() {
            let (lower, upper) = ways.split_at_mut(k);
            let prev = &lower[k - 1];
            let cur = &mut upper[0];
            for s in (r as usize..width).rev() {
                cur[s] += prev[s - r as usize];
            }
        }
    }
    let dist = &ways[na];
    let total: f64 = dist.iter().sum();
    let obs = observed as usize;
    let lower: f64 = dist[..=obs].iter().sum();
    let upper: f64 = dist[obs..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

/// Two-sided Wilcoxon–Mann–Whitney rank-sum test with midranks for ties.
///
/// Exact when the pooled size is at most [`EXACT_RANK_SUM_LIMIT`], otherwise
/// a normal approximation with tie-corrected variance and a 0.5 continuity
/// correction. `z` is reported in both cases.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<RankSumResult, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::Empty);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, tie_term) = doubled_midranks(&pooled);
    let w2: u64 = ranks[..na].iter().sum();
    let u = w2 as f64 / 2.0 - (na * (na + 1)) as f64 / 2.0;

    let (naf, nbf, nf) = (na as f64, nb as f64, n as f64);
    let mu = naf * nbf / 2.0;
    let var = if n > 1 {
        naf * nbf / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)))
    } else {
        0.0
    };
    let diff = u - mu;
    let z = if var <= 0.0 {
        0.0
    } else {
        diff.signum() * (diff.abs() - 0.5).max(0.0) / var.sqrt()
    };

    if n <= EXACT_RANK_SUM_LIMIT {
        Ok(RankSumResult {
            u,
            z,
            p: exact_p(&ranks, na, w2),
            method: RankSumMethod::Exact,
        })
    } else {
        Ok(RankSumResult {
            u,
            z,
            p: if var <= 0.0 {
                1.0
            } else {
                normal_two_sided_p(z)
            },
            method: RankSumMethod::NormalApprox,
        })
    }
}
