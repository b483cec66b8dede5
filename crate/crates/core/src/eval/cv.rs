use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::EvalError;
use crate::data::Dataset;
use crate::metrics::{classification_row, MetricRow};

/// Fold index per row; rows are shuffled and dealt round-robin.
pub fn random_folds(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = pos % k;
    }
    out
}

/// Fold index per row, dealing each class in turn so every fold receives
/// its proportional share of each label to within one row.
pub fn stratified_folds<T: Ord>(labels: &[T], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut groups: BTreeMap<&T, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut out = vec![0; labels.len()];
    let mut next = 0;
    for members in groups.values_mut() {
        members.shuffle(rng);
        for &i in members.iter() {
            out[i] = next % k;
            next += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvPlan {
    pub repeats: usize,
    pub folds: usize,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            repeats: 10,
            folds: 10,
            stratified: true,
            seed: 0,
        }
    }
}

impl CvPlan {
    /// Fold index per row for one repeat; repeat `r` draws from seed
    /// `seed + r`.
    pub fn assignment(&self, labels: &[bool], repeat: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(repeat as u64));
        if self.stratified {
            stratified_folds(labels, self.folds, &mut rng)
        } else {
            random_folds(labels.len(), self.folds, &mut rng)
        }
    }
}

/// A binary classifier that can be trained and applied in one call.
pub trait Classifier: Sync {
    fn name(&self) -> String;
    fn fit_predict(&self, train: &Dataset, test: &Dataset) -> Result<Vec<bool>, EvalError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: Option<f64>,
    /// Sample standard deviation; needs two defined values.
    pub sd: Option<f64>,
    /// Number of units with a defined value.
    pub n: usize,
}

pub fn aggregate(rows: &[MetricRow]) -> BTreeMap<String, Aggregate> {
    let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for row in rows {
        for (name, v) in &row.metrics {
            let entry = values.entry(name).or_default();
            if let Some(v) = v {
                entry.push(*v);
            }
        }
    }
    values
        .into_iter()
        .map(|(name, v)| {
            let n = v.len();
            let mean = (n > 0).then(|| v.iter().sum::<f64>() / n as f64);
            let sd = mean
                .filter(|_| n > 1)
                .map(|m| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
            (name.to_string(), Aggregate { mean, sd, n })
        })
        .collect()
}

/// Per-unit metric rows with their aggregate and enough context to rerun.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub protocol: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    pub invocation: Vec<String>,
    pub rows: Vec<MetricRow>,
    pub aggregate: BTreeMap<String, Aggregate>,
}

impl ModelReport {
    pub fn new(protocol: impl Into<String>, seed: u64, rows: Vec<MetricRow>) -> Self {
        Self {
            protocol: protocol.into(),
            config: BTreeMap::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            invocation: vec![],
            aggregate: aggregate(&rows),
            rows,
        }
    }
}

/// Repeated k-fold cross-validation; rows are ordered by (repeat, fold).
pub fn kfold_cv(
    model: &dyn Classifier,
    data: &Dataset,
    plan: &CvPlan,
) -> Result<ModelReport, EvalError> {
    if plan.folds < 2 || plan.repeats == 0 {
        return Err(EvalError::InvalidPlan(
            "need folds >= 2 and repeats >= 1".into(),
        ));
    }
    if data.nrows() < plan.folds {
        return Err(EvalError::FoldTooSmall {
            rows: data.nrows(),
            folds: plan.folds,
        });
    }
    let assignments: Vec<Vec<usize>> = (0..plan.repeats)
        .map(|r| plan.assignment(&data.y, r))
        .collect();
    let units: Vec<(usize, usize)> = (0..plan.repeats)
        .flat_map(|r| (0..plan.folds).map(move |f| (r, f)))
        .collect();
    let rows = units
        .par_iter()
        .map(|&(r, f)| {
            let a = &assignments[r];
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..data.nrows()).partition(|&i| a[i] == f);
            let pred = model.fit_predict(&data.select_rows(&train), &data.select_rows(&test))?;
            let truth: Vec<bool> = test.iter().map(|&i| data.y[i]).collect();
            Ok(classification_row(
                format!("repeat{}_fold{}", r + 1, f + 1),
                &pred,
                &truth,
            )?)
        })
        .collect::<Vec<Result<MetricRow, EvalError>>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = ModelReport::new(
        format!("{}x{} cv", plan.repeats, plan.folds),
        plan.seed,
        rows,
    );
    report.config.insert("model".into(), model.name());
    report
        .config
        .insert("stratified".into(), plan.stratified.to_string());
    Ok(report)
}
