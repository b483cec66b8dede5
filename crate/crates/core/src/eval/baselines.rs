use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{Classifier, EvalError};
use crate::data::Dataset;
use crate::glm::{ridge_logistic_fit, DesignMatrix};
use crate::spca::{spca_fit, spca_predict, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnMode {
    /// Majority vote; ties go to the smallest label.
    Classify,
    /// Mean of the neighbours' targets.
    Regress,
}

fn check_training(
    train_x: &DMatrix<f64>,
    train_y_len: usize,
    test_x: &DMatrix<f64>,
) -> Result<(), EvalError> {
    if train_x.nrows() == 0 {
        return Err(EvalError::EmptyTraining);
    }
    if train_y_len != train_x.nrows() || test_x.ncols() != train_x.ncols() {
        return Err(EvalError::InvalidPlan(format!(
            "training is {}x{} with {} targets, test has {} columns",
            train_x.nrows(),
            train_x.ncols(),
            train_y_len,
            test_x.ncols()
        )));
    }
    Ok(())
}

/// k-nearest neighbours under Euclidean distance. Distance ties are broken
/// by training row order; features should already be on a common scale.
pub fn baseline_knn(
    k: usize,
    train_x: &DMatrix<f64>,
    train_y: &[f64],
    test_x: &DMatrix<f64>,
    mode: KnnMode,
) -> Result<Vec<f64>, EvalError> {
    check_training(train_x, train_y.len(), test_x)?;
    if k == 0 {
        return Err(EvalError::InvalidPlan("k must be positive".into()));
    }
    let k = k.min(train_x.nrows());
    Ok(test_x
        .row_iter()
        .map(|q| {
            let mut dist: Vec<(f64, usize)> = train_x
                .row_iter()
                .enumerate()
                .map(|(i, r)| ((r - q).norm_squared(), i))
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let neighbours = dist[..k].iter().map(|&(_, i)| train_y[i]);
            match mode {
                KnnMode::Regress => neighbours.sum::<f64>() / k as f64,
                KnnMode::Classify => {
                    let mut votes: Vec<(f64, usize)> = vec![];
                    for y in neighbours {
                        match votes.iter_mut().find(|(l, _)| *l == y) {
                            Some(v) => v.1 += 1,
                            None => votes.push((y, 1)),
                        }
                    }
                    votes
                        .into_iter()
                        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.total_cmp(&a.0)))
                        .map(|(l, _)| l)
                        .expect("k >= 1")
                }
            }
        })
        .collect())
}

/// Gaussian naive Bayes with per-class feature means and variances.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    pub classes: Vec<usize>,
    pub log_priors: Vec<f64>,
    /// classes x features
    pub means: DMatrix<f64>,
    pub variances: DMatrix<f64>,
}

impl GaussianNb {
    pub fn fit(x: &DMatrix<f64>, y: &[usize]) -> Result<Self, EvalError> {
        check_training(x, y.len(), x)?;
        let (n, p) = x.shape();
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &c) in y.iter().enumerate() {
            groups.entry(c).or_default().push(i);
        }
        // Variance floor keeps constant features from producing infinite densities.
        let max_var = (0..p).map(|j| x.column(j).variance()).fold(0.0, f64::max);
        let floor = 1e-9 * max_var.max(f64::MIN_POSITIVE);
        let k = groups.len();
        let mut means = DMatrix::zeros(k, p);
        let mut variances = DMatrix::zeros(k, p);
        let mut log_priors = Vec::with_capacity(k);
        for (c, rows) in groups.values().enumerate() {
            let sub = x.select_rows(rows);
            for j in 0..p {
                let col = sub.column(j);
                means[(c, j)] = col.mean();
                variances[(c, j)] = col.variance() + floor;
            }
            log_priors.push((rows.len() as f64 / n as f64).ln());
        }
        Ok(Self {
            classes: groups.into_keys().collect(),
            log_priors,
            means,
            variances,
        })
    }

    /// Posterior class probabilities, one row per query, columns in
    /// `classes` order.
    pub fn predict_proba(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let k = self.classes.len();
        let mut out = DMatrix::zeros(x.nrows(), k);
        for (i, q) in x.row_iter().enumerate() {
            let joint: Vec<f64> = (0..k)
                .map(|c| {
                    self.log_priors[c]
                        + q.iter()
                            .enumerate()
                            .map(|(j, &v)| {
                                let var = self.variances[(c, j)];
                                -0.5 * ((2.0 * std::f64::consts::PI * var).ln()
                                    + (v - self.means[(c, j)]).powi(2) / var)
                            })
                            .sum::<f64>()
                })
                .collect();
            let top = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let norm = top + joint.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
            for (c, l) in joint.iter().enumerate() {
                out[(i, c)] = (l - norm).exp();
            }
        }
        out
    }

    /// Most probable class; ties go to the smallest label.
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<usize> {
        let proba = self.predict_proba(x);
        proba
            .row_iter()
            .map(|r| {
                let mut best = 0;
                for c in 1..r.len() {
                    if r[c] > r[best] {
                        best = c;
                    }
                }
                self.classes[best]
            })
            .collect()
    }
}

pub fn baseline_gnb(
    train_x: &DMatrix<f64>,
    train_y: &[usize],
    test_x: &DMatrix<f64>,
) -> Result<DMatrix<f64>, EvalError> {
    check_training(train_x, train_y.len(), test_x)?;
    Ok(GaussianNb::fit(train_x, train_y)?.predict_proba(test_x))
}

fn standardized(
    train: &Dataset,
    test: &Dataset,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Standardizer), EvalError> {
    let s = Standardizer::fit(train)?;
    Ok((s.apply(train)?, s.apply(test)?, s))
}

/// Predicts the training majority; ties predict the negative class.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantMajority;

impl Classifier for ConstantMajority {
    fn name(&self) -> String {
        "constant".into()
    }

    fn fit_predict(&self, train: &Dataset, test: &Dataset) -> Result<Vec<bool>, EvalError> {
        if train.nrows() == 0 {
            return Err(EvalError::EmptyTraining);
        }
        let majority = 2 * train.positive_count() > train.nrows();
        Ok(vec![majority; test.nrows()])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpcaModel {
    pub alpha: f64,
    pub m: usize,
}

impl Classifier for SpcaModel {
    fn name(&self) -> String {
        format!("spca(alpha={}, m={})", self.alpha, self.m)
    }

    fn fit_predict(&self, train: &Dataset, test: &Dataset) -> Result<Vec<bool>, EvalError> {
        let c = spca_fit(train, self.alpha, self.m)?;
        Ok(spca_predict(&c, test)?
            .into_iter()
            .map(|p| p >= 0.5)
            .collect())
    }
}

/// Ridge logistic regression on standardized features.
#[derive(Debug, Clone, Copy)]
pub struct RidgeLogistic {
    pub lambda: f64,
}

impl Classifier for RidgeLogistic {
    fn name(&self) -> String {
        format!("ridge_logistic(lambda={})", self.lambda)
    }

    fn fit_predict(&self, train: &Dataset, test: &Dataset) -> Result<Vec<bool>, EvalError> {
        let (ztr, zte, s) = standardized(train, test)?;
        let design = DesignMatrix::with_intercept(&ztr, &s.names)?;
        let fit = ridge_logistic_fit(&design, &train.labels_f64(), self.lambda)?;
        Ok(fit
            .predict(&zte.insert_column(0, 1.0))
            .into_iter()
            .map(|p| p >= 0.5)
            .collect())
    }
}

/// kNN vote on standardized features.
#[derive(Debug, Clone, Copy)]
pub struct Knn {
    pub k: usize,
}

impl Classifier for Knn {
    fn name(&self) -> String {
        format!("knn(k={})", self.k)
    }

    fn fit_predict(&self, train: &Dataset, test: &Dataset) -> Result<Vec<bool>, EvalError> {
        if train.nrows() == 0 {
            return Err(EvalError::EmptyTraining);
        }
        let (ztr, zte, _) = standardized(train, test)?;
        let pred = baseline_knn(self.k, &ztr, &train.labels_f64(), &zte, KnnMode::Classify)?;
        Ok(pred.into_iter().map(|p| p == 1.0).collect())
    }
}

/// [`GaussianNb`] as a [`Classifier`] on raw features.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianNbModel;

impl Classifier for GaussianNbModel {
    fn name(&self) -> String {
        "gaussian_nb".into()
    }

    fn fit_predict(&self, train: &Dataset, test: &Dataset) -> Result<Vec<bool>, EvalError> {
        let y: Vec<usize> = train.y.iter().map(|&b| usize::from(b)).collect();
        let nb = GaussianNb::fit(&train.x, &y)?;
        Ok(nb.predict(&test.x).into_iter().map(|c| c == 1).collect())
    }
}
