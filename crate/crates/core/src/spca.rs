//! Supervised principal component analysis for binary outcomes.
//!
//! Features are standardized, screened by the absolute slope of a
//! single-feature logistic fit, and the survivors are rotated onto their
//! principal axes. A logistic model on the leading `m` component scores
//! gives the class probability.

use log::{info, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::Dataset;
use crate::glm::{ridge_logistic_fit, DesignMatrix, GlmError, GlmFit};
use crate::linalg::{symmetric_eigen, LinalgError};
use crate::metrics::{rank_sum_test, RankSumResult};

/// Ridge penalty used when an unpenalised logistic fit does not converge.
pub const FALLBACK_LAMBDA: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpcaError {
    #[error("every feature column has zero variance")]
    AllColumnsDegenerate,
    #[error("need at least two rows")]
    TooFewRows,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("number of components must be at least 1")]
    InvalidComponents,
    #[error("alpha must be finite and non-negative, got {0}")]
    InvalidAlpha(f64),
    #[error("alpha = {alpha} leaves {survivors} features, fewer than m = {m}")]
    TooFewSurvivors {
        alpha: f64,
        survivors: usize,
        m: usize,
    },
    #[error("feature {0:?} missing from the input")]
    MissingFeature(String),
    #[error("eigendecomposition failed: {0}")]
    NumericalFailure(#[from] LinalgError),
    #[error(transparent)]
    Glm(#[from] GlmError),
}

/// Column means and population standard deviations learned on a training
/// table; zero-variance columns are dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardizer {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub dropped: Vec<String>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Result<Self, SpcaError> {
        let n = data.nrows();
        if n < 2 {
            return Err(SpcaError::TooFewRows);
        }
        let mut s = Self {
            names: vec![],
            means: vec![],
            sds: vec![],
            dropped: vec![],
        };
        for (j, name) in data.names.iter().enumerate() {
            let col = data.x.column(j);
            let mean = col.sum() / n as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            if sd > 0.0 && sd.is_finite() {
                s.names.push(name.clone());
                s.means.push(mean);
                s.sds.push(sd);
            } else {
                warn!("dropping zero-variance feature {name}");
                s.dropped.push(name.clone());
            }
        }
        if s.names.is_empty() {
            return Err(SpcaError::AllColumnsDegenerate);
        }
        Ok(s)
    }

    /// Standardized retained columns, looked up by name.
    pub fn apply(&self, data: &Dataset) -> Result<DMatrix<f64>, SpcaError> {
        let idx = self
            .names
            .iter()
            .map(|n| {
                data.column_index(n)
                    .ok_or_else(|| SpcaError::MissingFeature(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DMatrix::from_fn(data.nrows(), idx.len(), |i, j| {
            (data.x[(i, idx[j])] - self.means[j]) / self.sds[j]
        }))
    }

    pub fn destandardize(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| {
            z[(i, j)] * self.sds[j] + self.means[j]
        })
    }
}

pub fn standardize(data: &Dataset) -> Result<(DMatrix<f64>, Standardizer), SpcaError> {
    let s = Standardizer::fit(data)?;
    Ok((s.apply(data)?, s))
}

fn labels(y: &[bool]) -> Vec<f64> {
    y.iter().map(|&b| f64::from(u8::from(b))).collect()
}

/// Unpenalised logistic fit with the ridge fallback.
fn logistic_with_fallback(design: &DesignMatrix, y: &[f64]) -> Result<GlmFit, GlmError> {
    match ridge_logistic_fit(design, y, 0.0) {
        Err(e @ (GlmError::Nonconvergence { .. } | GlmError::RankDeficient)) => {
            info!("logistic fit failed ({e}); refitting with lambda = {FALLBACK_LAMBDA}");
            ridge_logistic_fit(design, y, FALLBACK_LAMBDA)
        }
        other => other,
    }
}

/// Slope of each single-feature logistic fit.
pub fn univariate_slopes(z: &DMatrix<f64>, y: &[bool]) -> Result<Vec<f64>, SpcaError> {
    if !y.contains(&true) || !y.contains(&false) {
        return Err(SpcaError::SingleClass);
    }
    let yf = labels(y);
    (0..z.ncols())
        .into_par_iter()
        .map(|j| {
            let design =
                DesignMatrix::with_intercept(&z.columns(j, 1).into_owned(), &[format!("f{j}")])?;
            Ok(logistic_with_fallback(&design, &yf)?.coefficients[1])
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Indices of columns whose univariate slope satisfies `|beta| >= alpha`.
pub fn univariate_filter(
    z: &DMatrix<f64>,
    y: &[bool],
    alpha: f64,
) -> Result<Vec<usize>, SpcaError> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(SpcaError::InvalidAlpha(alpha));
    }
    Ok(univariate_slopes(z, y)?
        .iter()
        .enumerate()
        .filter(|(_, b)| b.abs() >= alpha)
        .map(|(j, _)| j)
        .collect())
}

/// Principal axes of `X'X / n`. Row `k` of `components` is the `k`-th
/// eigenvector, with eigenvalues in descending order. Each row is signed so
/// its largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaModel {
    #[serde(skip)]
    pub components: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn scores(&self, z: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
        z * self.components.rows(0, m).transpose()
    }

    pub fn explained(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        self.eigenvalues
            .iter()
            .map(|v| v.max(0.0) / total)
            .collect()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let c = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigenvalues));
        self.components.transpose() * c * &self.components
    }
}

pub fn pca_fit(z: &DMatrix<f64>) -> Result<PcaModel, SpcaError> {
    let n = z.nrows();
    if n < 2 {
        return Err(SpcaError::TooFewRows);
    }
    let mut sigma = z.transpose() * z / n as f64;
    // symmetric to the last bit
    sigma = (&sigma + sigma.transpose()) / 2.0;
    let eig = symmetric_eigen(&sigma)?;
    let mut components = eig.vectors.transpose();
    for mut row in components.row_iter_mut() {
        let lead = row
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0f64), |best, (j, v)| {
                if v.abs() > best.1.abs() {
                    (j, v)
                } else {
                    best
                }
            });
        if lead.1 < 0.0 {
            row.neg_mut();
        }
    }
    Ok(PcaModel {
        components,
        eigenvalues: eig.values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpcaClassifier {
    pub alpha: f64,
    pub m: usize,
    pub standardizer: Standardizer,
    /// Indices into `standardizer.names` that passed the filter.
    pub survivors: Vec<usize>,
    pub pca: PcaModel,
    pub logistic: GlmFit,
}

impl SpcaClassifier {
    pub fn survivor_names(&self) -> Vec<&str> {
        self.survivors
            .iter()
            .map(|&j| self.standardizer.names[j].as_str())
            .collect()
    }

    fn scores(&self, data: &Dataset) -> Result<DMatrix<f64>, SpcaError> {
        let z = self
            .standardizer
            .apply(data)?
            .select_columns(&self.survivors);
        Ok(self.pca.scores(&z, self.m))
    }
}

fn component_names(m: usize) -> Vec<String> {
    (1..=m).map(|k| format!("PC{k}")).collect()
}

pub fn spca_fit(data: &Dataset, alpha: f64, m: usize) -> Result<SpcaClassifier, SpcaError> {
    if m == 0 {
        return Err(SpcaError::InvalidComponents);
    }
    let (z, standardizer) = standardize(data)?;
    let survivors = univariate_filter(&z, &data.y, alpha)?;
    if survivors.len() < m {
        return Err(SpcaError::TooFewSurvivors {
            alpha,
            survivors: survivors.len(),
            m,
        });
    }
    let zs = z.select_columns(&survivors);
    let pca = pca_fit(&zs)?;
    let scores = pca.scores(&zs, m);
    let design = DesignMatrix::with_intercept(&scores, &component_names(m))?;
    let logistic = logistic_with_fallback(&design, &labels(&data.y))?;
    Ok(SpcaClassifier {
        alpha,
        m,
        standardizer,
        survivors,
        pca,
        logistic,
    })
}

/// Positive-class probabilities; features are matched by name.
pub fn spca_predict(c: &SpcaClassifier, data: &Dataset) -> Result<Vec<f64>, SpcaError> {
    let scores = c.scores(data)?;
    let x = scores.insert_column(0, 1.0);
    Ok(c.logistic.predict(&x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeRow {
    pub component: usize,
    pub eigenvalue: f64,
    pub explained: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Loading {
    pub feature: String,
    pub loading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSummary {
    pub component: usize,
    pub explained: f64,
    /// By descending magnitude, ties by feature name.
    pub loadings: Vec<Loading>,
    pub median_positive: Option<f64>,
    pub median_negative: Option<f64>,
    /// Wilcoxon-Mann-Whitney rank-sum test, positive vs negative scores.
    pub rank_sum: Option<RankSumResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReport {
    pub scree: Vec<ScreeRow>,
    pub components: Vec<ComponentSummary>,
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

pub fn component_report(c: &SpcaClassifier, data: &Dataset) -> Result<ComponentReport, SpcaError> {
    let explained = c.pca.explained();
    let mut cumulative = 0.0;
    let scree = c
        .pca
        .eigenvalues
        .iter()
        .zip(&explained)
        .enumerate()
        .map(|(k, (&eigenvalue, &e))| {
            cumulative += e;
            ScreeRow {
                component: k + 1,
                eigenvalue,
                explained: e,
                cumulative,
            }
        })
        .collect();

    let names = c.survivor_names();
    let scores = c.scores(data)?;
    let components = (0..c.m)
        .map(|k| {
            let mut loadings: Vec<Loading> = names
                .iter()
                .zip(c.pca.components.row(k).iter())
                .map(|(n, &l)| Loading {
                    feature: n.to_string(),
                    loading: l,
                })
                .collect();
            loadings.sort_by(|a, b| {
                b.loading
                    .abs()
                    .total_cmp(&a.loading.abs())
                    .then_with(|| a.feature.cmp(&b.feature))
            });
            let (mut pos, mut neg): (Vec<f64>, Vec<f64>) = (vec![], vec![]);
            for (s, &label) in scores.column(k).iter().zip(&data.y) {
                if label {
                    pos.push(*s);
                } else {
                    neg.push(*s);
                }
            }
            let rank_sum = rank_sum_test(&pos, &neg).ok();
            ComponentSummary {
                component: k + 1,
                explained: explained[k],
                loadings,
                median_positive: median(&mut pos),
                median_negative: median(&mut neg),
                rank_sum,
            }
        })
        .collect();
    Ok(ComponentReport { scree, components })
}
