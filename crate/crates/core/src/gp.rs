//! Zero-mean Gaussian-process regression and hyperparameter grid search.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kernels::{cross_gram, gram, kernel_eval, KernelError, KernelInput, KernelSpec};
use crate::linalg::{Factorization, LinalgError, SymmetricSolver};

/// Predictive variances below this reject a grid setting.
pub const NEGATIVE_VARIANCE_TOL: f64 = -1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("noise must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("GP needs at least one training point")]
    Empty,
    #[error("{inputs} inputs but {targets} targets")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("targets must be finite")]
    NonFiniteTarget,
    #[error("K + eps I could not be factorized: {0}")]
    SingularSystem(#[from] LinalgError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("grid search needs non-empty gamma and epsilon grids")]
    EmptyGrid,
    #[error("every grid setting was rejected")]
    NoAcceptedSetting,
}

/// Whether targets are log-days, in which case predictions also carry a
/// day-scale mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ResponseScale {
    Raw,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictiveDistribution {
    pub mean: f64,
    pub variance: f64,
    /// `exp(mean)` for log-scale fits.
    pub day_mean: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GpFit {
    spec: KernelSpec,
    epsilon: f64,
    inputs: Vec<KernelInput>,
    weights: DVector<f64>,
    solver: SymmetricSolver,
    scale: ResponseScale,
}

fn check_epsilon(epsilon: f64) -> Result<(), GpError> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(GpError::InvalidEpsilon(epsilon))
    }
}

fn with_noise(mut k: DMatrix<f64>, epsilon: f64) -> DMatrix<f64> {
    for i in 0..k.nrows() {
        k[(i, i)] += epsilon;
    }
    k
}

impl GpFit {
    pub fn new(
        spec: KernelSpec,
        inputs: Vec<KernelInput>,
        targets: &[f64],
        epsilon: f64,
        scale: ResponseScale,
    ) -> Result<Self, GpError> {
        check_epsilon(epsilon)?;
        if inputs.is_empty() {
            return Err(GpError::Empty);
        }
        if inputs.len() != targets.len() {
            return Err(GpError::LengthMismatch {
                inputs: inputs.len(),
                targets: targets.len(),
            });
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(GpError::NonFiniteTarget);
        }
        let k = gram(&spec, &inputs)?.into_inner();
        let solver = SymmetricSolver::new(with_noise(k, epsilon))?;
        let weights = solver.solve(&DVector::from_column_slice(targets))?;
        Ok(Self {
            spec,
            epsilon,
            inputs,
            weights,
            solver,
            scale,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `(K + eps I)^-1 f`
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn factorization(&self) -> Factorization {
        self.solver.factorization()
    }

    pub fn predict(&self, query: &KernelInput) -> Result<PredictiveDistribution, GpError> {
        let k_star = cross_gram(&self.spec, std::slice::from_ref(query), &self.inputs)?;
        let k_star = DVector::from_iterator(self.inputs.len(), k_star.row(0).iter().copied());
        let k_ss = kernel_eval(&self.spec, query, query)?;
        Ok(self.predict_with(&k_star, k_ss)?)
    }

    /// Prediction from precomputed `K(X, x*)` and `k(x*, x*)`.
    pub fn predict_with(
        &self,
        k_star: &DVector<f64>,
        k_ss: f64,
    ) -> Result<PredictiveDistribution, LinalgError> {
        predictive(&self.solver, &self.weights, k_star, k_ss, self.scale)
    }
}

fn predictive(
    solver: &SymmetricSolver,
    weights: &DVector<f64>,
    k_star: &DVector<f64>,
    k_ss: f64,
    scale: ResponseScale,
) -> Result<PredictiveDistribution, LinalgError> {
    let mean = k_star.dot(weights);
    let variance = k_ss - k_star.dot(&solver.solve(k_star)?);
    Ok(PredictiveDistribution {
        mean,
        variance,
        day_mean: (scale == ResponseScale::Log).then(|| mean.exp()),
    })
}

pub fn gp_fit(
    spec: KernelSpec,
    inputs: Vec<KernelInput>,
    targets: &[f64],
    epsilon: f64,
    scale: ResponseScale,
) -> Result<GpFit, GpError> {
    GpFit::new(spec, inputs, targets, epsilon, scale)
}

pub fn gp_predict(fit: &GpFit, query: &KernelInput) -> Result<PredictiveDistribution, GpError> {
    fit.predict(query)
}

/// Solves one training block for a set of queries given as kernel rows.
///
/// Returns the predictions or the first numeric failure.
pub fn predict_block(
    k_train: DMatrix<f64>,
    epsilon: f64,
    targets: &[f64],
    k_cross: &DMatrix<f64>,
    k_self: &[f64],
    scale: ResponseScale,
) -> Result<Vec<PredictiveDistribution>, GpError> {
    check_epsilon(epsilon)?;
    let solver = SymmetricSolver::new(with_noise(k_train, epsilon))?;
    let weights = solver.solve(&DVector::from_column_slice(targets))?;
    (0..k_cross.nrows())
        .map(|q| {
            let k_star = k_cross.row(q).transpose();
            Ok(predictive(&solver, &weights, &k_star, k_self[q], scale)?)
        })
        .collect()
}

/// Scores of one `(gamma, epsilon)` setting under some validation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SettingScore {
    pub ccc: Option<f64>,
    pub mae: f64,
    /// Smallest predictive variance seen while scoring.
    pub min_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SettingOutcome {
    Scored(SettingScore),
    Failed(String),
}

/// A validation scheme for [`grid_search`]; implementations score every
/// epsilon for one gamma so kernel work can be shared across the row.
pub trait EvalProtocol: Sync {
    fn evaluate(&self, gamma: f64, epsilons: &[f64]) -> Vec<SettingOutcome>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    NegativeVariance { min_variance: f64 },
    NumericFailure { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub gamma: f64,
    pub epsilon: f64,
    pub ccc: Option<f64>,
    pub mae: Option<f64>,
    pub min_variance: Option<f64>,
    pub rejection: Option<Rejection>,
}

impl GridRow {
    pub fn accepted(&self) -> bool {
        self.rejection.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSearchResult {
    /// Gamma-major grid order.
    pub rows: Vec<GridRow>,
    /// Highest CCC, ties to lower MAE, then grid order.
    pub best_ccc: usize,
    /// Lowest MAE, then grid order.
    pub best_mae: usize,
}

impl GridSearchResult {
    pub fn best(&self) -> &GridRow {
        &self.rows[self.best_ccc]
    }

    pub fn accepted_count(&self) -> usize {
        self.rows.iter().filter(|r| r.accepted()).count()
    }
}

pub fn grid_search(
    gamma_grid: &[f64],
    epsilon_grid: &[f64],
    protocol: &dyn EvalProtocol,
) -> Result<GridSearchResult, GpError> {
    if gamma_grid.is_empty() || epsilon_grid.is_empty() {
        return Err(GpError::EmptyGrid);
    }
    let rows: Vec<GridRow> = gamma_grid
        .par_iter()
        .map(|&gamma| {
            let outcomes = protocol.evaluate(gamma, epsilon_grid);
            debug_assert_eq!(outcomes.len(), epsilon_grid.len());
            epsilon_grid
                .iter()
                .zip(outcomes)
                .map(|(&epsilon, outcome)| to_row(gamma, epsilon, outcome))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let accepted = || rows.iter().enumerate().filter(|(_, r)| r.accepted());
    let mut best_ccc: Option<usize> = None;
    let mut best_mae: Option<usize> = None;
    for (i, row) in accepted() {
        let mae = row.mae.unwrap_or(f64::INFINITY);
        let better_ccc = best_ccc.is_none_or(|b| {
            let cur = &rows[b];
            let (c, bc) = (
                row.ccc.unwrap_or(f64::NEG_INFINITY),
                cur.ccc.unwrap_or(f64::NEG_INFINITY),
            );
            c > bc || (c == bc && mae < cur.mae.unwrap_or(f64::INFINITY))
        });
        if better_ccc {
            best_ccc = Some(i);
        }
        if best_mae.is_none_or(|b| mae < rows[b].mae.unwrap_or(f64::INFINITY)) {
            best_mae = Some(i);
        }
    }
    match (best_ccc, best_mae) {
        (Some(best_ccc), Some(best_mae)) => Ok(GridSearchResult {
            rows,
            best_ccc,
            best_mae,
        }),
        _ => Err(GpError::NoAcceptedSetting),
    }
}

fn to_row(gamma: f64, epsilon: f64, outcome: SettingOutcome) -> GridRow {
    match outcome {
        SettingOutcome::Scored(s) => GridRow {
            gamma,
            epsilon,
            ccc: s.ccc,
            mae: Some(s.mae),
            min_variance: Some(s.min_variance),
            rejection: (s.min_variance < NEGATIVE_VARIANCE_TOL).then_some(
                Rejection::NegativeVariance {
                    min_variance: s.min_variance,
                },
            ),
        },
        SettingOutcome::Failed(message) => GridRow {
            gamma,
            epsilon,
            ccc: None,
            mae: None,
            min_variance: None,
            rejection: Some(Rejection::NumericFailure { message }),
        },
    }
}

/// `n` values spaced evenly in log space over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| match i {
                    0 => lo,
                    i if i == n - 1 => hi,
                    _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

/// `n` values spaced evenly over `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

pub const DEFAULT_GAMMA_RANGE: (f64, f64) = (2e-5, 0.2);
pub const DEFAULT_GAMMA_COUNT: usize = 1000;
pub const DEFAULT_EPSILON_RANGE: (f64, f64) = (1e-4, 1e-2);
pub const DEFAULT_EPSILON_COUNT: usize = 100;

pub fn default_gamma_grid() -> Vec<f64> {
    log_grid(
        DEFAULT_GAMMA_RANGE.0,
        DEFAULT_GAMMA_RANGE.1,
        DEFAULT_GAMMA_COUNT,
    )
}

/// 1e-4, 2e-4, ..., 1e-2.
pub fn default_epsilon_grid() -> Vec<f64> {
    (1..=DEFAULT_EPSILON_COUNT)
        .map(|i| i as f64 * 1e-4)
        .collect()
}
