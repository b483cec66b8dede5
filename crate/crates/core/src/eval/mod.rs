//! Evaluation protocols: repeated k-fold cross-validation for classifiers
//! and the truncated leave-one-out sweep for injury-day regression.

mod baselines;
mod cv;
mod sweep;

pub use baselines::{
    baseline_gnb, baseline_knn, ConstantMajority, GaussianNb, GaussianNbModel, Knn, KnnMode,
    RidgeLogistic, SpcaModel,
};
pub use cv::{
    aggregate, kfold_cv, random_folds, stratified_folds, Aggregate, Classifier, CvPlan, ModelReport,
};
pub use sweep::{
    interpret_prediction, truncation_sweep, ExposureLoo, RiskCall, SweepConfig, SweepRow,
    TruncationSweep,
};

use thiserror::Error;

use crate::glm::GlmError;
use crate::gp::GpError;
use crate::ingest::IngestError;
use crate::kernels::KernelError;
use crate::metrics::MetricError;
use crate::spca::SpcaError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{rows} rows cannot fill {folds} folds")]
    FoldTooSmall { rows: usize, folds: usize },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("training set is empty")]
    EmptyTraining,
    #[error("need at least {need} injured subjects, got {got}")]
    TooFewSubjects { need: usize, got: usize },
    #[error("no grid setting accepted at T-{a}")]
    NoAcceptedSetting { a: u32 },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Spca(#[from] SpcaError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}
