//! Injury-risk analytics for football squads.
//!
//! Exposure and GPS ingestion, dynamic time warping and the kernels built on
//! it, Gaussian-process regression of injury day, generalised linear models,
//! supervised PCA, correlation-based feature selection and the evaluation
//! protocols that tie them together.

pub mod config;
pub mod data;
pub mod dtw;
pub mod eval;
pub mod featsel;
pub mod glm;
pub mod gp;
pub mod ingest;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod spca;
pub mod special;
