//! Maps errors to exit codes: 1 for bad input, 2 for numeric failure.

use std::error::Error;

use pitchguard::eval::EvalError;
use pitchguard::glm::GlmError;
use pitchguard::gp::GpError;
use pitchguard::linalg::LinalgError;
use pitchguard::spca::SpcaError;

pub const VALIDATION: u8 = 1;
pub const NUMERIC: u8 = 2;

fn glm_numeric(e: &GlmError) -> bool {
    matches!(
        e,
        GlmError::RankDeficient | GlmError::Nonconvergence { .. } | GlmError::RefitFailure { .. }
    )
}

fn gp_numeric(e: &GpError) -> bool {
    matches!(e, GpError::SingularSystem(_) | GpError::NoAcceptedSetting)
}

fn spca_numeric(e: &SpcaError) -> bool {
    match e {
        SpcaError::NumericalFailure(_) => true,
        SpcaError::Glm(g) => glm_numeric(g),
        _ => false,
    }
}

fn is_numeric(e: &(dyn Error + 'static)) -> bool {
    if e.is::<LinalgError>() {
        return true;
    }
    if let Some(e) = e.downcast_ref::<GlmError>() {
        return glm_numeric(e);
    }
    if let Some(e) = e.downcast_ref::<GpError>() {
        return gp_numeric(e);
    }
    if let Some(e) = e.downcast_ref::<SpcaError>() {
        return spca_numeric(e);
    }
    if let Some(e) = e.downcast_ref::<EvalError>() {
        return match e {
            EvalError::NoAcceptedSetting { .. } => true,
            EvalError::Gp(g) => gp_numeric(g),
            EvalError::Glm(g) => glm_numeric(g),
            EvalError::Spca(s) => spca_numeric(s),
            _ => false,
        };
    }
    false
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(is_numeric) {
        NUMERIC
    } else {
        VALIDATION
    }
}
