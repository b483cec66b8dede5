//! Generalised linear models fitted by iteratively reweighted least squares.
//!
//! Gaussian (identity), Poisson (log) and binomial (logit) families, an
//! optional L2 penalty on every non-intercept coefficient, deviance
//! residuals, heteroscedasticity-consistent standard errors, Cook's distance
//! by explicit leave-one-out refits and likelihood-ratio tests.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::special::{chi2_sf, ln_gamma};

pub const INTERCEPT: &str = "(Intercept)";
pub const IRLS_TOL: f64 = 1e-10;
pub const IRLS_MAX_ITER: usize = 100;
pub const MAX_HALVINGS: usize = 20;
/// Fitted probabilities closer than this to 0 or 1 signal separation.
pub const SEPARATION_EPS: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlmError {
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("IRLS did not converge after {iterations} iterations: {reason}")]
    Nonconvergence { iterations: usize, reason: String },
    #[error("{rows} design rows but {responses} responses")]
    LengthMismatch { rows: usize, responses: usize },
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("column {0:?} is all zero")]
    ZeroColumn(String),
    #[error("design contains non-finite values")]
    NonFinite,
    #[error("penalty must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error("need more observations ({n}) than coefficients ({k})")]
    TooFewObservations { n: usize, k: usize },
    #[error("refit without observation {index} failed: {source}")]
    RefitFailure {
        index: usize,
        #[source]
        source: Box<GlmError>,
    },
    #[error("reduced model is not nested in the full model")]
    NotNested,
    #[error("bad formula: {0}")]
    Formula(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Poisson,
    Binomial,
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "poisson" => Ok(Self::Poisson),
            "binomial" | "logistic" => Ok(Self::Binomial),
            other => Err(format!("unknown family {other:?}")),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Poisson => "poisson",
            Self::Binomial => "binomial",
        })
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Family {
    fn inverse_link(self, eta: f64) -> f64 {
        match self {
            Self::Gaussian => eta,
            Self::Poisson => eta.exp(),
            Self::Binomial => 1.0 / (1.0 + (-eta).exp()),
        }
    }

    fn link(self, mu: f64) -> f64 {
        match self {
            Self::Gaussian => mu,
            Self::Poisson => mu.ln(),
            Self::Binomial => (mu / (1.0 - mu)).ln(),
        }
    }

    fn initial_mu(self, y: f64) -> f64 {
        match self {
            Self::Gaussian => y,
            Self::Poisson => y + 0.1,
            Self::Binomial => (y + 0.5) / 2.0,
        }
    }

    /// Variance function; for these canonical links also `dmu/deta`.
    fn variance(self, mu: f64) -> f64 {
        match self {
            Self::Gaussian => 1.0,
            Self::Poisson => mu,
            Self::Binomial => mu * (1.0 - mu),
        }
    }

    /// Squared deviance residual of one observation.
    fn unit_deviance(self, y: f64, mu: f64, eta: f64) -> f64 {
        match self {
            Self::Gaussian => (y - mu).powi(2),
            Self::Poisson => {
                if y == 0.0 {
                    2.0 * mu
                } else {
                    2.0 * (y * (y / mu).ln() - (y - mu))
                }
            }
            // -2 [y ln mu + (1 - y) ln(1 - mu)] written in eta for stability
            Self::Binomial => 2.0 * (y * softplus(-eta) + (1.0 - y) * softplus(eta)),
        }
    }

    fn check_response(self, y: &[f64]) -> Result<(), GlmError> {
        let bad = |why: &str| Err(GlmError::InvalidResponse(why.to_string()));
        if y.iter().any(|v| !v.is_finite()) {
            return bad("non-finite response");
        }
        match self {
            Self::Gaussian => Ok(()),
            Self::Poisson if y.iter().any(|&v| v < 0.0 || v.fract() != 0.0) => {
                bad("Poisson responses must be non-negative integers")
            }
            Self::Binomial if y.iter().any(|&v| v != 0.0 && v != 1.0) => {
                bad("binomial responses must be 0 or 1")
            }
            _ => Ok(()),
        }
    }
}

/// Column data handed to [`DesignMatrix::from_terms`].
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl Column {
    /// Numeric if every entry parses as a float.
    pub fn parse(values: &[String]) -> Self {
        let parsed: Option<Vec<f64>> = values.iter().map(|v| v.trim().parse().ok()).collect();
        match parsed {
            Some(v) => Self::Numeric(v),
            None => Self::Categorical(values.to_vec()),
        }
    }

    fn len(&self) -> usize {
        match self {
            Self::Numeric(v) => v.len(),
            Self::Categorical(v) => v.len(),
        }
    }
}

/// Model matrix with a leading intercept column. Categorical terms are
/// one-hot encoded against their lexicographically first level; the
/// generated columns are named `term[level]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignMatrix {
    #[serde(skip)]
    x: DMatrix<f64>,
    names: Vec<String>,
    /// Categorical term -> generated column names.
    factors: BTreeMap<String, Vec<String>>,
    intercept: bool,
}

impl DesignMatrix {
    /// Raw matrix without intercept handling; column 0 is treated as the
    /// intercept iff it is named [`INTERCEPT`].
    pub fn new(x: DMatrix<f64>, names: Vec<String>) -> Result<Self, GlmError> {
        assert_eq!(names.len(), x.ncols(), "one name per column");
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GlmError::NonFinite);
        }
        if let Some(j) = (0..x.ncols()).find(|&j| x.column(j).iter().all(|v| *v == 0.0)) {
            return Err(GlmError::ZeroColumn(names[j].clone()));
        }
        let intercept = names.first().is_some_and(|n| n == INTERCEPT);
        Ok(Self {
            x,
            names,
            factors: BTreeMap::new(),
            intercept,
        })
    }

    /// Intercept followed by each term in order.
    pub fn from_terms(n: usize, terms: Vec<(String, Column)>) -> Result<Self, GlmError> {
        let mut names = vec![INTERCEPT.to_string()];
        let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
        let mut factors = BTreeMap::new();
        for (name, col) in terms {
            if col.len() != n {
                return Err(GlmError::LengthMismatch {
                    rows: n,
                    responses: col.len(),
                });
            }
            match col {
                Column::Numeric(v) => {
                    names.push(name);
                    cols.push(v);
                }
                Column::Categorical(v) => {
                    let mut levels: Vec<&String> = v.iter().collect();
                    levels.sort();
                    levels.dedup();
                    let mut generated = Vec::new();
                    for level in levels.iter().skip(1) {
                        let col_name = format!("{name}[{level}]");
                        cols.push(v.iter().map(|x| f64::from(u8::from(x == *level))).collect());
                        names.push(col_name.clone());
                        generated.push(col_name);
                    }
                    factors.insert(name, generated);
                }
            }
        }
        let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        let mut d = Self::new(x, names)?;
        d.factors = factors;
        Ok(d)
    }

    /// Intercept plus numeric columns.
    pub fn with_intercept(x: &DMatrix<f64>, names: &[String]) -> Result<Self, GlmError> {
        let terms = names
            .iter()
            .enumerate()
            .map(|(j, n)| {
                (
                    n.clone(),
                    Column::Numeric(x.column(j).iter().copied().collect()),
                )
            })
            .collect();
        Self::from_terms(x.nrows(), terms)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn factors(&self) -> &BTreeMap<String, Vec<String>> {
        &self.factors
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    fn without_row(&self, i: usize) -> Self {
        Self {
            x: self.x.clone().remove_row(i),
            names: self.names.clone(),
            factors: self.factors.clone(),
            intercept: self.intercept,
        }
    }
}

/// `response ~ term + term`, or `response ~ 1` for intercept only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Formula {
    pub response: String,
    pub terms: Vec<String>,
}

impl FromStr for Formula {
    type Err = GlmError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lhs, rhs) = s
            .split_once('~')
            .ok_or_else(|| GlmError::Formula(format!("missing '~' in {s:?}")))?;
        let response = lhs.trim().to_string();
        if response.is_empty() {
            return Err(GlmError::Formula("empty response".into()));
        }
        let mut terms = Vec::new();
        for t in rhs.split('+').map(str::trim) {
            match t {
                "" => return Err(GlmError::Formula(format!("empty term in {s:?}"))),
                "1" => {}
                t if terms.iter().any(|x: &String| x == t) => {
                    return Err(GlmError::Formula(format!("duplicate term {t:?}")))
                }
                t => terms.push(t.to_string()),
            }
        }
        Ok(Self { response, terms })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlmFit {
    pub family: Family,
    pub lambda: f64,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
    pub linear_predictor: Vec<f64>,
    pub deviance: f64,
    pub deviance_residuals: Vec<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest absolute component of the penalised score at the solution.
    pub max_abs_score: f64,
    /// Penalised deviance after each iteration.
    pub objective_trace: Vec<f64>,
    #[serde(skip)]
    working_weights: Vec<f64>,
    #[serde(skip)]
    response: Vec<f64>,
    #[serde(skip)]
    penalised: Vec<bool>,
}

impl GlmFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| self.coefficients[j])
    }

    /// Mean response for new rows laid out like the training design.
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let beta = DVector::from_column_slice(&self.coefficients);
        (x * beta)
            .iter()
            .map(|&e| self.family.inverse_link(e))
            .collect()
    }

    pub fn response_residuals(&self) -> Vec<f64> {
        self.response
            .iter()
            .zip(&self.fitted)
            .map(|(y, m)| y - m)
            .collect()
    }

    fn penalty(&self) -> DMatrix<f64> {
        penalty_matrix(&self.penalised, self.lambda)
    }
}

fn penalty_matrix(penalised: &[bool], lambda: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        penalised.len(),
        penalised
            .iter()
            .map(|&p| if p { 2.0 * lambda } else { 0.0 }),
    ))
}

struct State {
    beta: DVector<f64>,
    eta: DVector<f64>,
    mu: DVector<f64>,
    objective: f64,
}

fn evaluate(
    family: Family,
    x: &DMatrix<f64>,
    y: &[f64],
    pen: &DMatrix<f64>,
    beta: DVector<f64>,
) -> State {
    let eta = x * &beta;
    let mu = eta.map(|e| family.inverse_link(e));
    let dev: f64 = y
        .iter()
        .zip(mu.iter().zip(eta.iter()))
        .map(|(&yi, (&m, &e))| family.unit_deviance(yi, m, e))
        .sum();
    // pen holds 2 lambda, so this is D + 2 lambda |beta|^2 = -2 (loglik - lambda |beta|^2) + const
    let objective = dev + (beta.transpose() * pen * &beta)[0];
    State {
        beta,
        eta,
        mu,
        objective,
    }
}

/// Working weights, clamped away from zero so the normal equations stay
/// solvable when fitted values saturate.
fn working_weights(family: Family, mu: &DVector<f64>) -> DVector<f64> {
    mu.map(|m| family.variance(m).max(1e-300))
}

fn check_rank(x: &DMatrix<f64>) -> Result<(), GlmError> {
    let sv = x.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if max.is_nan() || max <= 0.0 || min <= max * 1e-10 * x.nrows().max(x.ncols()) as f64 {
        return Err(GlmError::RankDeficient);
    }
    Ok(())
}

/// IRLS for `family` maximising `loglik - lambda * |beta_-0|^2`.
pub fn glm_fit(
    design: &DesignMatrix,
    y: &[f64],
    family: Family,
    lambda: f64,
) -> Result<GlmFit, GlmError> {
    let x = design.matrix();
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(GlmError::LengthMismatch {
            rows: n,
            responses: y.len(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(GlmError::InvalidLambda(lambda));
    }
    family.check_response(y)?;
    if lambda == 0.0 {
        if n < k {
            return Err(GlmError::RankDeficient);
        }
        check_rank(x)?;
    }
    let penalised: Vec<bool> = (0..k)
        .map(|j| !(j == 0 && design.has_intercept()))
        .collect();
    let pen = penalty_matrix(&penalised, lambda);

    let mut mu = DVector::from_iterator(n, y.iter().map(|&v| family.initial_mu(v)));
    let mut eta = mu.map(|m| family.link(m));
    let mut current: Option<State> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=IRLS_MAX_ITER {
        iterations = iter;
        let w = working_weights(family, &mu);
        let z = DVector::from_iterator(n, (0..n).map(|i| eta[i] + (y[i] - mu[i]) / w[i]));
        let xtw = DMatrix::from_fn(k, n, |j, i| x[(i, j)] * w[i]);
        let lhs = &xtw * x + &pen;
        let rhs = &xtw * z;
        let chol = Cholesky::new(lhs).ok_or(GlmError::RankDeficient)?;
        let mut next = evaluate(family, x, y, &pen, chol.solve(&rhs));

        if let Some(prev) = &current {
            let mut halvings = 0;
            while !next.objective.is_finite() || next.objective > prev.objective {
                if halvings == MAX_HALVINGS {
                    break;
                }
                let beta = (&prev.beta + &next.beta) / 2.0;
                next = evaluate(family, x, y, &pen, beta);
                halvings += 1;
            }
            if !next.objective.is_finite() || next.objective > prev.objective {
                // No improving step exists along the Newton direction.
                converged = true;
                break;
            }
        } else if !next.objective.is_finite() {
            return Err(GlmError::Nonconvergence {
                iterations: iter,
                reason: "non-finite deviance".into(),
            });
        }

        let change = current
            .as_ref()
            .map(|prev| (next.objective - prev.objective).abs() / (next.objective.abs() + 0.1));
        trace.push(next.objective);
        mu = next.mu.clone();
        eta = next.eta.clone();
        current = Some(next);
        if change.is_some_and(|c| c < IRLS_TOL) {
            converged = true;
            break;
        }
    }

    let state = current.expect("at least one IRLS iteration");
    if family == Family::Binomial && lambda == 0.0 {
        let saturated = state.mu.iter().any(|&m| m.min(1.0 - m) < SEPARATION_EPS);
        if saturated {
            return Err(GlmError::Nonconvergence {
                iterations,
                reason: "fitted probabilities numerically 0 or 1 (separation)".into(),
            });
        }
        if !converged {
            return Err(GlmError::Nonconvergence {
                iterations,
                reason: "iteration limit reached".into(),
            });
        }
    }

    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            let d = family
                .unit_deviance(y[i], state.mu[i], state.eta[i])
                .max(0.0);
            (y[i] - state.mu[i]).signum() * d.sqrt()
        })
        .collect();
    let deviance = residuals.iter().map(|d| d * d).sum();
    let resid = DVector::from_iterator(n, (0..n).map(|i| y[i] - state.mu[i]));
    let score = x.transpose() * resid - &pen * &state.beta;
    let max_abs_score = score.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    Ok(GlmFit {
        family,
        lambda,
        names: design.names().to_vec(),
        coefficients: state.beta.iter().copied().collect(),
        fitted: state.mu.iter().copied().collect(),
        linear_predictor: state.eta.iter().copied().collect(),
        deviance,
        deviance_residuals: residuals,
        log_likelihood: log_likelihood(family, y, &state),
        converged,
        iterations,
        max_abs_score,
        objective_trace: trace,
        working_weights: working_weights(family, &state.mu).iter().copied().collect(),
        response: y.to_vec(),
        penalised,
    })
}

fn log_likelihood(family: Family, y: &[f64], s: &State) -> f64 {
    match family {
        Family::Gaussian => {
            let n = y.len() as f64;
            let rss: f64 = y
                .iter()
                .zip(s.mu.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            let sigma2 = rss / n;
            if sigma2 == 0.0 {
                f64::INFINITY
            } else {
                -n / 2.0 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0)
            }
        }
        Family::Poisson => y
            .iter()
            .zip(s.mu.iter().zip(s.eta.iter()))
            .map(|(&yi, (&m, &e))| yi * e - m - ln_gamma(yi + 1.0))
            .sum(),
        Family::Binomial => y
            .iter()
            .zip(s.eta.iter())
            .map(|(&yi, &e)| -(yi * softplus(-e) + (1.0 - yi) * softplus(e)))
            .sum(),
    }
}

pub fn poisson_fit(design: &DesignMatrix, y: &[f64]) -> Result<GlmFit, GlmError> {
    glm_fit(design, y, Family::Poisson, 0.0)
}

pub fn ridge_logistic_fit(
    design: &DesignMatrix,
    y: &[f64],
    lambda: f64,
) -> Result<GlmFit, GlmError> {
    glm_fit(design, y, Family::Binomial, lambda)
}

pub fn ols_fit(design: &DesignMatrix, y: &[f64]) -> Result<GlmFit, GlmError> {
    glm_fit(design, y, Family::Gaussian, 0.0)
}

pub fn deviance_residuals(fit: &GlmFit) -> &[f64] {
    &fit.deviance_residuals
}

/// Sandwich `B^-1 X' diag(r^2) X B^-1` with `B = X'WX (+ penalty)` and
/// response residuals `r`; square roots of its diagonal.
pub fn white_robust_se(fit: &GlmFit, design: &DesignMatrix) -> Result<Vec<f64>, GlmError> {
    let x = design.matrix();
    let (n, k) = x.shape();
    if fit.fitted.len() != n || fit.coefficients.len() != k {
        return Err(GlmError::LengthMismatch {
            rows: n,
            responses: fit.fitted.len(),
        });
    }
    let w = &fit.working_weights;
    let xtw = DMatrix::from_fn(k, n, |j, i| x[(i, j)] * w[i]);
    let bread = Cholesky::new(&xtw * x + fit.penalty())
        .ok_or(GlmError::RankDeficient)?
        .inverse();
    let r2: Vec<f64> = fit.response_residuals().iter().map(|r| r * r).collect();
    Ok(sandwich_se(&bread, x, &r2))
}

fn sandwich_se(bread: &DMatrix<f64>, x: &DMatrix<f64>, r2: &[f64]) -> Vec<f64> {
    let (n, k) = x.shape();
    let xt_r = DMatrix::from_fn(k, n, |j, i| x[(i, j)] * r2[i]);
    let meat = xt_r * x;
    let v = bread * meat * bread;
    v.diagonal().iter().map(|d| d.max(0.0).sqrt()).collect()
}

/// HC0 standard errors of an ordinary least-squares fit with residuals `r`.
pub fn ols_hc0(x: &DMatrix<f64>, residuals: &[f64]) -> Result<Vec<f64>, GlmError> {
    let bread = Cholesky::new(x.transpose() * x)
        .ok_or(GlmError::RankDeficient)?
        .inverse();
    let r2: Vec<f64> = residuals.iter().map(|r| r * r).collect();
    Ok(sandwich_se(&bread, x, &r2))
}

/// Cook's distance by refitting without each observation:
/// `D_i = sum_j (mu_j - mu_j(i))^2 / (k * MSE)`, `MSE = sum (y - mu)^2 / (n - k)`.
pub fn cooks_distance(
    fit: &GlmFit,
    design: &DesignMatrix,
    y: &[f64],
) -> Result<Vec<f64>, GlmError> {
    let (n, k) = (design.nrows(), design.ncols());
    if n <= k {
        return Err(GlmError::TooFewObservations { n, k });
    }
    if y.len() != n {
        return Err(GlmError::LengthMismatch {
            rows: n,
            responses: y.len(),
        });
    }
    let mse = y
        .iter()
        .zip(&fit.fitted)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / (n - k) as f64;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut yi = y.to_vec();
            yi.remove(i);
            let refit =
                glm_fit(&design.without_row(i), &yi, fit.family, fit.lambda).map_err(|e| {
                    GlmError::RefitFailure {
                        index: i,
                        source: Box::new(e),
                    }
                })?;
            let loo = refit.predict(design.matrix());
            let ss: f64 = fit
                .fitted
                .iter()
                .zip(&loo)
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            Ok(ss / (k as f64 * mse))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrTest {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
}

/// Likelihood-ratio test of `reduced` against `full`; nesting is judged by
/// coefficient names.
pub fn lr_test(full: &GlmFit, reduced: &GlmFit) -> Result<LrTest, GlmError> {
    let nested = full.family == reduced.family
        && reduced.names.iter().all(|n| full.names.contains(n))
        && reduced.names.len() <= full.names.len();
    if !nested {
        return Err(GlmError::NotNested);
    }
    let chi2 = (2.0 * (full.log_likelihood - reduced.log_likelihood)).max(0.0);
    let df = full.names.len() - reduced.names.len();
    Ok(LrTest {
        chi2,
        df,
        p: chi2_sf(chi2, df),
    })
}
