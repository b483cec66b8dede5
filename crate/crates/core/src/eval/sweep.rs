use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use super::EvalError;
use crate::gp::{
    grid_search, predict_block, EvalProtocol, GpError, GridSearchResult, ResponseScale,
    SettingOutcome, SettingScore,
};
use crate::ingest::{truncate_record, ExposureRecord, Outcome};
use crate::kernels::{ExposureDistances, ExposureSeries};
use crate::metrics::{ccc, mae};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskCall {
    Imminent,
    SafeForNow,
}

/// `Imminent` when the predicted injury day is not after the current day.
pub fn interpret_prediction(f_star: f64, current_day: f64) -> RiskCall {
    if f_star <= current_day {
        RiskCall::Imminent
    } else {
        RiskCall::SafeForNow
    }
}

/// Leave-one-out scoring of held-out queries against a training pool.
///
/// Targets are log injury days; scores compare `exp(mean)` with the true
/// day. Each query drops its own subject from the pool before solving.
#[derive(Debug, Clone)]
pub struct ExposureLoo {
    pool: ExposureDistances,
    queries: ExposureDistances,
    held_out: Vec<usize>,
    log_targets: Vec<f64>,
    truth: Vec<f64>,
}

impl ExposureLoo {
    pub fn new(
        pool: ExposureDistances,
        queries: ExposureDistances,
        held_out: Vec<usize>,
        log_targets: Vec<f64>,
        truth: Vec<f64>,
    ) -> Self {
        let (n, n2) = pool.shape();
        let (q, m) = queries.shape();
        assert_eq!(n, n2, "pool distances must be square");
        assert_eq!(m, n, "query columns must match the pool");
        assert_eq!(held_out.len(), q);
        assert_eq!(truth.len(), q);
        assert_eq!(log_targets.len(), n);
        assert!(held_out.iter().all(|&h| h < n));
        Self {
            pool,
            queries,
            held_out,
            log_targets,
            truth,
        }
    }

    /// Per-query predictive `(day mean, variance)` at one setting.
    pub fn predictions(&self, gamma: f64, epsilon: f64) -> Result<Vec<(f64, f64)>, GpError> {
        let blocks = self.blocks(gamma);
        self.predict_all(&blocks, epsilon)
    }

    fn blocks(&self, gamma: f64) -> Vec<(DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
        let k = self.pool.kernel(gamma);
        let qk = self.queries.kernel(gamma);
        let n = k.nrows();
        self.held_out
            .iter()
            .enumerate()
            .map(|(j, &h)| {
                let keep: Vec<usize> = (0..n).filter(|&i| i != h).collect();
                let k_train = k.select_rows(&keep).select_columns(&keep);
                let k_cross = qk.rows(j, 1).select_columns(&keep);
                let targets = keep.iter().map(|&i| self.log_targets[i]).collect();
                (k_train, k_cross, targets)
            })
            .collect()
    }

    fn predict_all(
        &self,
        blocks: &[(DMatrix<f64>, DMatrix<f64>, Vec<f64>)],
        epsilon: f64,
    ) -> Result<Vec<(f64, f64)>, GpError> {
        blocks
            .iter()
            .map(|(k_train, k_cross, targets)| {
                // The averaged exposure kernel of a series with itself is exactly 1.
                let p = predict_block(
                    k_train.clone(),
                    epsilon,
                    targets,
                    k_cross,
                    &[1.0],
                    ResponseScale::Log,
                )?;
                Ok((p[0].day_mean.unwrap_or(f64::NAN), p[0].variance))
            })
            .collect()
    }
}

impl EvalProtocol for ExposureLoo {
    fn evaluate(&self, gamma: f64, epsilons: &[f64]) -> Vec<SettingOutcome> {
        let blocks = self.blocks(gamma);
        epsilons
            .iter()
            .map(|&eps| match self.predict_all(&blocks, eps) {
                Err(e) => SettingOutcome::Failed(e.to_string()),
                Ok(p) => {
                    let days: Vec<f64> = p.iter().map(|x| x.0).collect();
                    let min_variance = p.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
                    match mae(&days, &self.truth) {
                        Ok(mae) => SettingOutcome::Scored(SettingScore {
                            ccc: ccc(&days, &self.truth).ok(),
                            mae,
                            min_variance,
                        }),
                        Err(e) => SettingOutcome::Failed(e.to_string()),
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub max_truncation: u32,
    pub gamma_grid: Vec<f64>,
    pub epsilon_grid: Vec<f64>,
    /// Adds censored subjects to the training pool with their last observed
    /// day as the target; they are never scored.
    pub include_censored: bool,
    /// Keeps every scored grid row, not just the best one, for each depth.
    pub keep_grids: bool,
}

impl SweepConfig {
    pub fn new(gamma_grid: Vec<f64>, epsilon_grid: Vec<f64>) -> Self {
        Self {
            max_truncation: 12,
            gamma_grid,
            epsilon_grid,
            include_censored: false,
            keep_grids: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectPrediction {
    pub subject_id: String,
    pub injury_day: u32,
    pub current_day: u32,
    pub predicted_day: f64,
    pub variance: f64,
    pub call: RiskCall,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub t_minus_a: u32,
    pub gamma: f64,
    pub epsilon: f64,
    pub ccc: Option<f64>,
    pub mae: f64,
    pub min_variance: f64,
    pub accepted: usize,
    pub evaluated: usize,
    pub predictions: Vec<SubjectPrediction>,
    #[serde(skip)]
    pub grid: Option<GridSearchResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationSweep {
    pub subjects: usize,
    pub pool_size: usize,
    pub rows: Vec<SweepRow>,
}

impl TruncationSweep {
    /// One line per truncation depth, undefined CCC written as `NA`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_minus_a", "ccc", "mae", "gamma", "epsilon"])?;
        for r in &self.rows {
            w.write_record([
                r.t_minus_a.to_string(),
                r.ccc.map_or_else(|| "NA".to_string(), |c| c.to_string()),
                r.mae.to_string(),
                r.gamma.to_string(),
                r.epsilon.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Leave-one-out grid search at every truncation depth `a = 0..=A`.
///
/// Training subjects keep their records up to their own injury day; only the
/// held-out subject is truncated to `T - a`.
pub fn truncation_sweep(
    records: &[ExposureRecord],
    cfg: &SweepConfig,
) -> Result<TruncationSweep, EvalError> {
    let injured: Vec<&ExposureRecord> = records
        .iter()
        .filter(|r| r.injury_day().is_some())
        .collect();
    if injured.len() < 3 {
        return Err(EvalError::TooFewSubjects {
            need: 3,
            got: injured.len(),
        });
    }
    for r in &injured {
        truncate_record(r, cfg.max_truncation)?;
    }
    let mut pool: Vec<ExposureRecord> = injured
        .iter()
        .map(|r| truncate_record(r, 0))
        .collect::<Result<_, _>>()?;
    let mut log_targets: Vec<f64> = injured
        .iter()
        .map(|r| f64::from(injury_day(r)).ln())
        .collect();
    if cfg.include_censored {
        for r in records {
            if let Outcome::Censored { last_day } = r.outcome {
                if last_day > 0 {
                    pool.push(r.clone());
                    log_targets.push(f64::from(last_day).ln());
                }
            }
        }
    }
    let pool_series: Vec<ExposureSeries> = pool.iter().map(ExposureSeries::from).collect();
    let pool_d = ExposureDistances::square(&pool_series)?;
    let held_out: Vec<usize> = (0..injured.len()).collect();
    let truth: Vec<f64> = injured.iter().map(|r| f64::from(injury_day(r))).collect();

    let mut rows = Vec::with_capacity(cfg.max_truncation as usize + 1);
    for a in 0..=cfg.max_truncation {
        let queries: Vec<ExposureRecord> = injured
            .iter()
            .map(|r| truncate_record(r, a))
            .collect::<Result<_, _>>()?;
        let query_series: Vec<ExposureSeries> = queries.iter().map(ExposureSeries::from).collect();
        let query_d = ExposureDistances::between(&query_series, &pool_series)?;
        let protocol = ExposureLoo::new(
            pool_d.clone(),
            query_d,
            held_out.clone(),
            log_targets.clone(),
            truth.clone(),
        );
        let grid = match grid_search(&cfg.gamma_grid, &cfg.epsilon_grid, &protocol) {
            Err(GpError::NoAcceptedSetting) => return Err(EvalError::NoAcceptedSetting { a }),
            other => other?,
        };
        let best = grid.best();
        let preds = protocol.predictions(best.gamma, best.epsilon)?;
        let predictions = injured
            .iter()
            .zip(preds)
            .map(|(r, (day, variance))| {
                let t = injury_day(r);
                SubjectPrediction {
                    subject_id: r.subject_id.clone(),
                    injury_day: t,
                    current_day: t - a,
                    predicted_day: day,
                    variance,
                    call: interpret_prediction(day, f64::from(t - a)),
                }
            })
            .collect();
        rows.push(SweepRow {
            t_minus_a: a,
            gamma: best.gamma,
            epsilon: best.epsilon,
            ccc: best.ccc,
            mae: best.mae.expect("accepted rows are scored"),
            min_variance: best.min_variance.expect("accepted rows are scored"),
            accepted: grid.accepted_count(),
            evaluated: grid.rows.len(),
            predictions,
            grid: cfg.keep_grids.then(|| grid.clone()),
        });
    }
    Ok(TruncationSweep {
        subjects: injured.len(),
        pool_size: pool.len(),
        rows,
    })
}

fn injury_day(r: &ExposureRecord) -> u32 {
    r.injury_day().expect("filtered to injured records")
}
