use std::path::PathBuf;

use anyhow::{bail, Context as _};
use pitchguard::eval::{truncation_sweep, SweepConfig, TruncationSweep};
use pitchguard::gp::{
    linear_grid, log_grid, Rejection, DEFAULT_EPSILON_COUNT, DEFAULT_EPSILON_RANGE,
    DEFAULT_GAMMA_COUNT, DEFAULT_GAMMA_RANGE,
};
use pitchguard::ingest::{
    filter_subjects, load_exposure_csv, load_injuries_csv, Exclusion, FilterConfig,
};
use serde::Serialize;

use super::{csv_bytes, na};
use crate::output::{sibling, Context};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    exposure: PathBuf,
    #[arg(long)]
    injuries: PathBuf,
    /// Per-depth table; defaults to the report path with a .csv extension.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Every scored (gamma, epsilon) setting at every depth.
    #[arg(long)]
    grid_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
struct Settings {
    gamma_min: f64,
    gamma_max: f64,
    gamma_count: usize,
    epsilon_min: f64,
    epsilon_max: f64,
    epsilon_count: usize,
    max_truncation: u32,
    include_censored: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            gamma_min: DEFAULT_GAMMA_RANGE.0,
            gamma_max: DEFAULT_GAMMA_RANGE.1,
            gamma_count: DEFAULT_GAMMA_COUNT,
            epsilon_min: DEFAULT_EPSILON_RANGE.0,
            epsilon_max: DEFAULT_EPSILON_RANGE.1,
            epsilon_count: DEFAULT_EPSILON_COUNT,
            max_truncation: 12,
            include_censored: false,
        }
    }
}

impl Settings {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("gamma_min", self.gamma_min.to_string()),
            ("gamma_max", self.gamma_max.to_string()),
            ("gamma_count", self.gamma_count.to_string()),
            ("epsilon_min", self.epsilon_min.to_string()),
            ("epsilon_max", self.epsilon_max.to_string()),
            ("epsilon_count", self.epsilon_count.to_string()),
            ("max_truncation", self.max_truncation.to_string()),
            ("include_censored", self.include_censored.to_string()),
        ]
    }
}

#[derive(Serialize)]
struct SweepReport<'a> {
    subjects_read: usize,
    exclusions: &'a [Exclusion],
    skipped_transient: &'a [(String, u32)],
    sweep: &'a TruncationSweep,
}

pub fn run(ctx: &mut Context, args: Args) -> anyhow::Result<()> {
    let mut cfg = ctx.config()?;
    let d = Settings::default();
    let s = Settings {
        gamma_min: cfg.take_or("gamma_min", d.gamma_min)?,
        gamma_max: cfg.take_or("gamma_max", d.gamma_max)?,
        gamma_count: cfg.take_or("gamma_count", d.gamma_count)?,
        epsilon_min: cfg.take_or("epsilon_min", d.epsilon_min)?,
        epsilon_max: cfg.take_or("epsilon_max", d.epsilon_max)?,
        epsilon_count: cfg.take_or("epsilon_count", d.epsilon_count)?,
        max_truncation: cfg.take_or("max_truncation", d.max_truncation)?,
        include_censored: cfg.take_bool_or("include_censored", d.include_censored)?,
    };
    let rules = FilterConfig::take_from(&mut cfg)?;
    cfg.finish()?;
    if !(s.gamma_min > 0.0 && s.gamma_min <= s.gamma_max) {
        bail!("need 0 < gamma_min <= gamma_max");
    }
    if !(s.epsilon_min > 0.0 && s.epsilon_min <= s.epsilon_max) {
        bail!("need 0 < epsilon_min <= epsilon_max");
    }
    let out = ctx.require_out()?.to_path_buf();
    let table_path = args.table.clone().unwrap_or_else(|| sibling(&out, "csv"));
    if table_path == out {
        bail!("--table and --out must differ");
    }

    let records = load_exposure_csv(&args.exposure)?;
    let events = load_injuries_csv(&args.injuries)?;
    let filtered = filter_subjects(&records, &events, &rules);
    let sweep_cfg = SweepConfig {
        max_truncation: s.max_truncation,
        gamma_grid: log_grid(s.gamma_min, s.gamma_max, s.gamma_count),
        epsilon_grid: linear_grid(s.epsilon_min, s.epsilon_max, s.epsilon_count),
        include_censored: s.include_censored,
        keep_grids: args.grid_out.is_some(),
    };
    let sweep = truncation_sweep(&filtered.kept, &sweep_cfg).context("truncation sweep")?;
    for r in &sweep.rows {
        eprintln!(
            "T-{:<2} ccc={} mae={:.3} gamma={} epsilon={}",
            r.t_minus_a,
            na(r.ccc),
            r.mae,
            r.gamma,
            r.epsilon
        );
    }

    let mut table = vec![];
    sweep.write_csv(&mut table)?;
    ctx.emit(table_path, table);
    if let Some(grid_out) = &args.grid_out {
        let rows = sweep.rows.iter().flat_map(|r| {
            let a = r.t_minus_a;
            r.grid.iter().flat_map(|g| g.rows.iter()).map(move |g| {
                vec![
                    a.to_string(),
                    g.gamma.to_string(),
                    g.epsilon.to_string(),
                    na(g.ccc),
                    na(g.mae),
                    na(g.min_variance),
                    match g.rejection {
                        None => "accepted",
                        Some(Rejection::NegativeVariance { .. }) => "negative_variance",
                        Some(Rejection::NumericFailure { .. }) => "numeric_failure",
                    }
                    .to_string(),
                ]
            })
        });
        let bytes = csv_bytes(
            &[
                "t_minus_a",
                "gamma",
                "epsilon",
                "ccc",
                "mae",
                "min_variance",
                "status",
            ],
            rows,
        )?;
        ctx.emit(grid_out, bytes);
    }
    let mut pairs = s.pairs();
    pairs.extend(rules.pairs());
    let report = SweepReport {
        subjects_read: records.len(),
        exclusions: &filtered.exclusions,
        skipped_transient: &filtered.skipped_transient,
        sweep: &sweep,
    };
    ctx.emit_report(out, &pairs, &report)
}
