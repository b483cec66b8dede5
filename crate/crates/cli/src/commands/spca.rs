use std::path::PathBuf;

use anyhow::{bail, Context as _};
use chrono::NaiveDate;
use pitchguard::eval::{kfold_cv, CvPlan, SpcaModel};
use pitchguard::ingest::{
    aggregate_weekly, load_gps_csv, load_injuries_csv, Approach, SynthConfig,
};
use pitchguard::spca::{component_report, spca_fit, ComponentReport};
use serde::Serialize;

use super::{parse_grid, parse_int_grid};
use crate::output::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    gps: PathBuf,
    #[arg(long)]
    injuries: PathBuf,
    /// A keeps weeks of subjects with training data before their first
    /// injury; B keeps every week.
    #[arg(long, default_value = "A")]
    approach: Approach,
    /// Date of day 1 in the injury table.
    #[arg(long, default_value_t = SynthConfig::default().season_start)]
    season_start: NaiveDate,
    /// Filter thresholds on |slope|, as `a,b,c` or `start:stop:step`.
    #[arg(long, default_value = "0:1:0.1")]
    alpha_grid: String,
    /// Component counts, as `a,b,c` or `start:stop`.
    #[arg(long, default_value = "1:5")]
    m_grid: String,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
}

#[derive(Serialize)]
struct GridCell {
    alpha: f64,
    m: usize,
    kappa_mean: Option<f64>,
    kappa_sd: Option<f64>,
    accuracy_mean: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Best {
    alpha: f64,
    m: usize,
    kappa_mean: f64,
    survivors: Vec<String>,
    dropped_features: Vec<String>,
}

#[derive(Serialize)]
struct SpcaReport {
    approach: String,
    weeks: usize,
    injured_weeks: usize,
    features: usize,
    kappa_grid: Vec<GridCell>,
    best: Best,
    components: ComponentReport,
}

pub fn run(ctx: &mut Context, args: Args) -> anyhow::Result<()> {
    ctx.config()?.finish()?;
    let alphas = parse_grid(&args.alpha_grid).context("--alpha-grid")?;
    let ms = parse_int_grid(&args.m_grid).context("--m-grid")?;
    let out = ctx.require_out()?.to_path_buf();
    let gps = load_gps_csv(&args.gps)?;
    let events = load_injuries_csv(&args.injuries)?;
    let data = aggregate_weekly(&gps, &events, args.approach, args.season_start)?.to_dataset();
    let plan = CvPlan {
        repeats: args.repeats,
        folds: args.folds,
        stratified: true,
        seed: ctx.seed,
    };

    let mut grid = vec![];
    for &alpha in &alphas {
        for &m in &ms {
            let cell = match kfold_cv(&SpcaModel { alpha, m }, &data, &plan) {
                Ok(r) => GridCell {
                    alpha,
                    m,
                    kappa_mean: r.aggregate.get("kappa").and_then(|a| a.mean),
                    kappa_sd: r.aggregate.get("kappa").and_then(|a| a.sd),
                    accuracy_mean: r.aggregate.get("accuracy").and_then(|a| a.mean),
                    error: None,
                },
                Err(e) => GridCell {
                    alpha,
                    m,
                    kappa_mean: None,
                    kappa_sd: None,
                    accuracy_mean: None,
                    error: Some(e.to_string()),
                },
            };
            eprintln!(
                "alpha={alpha} m={m} kappa={}",
                cell.kappa_mean.map_or_else(
                    || cell.error.clone().unwrap_or_default(),
                    |k| format!("{k:.4}")
                )
            );
            grid.push(cell);
        }
    }
    let Some(best) = grid
        .iter()
        .filter_map(|c| c.kappa_mean.map(|k| (c, k)))
        .fold(None, |acc: Option<(&GridCell, f64)>, (c, k)| match acc {
            Some((_, bk)) if bk >= k => acc,
            _ => Some((c, k)),
        })
    else {
        bail!("no (alpha, m) setting could be cross-validated");
    };
    let (cell, kappa_mean) = best;
    let model = spca_fit(&data, cell.alpha, cell.m).context("refitting best setting")?;
    let components = component_report(&model, &data)?;
    let config = [
        ("approach", format!("{:?}", args.approach)),
        ("season_start", args.season_start.to_string()),
        ("alpha_grid", args.alpha_grid.clone()),
        ("m_grid", args.m_grid.clone()),
        ("repeats", args.repeats.to_string()),
        ("folds", args.folds.to_string()),
    ];
    let report = SpcaReport {
        approach: format!("{:?}", args.approach),
        weeks: data.nrows(),
        injured_weeks: data.positive_count(),
        features: data.ncols(),
        best: Best {
            alpha: cell.alpha,
            m: cell.m,
            kappa_mean,
            survivors: model
                .survivor_names()
                .into_iter()
                .map(String::from)
                .collect(),
            dropped_features: model.standardizer.dropped.clone(),
        },
        kappa_grid: grid,
        components,
    };
    ctx.emit_report(out, &config, &report)
}
