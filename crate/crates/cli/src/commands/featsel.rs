use std::path::PathBuf;

use anyhow::{bail, Context as _};
use pitchguard::featsel::{cv_survival, Feature, FeatureTable, GaConfig, SurvivalRow};
use serde::Serialize;

use super::{csv_bytes, na};
use crate::output::{sibling, Context};
use crate::table::{parse_numbers, Table};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Headed CSV of candidate features and the class column.
    #[arg(long)]
    data: PathBuf,
    /// Name of the class column.
    #[arg(long)]
    class: String,
    #[arg(long, default_value_t = 10)]
    folds: usize,
}

#[derive(Serialize)]
struct FoldBest {
    fold: usize,
    merit: f64,
    features: Vec<String>,
}

#[derive(Serialize)]
struct FeatselReport<'a> {
    rows: usize,
    folds: usize,
    fold_best: Vec<FoldBest>,
    survival: &'a [SurvivalRow],
}

pub fn run(ctx: &mut Context, args: Args) -> anyhow::Result<()> {
    let mut cfg = ctx.config()?;
    let ga = GaConfig::take_from(&mut cfg, ctx.seed)?;
    cfg.finish()?;
    let out = ctx.require_out()?.to_path_buf();
    let report_path = sibling(&out, "json");
    if report_path == out {
        bail!("--out should name the CSV table; the report goes next to it as .json");
    }
    let data = Table::read(&args.data)?;
    let class_idx = data.position(&args.class)?;
    let mut names = vec![];
    let mut columns = vec![];
    for (j, name) in data
        .headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != class_idx)
    {
        let values: Vec<String> = data.rows.iter().map(|r| r[j].clone()).collect();
        columns.push(match parse_numbers(&values) {
            Ok(v) => Feature::Numeric(v),
            Err(_) => Feature::Categorical(values),
        });
        names.push(name.clone());
    }
    let table = FeatureTable::new(names.clone(), columns, data.column(&args.class)?)?;
    let survival = cv_survival(&table, &ga, args.folds).context("GA feature selection")?;

    let rows = survival.rows.iter().map(|r| {
        vec![
            r.feature.clone(),
            r.survival_fraction.to_string(),
            na(r.mean_best_merit),
        ]
    });
    ctx.emit(
        &out,
        csv_bytes(&["feature", "survival_fraction", "mean_best_merit"], rows)?,
    );
    let fold_best = survival
        .fold_best
        .iter()
        .enumerate()
        .map(|(f, g)| FoldBest {
            fold: f + 1,
            merit: g.merit.value,
            features: names
                .iter()
                .zip(&g.best)
                .filter(|(_, b)| **b)
                .map(|(n, _)| n.clone())
                .collect(),
        })
        .collect();
    let mut config = ga.pairs();
    config.push(("folds", args.folds.to_string()));
    let report = FeatselReport {
        rows: table.nrows(),
        folds: survival.folds,
        fold_best,
        survival: &survival.rows,
    };
    ctx.emit_report(report_path, &config, &report)
}
