use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use clap::ValueEnum;
use pitchguard::metrics::{ccc, kappa, mae, pearson, rmse, ConfusionMatrix, MetricRow};

use crate::output::Context;
use crate::table::{parse_numbers, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Regression,
    Classification,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Headed CSV of predictions.
    #[arg(long)]
    pred: PathBuf,
    /// Headed CSV of true values, row-aligned with `--pred`.
    #[arg(long)]
    truth: PathBuf,
    /// Column to read from both files (default: the first).
    #[arg(long)]
    column: Option<String>,
    #[arg(long, value_enum, default_value_t = Kind::Regression)]
    kind: Kind,
    /// Label of the row in the output.
    #[arg(long, default_value = "all")]
    unit: String,
}

fn read(path: &Path, column: Option<&str>) -> anyhow::Result<Vec<String>> {
    let t = Table::read(path)?;
    match column {
        Some(c) => t.column(c),
        None => Ok(t.rows.iter().map(|r| r[0].clone()).collect()),
    }
}

/// Undefined values (constant inputs, empty classes) become `None`.
fn defined<T>(r: Result<T, pitchguard::metrics::MetricError>) -> anyhow::Result<Option<T>> {
    use pitchguard::metrics::MetricError::*;
    match r {
        Ok(v) => Ok(Some(v)),
        Err(ConstantVector | DegenerateAgreement) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn run(ctx: &mut Context, args: Args) -> anyhow::Result<()> {
    ctx.config()?.finish()?;
    let pred = read(&args.pred, args.column.as_deref())?;
    let truth = read(&args.truth, args.column.as_deref())?;
    if pred.len() != truth.len() {
        bail!("{} predictions but {} true values", pred.len(), truth.len());
    }
    let row = match args.kind {
        Kind::Regression => {
            let p = parse_numbers(&pred)
                .context("predictions (use --kind classification for labels)")?;
            let t =
                parse_numbers(&truth).context("truth (use --kind classification for labels)")?;
            MetricRow::new(args.unit.clone())
                .with("mae", Some(mae(&p, &t)?))
                .with("rmse", Some(rmse(&p, &t)?))
                .with("pearson", defined(pearson(&p, &t))?)
                .with("ccc", defined(ccc(&p, &t))?)
        }
        Kind::Classification => {
            let cm = ConfusionMatrix::from_labels(&pred, &truth)?;
            let mut row = MetricRow::new(args.unit.clone())
                .with("accuracy", cm.accuracy())
                .with("kappa", defined(kappa(&cm))?);
            for label in cm.labels().to_vec() {
                row = row
                    .with(&format!("precision[{label}]"), cm.precision(&label)?)
                    .with(&format!("recall[{label}]"), cm.recall(&label)?);
            }
            row
        }
    };
    println!("{}", serde_json::to_string(&row)?);
    if let Some(out) = ctx.out().map(PathBuf::from) {
        let kind = format!("{:?}", args.kind).to_lowercase();
        ctx.emit_report(out, &[("kind", kind)], &row)?;
    }
    Ok(())
}
