use std::path::PathBuf;

use anyhow::{bail, Context as _};
use clap::ValueEnum;
use nalgebra::DMatrix;
use pitchguard::data::Dataset;
use pitchguard::eval::{
    kfold_cv, Classifier, ConstantMajority, CvPlan, GaussianNbModel, Knn, RidgeLogistic, SpcaModel,
};

use crate::output::Context;
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Spca,
    Ridge,
    Knn,
    Gnb,
    Constant,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Headed CSV of numeric features and the class column.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    class: String,
    /// Class value counted as positive (default: 1 or true).
    #[arg(long)]
    positive: Option<String>,
    #[arg(long, value_enum)]
    model: Model,
    /// SPCA filter threshold.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// SPCA component count.
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Ridge penalty.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Neighbours for kNN.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Plain rather than class-stratified folds.
    #[arg(long)]
    no_stratify: bool,
}

fn dataset(table: &Table, class: &str, positive: Option<&str>) -> anyhow::Result<Dataset> {
    let class_idx = table.position(class)?;
    let labels = table.column(class)?;
    let y = labels
        .iter()
        .map(|l| match positive {
            Some(p) => Ok(l == p),
            None => match l.to_ascii_lowercase().as_str() {
                "1" | "true" => Ok(true),
                "0" | "false" => Ok(false),
                other => bail!("class value {other:?} is not 0/1; pass --positive"),
            },
        })
        .collect::<anyhow::Result<Vec<bool>>>()?;
    let features: Vec<(String, Vec<f64>)> = table
        .headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != class_idx)
        .map(|(_, name)| Ok((name.clone(), table.numeric(name)?)))
        .collect::<anyhow::Result<_>>()?;
    if features.is_empty() {
        bail!("no feature columns besides {class:?}");
    }
    let x = DMatrix::from_fn(y.len(), features.len(), |i, j| features[j].1[i]);
    Ok(Dataset::new(
        features.into_iter().map(|f| f.0).collect(),
        x,
        y,
    ))
}

pub fn run(ctx: &mut Context, args: Args) -> anyhow::Result<()> {
    ctx.config()?.finish()?;
    let out = ctx.require_out()?.to_path_buf();
    let data = dataset(
        &Table::read(&args.data)?,
        &args.class,
        args.positive.as_deref(),
    )?;
    let model: Box<dyn Classifier> = match args.model {
        Model::Spca => Box::new(SpcaModel {
            alpha: args.alpha,
            m: args.m,
        }),
        Model::Ridge => Box::new(RidgeLogistic {
            lambda: args.lambda,
        }),
        Model::Knn => Box::new(Knn { k: args.k }),
        Model::Gnb => Box::new(GaussianNbModel),
        Model::Constant => Box::new(ConstantMajority),
    };
    let plan = CvPlan {
        repeats: args.repeats,
        folds: args.folds,
        stratified: !args.no_stratify,
        seed: ctx.seed,
    };
    let mut report = kfold_cv(model.as_ref(), &data, &plan).context("cross-validation")?;
    for (name, a) in &report.aggregate {
        eprintln!(
            "{name:<16} mean={} sd={} n={}",
            super::na(a.mean),
            super::na(a.sd),
            a.n
        );
    }
    let config = vec![
        ("model", model.name()),
        ("repeats", plan.repeats.to_string()),
        ("folds", plan.folds.to_string()),
        ("stratified", plan.stratified.to_string()),
    ];
    report.config = config
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect();
    report.invocation = ctx.invocation().to_vec();
    ctx.emit_report(out, &config, &report)
}
