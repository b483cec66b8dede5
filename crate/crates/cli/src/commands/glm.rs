use std::path::PathBuf;

use anyhow::{bail, Context as _};
use pitchguard::glm::{
    cooks_distance, glm_fit, lr_test, white_robust_se, Column, DesignMatrix, Family, Formula,
    GlmFit, LrTest,
};
use serde::Serialize;

use crate::output::Context;
use crate::table::Table;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// poisson, logistic or gaussian.
    #[arg(long)]
    family: Family,
    /// Headed CSV holding the response and every term.
    #[arg(long)]
    data: PathBuf,
    /// Model such as `y ~ a + b`; non-numeric terms are one-hot encoded.
    #[arg(long)]
    formula: Formula,
    /// Ridge penalty on the non-intercept coefficients.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Adds heteroscedasticity-robust standard errors.
    #[arg(long)]
    robust: bool,
    /// Adds leave-one-out Cook's distances.
    #[arg(long)]
    cooks: bool,
    /// Likelihood-ratio test against the model without these terms.
    #[arg(long, value_delimiter = ',')]
    drop: Vec<String>,
}

#[derive(Serialize)]
struct Coefficient<'a> {
    name: &'a str,
    estimate: f64,
    robust_se: Option<f64>,
}

#[derive(Serialize)]
struct GlmReport<'a> {
    formula: &'a Formula,
    observations: usize,
    coefficients: Vec<Coefficient<'a>>,
    fit: &'a GlmFit,
    cooks_distance: Option<Vec<f64>>,
    lr_test: Option<(Vec<String>, LrTest)>,
}

fn design(table: &Table, terms: &[String]) -> anyhow::Result<DesignMatrix> {
    let cols = terms
        .iter()
        .map(|t| Ok((t.clone(), Column::parse(&table.column(t)?))))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(DesignMatrix::from_terms(table.rows.len(), cols)?)
}

pub fn run(ctx: &mut Context, args: Args) -> anyhow::Result<()> {
    ctx.config()?.finish()?;
    let table = Table::read(&args.data)?;
    let y = table.numeric(&args.formula.response)?;
    let full = design(&table, &args.formula.terms)?;
    let fit = glm_fit(&full, &y, args.family, args.lambda).context("fitting model")?;
    let robust = if args.robust {
        Some(white_robust_se(&fit, &full).context("robust standard errors")?)
    } else {
        None
    };
    let cooks = if args.cooks {
        Some(cooks_distance(&fit, &full, &y).context("Cook's distance")?)
    } else {
        None
    };
    let lr = if args.drop.is_empty() {
        None
    } else {
        if let Some(t) = args.drop.iter().find(|t| !args.formula.terms.contains(t)) {
            bail!("cannot drop {t:?}: not a term of the formula");
        }
        let kept: Vec<String> = args
            .formula
            .terms
            .iter()
            .filter(|t| !args.drop.contains(t))
            .cloned()
            .collect();
        let reduced = glm_fit(&design(&table, &kept)?, &y, args.family, args.lambda)
            .context("fitting reduced model")?;
        Some((args.drop.clone(), lr_test(&fit, &reduced)?))
    };

    let coefficients: Vec<Coefficient> = fit
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| Coefficient {
            name,
            estimate: fit.coefficients[j],
            robust_se: robust.as_ref().map(|se| se[j]),
        })
        .collect();
    for c in &coefficients {
        match c.robust_se {
            Some(se) => println!("{:<24} {:>14.6} (se {:.6})", c.name, c.estimate, se),
            None => println!("{:<24} {:>14.6}", c.name, c.estimate),
        }
    }
    println!(
        "deviance {:.6}  log-likelihood {:.6}",
        fit.deviance, fit.log_likelihood
    );
    if let Some((_, t)) = &lr {
        println!("LR chi2 {:.6} on {} df, p = {:.6e}", t.chi2, t.df, t.p);
    }
    if let Some(out) = ctx.out().map(PathBuf::from) {
        let config = [
            ("family", args.family.to_string()),
            ("lambda", args.lambda.to_string()),
            ("robust", args.robust.to_string()),
            ("cooks", args.cooks.to_string()),
        ];
        let report = GlmReport {
            formula: &args.formula,
            observations: y.len(),
            coefficients,
            fit: &fit,
            cooks_distance: cooks,
            lr_test: lr,
        };
        ctx.emit_report(out, &config, &report)?;
    }
    Ok(())
}
