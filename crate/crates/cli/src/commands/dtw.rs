use std::path::PathBuf;

use anyhow::Context as _;
use pitchguard::dtw::dtw_distance;
use serde::Serialize;

use super::csv_bytes;
use crate::output::Context;
use crate::table::read_series;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// One-column CSV with the first sequence.
    #[arg(long)]
    a: PathBuf,
    /// One-column CSV with the second sequence.
    #[arg(long)]
    b: PathBuf,
    /// Writes the warping path as 1-based `i,j` pairs.
    #[arg(long)]
    path_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct DtwReport {
    len_a: usize,
    len_b: usize,
    distance: f64,
    path_length: usize,
}

pub fn run(ctx: &mut Context, args: Args) -> anyhow::Result<()> {
    ctx.config()?.finish()?;
    let a = read_series(&args.a)?;
    let b = read_series(&args.b)?;
    let w = dtw_distance(&a, &b).context("computing DTW")?;
    println!("{}", w.distance);
    if let Some(p) = &args.path_out {
        let rows = w
            .path
            .iter()
            .map(|&(i, j)| [(i + 1).to_string(), (j + 1).to_string()]);
        ctx.emit(p, csv_bytes(&["i", "j"], rows)?);
    }
    if let Some(out) = ctx.out().map(PathBuf::from) {
        let report = DtwReport {
            len_a: a.len(),
            len_b: b.len(),
            distance: w.distance,
            path_length: w.path.len(),
        };
        ctx.emit_report(out, &[], &report)?;
    }
    Ok(())
}
