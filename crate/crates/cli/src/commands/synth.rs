use anyhow::Context as _;
use pitchguard::ingest::{
    synth_generate, synth_planted_table, write_exposure, write_gps, write_injuries,
    PlantedTableConfig, SynthConfig,
};
use serde::Serialize;

use super::csv_bytes;
use crate::output::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Rows of the planted classification table.
    #[arg(long, default_value_t = PlantedTableConfig::default().rows)]
    planted_rows: usize,
}

#[derive(Serialize)]
struct SynthReport {
    files: Vec<&'static str>,
    subjects: usize,
    injury_events: usize,
    gps_sessions: usize,
    planted_features: Vec<String>,
    planted_table_informative: Vec<String>,
}

pub fn run(ctx: &mut Context, args: Args) -> anyhow::Result<()> {
    let mut cfg = ctx.config()?;
    let synth_cfg = SynthConfig::take_from(&mut cfg)?;
    cfg.finish()?;
    let dir = ctx.require_out()?.to_path_buf();
    let data = synth_generate(&synth_cfg, ctx.seed).context("generating squad")?;
    let planted_cfg = PlantedTableConfig {
        rows: args.planted_rows,
        ..PlantedTableConfig::default()
    };
    let planted =
        synth_planted_table(&planted_cfg, ctx.seed).context("generating planted table")?;

    let mut buf = vec![];
    write_exposure(&data.exposure, &mut buf)?;
    ctx.emit(dir.join("exposure.csv"), buf);
    let mut buf = vec![];
    write_injuries(&data.injuries, &mut buf)?;
    ctx.emit(dir.join("injuries.csv"), buf);
    let mut buf = vec![];
    write_gps(&data.gps, &mut buf)?;
    ctx.emit(dir.join("gps.csv"), buf);

    let mut header: Vec<&str> = planted.data.names.iter().map(String::as_str).collect();
    header.push("injured");
    let rows = planted
        .data
        .x
        .row_iter()
        .zip(&planted.data.y)
        .map(|(r, &y)| {
            let mut v: Vec<String> = r.iter().map(|x| x.to_string()).collect();
            v.push(u8::from(y).to_string());
            v
        });
    ctx.emit(dir.join("planted.csv"), csv_bytes(&header, rows)?);

    let mut pairs = synth_cfg.pairs();
    pairs.push(("planted_rows", args.planted_rows.to_string()));
    ctx.emit(dir.join("synth.cfg"), synth_cfg.to_text().into_bytes());
    let report = SynthReport {
        files: vec![
            "exposure.csv",
            "injuries.csv",
            "gps.csv",
            "planted.csv",
            "synth.cfg",
        ],
        subjects: data.exposure.len(),
        injury_events: data.injuries.len(),
        gps_sessions: data.gps.sessions.len(),
        planted_features: data.planted_features,
        planted_table_informative: planted
            .informative
            .iter()
            .map(|&j| planted.data.names[j].clone())
            .collect(),
    };
    ctx.emit_report(dir.join("synth.json"), &pairs, &report)
}
