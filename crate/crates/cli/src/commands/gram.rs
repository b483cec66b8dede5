use std::path::PathBuf;

use anyhow::{bail, Context as _};
use pitchguard::ingest::load_exposure_csv;
use pitchguard::kernels::{gram, psd_probe, KernelInput, KernelSpec, PsdStatus, DEFAULT_PSD_TOL};
use serde::Serialize;

use super::csv_bytes;
use crate::output::{sibling, Context};
use crate::table::read_sequences;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Kernel such as `rbf(sigma=0.5)`, `polynomial(sigma=1, degree=2)`,
    /// `constant(c=1)`, `dtw_rbf(gamma=0.01)` or `exposure_avg(gamma=0.01)`.
    #[arg(long)]
    kernel: String,
    /// Headerless CSV, one vector or sequence per line.
    #[arg(long, conflicts_with = "exposure")]
    inputs: Option<PathBuf>,
    /// Exposure table; one input per subject.
    #[arg(long)]
    exposure: Option<PathBuf>,
    /// Tolerance of the positive-semidefiniteness probe.
    #[arg(long, default_value_t = DEFAULT_PSD_TOL)]
    psd_tol: f64,
}

#[derive(Serialize)]
struct GramReport {
    kernel: KernelSpec,
    dim: usize,
    labels: Vec<String>,
    psd: PsdStatus,
}

pub fn run(ctx: &mut Context, args: Args) -> anyhow::Result<()> {
    ctx.config()?.finish()?;
    let spec: KernelSpec = args.kernel.parse().context("parsing --kernel")?;
    let (labels, inputs): (Vec<String>, Vec<KernelInput>) =
        match (&args.inputs, &args.exposure, spec) {
            (None, Some(path), KernelSpec::ExposureAvg { .. }) => load_exposure_csv(path)?
                .iter()
                .map(|r| (r.subject_id.clone(), KernelInput::from(r)))
                .unzip(),
            (Some(path), None, KernelSpec::ExposureAvg { .. }) => {
                bail!("exposure_avg reads --exposure, not {}", path.display())
            }
            (Some(path), None, spec) => read_sequences(path)?
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    let input = match spec {
                        KernelSpec::DtwRbf { .. } => KernelInput::Sequence(v),
                        _ => KernelInput::Vector(v),
                    };
                    (format!("row{}", i + 1), input)
                })
                .unzip(),
            _ => bail!("gram needs --inputs, or --exposure for exposure_avg"),
        };
    let g = gram(&spec, &inputs).context("building Gram matrix")?;
    let psd = psd_probe(&g, args.psd_tol)?;
    println!(
        "dim={} min_eigenvalue={} psd={}",
        g.dim(),
        psd.min_eig(),
        psd.is_psd()
    );
    if let Some(out) = ctx.out().map(PathBuf::from) {
        let m = g.entries();
        let header: Vec<&str> = labels.iter().map(String::as_str).collect();
        let rows = m
            .row_iter()
            .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>());
        ctx.emit(&out, csv_bytes(&header, rows)?);
        let report = GramReport {
            kernel: spec,
            dim: g.dim(),
            labels,
            psd,
        };
        ctx.emit_report(
            sibling(&out, "json"),
            &[("kernel", spec.to_string())],
            &report,
        )?;
    }
    Ok(())
}
