//! Acceptance criteria for the toolkit. Each criterion prints one PASS/FAIL
//! line; the process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use pitchguard::dtw::dtw_distance;
use pitchguard::eval::{
    kfold_cv, truncation_sweep, ConstantMajority, CvPlan, SpcaModel, SweepConfig,
};
use pitchguard::featsel::{
    ga_select, merit, merit_from_means, Associations, FeatureTable, GaConfig,
};
use pitchguard::glm::{
    cooks_distance, glm_fit, ols_fit, poisson_fit, white_robust_se, Column, DesignMatrix, Family,
};
use pitchguard::gp::{gp_fit, linear_grid, log_grid, ResponseScale, NEGATIVE_VARIANCE_TOL};
use pitchguard::ingest::{
    aggregate_weekly, filter_subjects, synth_generate, synth_planted_table, Approach, FilterConfig,
    PlantedTableConfig, SynthConfig,
};
use pitchguard::kernels::{
    gram, kernel_eval, psd_probe, GramMatrix, KernelInput, KernelSpec, PsdStatus,
};
use pitchguard::linalg::symmetric_eigen;
use pitchguard::metrics::{ccc, kappa, pearson, ConfusionMatrix};
use pitchguard::spca::{component_report, spca_fit, spca_predict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    }};
}

fn ok<T, E: std::fmt::Debug>(r: Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e:?}"))
}

// ---------------------------------------------------------------- 1. DTW

fn all_sequences(max_len: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![];
    let mut layer: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| {
                [0.0, 1.0, 2.0].map(|v| {
                    let mut t = s.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

type WarpPath = Vec<(usize, usize)>;

/// Minimum over an explicit list of every monotone warping path.
fn enumerated_dtw(r: &[f64], l: &[f64]) -> f64 {
    fn paths(i: usize, j: usize, n: usize, m: usize, cur: &mut WarpPath, out: &mut Vec<WarpPath>) {
        cur.push((i, j));
        if i + 1 == n && j + 1 == m {
            out.push(cur.clone());
        } else {
            for (di, dj) in [(1, 0), (0, 1), (1, 1)] {
                if i + di < n && j + dj < m {
                    paths(i + di, j + dj, n, m, cur, out);
                }
            }
        }
        cur.pop();
    }
    let mut all = vec![];
    paths(0, 0, r.len(), l.len(), &mut vec![], &mut all);
    all.iter()
        .map(|p| p.iter().map(|&(i, j)| (r[i] - l[j]).abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

fn criterion_dtw() -> Check {
    let start = Instant::now();
    let seqs = all_sequences(5);
    let mut pairs = 0usize;
    for r in &seqs {
        for l in &seqs {
            let dp = ok(dtw_distance(r, l), "dtw")?.distance;
            let brute = enumerated_dtw(r, l);
            ensure!(
                dp == brute,
                "dtw({r:?}, {l:?}) = {dp}, enumeration gives {brute}"
            );
            pairs += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(
        elapsed < Duration::from_secs(10),
        "{pairs} pairs took {elapsed:?}"
    );
    Ok(())
}

// ---------------------------------------------------------------- 2. GP

fn gauss_jordan_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = DMatrix::identity(n, n);
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| m[(x, c)].abs().total_cmp(&m[(y, c)].abs()))
            .unwrap();
        m.swap_rows(c, p);
        inv.swap_rows(c, p);
        let d = m[(c, c)];
        for j in 0..n {
            m[(c, j)] /= d;
            inv[(c, j)] /= d;
        }
        for r in (0..n).filter(|&r| r != c) {
            let f = m[(r, c)];
            for j in 0..n {
                m[(r, j)] -= f * m[(c, j)];
                inv[(r, j)] -= f * inv[(c, j)];
            }
        }
    }
    inv
}

fn criterion_gp() -> Check {
    let spec = KernelSpec::DtwRbf { gamma: 0.3 };
    let x = KernelInput::Sequence(vec![1.0, 3.0, 2.0]);
    for (f, eps) in [(2.0, 0.1), (-0.7, 1e-3), (5.5, 0.5)] {
        let fit = ok(
            gp_fit(spec, vec![x.clone()], &[f], eps, ResponseScale::Raw),
            "1-point fit",
        )?;
        let p = ok(fit.predict(&x), "1-point predict")?;
        ensure!(
            (p.mean - f / (1.0 + eps)).abs() <= 1e-12,
            "1-point mean {} vs {}",
            p.mean,
            f / (1.0 + eps)
        );
        let var = 1.0 - 1.0 / (1.0 + eps);
        ensure!(
            (p.variance - var).abs() <= 1e-12,
            "1-point variance {} vs {var}",
            p.variance
        );
    }

    let seqs: Vec<KernelInput> = [
        vec![0.0, 1.0, 2.0],
        vec![2.0, 2.0],
        vec![1.0, 0.0, 0.0, 3.0],
        vec![4.0],
        vec![0.5, 1.5, 2.5, 1.0],
    ]
    .into_iter()
    .map(KernelInput::Sequence)
    .collect();
    let targets = [0.4, 1.2, -0.7, 2.2, 0.1];
    let query = KernelInput::Sequence(vec![1.0, 1.0, 2.0]);
    let eps = 0.05;
    for n in 1..=5 {
        let fit = ok(
            gp_fit(
                spec,
                seqs[..n].to_vec(),
                &targets[..n],
                eps,
                ResponseScale::Raw,
            ),
            "fit",
        )?;
        let mut k = DMatrix::from_fn(n, n, |i, j| kernel_eval(&spec, &seqs[i], &seqs[j]).unwrap());
        for i in 0..n {
            k[(i, i)] += eps;
        }
        let inv = gauss_jordan_inverse(&k);
        let ks = DVector::from_fn(n, |i, _| kernel_eval(&spec, &query, &seqs[i]).unwrap());
        let mean = (ks.transpose() * &inv * DVector::from_column_slice(&targets[..n]))[0];
        let var = 1.0 - (ks.transpose() * &inv * &ks)[0];
        let p = ok(fit.predict(&query), "predict")?;
        ensure!(
            (p.mean - mean).abs() <= 1e-10,
            "n={n}: mean {} vs inverse {mean}",
            p.mean
        );
        ensure!(
            (p.variance - var).abs() <= 1e-10,
            "n={n}: variance {} vs inverse {var}",
            p.variance
        );
    }

    let fit = ok(
        gp_fit(spec, seqs.clone(), &targets, 1e-10, ResponseScale::Raw),
        "interpolating fit",
    )?;
    for (x, f) in seqs.iter().zip(targets) {
        let mu = ok(fit.predict(x), "predict")?.mean;
        ensure!((mu - f).abs() <= 1e-5, "interpolation {mu} vs {f}");
    }
    Ok(())
}

// ---------------------------------------------------------------- 3. Kernels

fn criterion_kernels() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inputs: Vec<KernelInput> = (0..12)
        .map(|_| {
            let len = rng.random_range(1..9);
            KernelInput::Sequence((0..len).map(|_| rng.random_range(0.0..5.0)).collect())
        })
        .collect();
    let g = ok(gram(&KernelSpec::DtwRbf { gamma: 0.2 }, &inputs), "gram")?;
    let e = g.entries();
    for i in 0..g.dim() {
        ensure!(
            (e[(i, i)] - 1.0).abs() <= 1e-12,
            "diagonal {i} = {}",
            e[(i, i)]
        );
        for j in 0..g.dim() {
            ensure!(
                (e[(i, j)] - e[(j, i)]).abs() <= 1e-12,
                "asymmetry at ({i}, {j})"
            );
        }
    }

    let bad = ok(
        GramMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])),
        "gram",
    )?;
    match ok(psd_probe(&bad, 1e-8), "psd_probe")? {
        PsdStatus::NotPsd { min_eig } => {
            ensure!((min_eig + 1.0).abs() <= 1e-9, "min_eig {min_eig}")
        }
        other => return Err(format!("[[1,2],[2,1]] probed as {other:?}")),
    }

    let data = DMatrix::from_fn(40, 6, |_, _| rng.random_range(-1.0..1.0));
    let centered = DMatrix::from_fn(40, 6, |i, j| data[(i, j)] - data.column(j).mean());
    let sigma = centered.transpose() * &centered / 39.0;
    let eig = ok(symmetric_eigen(&sigma), "eigen")?;
    let rel = (eig.reconstruct() - &sigma).norm() / sigma.norm();
    ensure!(rel <= 1e-9, "reconstruction relative error {rel:e}");
    Ok(())
}

// ---------------------------------------------------------------- 4. Metrics

fn criterion_metrics() -> Check {
    let c = ok(ccc(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]), "ccc")?;
    ensure!((c - 4.0 / 7.0).abs() <= 1e-12, "ccc {c}");

    let cm = ok(
        ConfusionMatrix::from_counts(
            vec!["pos".into(), "neg".into()],
            vec![vec![40, 10], vec![20, 30]],
        ),
        "confusion",
    )?;
    let k = ok(kappa(&cm), "kappa")?;
    ensure!(k == 0.4, "kappa {k}");

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..1000 {
        let n = rng.random_range(3..30);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let shift = rng.random_range(-3.0..3.0);
        let scale = rng.random_range(0.1..3.0);
        let b: Vec<f64> = a
            .iter()
            .map(|v| scale * v + shift + rng.random_range(-5.0..5.0))
            .collect();
        let (c, r) = (ok(ccc(&a, &b), "ccc")?, ok(pearson(&a, &b), "pearson")?);
        ensure!(
            c.abs() <= r.abs() + 1e-15,
            "trial {trial}: |ccc| {c} > |pearson| {r}"
        );
    }
    Ok(())
}

// ---------------------------------------------------------------- 5. GLM

fn numeric_design(cols: &[(&str, Vec<f64>)]) -> Result<DesignMatrix, String> {
    let n = cols[0].1.len();
    let terms = cols
        .iter()
        .map(|(n, v)| (n.to_string(), Column::Numeric(v.clone())))
        .collect();
    ok(DesignMatrix::from_terms(n, terms), "design")
}

fn criterion_glm() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let counts: Vec<f64> = (0..50)
        .map(|_| f64::from(rng.random_range(0..12u32)))
        .collect();
    let empty = ok(DesignMatrix::from_terms(counts.len(), vec![]), "design")?;
    let fit = ok(poisson_fit(&empty, &counts), "poisson")?;
    let ybar = counts.iter().sum::<f64>() / counts.len() as f64;
    ensure!(
        (fit.coefficients[0] - ybar.ln()).abs() <= 1e-10,
        "intercept {} vs ln ybar {}",
        fit.coefficients[0],
        ybar.ln()
    );

    let n = 80;
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    let design = numeric_design(&[("a", a.clone()), ("b", b.clone())])?;
    let y_pois: Vec<f64> = (0..n)
        .map(|i| (0.5 + a[i] - 0.3 * b[i]).exp().round() + f64::from(rng.random_range(0..2u32)))
        .collect();
    let y_logit: Vec<f64> = (0..n)
        .map(|i| {
            f64::from(u8::from(
                a[i] + 0.5 * b[i] + rng.random_range(-1.0..1.0) > 0.5,
            ))
        })
        .collect();
    for (family, y) in [(Family::Poisson, &y_pois), (Family::Binomial, &y_logit)] {
        let fit = ok(glm_fit(&design, y, family, 0.0), "glm")?;
        let x = design.matrix();
        let resid = DVector::from_iterator(n, y.iter().zip(&fit.fitted).map(|(y, m)| y - m));
        let score = x.transpose() * resid;
        ensure!(score.amax() <= 1e-6, "{family:?} score {:e}", score.amax());
    }

    let x1: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..2.0)).collect();
    let x2: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..4.0)).collect();
    let y: Vec<f64> = (0..20)
        .map(|i| 1.0 + x1[i] - 0.5 * x2[i] + rng.random_range(-1.0..1.0))
        .collect();
    let design = numeric_design(&[("x1", x1), ("x2", x2)])?;
    let fit = ok(ols_fit(&design, &y), "ols")?;
    let cooks = ok(cooks_distance(&fit, &design, &y), "cooks")?;
    let x = design.matrix();
    let (n, k) = x.shape();
    let xtx_inv = gauss_jordan_inverse(&(x.transpose() * x));
    let h = x * &xtx_inv * x.transpose();
    let beta = &xtx_inv * x.transpose() * DVector::from_column_slice(&y);
    let e: Vec<f64> = (0..n).map(|i| y[i] - (x.row(i) * &beta)[0]).collect();
    let mse = e.iter().map(|v| v * v).sum::<f64>() / (n - k) as f64;
    for i in 0..n {
        let closed = e[i] * e[i] * h[(i, i)] / (k as f64 * mse * (1.0 - h[(i, i)]).powi(2));
        ensure!(
            (cooks[i] - closed).abs() <= 1e-8,
            "cook {i}: {} vs {closed}",
            cooks[i]
        );
    }

    // y = [1, 2, 4] on [1, x], x = [0, 1, 2]: residuals (1/6, -1/3, 1/6),
    // (X'X)^-1 = [[5, -3], [-3, 3]] / 6 and the sandwich diagonal is (7/216, 1/72).
    let design = numeric_design(&[("x", vec![0.0, 1.0, 2.0])])?;
    let fit = ok(ols_fit(&design, &[1.0, 2.0, 4.0]), "ols")?;
    let se = ok(white_robust_se(&fit, &design), "white")?;
    let hand = [(7.0f64 / 216.0).sqrt(), (1.0f64 / 72.0).sqrt()];
    for (s, h) in se.iter().zip(hand) {
        ensure!((s - h).abs() <= 1e-10, "White SE {s} vs {h}");
    }
    Ok(())
}

// ---------------------------------------------------------------- 6. CFS / GA

fn exhaustive_best(assoc: &Associations) -> f64 {
    let p = assoc.class.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << p) {
        let idx: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
        let k = idx.len() as f64;
        let rzi = idx.iter().map(|&i| assoc.class[i]).sum::<f64>() / k;
        let mut pairs = 0.0;
        let mut total = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                total += assoc.features[(i, j)];
                pairs += 1.0;
            }
        }
        let rii = if pairs > 0.0 { total / pairs } else { 0.0 };
        best = best.max(k * rzi / (k + k * (k - 1.0) * rii).sqrt());
    }
    best
}

fn criterion_featsel() -> Check {
    let start = Instant::now();
    let m = merit_from_means(2, 0.5, 0.2);
    ensure!(
        (m.value - 1.0 / 2.4f64.sqrt()).abs() <= 1e-10,
        "k=2 merit {}",
        m.value
    );
    ensure!(
        format!("{:.4}", m.value) == "0.6455",
        "k=2 merit {} does not round to 0.6455",
        m.value
    );

    let cfg = PlantedTableConfig {
        features: 10,
        informative: 3,
        ..PlantedTableConfig::default()
    };
    let mut matches = 0;
    for seed in 0..10u64 {
        let table = ok(synth_planted_table(&cfg, seed), "planted table")?;
        let assoc = Associations::compute(&FeatureTable::from_dataset(&table.data));
        for i in 0..assoc.len() {
            let mut one = vec![false; assoc.len()];
            one[i] = true;
            let v = merit(&one, &assoc).ok_or("empty subset")?.value;
            ensure!(
                v == assoc.class[i],
                "k=1 merit {v} vs class association {}",
                assoc.class[i]
            );
        }
        let ga = GaConfig {
            seed,
            ..GaConfig::default()
        };
        let a = ok(ga_select(&assoc, &ga), "ga")?;
        let b = ok(ga_select(&assoc, &ga), "ga")?;
        ensure!(a == b, "GA not deterministic for seed {seed}");
        if (a.merit.value - exhaustive_best(&assoc)).abs() <= 1e-12 {
            matches += 1;
        }
    }
    ensure!(
        matches >= 8,
        "GA matched the exhaustive optimum in {matches}/10 seeds"
    );
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(())
}

// ---------------------------------------------------------------- 7. SPCA

/// Plain Newton-Raphson logistic regression with an intercept.
fn newton_logistic(x: &DMatrix<f64>, y: &[bool]) -> Vec<f64> {
    let x = x.clone().insert_column(0, 1.0);
    let (n, k) = x.shape();
    let yv = DVector::from_iterator(n, y.iter().map(|&b| f64::from(u8::from(b))));
    let mut beta = DVector::zeros(k);
    for _ in 0..100 {
        let mu = (&x * &beta).map(|e| 1.0 / (1.0 + (-e).exp()));
        let w = mu.map(|m| m * (1.0 - m));
        let xtw = DMatrix::from_fn(k, n, |j, i| x[(i, j)] * w[i]);
        let step = gauss_jordan_inverse(&(&xtw * &x)) * x.transpose() * (&yv - &mu);
        beta += &step;
        if step.amax() < 1e-14 {
            break;
        }
    }
    (&x * beta)
        .iter()
        .map(|e| 1.0 / (1.0 + (-e).exp()))
        .collect()
}

fn criterion_spca() -> Check {
    let table = ok(
        synth_planted_table(
            &PlantedTableConfig {
                shift: 0.8,
                ..PlantedTableConfig::default()
            },
            7,
        ),
        "planted table",
    )?;
    let data = &table.data;
    let p = data.ncols();
    let c = ok(spca_fit(data, 0.0, p), "spca")?;
    let probs = ok(spca_predict(&c, data), "spca predict")?;
    for (a, b) in probs.iter().zip(newton_logistic(&data.x, &data.y)) {
        ensure!((a - b).abs() <= 1e-6, "full SPCA {a} vs logistic {b}");
    }

    let z = ok(c.standardizer.apply(data), "standardize")?.select_columns(&c.survivors);
    let scores = c.pca.scores(&z, p);
    for i in 0..p {
        for j in i + 1..p {
            let (a, b) = (scores.column(i), scores.column(j));
            let (ma, mb) = (a.mean(), b.mean());
            let cov: f64 = a
                .iter()
                .zip(b.iter())
                .map(|(u, v)| (u - ma) * (v - mb))
                .sum();
            let va: f64 = a.iter().map(|u| (u - ma).powi(2)).sum();
            let vb: f64 = b.iter().map(|v| (v - mb).powi(2)).sum();
            let r = cov / (va * vb).sqrt();
            ensure!(r.abs() <= 1e-8, "scores {i},{j} correlate at {r:e}");
        }
    }

    let synth_cfg = SynthConfig::default();
    let synth = ok(synth_generate(&synth_cfg, 1), "synth")?;
    let weekly = ok(
        aggregate_weekly(
            &synth.gps,
            &synth.injuries,
            Approach::A,
            synth_cfg.season_start,
        ),
        "weekly aggregation",
    )?
    .to_dataset();
    let model = SpcaModel { alpha: 0.8, m: 1 };
    let fitted = ok(spca_fit(&weekly, model.alpha, model.m), "spca")?;
    let report = ok(component_report(&fitted, &weekly), "component report")?;
    let top = &report.components[0].loadings[0];
    ensure!(
        synth.planted_features.contains(&top.feature),
        "top PC1 loading is {} (planted: {:?})",
        top.feature,
        synth.planted_features
    );
    let plan = CvPlan::default();
    let spca_kappa = kappa_mean(&ok(kfold_cv(&model, &weekly, &plan), "spca cv")?.aggregate)?;
    let constant_kappa =
        kappa_mean(&ok(kfold_cv(&ConstantMajority, &weekly, &plan), "constant cv")?.aggregate)?;
    ensure!(
        spca_kappa - constant_kappa >= 0.1,
        "SPCA kappa {spca_kappa} vs constant {constant_kappa}"
    );
    Ok(())
}

fn kappa_mean(agg: &BTreeMap<String, pitchguard::eval::Aggregate>) -> Result<f64, String> {
    agg.get("kappa")
        .and_then(|a| a.mean)
        .ok_or_else(|| "no kappa aggregate".to_string())
}

// ---------------------------------------------------------------- 8. Sweep

fn criterion_sweep() -> Check {
    let start = Instant::now();
    let cfg = SynthConfig {
        subjects: 20,
        ..SynthConfig::default()
    };
    let synth = ok(synth_generate(&cfg, 1), "synth")?;
    let filtered = filter_subjects(&synth.exposure, &synth.injuries, &FilterConfig::default());
    let mut sweep_cfg = SweepConfig::new(log_grid(2e-5, 0.2, 100), linear_grid(1e-4, 1e-2, 5));
    sweep_cfg.keep_grids = true;
    let sweep = ok(truncation_sweep(&filtered.kept, &sweep_cfg), "sweep")?;
    let elapsed = start.elapsed();

    ensure!(sweep.rows.len() == 13, "{} rows", sweep.rows.len());
    let depths: Vec<u32> = sweep.rows.iter().map(|r| r.t_minus_a).collect();
    ensure!(depths == (0..=12).collect::<Vec<_>>(), "depths {depths:?}");
    let mut csv = vec![];
    ok(sweep.write_csv(&mut csv), "csv")?;
    let text = String::from_utf8(csv).map_err(|e| e.to_string())?;
    ensure!(
        text.lines().next() == Some("t_minus_a,ccc,mae,gamma,epsilon"),
        "header {:?}",
        text.lines().next()
    );
    ensure!(
        text.lines().count() == 14,
        "csv has {} lines",
        text.lines().count()
    );

    for row in &sweep.rows {
        let grid = row.grid.as_ref().ok_or("grid not kept")?;
        ensure!(
            grid.rows.len() == 500,
            "a={}: {} settings",
            row.t_minus_a,
            grid.rows.len()
        );
        for g in grid.rows.iter().filter(|g| g.accepted()) {
            let v = g.min_variance.ok_or("accepted row without variance")?;
            ensure!(
                v >= NEGATIVE_VARIANCE_TOL,
                "a={} gamma={} eps={}: variance {v}",
                row.t_minus_a,
                g.gamma,
                g.epsilon
            );
        }
        ensure!(
            row.min_variance >= NEGATIVE_VARIANCE_TOL,
            "a={}: variance {}",
            row.t_minus_a,
            row.min_variance
        );
    }
    let c0 = sweep.rows[0].ccc.ok_or("CCC undefined at a=0")?;
    let c12 = sweep.rows[12].ccc.ok_or("CCC undefined at a=12")?;
    ensure!(c0 >= c12 - 0.05, "CCC(0) {c0} < CCC(12) {c12} - 0.05");
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(())
}

// ---------------------------------------------------------------- 9. CLI determinism

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
            }
        }
    }
    out
}

struct Run {
    status: Option<i32>,
    stdout: Vec<u8>,
    stderr: String,
    files: BTreeMap<PathBuf, Vec<u8>>,
}

fn run_in_fresh_dir(args: &[String], jobs: usize) -> Result<Run, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_pitchguard"))
        .args(args)
        .args(["--jobs", &jobs.to_string()])
        .current_dir(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    Ok(Run {
        status: out.status.code(),
        stdout: out.stdout,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        files: files_under(dir.path()),
    })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<String, String> {
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| e.to_string())?;
    Ok(p.to_string_lossy().into_owned())
}

fn criterion_determinism() -> Check {
    let fixtures = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = fixtures.path();
    let data = root.join("data");
    let status = Command::new(env!("CARGO_BIN_EXE_pitchguard"))
        .args(["synth", "--seed", "1", "--out"])
        .arg(&data)
        .status()
        .map_err(|e| e.to_string())?;
    ensure!(status.success(), "fixture synth failed");
    let d = |name: &str| data.join(name).to_string_lossy().into_owned();

    let a = write(root, "a.csv", "1\n2\n3\n4\n")?;
    let b = write(root, "b.csv", "1\n3\n4\n")?;
    let points = write(root, "points.csv", "0,0\n1,0\n0,2\n1.5,1\n")?;
    let seqs = write(root, "seqs.csv", "1,2,3\n2,3\n0,0,1,4\n")?;
    let pred = write(root, "pred.csv", "p\n3\n5\n2.5\n7\n1\n")?;
    let truth = write(root, "truth.csv", "t\n2\n5\n3\n6\n2\n")?;
    let labels_pred = write(root, "lp.csv", "p\ninj\nok\nok\ninj\nok\n")?;
    let labels_truth = write(root, "lt.csv", "t\ninj\nok\ninj\ninj\nok\n")?;
    let sweep_cfg = write(root, "sweep.cfg", "gamma_count = 20\nepsilon_count = 3\n")?;
    let ga_cfg = write(root, "ga.cfg", "generations = 60\n")?;

    let commands: Vec<Vec<String>> = [
        vec![
            "dtw",
            "--a",
            &a,
            "--b",
            &b,
            "--path-out",
            "path.csv",
            "--out",
            "dtw.json",
        ],
        vec![
            "gram",
            "--kernel",
            "rbf(sigma=0.5)",
            "--inputs",
            &points,
            "--out",
            "rbf.csv",
        ],
        vec![
            "gram",
            "--kernel",
            "dtw_rbf(gamma=0.1)",
            "--inputs",
            &seqs,
            "--out",
            "dtw_gram.csv",
        ],
        vec![
            "gram",
            "--kernel",
            "exposure_avg(gamma=0.001)",
            "--exposure",
            &d("exposure.csv"),
            "--out",
            "exp.csv",
        ],
        vec![
            "gp-sweep",
            "--exposure",
            &d("exposure.csv"),
            "--injuries",
            &d("injuries.csv"),
            "--config",
            &sweep_cfg,
            "--grid-out",
            "grid.csv",
            "--out",
            "sweep.json",
        ],
        vec![
            "glm",
            "--family",
            "logistic",
            "--data",
            &d("planted.csv"),
            "--formula",
            "injured ~ x1 + x2 + x3",
            "--robust",
            "--cooks",
            "--drop",
            "x3",
            "--out",
            "glm.json",
        ],
        vec![
            "spca",
            "--gps",
            &d("gps.csv"),
            "--injuries",
            &d("injuries.csv"),
            "--alpha-grid",
            "0.6,0.8",
            "--m-grid",
            "1:2",
            "--repeats",
            "2",
            "--folds",
            "5",
            "--seed",
            "4",
            "--out",
            "spca.json",
        ],
        vec![
            "featsel",
            "--data",
            &d("planted.csv"),
            "--class",
            "injured",
            "--folds",
            "5",
            "--config",
            &ga_cfg,
            "--seed",
            "3",
            "--out",
            "survival.csv",
        ],
        vec![
            "metrics", "--pred", &pred, "--truth", &truth, "--out", "reg.json",
        ],
        vec![
            "metrics",
            "--pred",
            &labels_pred,
            "--truth",
            &labels_truth,
            "--kind",
            "classification",
            "--out",
            "cls.json",
        ],
        vec!["synth", "--seed", "9", "--out", "cohort"],
        vec![
            "cv",
            "--data",
            &d("planted.csv"),
            "--class",
            "injured",
            "--model",
            "spca",
            "--seed",
            "5",
            "--out",
            "cv_spca.json",
        ],
        vec![
            "cv",
            "--data",
            &d("planted.csv"),
            "--class",
            "injured",
            "--model",
            "knn",
            "--seed",
            "5",
            "--out",
            "cv_knn.json",
        ],
        vec![
            "cv",
            "--data",
            &d("planted.csv"),
            "--class",
            "injured",
            "--model",
            "ridge",
            "--out",
            "cv_ridge.json",
        ],
        vec![
            "cv",
            "--data",
            &d("planted.csv"),
            "--class",
            "injured",
            "--model",
            "gnb",
            "--out",
            "cv_gnb.json",
        ],
    ]
    .iter()
    .map(|c| c.iter().map(|s| s.to_string()).collect())
    .collect();

    let mut covered = std::collections::BTreeSet::new();
    for args in &commands {
        let first = run_in_fresh_dir(args, 1)?;
        ensure!(
            first.status == Some(0),
            "{} failed: {}",
            args[0],
            first.stderr
        );
        ensure!(!first.files.is_empty(), "{} wrote nothing", args[0]);
        for (jobs, label) in [(1, "rerun"), (4, "--jobs 4")] {
            let again = run_in_fresh_dir(args, jobs)?;
            ensure!(
                again.status == Some(0),
                "{} ({label}) failed: {}",
                args[0],
                again.stderr
            );
            ensure!(
                again.stdout == first.stdout,
                "{} ({label}): stdout differs",
                args[0]
            );
            ensure!(
                again.files.keys().eq(first.files.keys()),
                "{} ({label}): file sets differ: {:?} vs {:?}",
                args[0],
                again.files.keys().collect::<Vec<_>>(),
                first.files.keys().collect::<Vec<_>>()
            );
            for (name, bytes) in &first.files {
                ensure!(
                    &again.files[name] == bytes,
                    "{} ({label}): {} differs",
                    args[0],
                    name.display()
                );
            }
        }
        covered.insert(args[0].clone());
    }
    let all = [
        "dtw", "gram", "gp-sweep", "glm", "spca", "featsel", "metrics", "synth", "cv",
    ];
    ensure!(
        all.iter().all(|c| covered.contains(*c)),
        "uncovered subcommands"
    );
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            "1 dtw dynamic program equals path enumeration",
            criterion_dtw,
        ),
        ("2 gp closed forms", criterion_gp),
        ("3 kernel and gram properties", criterion_kernels),
        ("4 metric exactness", criterion_metrics),
        ("5 glm", criterion_glm),
        ("6 cfs merit and ga", criterion_featsel),
        ("7 spca pipeline", criterion_spca),
        ("8 truncation sweep", criterion_sweep),
        ("9 cli determinism", criterion_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        match check() {
            Ok(()) => println!("PASS  {name} ({:.1?})", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
