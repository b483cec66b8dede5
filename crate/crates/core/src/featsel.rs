//! Correlation-based feature subset selection searched by a genetic
//! algorithm.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, KvConfig};
use crate::data::Dataset;
use crate::eval::stratified_folds;

/// Equal-frequency bins used when a numeric column meets a categorical one.
pub const NUMERIC_BINS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatselError {
    #[error("table has no rows")]
    Empty,
    #[error("column {name:?} has {got} rows, expected {expected}")]
    LengthMismatch {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("need at least {need} features, got {got}")]
    TooFewFeatures { need: usize, got: usize },
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 folds and no more folds than rows ({rows}), got {folds}")]
    BadFolds { folds: usize, rows: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

fn counts<T: Ord>(x: impl IntoIterator<Item = T>) -> BTreeMap<T, usize> {
    let mut c = BTreeMap::new();
    for v in x {
        *c.entry(v).or_insert(0) += 1;
    }
    c
}

/// Counts are summed in sorted order so the result does not depend on how
/// the cells were enumerated.
fn entropy_of_counts(counts: impl Iterator<Item = usize>, n: usize) -> f64 {
    let n = n as f64;
    let mut counts: Vec<usize> = counts.filter(|&c| c > 0).collect();
    counts.sort_unstable();
    counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Shannon entropy in bits of the empirical distribution.
pub fn entropy<T: Ord>(x: &[T]) -> f64 {
    entropy_of_counts(counts(x.iter()).into_values(), x.len())
}

pub fn joint_entropy<A: Ord, B: Ord>(x: &[A], y: &[B]) -> f64 {
    assert_eq!(x.len(), y.len(), "paired columns");
    entropy_of_counts(counts(x.iter().zip(y)).into_values(), x.len())
}

/// Mutual information `H(X) + H(Y) - H(X, Y)` in bits.
pub fn info_gain<A: Ord, B: Ord>(x: &[A], y: &[B]) -> f64 {
    entropy(x) + entropy(y) - joint_entropy(x, y)
}

/// `2 gain / (H(X) + H(Y))`, defined as 0 when both entropies vanish.
pub fn symmetrical_uncertainty<A: Ord, B: Ord>(x: &[A], y: &[B]) -> f64 {
    let h = entropy(x) + entropy(y);
    if h <= 0.0 {
        return 0.0;
    }
    (2.0 * info_gain(x, y) / h).clamp(0.0, 1.0)
}

/// Bin index per value; ties share a bin.
pub fn equal_frequency_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let bin = start * bins / n;
        for &i in &order[start..end] {
            out[i] = bin;
        }
        start = end;
    }
    out
}

fn abs_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx.sqrt() * syy.sqrt())).abs().min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl Feature {
    fn len(&self) -> usize {
        match self {
            Self::Numeric(v) => v.len(),
            Self::Categorical(v) => v.len(),
        }
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            Self::Numeric(v) => Self::Numeric(rows.iter().map(|&i| v[i]).collect()),
            Self::Categorical(v) => Self::Categorical(rows.iter().map(|&i| v[i].clone()).collect()),
        }
    }

    /// Category codes; numeric columns are binned.
    fn codes(&self) -> Vec<usize> {
        match self {
            Self::Numeric(v) => equal_frequency_bins(v, NUMERIC_BINS),
            Self::Categorical(v) => {
                let levels: BTreeMap<&String, usize> = counts(v.iter())
                    .into_keys()
                    .enumerate()
                    .map(|(i, l)| (l, i))
                    .collect();
                v.iter().map(|s| levels[s]).collect()
            }
        }
    }
}

/// Candidate features with a class column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub columns: Vec<Feature>,
    pub class: Vec<String>,
}

impl FeatureTable {
    pub fn new(
        names: Vec<String>,
        columns: Vec<Feature>,
        class: Vec<String>,
    ) -> Result<Self, FeatselError> {
        assert_eq!(names.len(), columns.len(), "one name per column");
        if class.is_empty() {
            return Err(FeatselError::Empty);
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != class.len() {
                return Err(FeatselError::LengthMismatch {
                    name: name.clone(),
                    got: col.len(),
                    expected: class.len(),
                });
            }
        }
        Ok(Self {
            names,
            columns,
            class,
        })
    }

    /// Numeric features with class labels `"0"`/`"1"`.
    pub fn from_dataset(d: &Dataset) -> Self {
        Self {
            names: d.names.clone(),
            columns: (0..d.ncols())
                .map(|j| Feature::Numeric(d.x.column(j).iter().copied().collect()))
                .collect(),
            class: d
                .y
                .iter()
                .map(|&b| if b { "1" } else { "0" }.to_string())
                .collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.class.len()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            class: rows.iter().map(|&i| self.class[i].clone()).collect(),
        }
    }
}

/// Feature-class and feature-feature associations of one table.
///
/// Numeric pairs use |Pearson r|, categorical pairs symmetrical
/// uncertainty, and mixed pairs symmetrical uncertainty after
/// equal-frequency binning of the numeric side. A numeric feature against a
/// two-level class uses |Pearson r| with the class indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct Associations {
    pub class: Vec<f64>,
    pub features: DMatrix<f64>,
}

fn pair_assoc(a: &Feature, b: &Feature) -> f64 {
    match (a, b) {
        (Feature::Numeric(x), Feature::Numeric(y)) => abs_pearson(x, y),
        _ => symmetrical_uncertainty(&a.codes(), &b.codes()),
    }
}

impl Associations {
    pub fn compute(table: &FeatureTable) -> Self {
        let p = table.columns.len();
        let class_codes = Feature::Categorical(table.class.clone()).codes();
        let levels = class_codes.iter().max().map_or(0, |m| m + 1);
        let class = table
            .columns
            .par_iter()
            .map(|col| match col {
                Feature::Numeric(x) if levels == 2 => {
                    let ind: Vec<f64> = class_codes.iter().map(|&c| c as f64).collect();
                    abs_pearson(x, &ind)
                }
                other => symmetrical_uncertainty(&other.codes(), &class_codes),
            })
            .collect();
        let pairs: Vec<(usize, usize)> = (0..p)
            .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
            .collect();
        let values: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| pair_assoc(&table.columns[i], &table.columns[j]))
            .collect();
        let mut features = DMatrix::identity(p, p);
        for (&(i, j), v) in pairs.iter().zip(values) {
            features[(i, j)] = v;
            features[(j, i)] = v;
        }
        Self { class, features }
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeritScore {
    pub value: f64,
    pub k: usize,
    pub mean_feature_class: f64,
    pub mean_intercorrelation: f64,
}

/// `k r_zi / sqrt(k + k (k - 1) r_ii)`.
pub fn merit_from_means(
    k: usize,
    mean_feature_class: f64,
    mean_intercorrelation: f64,
) -> MeritScore {
    let kf = k as f64;
    MeritScore {
        value: kf * mean_feature_class / (kf + kf * (kf - 1.0) * mean_intercorrelation).sqrt(),
        k,
        mean_feature_class,
        mean_intercorrelation,
    }
}

/// Merit of the selected features; `None` for an empty subset.
pub fn merit(subset: &[bool], assoc: &Associations) -> Option<MeritScore> {
    let idx: Vec<usize> = subset
        .iter()
        .enumerate()
        .filter(|(_, b)| **b)
        .map(|(i, _)| i)
        .collect();
    let k = idx.len();
    if k == 0 {
        return None;
    }
    let rzi = idx.iter().map(|&i| assoc.class[i]).sum::<f64>() / k as f64;
    let rii = if k == 1 {
        0.0
    } else {
        let mut total = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                total += assoc.features[(i, j)];
            }
        }
        total / (k * (k - 1) / 2) as f64
    };
    Some(merit_from_means(k, rzi, rii))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_p: f64,
    pub mutation_p: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 1000,
            crossover_p: 0.7,
            mutation_p: 0.05,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub const KEYS: [&'static str; 4] = ["population", "generations", "crossover_p", "mutation_p"];

    pub fn validate(&self) -> Result<(), FeatselError> {
        let bad = |m: &str| Err(FeatselError::InvalidConfig(m.to_string()));
        if self.population < 2 || !self.population.is_multiple_of(2) {
            return bad("population must be even and at least 2");
        }
        if !(0.0..=1.0).contains(&self.crossover_p) || !(0.0..=1.0).contains(&self.mutation_p) {
            return bad("probabilities must lie in [0, 1]");
        }
        Ok(())
    }

    /// Reads the GA keys; the seed comes from elsewhere.
    pub fn take_from(cfg: &mut KvConfig, seed: u64) -> Result<Self, FeatselError> {
        let d = Self::default();
        let c = Self {
            population: cfg.take_or("population", d.population)?,
            generations: cfg.take_or("generations", d.generations)?,
            crossover_p: cfg.take_or("crossover_p", d.crossover_p)?,
            mutation_p: cfg.take_or("mutation_p", d.mutation_p)?,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("population", self.population.to_string()),
            ("generations", self.generations.to_string()),
            ("crossover_p", self.crossover_p.to_string()),
            ("mutation_p", self.mutation_p.to_string()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaResult {
    pub best: Vec<bool>,
    pub merit: MeritScore,
    /// Best merit of the initial population.
    pub initial_best: f64,
    /// Best merit after each generation.
    pub history: Vec<f64>,
}

fn repair(chrom: &mut [bool], rng: &mut ChaCha8Rng) {
    if !chrom.contains(&true) {
        let i = rng.random_range(0..chrom.len());
        chrom[i] = true;
    }
}

fn fitness(chrom: &[bool], assoc: &Associations) -> f64 {
    merit(chrom, assoc).map_or(f64::NEG_INFINITY, |m| m.value)
}

fn argmax(f: &[f64]) -> usize {
    f.iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > f[best] { i } else { best })
}

/// Roulette-wheel pick on fitness shifted so the generation minimum is 0.
fn roulette(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    if total <= 0.0 {
        return rng.random_range(0..weights.len());
    }
    let mut r = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

/// Genetic search over feature subsets maximizing merit: roulette
/// selection, single-point crossover, per-bit mutation and one elite.
pub fn ga_select(assoc: &Associations, cfg: &GaConfig) -> Result<GaResult, FeatselError> {
    cfg.validate()?;
    let p = assoc.len();
    if p < 2 {
        return Err(FeatselError::TooFewFeatures { need: 2, got: p });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop: Vec<Vec<bool>> = (0..cfg.population)
        .map(|_| {
            let mut c: Vec<bool> = (0..p).map(|_| rng.random_bool(0.5)).collect();
            repair(&mut c, &mut rng);
            c
        })
        .collect();
    let mut fit: Vec<f64> = pop.iter().map(|c| fitness(c, assoc)).collect();
    let initial_best = fit[argmax(&fit)];
    let mut history = Vec::with_capacity(cfg.generations);

    for _ in 0..cfg.generations {
        let elite = pop[argmax(&fit)].clone();
        let min = fit.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = fit.iter().map(|f| f - min).collect();
        let total: f64 = weights.iter().sum();
        let mut next: Vec<Vec<bool>> = (0..cfg.population)
            .map(|_| pop[roulette(&weights, total, &mut rng)].clone())
            .collect();
        for pair in next.chunks_mut(2) {
            if rng.random_bool(cfg.crossover_p) {
                let cut = rng.random_range(1..p);
                let (a, b) = pair.split_at_mut(1);
                a[0][cut..].swap_with_slice(&mut b[0][cut..]);
            }
        }
        for c in next.iter_mut() {
            for bit in c.iter_mut() {
                if rng.random_bool(cfg.mutation_p) {
                    *bit = !*bit;
                }
            }
            repair(c, &mut rng);
        }
        next[0] = elite;
        pop = next;
        fit = pop.iter().map(|c| fitness(c, assoc)).collect();
        history.push(fit[argmax(&fit)]);
    }

    let best = pop[argmax(&fit)].clone();
    let merit = merit(&best, assoc).expect("repaired chromosomes are non-empty");
    Ok(GaResult {
        best,
        merit,
        initial_best,
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalRow {
    pub feature: String,
    pub survival_fraction: f64,
    /// Mean best merit over the folds whose best subset includes the feature.
    pub mean_best_merit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalReport {
    pub folds: usize,
    pub fold_best: Vec<GaResult>,
    pub rows: Vec<SurvivalRow>,
}

/// Runs the GA on the training part of each stratified fold; fold `f` uses
/// GA seed `cfg.seed + f`.
pub fn cv_survival(
    table: &FeatureTable,
    cfg: &GaConfig,
    folds: usize,
) -> Result<SurvivalReport, FeatselError> {
    cfg.validate()?;
    let n = table.nrows();
    if folds < 2 || folds > n {
        return Err(FeatselError::BadFolds { folds, rows: n });
    }
    if table.columns.len() < 2 {
        return Err(FeatselError::TooFewFeatures {
            need: 2,
            got: table.columns.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let assignment = stratified_folds(&table.class, folds, &mut rng);
    let fold_best = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
            let assoc = Associations::compute(&table.select_rows(&train));
            let fold_cfg = GaConfig {
                seed: cfg.seed.wrapping_add(f as u64),
                ..cfg.clone()
            };
            ga_select(&assoc, &fold_cfg)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let rows = table
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let merits: Vec<f64> = fold_best
                .iter()
                .filter(|r| r.best[j])
                .map(|r| r.merit.value)
                .collect();
            SurvivalRow {
                feature: name.clone(),
                survival_fraction: merits.len() as f64 / folds as f64,
                mean_best_merit: (!merits.is_empty())
                    .then(|| merits.iter().sum::<f64>() / merits.len() as f64),
            }
        })
        .collect();
    Ok(SurvivalReport {
        folds,
        fold_best,
        rows,
    })
}
