//! Covariance kernels, Gram matrices and a positive-semidefiniteness probe.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dtw::{dtw_cost, DtwError};
use crate::ingest::ExposureRecord;
use crate::linalg::{min_eigenvalue, LinalgError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("{kernel} kernel cannot take {input} inputs")]
    InputKindMismatch {
        kernel: &'static str,
        input: &'static str,
    },
    #[error("vector inputs differ in length: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Dtw(#[from] DtwError),
    #[error("kernel evaluation failed at ({i}, {j}): {source}")]
    At {
        i: usize,
        j: usize,
        #[source]
        source: Box<KernelError>,
    },
    #[error("Gram matrix needs at least one input")]
    NoInputs,
    #[error("matrix is not symmetric")]
    NotSymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `k(x, x') = c`
    Constant { c: f64 },
    /// `exp(-sigma * |x - x'|^2)`
    Rbf { sigma: f64 },
    /// `(sigma * x.x')^degree`
    Polynomial { sigma: f64, degree: u32 },
    /// `exp(-gamma * DTW(x, x'))` on scalar sequences.
    DtwRbf { gamma: f64 },
    /// Mean of the DTW-RBF kernels on the training and match channels.
    ExposureAvg { gamma: f64 },
}

impl KernelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Rbf { .. } => "rbf",
            Self::Polynomial { .. } => "polynomial",
            Self::DtwRbf { .. } => "dtw_rbf",
            Self::ExposureAvg { .. } => "exposure_avg",
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |what: String| Err(KernelError::InvalidParameter(what));
        match *self {
            Self::Constant { c } if !c.is_finite() => bad(format!("c = {c}")),
            Self::Rbf { sigma } | Self::Polynomial { sigma, .. }
                if !(sigma > 0.0 && sigma.is_finite()) =>
            {
                bad(format!("sigma must be positive, got {sigma}"))
            }
            Self::Polynomial { degree: 0, .. } => bad("degree must be at least 1".into()),
            Self::DtwRbf { gamma } | Self::ExposureAvg { gamma }
                if !(gamma > 0.0 && gamma.is_finite()) =>
            {
                bad(format!("gamma must be positive, got {gamma}"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { c } => write!(f, "constant(c={c})"),
            Self::Rbf { sigma } => write!(f, "rbf(sigma={sigma})"),
            Self::Polynomial { sigma, degree } => {
                write!(f, "polynomial(sigma={sigma}, degree={degree})")
            }
            Self::DtwRbf { gamma } => write!(f, "dtw_rbf(gamma={gamma})"),
            Self::ExposureAvg { gamma } => write!(f, "exposure_avg(gamma={gamma})"),
        }
    }
}

/// Parses the [`fmt::Display`] form, e.g. `rbf(sigma=0.5)`.
impl FromStr for KernelSpec {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: String| KernelError::InvalidParameter(why);
        let s = s.trim();
        let (name, args) = match s.split_once('(') {
            Some((name, rest)) => (
                name.trim(),
                rest.strip_suffix(')')
                    .ok_or_else(|| bad(format!("missing ')' in {s:?}")))?,
            ),
            None => (s, ""),
        };
        let mut params = BTreeMap::new();
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {part:?}")))?;
            params.insert(k.trim(), v.trim());
        }
        let mut take = |key: &str| -> Result<f64, KernelError> {
            let raw = params
                .remove(key)
                .ok_or_else(|| bad(format!("{name} needs {key}")))?;
            raw.parse::<f64>()
                .map_err(|_| bad(format!("{key} = {raw:?} is not a number")))
        };
        let spec = match name {
            "constant" => Self::Constant { c: take("c")? },
            "rbf" => Self::Rbf {
                sigma: take("sigma")?,
            },
            "polynomial" => {
                let sigma = take("sigma")?;
                let degree = take("degree")?;
                if degree.fract() != 0.0 || !(1.0..=f64::from(u32::MAX)).contains(&degree) {
                    return Err(bad(format!(
                        "degree must be a positive integer, got {degree}"
                    )));
                }
                Self::Polynomial {
                    sigma,
                    degree: degree as u32,
                }
            }
            "dtw_rbf" => Self::DtwRbf {
                gamma: take("gamma")?,
            },
            "exposure_avg" => Self::ExposureAvg {
                gamma: take("gamma")?,
            },
            other => return Err(bad(format!("unknown kernel {other:?}"))),
        };
        if let Some(k) = params.keys().next() {
            return Err(bad(format!("{name} does not take {k}")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Daily training and match minutes of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureSeries {
    pub training: Vec<f64>,
    pub matches: Vec<f64>,
}

impl From<&ExposureRecord> for ExposureSeries {
    fn from(r: &ExposureRecord) -> Self {
        Self {
            training: r.training_series(),
            matches: r.match_series(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelInput {
    Vector(Vec<f64>),
    Sequence(Vec<f64>),
    Exposure(ExposureSeries),
}

impl KernelInput {
    fn kind(&self) -> &'static str {
        match self {
            Self::Vector(_) => "vector",
            Self::Sequence(_) => "sequence",
            Self::Exposure(_) => "exposure",
        }
    }
}

impl From<&ExposureRecord> for KernelInput {
    fn from(r: &ExposureRecord) -> Self {
        Self::Exposure(r.into())
    }
}

fn dtw_rbf(gamma: f64, d: f64) -> f64 {
    (-gamma * d).exp()
}

fn exposure_avg(gamma: f64, d_training: f64, d_match: f64) -> f64 {
    0.5 * (dtw_rbf(gamma, d_training) + dtw_rbf(gamma, d_match))
}

pub fn kernel_eval(
    spec: &KernelSpec,
    a: &KernelInput,
    b: &KernelInput,
) -> Result<f64, KernelError> {
    spec.validate()?;
    for input in [a, b] {
        let accepted = matches!(
            (spec, input),
            (KernelSpec::Constant { .. }, _)
                | (
                    KernelSpec::Rbf { .. } | KernelSpec::Polynomial { .. },
                    KernelInput::Vector(_)
                )
                | (KernelSpec::DtwRbf { .. }, KernelInput::Sequence(_))
                | (KernelSpec::ExposureAvg { .. }, KernelInput::Exposure(_))
        );
        if !accepted {
            return Err(KernelError::InputKindMismatch {
                kernel: spec.name(),
                input: input.kind(),
            });
        }
    }
    match (*spec, a, b) {
        (KernelSpec::Constant { c }, _, _) => Ok(c),
        (KernelSpec::Rbf { sigma }, KernelInput::Vector(x), KernelInput::Vector(y)) => {
            same_len(x, y)?;
            let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum();
            Ok((-sigma * d2).exp())
        }
        (
            KernelSpec::Polynomial { sigma, degree },
            KernelInput::Vector(x),
            KernelInput::Vector(y),
        ) => {
            same_len(x, y)?;
            let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
            Ok((sigma * dot).powi(degree as i32))
        }
        (KernelSpec::DtwRbf { gamma }, KernelInput::Sequence(x), KernelInput::Sequence(y)) => {
            Ok(dtw_rbf(gamma, dtw_cost(x, y)?))
        }
        (KernelSpec::ExposureAvg { gamma }, KernelInput::Exposure(x), KernelInput::Exposure(y)) => {
            let dt = dtw_cost(&x.training, &y.training)?;
            let dm = dtw_cost(&x.matches, &y.matches)?;
            Ok(exposure_avg(gamma, dt, dm))
        }
        _ => unreachable!("input kinds checked above"),
    }
}

fn same_len(x: &[f64], y: &[f64]) -> Result<(), KernelError> {
    if x.len() == y.len() {
        Ok(())
    } else {
        Err(KernelError::DimensionMismatch(x.len(), y.len()))
    }
}

/// Averaged DTW-RBF kernel between two exposure records.
pub fn exposure_kernel(
    gamma: f64,
    a: &ExposureRecord,
    b: &ExposureRecord,
) -> Result<f64, KernelError> {
    kernel_eval(&KernelSpec::ExposureAvg { gamma }, &a.into(), &b.into())
}

/// Symmetric kernel matrix; the smallest eigenvalue is computed on first use.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    min_eig: OnceLock<Result<f64, LinalgError>>,
}

impl PartialEq for GramMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl GramMatrix {
    /// Wraps an existing matrix, requiring exact symmetry.
    pub fn new(entries: DMatrix<f64>) -> Result<Self, KernelError> {
        if !entries.is_square() || entries != entries.transpose() {
            return Err(KernelError::NotSymmetric);
        }
        Ok(Self {
            entries,
            min_eig: OnceLock::new(),
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn min_eigenvalue(&self) -> Result<f64, LinalgError> {
        self.min_eig
            .get_or_init(|| min_eigenvalue(&self.entries))
            .clone()
    }
}

fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

fn mirror(n: usize, pairs: &[(usize, usize)], values: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (&(i, j), &v) in pairs.iter().zip(values) {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    m
}

/// Upper triangle evaluated in parallel, then mirrored.
pub fn gram(spec: &KernelSpec, inputs: &[KernelInput]) -> Result<GramMatrix, KernelError> {
    if inputs.is_empty() {
        return Err(KernelError::NoInputs);
    }
    spec.validate()?;
    let n = inputs.len();
    let pairs = upper_pairs(n);
    let values = pairs
        .par_iter()
        .map(|&(i, j)| {
            kernel_eval(spec, &inputs[i], &inputs[j]).map_err(|e| KernelError::At {
                i,
                j,
                source: Box::new(e),
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    GramMatrix::new(mirror(n, &pairs, &values))
}

/// Rectangular `K(rows, cols)`.
pub fn cross_gram(
    spec: &KernelSpec,
    rows: &[KernelInput],
    cols: &[KernelInput],
) -> Result<DMatrix<f64>, KernelError> {
    spec.validate()?;
    let m = cols.len();
    let values = (0..rows.len() * m)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / m, k % m);
            kernel_eval(spec, &rows[i], &cols[j]).map_err(|e| KernelError::At {
                i,
                j,
                source: Box::new(e),
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DMatrix::from_row_slice(rows.len(), m, &values))
}

pub const DEFAULT_PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PsdStatus {
    Psd { min_eig: f64 },
    NotPsd { min_eig: f64 },
}

impl PsdStatus {
    pub fn min_eig(&self) -> f64 {
        match *self {
            Self::Psd { min_eig } | Self::NotPsd { min_eig } => min_eig,
        }
    }

    pub fn is_psd(&self) -> bool {
        matches!(self, Self::Psd { .. })
    }
}

/// PSD iff the smallest eigenvalue is at least `-tol`.
pub fn psd_probe(g: &GramMatrix, tol: f64) -> Result<PsdStatus, LinalgError> {
    let min_eig = g.min_eigenvalue()?;
    Ok(if min_eig >= -tol {
        PsdStatus::Psd { min_eig }
    } else {
        PsdStatus::NotPsd { min_eig }
    })
}

/// Per-channel DTW distances between two sets of exposure series, so the
/// averaged kernel can be re-evaluated for many `gamma` without repeating
/// the dynamic programs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureDistances {
    pub training: DMatrix<f64>,
    pub matches: DMatrix<f64>,
}

impl ExposureDistances {
    pub fn between(rows: &[ExposureSeries], cols: &[ExposureSeries]) -> Result<Self, KernelError> {
        let m = cols.len();
        let values = (0..rows.len() * m)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / m, k % m);
                channel_costs(&rows[i], &cols[j]).map_err(|e| KernelError::At {
                    i,
                    j,
                    source: Box::new(e),
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let (t, mm): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();
        Ok(Self {
            training: DMatrix::from_row_slice(rows.len(), m, &t),
            matches: DMatrix::from_row_slice(rows.len(), m, &mm),
        })
    }

    /// Square distances of a set against itself, exactly symmetric.
    pub fn square(set: &[ExposureSeries]) -> Result<Self, KernelError> {
        let n = set.len();
        let pairs = upper_pairs(n);
        let values = pairs
            .par_iter()
            .map(|&(i, j)| {
                channel_costs(&set[i], &set[j]).map_err(|e| KernelError::At {
                    i,
                    j,
                    source: Box::new(e),
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let (t, m): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();
        Ok(Self {
            training: mirror(n, &pairs, &t),
            matches: mirror(n, &pairs, &m),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.training.shape()
    }

    /// Averaged kernel values; bit-identical to [`exposure_kernel`].
    pub fn kernel(&self, gamma: f64) -> DMatrix<f64> {
        self.training
            .zip_map(&self.matches, |dt, dm| exposure_avg(gamma, dt, dm))
    }
}

fn channel_costs(a: &ExposureSeries, b: &ExposureSeries) -> Result<(f64, f64), KernelError> {
    Ok((
        dtw_cost(&a.training, &b.training)?,
        dtw_cost(&a.matches, &b.matches)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtw::dtw_distance;
    use crate::ingest::{ExposureDay, Outcome};
    use proptest::prelude::*;

    fn seq(v: &[f64]) -> KernelInput {
        KernelInput::Sequence(v.to_vec())
    }

    fn record(id: &str, training: &[f64], matches: &[f64]) -> ExposureRecord {
        ExposureRecord {
            subject_id: id.into(),
            days: training
                .iter()
                .zip(matches)
                .enumerate()
                .map(|(d, (&t, &m))| ExposureDay {
                    day: d as u32 + 1,
                    training_minutes: t,
                    match_minutes: m,
                })
                .collect(),
            outcome: Outcome::Injured {
                day: training.len() as u32,
            },
        }
    }

    #[test]
    fn dtw_rbf_values() {
        let k = KernelSpec::DtwRbf { gamma: 0.5 };
        assert_eq!(
            kernel_eval(&k, &seq(&[1.0, 2.0]), &seq(&[1.0, 2.0])).unwrap(),
            1.0
        );
        let (x, y) = ([0.0, 0.0], [1.0, 1.0]);
        assert_eq!(dtw_distance(&x, &y).unwrap().distance, 2.0);
        let v = kernel_eval(&k, &seq(&x), &seq(&y)).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn vector_kernels() {
        let x = KernelInput::Vector(vec![1.0, 1.0]);
        let y = KernelInput::Vector(vec![2.0, 0.0]);
        let poly = KernelSpec::Polynomial {
            sigma: 1.0,
            degree: 2,
        };
        assert_eq!(kernel_eval(&poly, &x, &y).unwrap(), 4.0);
        // |x - y|^2 = 2
        let rbf = KernelSpec::Rbf { sigma: 0.25 };
        assert!((kernel_eval(&rbf, &x, &y).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        let c = KernelSpec::Constant { c: 3.0 };
        assert_eq!(kernel_eval(&c, &x, &seq(&[1.0])).unwrap(), 3.0);
    }

    #[test]
    fn rbf_one_dimensional_reduces_to_squared_difference() {
        let rbf = KernelSpec::Rbf { sigma: 0.3 };
        let v = kernel_eval(
            &rbf,
            &KernelInput::Vector(vec![1.5]),
            &KernelInput::Vector(vec![-0.5]),
        )
        .unwrap();
        assert!((v - (-0.3f64 * 4.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn kind_mismatch() {
        let k = KernelSpec::DtwRbf { gamma: 1.0 };
        let err = kernel_eval(
            &k,
            &KernelInput::Vector(vec![1.0]),
            &KernelInput::Vector(vec![1.0]),
        )
        .unwrap_err();
        assert_eq!(
            err,
            KernelError::InputKindMismatch {
                kernel: "dtw_rbf",
                input: "vector"
            }
        );
        let err = kernel_eval(
            &KernelSpec::Rbf { sigma: 1.0 },
            &KernelInput::Vector(vec![1.0]),
            &seq(&[1.0]),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            KernelError::InputKindMismatch {
                input: "sequence",
                ..
            }
        ));
        assert!(matches!(
            kernel_eval(
                &KernelSpec::Rbf { sigma: 1.0 },
                &KernelInput::Vector(vec![1.0]),
                &KernelInput::Vector(vec![1.0, 2.0])
            ),
            Err(KernelError::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn invalid_parameters() {
        for spec in [
            KernelSpec::DtwRbf { gamma: 0.0 },
            KernelSpec::ExposureAvg { gamma: -1.0 },
            KernelSpec::Rbf { sigma: 0.0 },
            KernelSpec::Polynomial {
                sigma: 1.0,
                degree: 0,
            },
            KernelSpec::Constant { c: f64::NAN },
        ] {
            assert!(
                matches!(spec.validate(), Err(KernelError::InvalidParameter(_))),
                "{spec}"
            );
        }
    }

    #[test]
    fn exposure_kernel_values() {
        let a = record("a", &[30.0, 60.0, 0.0], &[0.0, 0.0, 0.0]);
        let b = record("b", &[30.0, 60.0, 0.0], &[1.0, 1.0, 0.0]);
        assert_eq!(exposure_kernel(0.5, &a, &a).unwrap(), 1.0);
        // match channels [0,0,0] vs [1,1,0] have DTW 2
        assert_eq!(
            dtw_distance(&a.match_series(), &b.match_series())
                .unwrap()
                .distance,
            2.0
        );
        let v = exposure_kernel(0.5, &a, &b).unwrap();
        assert!((v - (1.0 + (-1.0f64).exp()) / 2.0).abs() < 1e-15);
        assert!((v - 0.683940).abs() < 1e-6);
        assert_eq!(v, exposure_kernel(0.5, &b, &a).unwrap());
    }

    #[test]
    fn gram_shapes() {
        let one = gram(
            &KernelSpec::Rbf { sigma: 1.0 },
            &[KernelInput::Vector(vec![0.3])],
        )
        .unwrap();
        assert_eq!(one.entries().shape(), (1, 1));
        assert_eq!(one.entries()[(0, 0)], 1.0);
        assert!(psd_probe(&one, DEFAULT_PSD_TOL).unwrap().is_psd());
        assert_eq!(
            gram(&KernelSpec::Rbf { sigma: 1.0 }, &[]),
            Err(KernelError::NoInputs)
        );

        let records = [
            record("a", &[30.0, 60.0, 0.0, 45.0], &[0.0, 0.0, 90.0, 0.0]),
            record("b", &[10.0, 0.0, 20.0, 45.0], &[0.0, 90.0, 0.0, 0.0]),
            record("c", &[0.0, 60.0, 60.0, 60.0], &[0.0, 0.0, 0.0, 30.0]),
        ];
        let gamma = 0.01;
        let inputs: Vec<KernelInput> = records.iter().map(KernelInput::from).collect();
        let g = gram(&KernelSpec::ExposureAvg { gamma }, &inputs).unwrap();
        for i in 0..3 {
            assert_eq!(g.entries()[(i, i)], 1.0);
            for j in 0..3 {
                assert_eq!(
                    g.entries()[(i, j)],
                    exposure_kernel(gamma, &records[i], &records[j]).unwrap()
                );
            }
        }
        let series: Vec<ExposureSeries> = records.iter().map(ExposureSeries::from).collect();
        let d = ExposureDistances::square(&series).unwrap();
        assert_eq!(&d.kernel(gamma), g.entries());
        let cross = ExposureDistances::between(&series[..1], &series).unwrap();
        assert_eq!(cross.kernel(gamma).row(0), g.entries().row(0));
    }

    #[test]
    fn gram_error_context() {
        let inputs = [seq(&[1.0]), seq(&[])];
        let err = gram(&KernelSpec::DtwRbf { gamma: 1.0 }, &inputs).unwrap_err();
        assert!(matches!(err, KernelError::At { i: 0, j: 1, .. }));
    }

    #[test]
    fn psd_probe_cases() {
        let id = GramMatrix::new(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(
            psd_probe(&id, DEFAULT_PSD_TOL).unwrap(),
            PsdStatus::Psd { min_eig: 1.0 }
        );
        let bad = GramMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        let status = psd_probe(&bad, DEFAULT_PSD_TOL).unwrap();
        assert!(!status.is_psd());
        assert!((status.min_eig() + 1.0).abs() < 1e-9);
        assert_eq!(
            GramMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0])),
            Err(KernelError::NotSymmetric)
        );
        let constant = gram(
            &KernelSpec::Constant { c: 2.0 },
            &[seq(&[1.0]), seq(&[2.0]), seq(&[5.0])],
        )
        .unwrap();
        assert!(psd_probe(&constant, DEFAULT_PSD_TOL).unwrap().is_psd());
    }

    fn small_seq() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0..5.0f64, 1..6)
    }

    proptest! {
        #[test]
        fn kernels_symmetric(x in small_seq(), y in small_seq(), gamma in 0.01..2.0f64) {
            let k = KernelSpec::DtwRbf { gamma };
            let a = kernel_eval(&k, &seq(&x), &seq(&y)).unwrap();
            prop_assert_eq!(a, kernel_eval(&k, &seq(&y), &seq(&x)).unwrap());
            prop_assert!(a > 0.0 && a <= 1.0);
        }

        #[test]
        fn vector_kernel_ranges(x in prop::collection::vec(-3.0..3.0f64, 3), y in prop::collection::vec(-3.0..3.0f64, 3), d in 1u32..5) {
            let (vx, vy) = (KernelInput::Vector(x), KernelInput::Vector(y));
            let rbf = KernelSpec::Rbf { sigma: 0.7 };
            let r = kernel_eval(&rbf, &vx, &vy).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert_eq!(r, kernel_eval(&rbf, &vy, &vx).unwrap());
            let poly = KernelSpec::Polynomial { sigma: 0.5, degree: 2 * d };
            prop_assert!(kernel_eval(&poly, &vx, &vy).unwrap() >= 0.0);
        }

        #[test]
        fn dtw_gram_unit_diagonal(seqs in prop::collection::vec(small_seq(), 1..6)) {
            let inputs: Vec<KernelInput> = seqs.into_iter().map(KernelInput::Sequence).collect();
            let g = gram(&KernelSpec::DtwRbf { gamma: 0.3 }, &inputs).unwrap();
            let m = g.entries();
            for i in 0..m.nrows() {
                prop_assert_eq!(m[(i, i)], 1.0);
                for j in 0..m.nrows() {
                    prop_assert_eq!(m[(i, j)], m[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn spec_round_trips_through_text() {
        for spec in [
            KernelSpec::Constant { c: 2.5 },
            KernelSpec::Rbf { sigma: 0.5 },
            KernelSpec::Polynomial {
                sigma: 1.0,
                degree: 3,
            },
            KernelSpec::DtwRbf { gamma: 1e-3 },
            KernelSpec::ExposureAvg { gamma: 2e-5 },
        ] {
            assert_eq!(spec.to_string().parse::<KernelSpec>().unwrap(), spec);
        }
        for bad in [
            "rbf",
            "rbf(sigma=-1)",
            "rbf(sigma=1, gamma=2)",
            "poly(sigma=1)",
            "polynomial(sigma=1, degree=1.5)",
            "rbf(sigma=1",
        ] {
            assert!(bad.parse::<KernelSpec>().is_err(), "{bad}");
        }
    }
}
