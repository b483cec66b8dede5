//! Dense symmetric linear algebra: cyclic Jacobi eigendecomposition and a
//! factorization-backed solver for symmetric systems that may be indefinite.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("Jacobi iteration did not converge in {sweeps} sweeps (off-diagonal mass {off})")]
    NoConvergence { sweeps: usize, off: f64 },
    #[error("system matrix is singular")]
    Singular,
}

pub const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
/// Column `k` of `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymmetricEigen {
    /// `V diag(values) V^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&self.values));
        &self.vectors * lambda * self.vectors.transpose()
    }
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Only the symmetric part `(A + A^T) / 2` is used. Sweeps stop once the
/// off-diagonal Frobenius norm drops below `1e-12 * ||A||_F`.
pub fn symmetric_eigen(matrix: &DMatrix<f64>) -> Result<SymmetricEigen, LinalgError> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let n = rows;
    let mut a = (matrix + matrix.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm();
    let threshold = JACOBI_REL_TOL * scale;

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= threshold {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps, off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(matrix: &DMatrix<f64>) -> Result<f64, LinalgError> {
    let eig = symmetric_eigen(matrix)?;
    Ok(eig.values.last().copied().unwrap_or(f64::NAN))
}

/// Which factorization backs a [`SymmetricSolver`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factorization {
    Cholesky,
    PivotedLu,
}

/// Solver for `A x = b` with symmetric `A`: Cholesky when `A` is positive
/// definite, partial-pivoting LU otherwise.
#[derive(Debug, Clone)]
pub enum SymmetricSolver {
    Cholesky(Cholesky<f64, Dyn>),
    Lu(LU<f64, Dyn, Dyn>),
}

impl SymmetricSolver {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, LinalgError> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        if let Some(chol) = Cholesky::new(matrix.clone()) {
            if chol
                .l_dirty()
                .diagonal()
                .iter()
                .all(|d| *d > 0.0 && d.is_finite())
            {
                return Ok(Self::Cholesky(chol));
            }
        }
        let lu = matrix.lu();
        if !lu.is_invertible() {
            return Err(LinalgError::Singular);
        }
        Ok(Self::Lu(lu))
    }

    pub fn factorization(&self) -> Factorization {
        match self {
            Self::Cholesky(_) => Factorization::Cholesky,
            Self::Lu(_) => Factorization::PivotedLu,
        }
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        let x = match self {
            Self::Cholesky(c) => c.solve(rhs),
            Self::Lu(lu) => lu.solve(rhs).ok_or(LinalgError::Singular)?,
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::Singular);
        }
        Ok(x)
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
        let x = match self {
            Self::Cholesky(c) => c.solve(rhs),
            Self::Lu(lu) => lu.solve(rhs).ok_or(LinalgError::Singular)?,
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::Singular);
        }
        Ok(x)
    }
}

/// Inverse of a symmetric positive-definite (or merely invertible) matrix.
pub fn symmetric_inverse(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = matrix.nrows();
    SymmetricSolver::new(matrix.clone())?.solve_matrix(&DMatrix::identity(n, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn two_by_two_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let eig = symmetric_eigen(&m).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-12);
        assert!((eig.values[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_and_zero() {
        let eig = symmetric_eigen(&DMatrix::identity(4, 4)).unwrap();
        assert!(eig.values.iter().all(|v| *v == 1.0));
        let eig = symmetric_eigen(&DMatrix::zeros(3, 3)).unwrap();
        assert!(eig.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn agrees_with_nalgebra_eigenvalues() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                4.0, 1.0, -2.0, 2.0, 1.0, 2.0, 0.0, 1.0, -2.0, 0.0, 3.0, -2.0, 2.0, 1.0, -2.0, -1.0,
            ],
        );
        let ours = symmetric_eigen(&m).unwrap();
        let mut theirs: Vec<f64> = m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.values.iter().zip(&theirs) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn solver_picks_lu_for_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let solver = SymmetricSolver::new(m.clone()).unwrap();
        assert_eq!(solver.factorization(), Factorization::PivotedLu);
        let b = DVector::from_vec(vec![3.0, 3.0]);
        let x = solver.solve(&b).unwrap();
        assert!((&m * x - b).norm() < 1e-12);

        let spd = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_eq!(
            SymmetricSolver::new(spd).unwrap().factorization(),
            Factorization::Cholesky
        );
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            SymmetricSolver::new(singular),
            Err(LinalgError::Singular)
        ));
    }

    proptest! {
        #[test]
        fn reconstructs_and_orthonormal(entries in prop::collection::vec(-10.0f64..10.0, 36)) {
            let raw = DMatrix::from_vec(6, 6, entries);
            let m = (&raw + raw.transpose()) * 0.5;
            let eig = symmetric_eigen(&m).unwrap();
            let err = max_abs(&(eig.reconstruct() - &m));
            prop_assert!(err <= 1e-9 * max_abs(&m).max(1e-300));
            let gram = eig.vectors.transpose() * &eig.vectors;
            prop_assert!(max_abs(&(gram - DMatrix::identity(6, 6))) < 1e-10);
            for w in eig.values.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }
    }
}
