//! Dense small-matrix kernels: Lyapunov and Riccati solvers, eigenvalues,
//! the matrix exponential and a fixed-step integrator for systems with
//! delayed (history-buffered) signals.

mod care;
mod eigen;
mod history;
mod integrate;
mod lyapunov;

pub use care::{solve_care, CareSolution};
pub use eigen::{eigenvalues, eigenvector, is_hurwitz, spectral_abscissa};
pub use history::HistoryBuffer;
pub use integrate::{integrate_step, DelaySystem};
pub use lyapunov::{solve_lyapunov, solve_sylvester};

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Builds a matrix from row-major nested rows, rejecting ragged or non-finite input.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::dims("matrix_from_rows", ncols, bad.len()));
    }
    let m = Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    ensure_finite(&m)?;
    Ok(m)
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn ensure_finite(m: &Matrix) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFiniteEntry { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub(crate) fn ensure_square(op: &'static str, m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::dims(
            op,
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(m.nrows())
}

pub(crate) fn ensure_shape(op: &'static str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::dims(
            op,
            format!("{rows}x{cols}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

pub(crate) fn ensure_len(op: &'static str, v: &Vector, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::dims(op, len, v.len()));
    }
    Ok(())
}

/// `e^{A t}`.
///
/// Backed by nalgebra's scaling-and-squaring Padé approximant.
pub fn matrix_exponential(a: &Matrix, t: f64) -> Result<Matrix> {
    ensure_square("matrix_exponential", a)?;
    ensure_finite(a)?;
    Ok((a * t).exp())
}

/// Checks symmetry (relative to the largest entry) and positive definiteness via Cholesky.
pub(crate) fn ensure_spd(m: &Matrix, what: &'static str) -> Result<()> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite(what));
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite(what));
    }
    Ok(())
}

/// Smallest singular value of a square matrix.
pub(crate) fn sigma_min(m: &Matrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &Matrix, b: &Matrix, tol: f64) {
        let err = (a - b).amax();
        assert!(err <= tol, "max abs diff {err:e} > {tol:e}\n{a}\n{b}");
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Matrix::zeros(3, 3);
        assert_eq!(matrix_exponential(&z, 7.5).unwrap(), Matrix::identity(3, 3));
    }

    #[test]
    fn expm_diagonal() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 0.5, 2.0]));
        let e = matrix_exponential(&a, 0.7).unwrap();
        let want = Matrix::from_diagonal(&Vector::from_vec(vec![
            (-0.7f64).exp(),
            (0.35f64).exp(),
            (1.4f64).exp(),
        ]));
        assert_close(&e, &want, 1e-13);
    }

    #[test]
    fn expm_nilpotent() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = matrix_exponential(&a, 1.0).unwrap();
        assert_close(&e, &Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), 1e-15);
    }

    #[test]
    fn expm_semigroup() {
        let a = Matrix::from_row_slice(3, 3, &[-0.3, 2.0, 0.1, -1.5, -0.2, 0.0, 0.4, 0.3, -1.0]);
        let lhs = matrix_exponential(&a, 1.7).unwrap();
        let rhs = matrix_exponential(&a, 0.6).unwrap() * matrix_exponential(&a, 1.1).unwrap();
        assert_close(&lhs, &rhs, 1e-10);
    }

    #[test]
    fn ragged_and_nan_rows_rejected() {
        assert!(matches!(
            matrix_from_rows(&[vec![1.0, 2.0], vec![3.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            matrix_from_rows(&[vec![1.0, f64::NAN]]),
            Err(Error::NonFiniteEntry { row: 0, col: 1 })
        ));
    }

    proptest::proptest! {
        #[test]
        fn expm_derivative_matches_central_difference(
            entries in proptest::collection::vec(-1.0f64..1.0, 9),
            t in 0.1f64..2.0,
        ) {
            let a = Matrix::from_row_slice(3, 3, &entries);
            let d = 1e-4;
            let fd = (matrix_exponential(&a, t + d).unwrap()
                - matrix_exponential(&a, t - d).unwrap()) / (2.0 * d);
            let exact = &a * matrix_exponential(&a, t).unwrap();
            proptest::prop_assert!((fd - exact).amax() <= 1e-6);
        }
    }
}
