//! Lyapunov and Sylvester equations by Kronecker vectorization.

use super::{ensure_finite, ensure_shape, ensure_spd, ensure_square, spectral_abscissa, Matrix};
use crate::{Error, Result};

/// Solves `A X + X B = C` through `(I ⊗ A + Bᵀ ⊗ I) vec(X) = vec(C)`.
///
/// Intended for n·m up to a few dozen. One step of iterative refinement is
/// applied to the vectorized system.
pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = ensure_square("solve_sylvester", a)?;
    let m = ensure_square("solve_sylvester", b)?;
    ensure_shape("solve_sylvester", c, n, m)?;
    let dim = n * m;
    let mut k = Matrix::zeros(dim, dim);
    // column-major vec: index (i, j) -> i + j * n
    for j in 0..m {
        for i in 0..n {
            let row = i + j * n;
            for p in 0..n {
                k[(row, p + j * n)] += a[(i, p)];
            }
            for q in 0..m {
                k[(row, i + q * n)] += b[(q, j)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(c.as_slice());
    let lu = k.clone().lu();
    let mut x = lu
        .solve(&rhs)
        .ok_or(Error::NoConvergence("Sylvester solve (singular operator)"))?;
    let resid = &rhs - &k * &x;
    if let Some(dx) = lu.solve(&resid) {
        x += dx;
    }
    let out = Matrix::from_column_slice(n, m, x.as_slice());
    ensure_finite(&out)?;
    Ok(out)
}

/// Solves `AᵀP + PA = −Q` for Hurwitz `A` and symmetric positive definite `Q`.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = ensure_square("solve_lyapunov", a)?;
    ensure_shape("solve_lyapunov", q, n, n)?;
    ensure_finite(a)?;
    ensure_finite(q)?;
    let abscissa = spectral_abscissa(a)?;
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz {
            real_part: abscissa,
        });
    }
    ensure_spd(q, "Lyapunov weight Q")?;
    lyapunov_unchecked(a, q)
}

/// Same equation without the Hurwitz / definiteness screening. `Q` may be
/// semidefinite; callers guarantee `A` has no eigenvalue pair summing to zero.
pub(crate) fn lyapunov_unchecked(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let p = solve_sylvester(&a.transpose(), a, &(-q))?;
    Ok((&p + p.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn residual(a: &Matrix, p: &Matrix, q: &Matrix) -> f64 {
        (a.transpose() * p + p * a + q).norm()
    }

    #[test]
    fn scalar() {
        let p = solve_lyapunov(&Matrix::from_element(1, 1, -1.0), &Matrix::from_element(1, 1, 2.0))
            .unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unstable_scalar_rejected() {
        let err = solve_lyapunov(&Matrix::from_element(1, 1, 0.1), &Matrix::identity(1, 1));
        assert!(matches!(err, Err(Error::NotHurwitz { .. })));
    }

    #[test]
    fn indefinite_weight_rejected() {
        let a = Matrix::from_diagonal_element(2, 2, -1.0);
        let q = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(
            solve_lyapunov(&a, &q),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let a = Matrix::from_diagonal_element(2, 2, -1.0);
        assert!(matches!(
            solve_lyapunov(&a, &Matrix::identity(3, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn general_sylvester() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let b = Matrix::from_row_slice(3, 3, &[-5.0, 0.0, 1.0, 0.0, -6.0, 0.0, 1.0, 0.0, -7.0]);
        let c = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = solve_sylvester(&a, &b, &c).unwrap();
        assert!((&a * &x + &x * &b - &c).amax() < 1e-13);
    }

    proptest! {
        #[test]
        fn spd_solution_for_random_stable_systems(
            n in 1usize..=6,
            raw in proptest::collection::vec(-1.0f64..1.0, 36),
            qraw in proptest::collection::vec(-1.0f64..1.0, 36),
        ) {
            let m = Matrix::from_fn(n, n, |i, j| raw[i * 6 + j]);
            // Shift left past the spectral abscissa to make A Hurwitz.
            let shift = spectral_abscissa(&m).unwrap().max(0.0) + 0.1;
            let a = m - Matrix::identity(n, n) * shift;
            let l = Matrix::from_fn(n, n, |i, j| qraw[i * 6 + j]);
            let q = &l * l.transpose() + Matrix::identity(n, n) * 0.1;
            let p = solve_lyapunov(&a, &q).unwrap();
            prop_assert!(residual(&a, &p, &q) <= 1e-10 * q.norm());
            prop_assert!((&p - p.transpose()).amax() <= 1e-12);
            prop_assert!(p.clone().cholesky().is_some());
        }
    }
}
