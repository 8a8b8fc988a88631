//! Continuous algebraic Riccati equation by Newton–Kleinman iteration.

use super::lyapunov::{lyapunov_unchecked, solve_sylvester};
use super::{eigenvalues, ensure_finite, ensure_shape, ensure_spd, ensure_square, Matrix};
use crate::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

const MAX_NEWTON_ITERATIONS: usize = 100;
const NEWTON_TOLERANCE: f64 = 1e-10;
const ACCEPT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct CareSolution {
    /// Stabilizing solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0`.
    pub p: Matrix,
    /// Optimal gain `R⁻¹BᵀP`.
    pub k: Matrix,
    pub residual: f64,
    pub iterations: usize,
}

pub fn care_residual(a: &Matrix, b: &Matrix, q: &Matrix, r_inv: &Matrix, p: &Matrix) -> f64 {
    (a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q).norm()
}

/// Solves the CARE for the stabilizing solution.
///
/// The iteration is seeded with `K = 0` when `A` is already Hurwitz and with
/// Bass's shifted-Lyapunov gain otherwise.
pub fn solve_care(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<CareSolution> {
    let n = ensure_square("solve_care", a)?;
    let m = b.ncols();
    ensure_shape("solve_care", b, n, m)?;
    ensure_shape("solve_care", q, n, n)?;
    ensure_shape("solve_care", r, m, m)?;
    for x in [a, b, q, r] {
        ensure_finite(x)?;
    }
    ensure_spd(r, "Riccati weight R")?;
    if (q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
        return Err(Error::NotPositiveDefinite("Riccati weight Q (asymmetric)"));
    }
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite("Riccati weight R"))?;

    check_stabilizable(a, b)?;
    let mut k = stabilizing_seed(a, b)?;

    let mut p = Matrix::zeros(n, n);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_NEWTON_ITERATIONS {
        iterations += 1;
        let closed = a - b * &k;
        let weight = q + k.transpose() * r * &k;
        p = lyapunov_unchecked(&closed, &weight)?;
        k = &r_inv * b.transpose() * &p;
        residual = care_residual(a, b, q, &r_inv, &p);
        if residual <= NEWTON_TOLERANCE {
            break;
        }
    }
    let closed = a - b * &k;
    let abscissa = eigenvalues(&closed)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if residual > ACCEPT_TOLERANCE || abscissa >= 0.0 {
        return Err(Error::NoConvergence("Newton-Kleinman CARE iteration"));
    }
    Ok(CareSolution {
        p,
        k,
        residual,
        iterations,
    })
}

/// PBH test on every closed right-half-plane eigenvalue.
fn check_stabilizable(a: &Matrix, b: &Matrix) -> Result<()> {
    let n = a.nrows();
    let m = b.ncols();
    let scale = a.amax().max(b.amax()).max(1.0);
    for lambda in eigenvalues(a)? {
        if lambda.re < 0.0 {
            continue;
        }
        let pbh = DMatrix::<Complex64>::from_fn(n, n + m, |i, j| {
            if j < n {
                let d = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
                Complex64::new(a[(i, j)], 0.0) - d
            } else {
                Complex64::new(b[(i, j - n)], 0.0)
            }
        });
        let sv = pbh.svd(false, false).singular_values;
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if smin <= 1e-10 * scale {
            return Err(Error::NotStabilizable {
                re: lambda.re,
                im: lambda.im,
            });
        }
    }
    Ok(())
}

fn stabilizing_seed(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let eigs = eigenvalues(a)?;
    let abscissa = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if abscissa < 0.0 {
        return Ok(Matrix::zeros(b.ncols(), n));
    }
    // Bass: with beta beyond the spectral radius of Re(A), solving
    // (A + βI) Z + Z (A + βI)ᵀ = 2 B Bᵀ gives Z > 0 and A − B Bᵀ Z⁻¹ Hurwitz.
    let beta = eigs.iter().map(|z| z.re.abs()).fold(0.0, f64::max) + 1.0;
    let shifted = a + Matrix::identity(n, n) * beta;
    let z = solve_sylvester(&shifted, &shifted.transpose(), &(b * b.transpose() * 2.0))?;
    let z_inv = z
        .try_inverse()
        .ok_or(Error::NoConvergence("stabilizing seed (uncontrollable stable modes)"))?;
    Ok(b.transpose() * z_inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::spectral_abscissa;
    use proptest::prelude::*;

    fn scalar(x: f64) -> Matrix {
        Matrix::from_element(1, 1, x)
    }

    #[test]
    fn scalar_riccati() {
        let s = solve_care(&scalar(0.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert!((s.p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((s.k[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uncontrollable_unstable_mode() {
        let err = solve_care(&scalar(1.0), &scalar(0.0), &scalar(1.0), &scalar(1.0));
        assert!(matches!(err, Err(Error::NotStabilizable { .. })));
    }

    #[test]
    fn zero_state_weight_on_stable_plant_gives_zero_gain() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let s = solve_care(&a, &b, &Matrix::zeros(2, 2), &scalar(1.0)).unwrap();
        assert!(s.k.amax() < 1e-14);
    }

    #[test]
    fn double_integrator_closed_form() {
        // A = [[0,1],[0,0]], B = [0,1]ᵀ, Q = I, R = 1: K = [1, sqrt(3)].
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let s = solve_care(&a, &b, &Matrix::identity(2, 2), &scalar(1.0)).unwrap();
        assert!((s.k[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((s.k[(0, 1)] - 3f64.sqrt()).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn closed_loop_hurwitz_and_residual(
            raw in proptest::collection::vec(-1.0f64..1.0, 16),
            braw in proptest::collection::vec(-1.0f64..1.0, 4),
        ) {
            let a = Matrix::from_row_slice(4, 4, &raw);
            let b = Matrix::from_column_slice(4, 1, &braw);
            let q = Matrix::identity(4, 4);
            let r = scalar(1.0);
            match solve_care(&a, &b, &q, &r) {
                Ok(s) => {
                    prop_assert!(s.residual <= 1e-8);
                    prop_assert!(spectral_abscissa(&(&a - &b * &s.k)).unwrap() < 0.0);
                }
                // Random single-input pairs can be nearly uncontrollable.
                Err(Error::NotStabilizable { .. }) | Err(Error::NoConvergence(_)) => {}
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
