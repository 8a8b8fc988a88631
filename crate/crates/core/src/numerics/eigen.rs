//! Eigenvalues of small dense real matrices.
//!
//! Balancing, reduction to upper Hessenberg form by stabilized elementary
//! similarity transforms, then Francis double-shift QR with deflation.
//! Good enough for the n <= 8 systems used here.

use super::{ensure_finite, ensure_square, Matrix};
use crate::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

const MAX_ITERATIONS_PER_ROOT: usize = 60;

/// Eigenvalues of `a`, sorted by real part then imaginary part.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex64>> {
    let n = ensure_square("eigenvalues", a)?;
    ensure_finite(a)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
    balance(&mut h);
    hessenberg(&mut h);
    let mut eigs = hqr(&mut h)?;
    eigs.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(eigs)
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(a: &Matrix) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn is_hurwitz(a: &Matrix) -> Result<bool> {
    Ok(spectral_abscissa(a)? < 0.0)
}

/// Unit eigenvector for an (approximate) eigenvalue by complex inverse iteration.
pub fn eigenvector(a: &Matrix, lambda: Complex64) -> Result<Vec<Complex64>> {
    let n = ensure_square("eigenvector", a)?;
    // Nudge off the exact eigenvalue so the shifted matrix is invertible.
    let shift = lambda + Complex64::new(1e-10 * (1.0 + lambda.norm()), 0.0);
    let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
        let d = if i == j { shift } else { Complex64::new(0.0, 0.0) };
        Complex64::new(a[(i, j)], 0.0) - d
    });
    let lu = m.lu();
    let mut v = nalgebra::DVector::<Complex64>::from_fn(n, |i, _| {
        Complex64::new(1.0 + 0.1 * i as f64, 0.05 * i as f64)
    });
    for _ in 0..4 {
        v = lu.solve(&v).ok_or(Error::NoConvergence("eigenvector"))?;
        let norm = v.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NoConvergence("eigenvector"));
        }
        v /= Complex64::new(norm, 0.0);
    }
    Ok(v.iter().copied().collect())
}

fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let n = a.len();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i][j] *= g;
                    }
                    for row in a.iter_mut() {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        let mut x: f64 = 0.0;
        let mut piv = m;
        for j in m..n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                piv = j;
            }
        }
        if piv != m {
            for j in (m - 1)..n {
                let tmp = a[piv][j];
                a[piv][j] = a[m][j];
                a[m][j] = tmp;
            }
            for row in a.iter_mut() {
                row.swap(piv, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut() {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        for v in row.iter_mut().take(i.saturating_sub(1)) {
            *v = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroyed).
fn hqr(a: &mut [Vec<f64>]) -> Result<Vec<Complex64>> {
    let n = a.len();
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nn;
            while l >= 1 {
                let lu = l as usize;
                let mut s = a[lu - 1][lu - 1].abs() + a[lu][lu].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[lu][lu - 1].abs() + s == s {
                    a[lu][lu - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nn {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1];
            let mut w = a[nu][nu - 1] * a[nu - 1][nu];
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nu - 1] = x + z;
                    wr[nu] = x + z;
                    if z != 0.0 {
                        wr[nu] = x - w / z;
                    }
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }
            if its == MAX_ITERATIONS_PER_ROOT {
                return Err(Error::NoConvergence("eigenvalue QR iteration"));
            }
            if its == 10 || its == 20 || its == 40 {
                // exceptional shift
                t += x;
                for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let lu = l as usize;
            let mut m = nu - 2;
            let mut z;
            loop {
                z = a[m][m];
                r = x - z;
                let s = y - z;
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r - s;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == lu {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nu {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k != nu - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l as usize != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        p = a[k][j] + q * a[k + 1][j];
                        if k != nu - 1 {
                            p += r * a[k + 2][j];
                            a[k + 2][j] -= p * z;
                        }
                        a[k + 1][j] -= p * y;
                        a[k][j] -= p * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for row in a.iter_mut().take(mmin + 1).skip(lu) {
                        p = x * row[k] + y * row[k + 1];
                        if k != nu - 1 {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k + 1] -= p * q;
                        row[k] -= p;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn residual(a: &Matrix, lambda: Complex64, v: &[Complex64]) -> f64 {
        let n = a.nrows();
        (0..n)
            .map(|i| {
                let av: Complex64 = (0..n).map(|j| v[j] * a[(i, j)]).sum();
                (av - lambda * v[i]).norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn diagonal_and_triangular() {
        let a = Matrix::from_row_slice(3, 3, &[3.0, 1.0, 2.0, 0.0, -1.0, 5.0, 0.0, 0.0, 0.5]);
        let e = eigenvalues(&a).unwrap();
        let re: Vec<f64> = e.iter().map(|z| z.re).collect();
        assert!((re[0] + 1.0).abs() < 1e-12);
        assert!((re[1] - 0.5).abs() < 1e-12);
        assert!((re[2] - 3.0).abs() < 1e-12);
        assert!(e.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let a = Matrix::from_row_slice(2, 2, &[-0.5, 2.0, -2.0, -0.5]);
        let e = eigenvalues(&a).unwrap();
        assert!((e[0] - Complex64::new(-0.5, -2.0)).norm() < 1e-12);
        assert!((e[1] - Complex64::new(-0.5, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn scalar_and_empty() {
        assert_eq!(eigenvalues(&Matrix::from_element(1, 1, -4.0)).unwrap()[0].re, -4.0);
        assert!(eigenvalues(&Matrix::zeros(0, 0)).unwrap().is_empty());
        assert!(eigenvalues(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn companion_matrix_roots() {
        // (s+1)(s+2)(s+3)(s+4) = s^4 + 10 s^3 + 35 s^2 + 50 s + 24
        let a = Matrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -24.0, -50.0, -35.0,
                -10.0,
            ],
        );
        let e = eigenvalues(&a).unwrap();
        for (z, want) in e.iter().zip([-4.0, -3.0, -2.0, -1.0]) {
            assert!((z.re - want).abs() < 1e-9 && z.im.abs() < 1e-9, "{z}");
        }
    }

    proptest! {
        #[test]
        fn agrees_with_schur_and_eigenvectors_hold(
            n in 1usize..=8,
            entries in proptest::collection::vec(-3.0f64..3.0, 64),
        ) {
            let a = Matrix::from_fn(n, n, |i, j| entries[i * 8 + j]);
            let ours = eigenvalues(&a).unwrap();
            let mut theirs: Vec<Complex64> = a.complex_eigenvalues().iter().copied().collect();
            theirs.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
            // Match each of ours to the nearest unused reference eigenvalue.
            let mut used = vec![false; n];
            for z in &ours {
                let (k, d) = theirs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| !used[*k])
                    .map(|(k, w)| (k, (z - w).norm()))
                    .min_by(|x, y| x.1.total_cmp(&y.1))
                    .unwrap();
                used[k] = true;
                prop_assert!(d < 1e-6, "eigenvalue {} has no match (dist {:e})", z, d);
                let v = eigenvector(&a, *z).unwrap();
                prop_assert!(residual(&a, *z, &v) <= 1e-8);
            }
            for w in ours.windows(2) {
                prop_assert!(w[0].re <= w[1].re);
            }
        }
    }
}
