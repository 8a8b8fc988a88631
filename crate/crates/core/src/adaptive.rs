//! Projection operator for bounded parameter adaptation, learning-rate
//! gains, and the offline gain design shared by the inner and outer loops.

use crate::numerics::{
    ensure_shape, ensure_square, is_hurwitz, sigma_min, solve_care, solve_lyapunov,
    spectral_abscissa, Matrix, Vector,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Fraction of the box width used as the boundary layer when no margin is given.
pub const DEFAULT_MARGIN_FRACTION: f64 = 0.01;

/// Element-wise box `[lower, upper]` with a boundary layer of width `margin`
/// inside each face.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBounds {
    pub lower: Matrix,
    pub upper: Matrix,
    pub margin: Matrix,
}

impl ProjectionBounds {
    pub fn new(lower: Matrix, upper: Matrix, margin: Matrix) -> Result<Self> {
        let (r, c) = lower.shape();
        ensure_shape("ProjectionBounds", &upper, r, c)?;
        ensure_shape("ProjectionBounds", &margin, r, c)?;
        for j in 0..c {
            for i in 0..r {
                let (lo, hi, m) = (lower[(i, j)], upper[(i, j)], margin[(i, j)]);
                if !(lo < hi) {
                    return Err(Error::Validation(format!(
                        "projection bound ({i}, {j}): lower {lo} must be below upper {hi}"
                    )));
                }
                if !(m > 0.0 && m <= 0.5 * (hi - lo)) {
                    return Err(Error::Validation(format!(
                        "projection margin ({i}, {j}) = {m} must lie in (0, {}]",
                        0.5 * (hi - lo)
                    )));
                }
            }
        }
        Ok(Self {
            lower,
            upper,
            margin,
        })
    }

    /// Same scalar box on every element; `margin = None` uses 1% of the width.
    pub fn uniform(rows: usize, cols: usize, lower: f64, upper: f64, margin: Option<f64>) -> Result<Self> {
        let m = margin.unwrap_or(DEFAULT_MARGIN_FRACTION * (upper - lower));
        Self::new(
            Matrix::from_element(rows, cols, lower),
            Matrix::from_element(rows, cols, upper),
            Matrix::from_element(rows, cols, m),
        )
    }

    pub fn shape(&self) -> (usize, usize) {
        self.lower.shape()
    }

    pub fn contains(&self, theta: &Matrix) -> bool {
        theta.shape() == self.shape()
            && theta
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(t, (lo, hi))| *t >= *lo && *t <= *hi)
    }

    /// Clamps every element into the box.
    pub fn clamp(&self, theta: &Matrix) -> Matrix {
        Matrix::from_fn(theta.nrows(), theta.ncols(), |i, j| {
            theta[(i, j)].clamp(self.lower[(i, j)], self.upper[(i, j)])
        })
    }
}

/// Element-wise projection of the update direction `y` for parameter `theta`.
///
/// Inside the box (further than `margin` from a face) or when `y` points
/// inward, `y` passes unchanged. Within the boundary layer an outward `y` is
/// scaled by `distance / margin`, reaching zero on the face.
pub fn proj(theta: &Matrix, y: &Matrix, bounds: &ProjectionBounds) -> Result<Matrix> {
    let (r, c) = bounds.shape();
    ensure_shape("proj", theta, r, c)?;
    ensure_shape("proj", y, r, c)?;
    for j in 0..c {
        for i in 0..r {
            let (t, lo, hi) = (theta[(i, j)], bounds.lower[(i, j)], bounds.upper[(i, j)]);
            if !(t >= lo && t <= hi) {
                return Err(Error::OutOfBounds {
                    row: i,
                    col: j,
                    value: t,
                    lower: lo,
                    upper: hi,
                });
            }
        }
    }
    Ok(proj_unchecked(theta, y, bounds))
}

/// [`proj`] without the containment check; elements outside the box are
/// treated as sitting on the nearest face.
pub(crate) fn proj_unchecked(theta: &Matrix, y: &Matrix, bounds: &ProjectionBounds) -> Matrix {
    Matrix::from_fn(y.nrows(), y.ncols(), |i, j| {
        let yv = y[(i, j)];
        let t = theta[(i, j)];
        let margin = bounds.margin[(i, j)];
        let dist = if yv > 0.0 {
            bounds.upper[(i, j)] - t
        } else if yv < 0.0 {
            t - bounds.lower[(i, j)]
        } else {
            return 0.0;
        };
        if dist >= margin {
            yv
        } else {
            yv * dist.max(0.0) / margin
        }
    })
}

/// A learning rate: scalar, or diagonal acting on the rows of the law it scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LearningRate {
    Scalar(f64),
    Diagonal(Vec<f64>),
}

impl LearningRate {
    pub fn validate(&self, name: &str, rows: usize) -> Result<()> {
        let ok = match self {
            LearningRate::Scalar(g) => *g >= 0.0 && g.is_finite(),
            LearningRate::Diagonal(d) => {
                if d.len() != rows {
                    return Err(Error::Validation(format!(
                        "learning rate `{name}` has {} diagonal entries, expected {rows}",
                        d.len()
                    )));
                }
                d.iter().all(|g| *g >= 0.0 && g.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "learning rate `{name}` must be finite and nonnegative"
            )))
        }
    }

    /// `Γ · m` with `Γ` the scalar or diagonal gain.
    pub fn apply(&self, m: &Matrix) -> Matrix {
        match self {
            LearningRate::Scalar(g) => m * *g,
            LearningRate::Diagonal(d) => Matrix::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)]),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            LearningRate::Scalar(g) => LearningRate::Scalar(g * factor),
            LearningRate::Diagonal(d) => LearningRate::Diagonal(d.iter().map(|g| g * factor).collect()),
        }
    }
}

/// Nominal gains and model matrices for both loops.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub b_p: Matrix,
    pub l_x: Matrix,
    pub l_r: Matrix,
    pub l_r_inv: Matrix,
    pub theta_x: Matrix,
    pub theta_r: Matrix,
    pub a_r: Matrix,
    pub a_m: Matrix,
    pub b_r: Matrix,
    pub b_m: Matrix,
    pub p_1: Matrix,
    pub p_2: Matrix,
}

/// Inputs of the offline design.
#[derive(Debug, Clone)]
pub struct DesignInputs<'a> {
    pub a_n: &'a Matrix,
    pub b_p: &'a Matrix,
    pub l_x: &'a Matrix,
    /// Feed-forward gain `L_r`, designed by the caller (full or reduced model).
    pub l_r: &'a Matrix,
    pub c_2: &'a Matrix,
    pub q_lqr: &'a Matrix,
    pub r_lqr: &'a Matrix,
    pub q_1: &'a Matrix,
    pub q_2: &'a Matrix,
}

impl GainSet {
    pub fn design(inputs: &DesignInputs<'_>) -> Result<Self> {
        let n = ensure_square("GainSet::design", inputs.a_n)?;
        let m = inputs.b_p.ncols();
        ensure_shape("GainSet::design (B_p)", inputs.b_p, n, m)?;
        ensure_shape("GainSet::design (L_x)", inputs.l_x, m, n)?;
        ensure_shape("GainSet::design (L_r)", inputs.l_r, m, m)?;
        let a_r = inputs.a_n - inputs.b_p * inputs.l_x;
        let abscissa = spectral_abscissa(&a_r)?;
        if abscissa >= 0.0 {
            return Err(Error::NotHurwitz {
                real_part: abscissa,
            });
        }
        let l_r = inputs.l_r.clone();
        let l_r_inv = l_r
            .clone()
            .try_inverse()
            .ok_or(Error::SingularDCGain { sigma_min: 0.0 })?;
        let (theta_x, a_m) = design_crossover(&a_r, inputs.b_p, &l_r, inputs.q_lqr, inputs.r_lqr)?;
        let b_r = inputs.b_p * &l_r;
        let theta_r = compute_theta_r(&a_m, &b_r, inputs.c_2)?;
        let b_m = &b_r * &theta_r;
        let p_1 = solve_lyapunov(&a_r, inputs.q_1)?;
        let p_2 = solve_lyapunov(&a_m, inputs.q_2)?;
        Ok(GainSet {
            b_p: inputs.b_p.clone(),
            l_x: inputs.l_x.clone(),
            l_r,
            l_r_inv,
            theta_x,
            theta_r,
            a_r,
            a_m,
            b_r,
            b_m,
            p_1,
            p_2,
        })
    }

    pub fn n_p(&self) -> usize {
        self.a_r.nrows()
    }

    pub fn m(&self) -> usize {
        self.b_p.ncols()
    }
}

/// `−(Cᵀ A⁻¹ B)⁻¹`, the feed-forward gain giving unit DC gain from a constant
/// command to `Cᵀx` through `ẋ = A x + B u`.
fn dc_feedforward(a: &Matrix, b: &Matrix, c: &Matrix, op: &'static str) -> Result<Matrix> {
    let n = ensure_square(op, a)?;
    let m = b.ncols();
    ensure_shape(op, b, n, m)?;
    ensure_shape(op, c, n, m)?;
    let lu = a.clone().lu();
    let a_inv_b = lu.solve(b).ok_or(Error::SingularDCGain { sigma_min: 0.0 })?;
    let dc = c.transpose() * &a_inv_b;
    let smin = sigma_min(&dc);
    let scale = c.norm() * a_inv_b.norm();
    if !(smin > 1e-12 * scale) {
        return Err(Error::SingularDCGain { sigma_min: smin });
    }
    let inv = dc
        .try_inverse()
        .ok_or(Error::SingularDCGain { sigma_min: smin })?;
    Ok(-inv)
}

/// `L_r = −(C₁ᵀ A_r⁻¹ B_p)⁻¹`.
pub fn compute_lr(a_r: &Matrix, b_p: &Matrix, c_1: &Matrix) -> Result<Matrix> {
    dc_feedforward(a_r, b_p, c_1, "compute_lr")
}

/// `θ_r = −(C₂ᵀ A_m⁻¹ B_r)⁻¹`.
pub fn compute_theta_r(a_m: &Matrix, b_r: &Matrix, c_2: &Matrix) -> Result<Matrix> {
    dc_feedforward(a_m, b_r, c_2, "compute_theta_r")
}

#[derive(Debug, Clone)]
pub struct Matching {
    pub k_x_star: Matrix,
    pub residual: f64,
}

/// Least-squares ideal feedback gain for `A_p − B_p Λ K*ₓ = A_r`.
pub fn solve_matching(a_p: &Matrix, a_r: &Matrix, b_p: &Matrix, lambda: &Vector) -> Result<Matching> {
    let n = ensure_square("solve_matching", a_p)?;
    let m = b_p.ncols();
    ensure_shape("solve_matching", a_r, n, n)?;
    ensure_shape("solve_matching", b_p, n, m)?;
    if lambda.len() != m {
        return Err(Error::dims("solve_matching (Λ)", m, lambda.len()));
    }
    if lambda.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::Validation(
            "control effectiveness must be positive definite".into(),
        ));
    }
    let b_eff = b_p * Matrix::from_diagonal(lambda);
    let rhs = a_p - a_r;
    let k = b_eff
        .svd(true, true)
        .solve(&rhs, 1e-12 * b_p.amax().max(f64::MIN_POSITIVE))
        .map_err(|_| Error::NoConvergence("matching least squares"))?;
    let residual = (a_p - b_p * Matrix::from_diagonal(lambda) * &k - a_r).norm();
    Ok(Matching {
        k_x_star: k,
        residual,
    })
}

/// LQR design of the crossover model: `θ_x` from the CARE on `(A_r, B_p L_r)`
/// and `A_m = A_r − B_p L_r θ_x`.
pub fn design_crossover(
    a_r: &Matrix,
    b_p: &Matrix,
    l_r: &Matrix,
    q_lqr: &Matrix,
    r_lqr: &Matrix,
) -> Result<(Matrix, Matrix)> {
    let b_r = b_p * l_r;
    let care = solve_care(a_r, &b_r, q_lqr, r_lqr)?;
    let a_m = a_r - &b_r * &care.k;
    if !is_hurwitz(&a_m)? {
        return Err(Error::NotHurwitz {
            real_part: spectral_abscissa(&a_m)?,
        });
    }
    Ok((care.k, a_m))
}
