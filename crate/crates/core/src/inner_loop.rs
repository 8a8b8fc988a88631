//! Uncertain plant, reference model and the inner-loop adaptive controller.

use crate::adaptive::{proj_unchecked, GainSet, LearningRate, ProjectionBounds};
use crate::numerics::{ensure_len, ensure_shape, ensure_square, Matrix, Vector};
use crate::{Error, Result};

/// True plant `ẋ_p = A_p x_p + B_p Λ u_p`, `y₁ = C₁ᵀx_p`, `y₂ = C₂ᵀx_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantParams {
    pub a_p: Matrix,
    pub b_p: Matrix,
    /// Diagonal of the control effectiveness matrix, entries in (0, 1].
    pub lambda: Vector,
    pub c_1: Matrix,
    pub c_2: Matrix,
}

impl PlantParams {
    pub fn new(a_p: Matrix, b_p: Matrix, lambda: Vector, c_1: Matrix, c_2: Matrix) -> Result<Self> {
        let plant = Self {
            a_p,
            b_p,
            lambda,
            c_1,
            c_2,
        };
        plant.validate()?;
        Ok(plant)
    }

    pub fn n_p(&self) -> usize {
        self.a_p.nrows()
    }

    pub fn m(&self) -> usize {
        self.b_p.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = ensure_square("PlantParams (A_p)", &self.a_p)?;
        let m = self.m();
        ensure_shape("PlantParams (B_p)", &self.b_p, n, m)?;
        ensure_shape("PlantParams (C_1)", &self.c_1, n, m)?;
        ensure_shape("PlantParams (C_2)", &self.c_2, n, m)?;
        ensure_len("PlantParams (Λ)", &self.lambda, m)?;
        validate_effectiveness(&self.lambda)?;
        if controllability_rank(&self.a_p, &self.b_p) < n {
            return Err(Error::Validation("(A_p, B_p) is not controllable".into()));
        }
        Ok(())
    }

    pub fn y_1(&self, x_p: &Vector) -> Vector {
        self.c_1.transpose() * x_p
    }

    pub fn y_2(&self, x_p: &Vector) -> Vector {
        self.c_2.transpose() * x_p
    }
}

pub fn validate_effectiveness(lambda: &Vector) -> Result<()> {
    if let Some(bad) = lambda.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
        return Err(Error::Validation(format!(
            "control effectiveness entry {bad} is outside (0, 1]"
        )));
    }
    Ok(())
}

fn controllability_rank(a: &Matrix, b: &Matrix) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    let mut ctrb = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    // scale columns so the Krylov powers do not swamp the rank test
    for mut col in ctrb.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    ctrb.rank(1e-10)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerLoopState {
    pub x_p: Vector,
    pub x_r: Vector,
    pub k_hat_x: Matrix,
    pub lambda_hat: Vector,
}

impl InnerLoopState {
    /// Zero plant and reference states, `K̂_x = 0` and `λ̂ = 1`.
    pub fn initial(n_p: usize, m: usize) -> Self {
        Self {
            x_p: Vector::zeros(n_p),
            x_r: Vector::zeros(n_p),
            k_hat_x: Matrix::zeros(m, n_p),
            lambda_hat: Vector::from_element(m, 1.0),
        }
    }

    /// `e₁ = x_p − x_r`.
    pub fn e_1(&self) -> Vector {
        &self.x_p - &self.x_r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerRates {
    pub k_hat_x: Matrix,
    pub lambda_hat: Vector,
}

pub fn plant_derivative(x_p: &Vector, u_p: &Vector, params: &PlantParams) -> Result<Vector> {
    ensure_len("plant_derivative (x_p)", x_p, params.n_p())?;
    ensure_len("plant_derivative (u_p)", u_p, params.m())?;
    Ok(&params.a_p * x_p + &params.b_p * params.lambda.component_mul(u_p))
}

/// `ẋ_r = A_r x_r + B_r y_h(t − τ)`.
pub fn reference_derivative(x_r: &Vector, y_h_delayed: &Vector, gains: &GainSet) -> Result<Vector> {
    ensure_len("reference_derivative (x_r)", x_r, gains.n_p())?;
    ensure_len("reference_derivative (y_h)", y_h_delayed, gains.m())?;
    Ok(&gains.a_r * x_r + &gains.b_r * y_h_delayed)
}

/// `u_p = −K̂_x x_p + diag(λ̂) L_r y_h(t − τ)`.
pub fn inner_control(state: &InnerLoopState, y_h_delayed: &Vector, gains: &GainSet) -> Result<Vector> {
    ensure_len("inner_control (y_h)", y_h_delayed, gains.m())?;
    ensure_len("inner_control (x_p)", &state.x_p, gains.n_p())?;
    ensure_shape("inner_control (K̂_x)", &state.k_hat_x, gains.m(), gains.n_p())?;
    let ff = &gains.l_r * y_h_delayed;
    Ok(-(&state.k_hat_x * &state.x_p) + state.lambda_hat.component_mul(&ff))
}

/// Inner adaptive laws.
///
/// `K̂̇_xᵀ = Γ_x x_p e₁ᵀ P₁ B_p` and
/// `λ̂̇ = Γ_λ Proj(λ̂, −diag(L_r y_h(t−τ)) B_pᵀ P₁ e₁)`.
/// A `k_bounds` box, when given, projects the `K̂_xᵀ` law as well.
#[allow(clippy::too_many_arguments)]
pub fn inner_adaptation(
    state: &InnerLoopState,
    e_1: &Vector,
    y_h_delayed: &Vector,
    gains: &GainSet,
    gamma_x: &LearningRate,
    gamma_lambda: &LearningRate,
    lambda_bounds: &ProjectionBounds,
    k_bounds: Option<&ProjectionBounds>,
) -> Result<InnerRates> {
    let n = gains.n_p();
    let m = gains.m();
    ensure_len("inner_adaptation (e_1)", e_1, n)?;
    ensure_len("inner_adaptation (y_h)", y_h_delayed, m)?;
    ensure_shape("inner_adaptation (λ̂ bounds)", &lambda_bounds.lower, m, 1)?;
    // B_pᵀ P₁ e₁ (m) is shared by both laws.
    let bpe = gains.b_p.transpose() * (&gains.p_1 * e_1);
    let k_t_dir = &state.x_p * bpe.transpose();
    let k_t_dir = match k_bounds {
        Some(b) => proj_unchecked(&b.clamp(&state.k_hat_x.transpose()), &k_t_dir, b),
        None => k_t_dir,
    };
    let k_t_rate = gamma_x.apply(&k_t_dir);
    let ff = &gains.l_r * y_h_delayed;
    let lam_dir = -ff.component_mul(&bpe);
    let lam_theta = lambda_bounds.clamp(&Matrix::from_column_slice(m, 1, state.lambda_hat.as_slice()));
    let lam_dir = proj_unchecked(&lam_theta, &Matrix::from_column_slice(m, 1, lam_dir.as_slice()), lambda_bounds);
    let lam_rate = gamma_lambda.apply(&lam_dir);
    Ok(InnerRates {
        k_hat_x: k_t_rate.transpose(),
        lambda_hat: Vector::from_column_slice(lam_rate.as_slice()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::{DesignInputs, GainSet};
    use crate::numerics::matrix_from_rows;
    use proptest::prelude::*;

    fn toy_gains() -> GainSet {
        let a_n = matrix_from_rows(&[vec![-1.0, 1.0], vec![0.0, -2.0]]).unwrap();
        let b_p = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let l_x = Matrix::zeros(1, 2);
        let l_r = Matrix::from_element(1, 1, 2.0);
        let c_2 = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        GainSet::design(&DesignInputs {
            a_n: &a_n,
            b_p: &b_p,
            l_x: &l_x,
            l_r: &l_r,
            c_2: &c_2,
            q_lqr: &Matrix::identity(2, 2),
            r_lqr: &Matrix::identity(1, 1),
            q_1: &Matrix::identity(2, 2),
            q_2: &Matrix::identity(2, 2),
        })
        .unwrap()
    }

    fn toy_plant() -> PlantParams {
        PlantParams::new(
            matrix_from_rows(&[vec![-1.0, 1.0], vec![0.5, 0.3]]).unwrap(),
            Matrix::from_column_slice(2, 1, &[0.0, 1.0]),
            Vector::from_element(1, 0.7),
            Matrix::from_column_slice(2, 1, &[0.0, 1.0]),
            Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
        )
        .unwrap()
    }

    fn lam_box() -> ProjectionBounds {
        ProjectionBounds::uniform(1, 1, 0.1, 10.0, None).unwrap()
    }

    #[test]
    fn plant_basis_probe_returns_columns() {
        let mut p = toy_plant();
        p.lambda = Vector::from_element(1, 1.0);
        assert_eq!(
            plant_derivative(&Vector::zeros(2), &Vector::zeros(1), &p).unwrap(),
            Vector::zeros(2)
        );
        for k in 0..2 {
            let mut e = Vector::zeros(2);
            e[k] = 1.0;
            let d = plant_derivative(&e, &Vector::zeros(1), &p).unwrap();
            assert_eq!(d, p.a_p.column(k).into_owned());
        }
    }

    #[test]
    fn plant_rejects_bad_effectiveness_and_shapes() {
        let mut p = toy_plant();
        p.lambda = Vector::from_element(1, 1.2);
        assert!(p.validate().is_err());
        p.lambda = Vector::from_element(1, 0.0);
        assert!(p.validate().is_err());
        let p = toy_plant();
        assert!(matches!(
            plant_derivative(&Vector::zeros(3), &Vector::zeros(1), &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn uncontrollable_plant_rejected() {
        let res = PlantParams::new(
            Matrix::from_diagonal_element(2, 2, 1.0),
            Matrix::from_column_slice(2, 1, &[1.0, 1.0]),
            Vector::from_element(1, 1.0),
            Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
            Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
        );
        assert!(res.is_err());
    }

    #[test]
    fn reference_steady_state() {
        let g = toy_gains();
        let y_h = Vector::from_element(1, 1.5);
        let x_inf = -g.a_r.clone().try_inverse().unwrap() * &g.b_r * &y_h;
        let d = reference_derivative(&x_inf, &y_h, &g).unwrap();
        assert!(d.amax() < 1e-14);
        assert_eq!(
            reference_derivative(&Vector::zeros(2), &Vector::zeros(1), &g).unwrap(),
            Vector::zeros(2)
        );
    }

    #[test]
    fn control_pass_through() {
        let g = toy_gains();
        let mut s = InnerLoopState::initial(2, 1);
        s.x_p = Vector::from_vec(vec![3.0, -1.0]);
        assert_eq!(inner_control(&s, &Vector::zeros(1), &g).unwrap(), Vector::zeros(1));
        let u = inner_control(&s, &Vector::from_element(1, 0.5), &g).unwrap();
        assert_eq!(u[0], 1.0);
    }

    #[test]
    fn ideal_gains_reproduce_reference_dynamics() {
        let g = toy_gains();
        let plant = toy_plant();
        let matching =
            crate::adaptive::solve_matching(&plant.a_p, &g.a_r, &plant.b_p, &plant.lambda).unwrap();
        assert!(matching.residual < 1e-12);
        let s = InnerLoopState {
            x_p: Vector::from_vec(vec![0.4, -1.3]),
            x_r: Vector::zeros(2),
            k_hat_x: matching.k_x_star.clone(),
            lambda_hat: plant.lambda.map(|l| 1.0 / l),
        };
        let y_h = Vector::from_element(1, 0.8);
        let u = inner_control(&s, &y_h, &g).unwrap();
        let plant_dot = plant_derivative(&s.x_p, &u, &plant).unwrap();
        let ref_dot = reference_derivative(&s.x_p, &y_h, &g).unwrap();
        assert!((plant_dot - ref_dot).amax() < 1e-13);
    }

    #[test]
    fn adaptation_vanishes_without_error_or_command() {
        let g = toy_gains();
        let mut s = InnerLoopState::initial(2, 1);
        s.x_p = Vector::from_vec(vec![1.0, 2.0]);
        let one = LearningRate::Scalar(1.0);
        let r = inner_adaptation(&s, &Vector::zeros(2), &Vector::from_element(1, 1.0), &g, &one, &one, &lam_box(), None)
            .unwrap();
        assert_eq!(r.k_hat_x, Matrix::zeros(1, 2));
        assert_eq!(r.lambda_hat, Vector::zeros(1));
        let r = inner_adaptation(&s, &Vector::from_vec(vec![0.3, -0.2]), &Vector::zeros(1), &g, &one, &one, &lam_box(), None)
            .unwrap();
        assert_eq!(r.lambda_hat, Vector::zeros(1));
    }

    proptest! {
        #[test]
        fn k_rate_matches_elementwise_outer_product(
            xp in proptest::collection::vec(-5.0f64..5.0, 2),
            e1 in proptest::collection::vec(-5.0f64..5.0, 2),
            gx in 0.01f64..10.0,
        ) {
            let g = toy_gains();
            let mut s = InnerLoopState::initial(2, 1);
            s.x_p = Vector::from_column_slice(&xp);
            let e = Vector::from_column_slice(&e1);
            let r = inner_adaptation(&s, &e, &Vector::from_element(1, 1.0), &g,
                &LearningRate::Scalar(gx), &LearningRate::Scalar(1.0), &lam_box(), None).unwrap();
            // K̂̇_x[0][j] = γ x_p[j] Σ_{a,b} e[a] P[a][b] B[b]
            for j in 0..2 {
                let mut acc = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        acc += e1[a] * g.p_1[(a, b)] * g.b_p[(b, 0)];
                    }
                }
                let want = gx * xp[j] * acc;
                prop_assert!((r.k_hat_x[(0, j)] - want).abs() <= 1e-14 * (1.0 + want.abs()));
            }
        }
    }
}
