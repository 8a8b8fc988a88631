//! Adaptive human-pilot model with internal reaction delay.
//!
//! The pilot sees the inner loop as a linear time-varying system and drives
//! it toward a crossover-reference model. The command carries a finite
//! integral over the last `τ` seconds of its own output; that integral is
//! discretized with a left-anchored rectangle rule on `N` nodes, and the
//! distributed adaptive gain `Φ̂₂(t, η)` is carried as one matrix per node.

use crate::adaptive::{proj_unchecked, GainSet, LearningRate, ProjectionBounds};
use crate::numerics::{ensure_len, ensure_shape, Matrix, Vector};
use crate::Result;

/// Node placement for the distributed-delay integral over `η ∈ [−τ, 0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub tau: f64,
    pub intervals: usize,
}

impl Quadrature {
    pub fn new(tau: f64, intervals: usize) -> Self {
        assert!(intervals > 0, "quadrature needs at least one interval");
        Self { tau, intervals }
    }

    pub fn spacing(&self) -> f64 {
        self.tau / self.intervals as f64
    }

    pub fn weight(&self) -> f64 {
        self.spacing()
    }

    /// `η_k = −τ + k τ/N` for `k = 0..N`.
    pub fn node(&self, k: usize) -> f64 {
        -self.tau + k as f64 * self.spacing()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.intervals).map(|k| self.node(k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterLoopState {
    pub x_m: Vector,
    pub e_delta: Vector,
    pub lambda2_hat: Vector,
    pub lambda3_hat: Vector,
    /// `m × n_p`.
    pub phi1_hat: Matrix,
    /// One `m × m` matrix per quadrature node.
    pub phi2_hat_nodes: Vec<Matrix>,
}

impl OuterLoopState {
    /// Zero model and auxiliary states, unit `λ̂₂`, `λ̂₃`, zero `Φ̂₂` nodes and
    /// `Φ̂₁` at the nominal ideal value `−θ_x e^{A_r τ}`.
    pub fn initial(gains: &GainSet, quad: &Quadrature) -> Result<Self> {
        let n = gains.n_p();
        let m = gains.m();
        let phi1 = -&gains.theta_x * crate::numerics::matrix_exponential(&gains.a_r, quad.tau)?;
        Ok(Self {
            x_m: Vector::zeros(n),
            e_delta: Vector::zeros(n),
            lambda2_hat: Vector::from_element(m, 1.0),
            lambda3_hat: Vector::from_element(m, 1.0),
            phi1_hat: phi1,
            phi2_hat_nodes: vec![Matrix::zeros(m, m); quad.intervals],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotCommand {
    /// Pre-gain command `G`.
    pub g: Vector,
    /// Unsaturated command `v`.
    pub v: Vector,
    /// Saturated command `y_h`.
    pub y_h: Vector,
    /// Control deficiency `Δy = y_h − v`.
    pub delta_y: Vector,
}

/// Element-wise saturation at `±limit`.
pub fn saturate(v: &Vector, limit: &Vector) -> Vector {
    Vector::from_fn(v.len(), |i, _| v[i].clamp(-limit[i], limit[i]))
}

/// `ẋ_m = A_m x_m + B_m r(t − τ)`.
pub fn crossover_derivative(x_m: &Vector, r_delayed: &Vector, gains: &GainSet) -> Result<Vector> {
    ensure_len("crossover_derivative (x_m)", x_m, gains.n_p())?;
    ensure_len("crossover_derivative (r)", r_delayed, gains.m())?;
    Ok(&gains.a_m * x_m + &gains.b_m * r_delayed)
}

/// Pilot command at time `t`.
///
/// `y_h_past(η)` must return `y_h(t + η)` for the quadrature nodes, all of
/// which lie in `[−τ, −τ/N]`.
pub fn pilot_command<F>(
    x_p: &Vector,
    r: &Vector,
    outer: &OuterLoopState,
    y_h_past: F,
    gains: &GainSet,
    quad: &Quadrature,
    y_o: &Vector,
) -> Result<PilotCommand>
where
    F: Fn(f64) -> Result<Vector>,
{
    let m = gains.m();
    ensure_len("pilot_command (x_p)", x_p, gains.n_p())?;
    ensure_len("pilot_command (r)", r, m)?;
    ensure_len("pilot_command (y_o)", y_o, m)?;
    ensure_shape("pilot_command (Φ̂₁)", &outer.phi1_hat, m, gains.n_p())?;
    let mut g = &outer.phi1_hat * x_p + &gains.theta_r * r;
    if quad.tau > 0.0 {
        let w = quad.weight();
        for (k, phi2) in outer.phi2_hat_nodes.iter().enumerate() {
            let past = y_h_past(quad.node(k))?;
            g += phi2 * (&gains.l_r * past) * w;
        }
    }
    let v = &gains.l_r_inv * outer.lambda2_hat.component_mul(&(&gains.l_r * &g));
    let y_h = saturate(&v, y_o);
    let delta_y = &y_h - &v;
    Ok(PilotCommand { g, v, y_h, delta_y })
}

/// `ė_Δ = A_m e_Δ + B_p diag(λ̂₃) L_r Δy(t − τ)`.
pub fn aux_error_derivative(
    e_delta: &Vector,
    delta_y_delayed: &Vector,
    lambda3_hat: &Vector,
    gains: &GainSet,
) -> Result<Vector> {
    ensure_len("aux_error_derivative (e_Δ)", e_delta, gains.n_p())?;
    ensure_len("aux_error_derivative (Δy)", delta_y_delayed, gains.m())?;
    ensure_len("aux_error_derivative (λ̂₃)", lambda3_hat, gains.m())?;
    Ok(&gains.a_m * e_delta + &gains.b_p * lambda3_hat.component_mul(&(&gains.l_r * delta_y_delayed)))
}

#[derive(Debug, Clone)]
pub struct OuterRatesConfig<'a> {
    pub gamma_2: &'a LearningRate,
    pub gamma_3: &'a LearningRate,
    pub gamma_phi1: &'a LearningRate,
    pub gamma_phi2: &'a LearningRate,
    pub lambda2_bounds: &'a ProjectionBounds,
    pub lambda3_bounds: &'a ProjectionBounds,
    /// Box for `Φ̂₁ᵀ` (`n_p × m`).
    pub phi1_bounds: &'a ProjectionBounds,
    /// Box for each `Φ̂₂ᵀ` node (`m × m`).
    pub phi2_bounds: &'a ProjectionBounds,
}

/// Delayed signals feeding the outer adaptive laws.
#[derive(Debug, Clone)]
pub struct OuterDelayed {
    /// `G(t − τ)`.
    pub g: Vector,
    /// `Δy(t − τ)`.
    pub delta_y: Vector,
    /// `x_p(t − τ)`.
    pub x_p: Vector,
    /// `y_h(t + η_k − τ)` per node.
    pub y_h_nodes: Vec<Vector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterRates {
    pub lambda2_hat: Vector,
    pub lambda3_hat: Vector,
    pub phi1_hat: Matrix,
    pub phi2_hat_nodes: Vec<Matrix>,
}

fn column(v: &Vector) -> Matrix {
    Matrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// Outer adaptive laws driven by the augmented error `e_y`.
pub fn outer_adaptation(
    outer: &OuterLoopState,
    e_y: &Vector,
    delayed: &OuterDelayed,
    gains: &GainSet,
    cfg: &OuterRatesConfig<'_>,
) -> Result<OuterRates> {
    let n = gains.n_p();
    let m = gains.m();
    ensure_len("outer_adaptation (e_y)", e_y, n)?;
    ensure_len("outer_adaptation (G)", &delayed.g, m)?;
    ensure_len("outer_adaptation (Δy)", &delayed.delta_y, m)?;
    ensure_len("outer_adaptation (x_p)", &delayed.x_p, n)?;

    // B_pᵀ P₂ e_y (m) and e_yᵀ P₂ B_p L_r (1 × m)
    let bpe = gains.b_p.transpose() * (&gains.p_2 * e_y);
    let row = bpe.transpose() * &gains.l_r;

    let lg = &gains.l_r * &delayed.g;
    let dir2 = column(&(-lg.component_mul(&bpe)));
    let th2 = cfg.lambda2_bounds.clamp(&column(&outer.lambda2_hat));
    let rate2 = cfg.gamma_2.apply(&proj_unchecked(&th2, &dir2, cfg.lambda2_bounds));

    let ld = &gains.l_r * &delayed.delta_y;
    let dir3 = column(&ld.component_mul(&bpe));
    let th3 = cfg.lambda3_bounds.clamp(&column(&outer.lambda3_hat));
    let rate3 = cfg.gamma_3.apply(&proj_unchecked(&th3, &dir3, cfg.lambda3_bounds));

    let dir_phi1 = -(&delayed.x_p * &row);
    let th_phi1 = cfg.phi1_bounds.clamp(&outer.phi1_hat.transpose());
    let rate_phi1 = cfg
        .gamma_phi1
        .apply(&proj_unchecked(&th_phi1, &dir_phi1, cfg.phi1_bounds));

    let mut rate_phi2 = Vec::with_capacity(outer.phi2_hat_nodes.len());
    for (phi2, y_h) in outer.phi2_hat_nodes.iter().zip(&delayed.y_h_nodes) {
        let dir = -(&gains.l_r * y_h * &row);
        let th = cfg.phi2_bounds.clamp(&phi2.transpose());
        let rate = cfg.gamma_phi2.apply(&proj_unchecked(&th, &dir, cfg.phi2_bounds));
        rate_phi2.push(rate.transpose());
    }

    Ok(OuterRates {
        lambda2_hat: Vector::from_column_slice(rate2.as_slice()),
        lambda3_hat: Vector::from_column_slice(rate3.as_slice()),
        phi1_hat: rate_phi1.transpose(),
        phi2_hat_nodes: rate_phi2,
    })
}
