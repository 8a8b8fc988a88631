//! Run metrics and log-driven oracles: the inner closed loop's state
//! transition matrix, the `τ`-ahead state predictor and the ideal outer-loop
//! parameter values.
//!
//! Oracles read only logged quantities plus the true plant data; nothing here
//! feeds back into a simulation.

use crate::adaptive::{solve_matching, GainSet};
use crate::inner_loop::PlantParams;
use crate::numerics::{Matrix, Vector};
use crate::pilot_model::Quadrature;
use crate::scenario::{Signal, SimLog};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// RMS of `y₂ − r` over the window, crad.
    pub rms_tracking_error: f64,
    /// Fraction of the window with some pilot channel at its limit.
    pub saturation_duty_cycle: f64,
    /// `∫ ‖u_p‖² dt`.
    pub control_effort: f64,
    /// `∫ ‖y_h‖² dt`.
    pub pilot_effort: f64,
    /// Peak `‖e_y‖`.
    pub peak_e_y: f64,
    pub window_start: f64,
    pub window_end: f64,
}

impl RunMetrics {
    pub const CSV_HEADER: &'static str =
        "rms_tracking_error,saturation_duty_cycle,control_effort,pilot_effort,peak_e_y,window_start,window_end";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.rms_tracking_error,
            self.saturation_duty_cycle,
            self.control_effort,
            self.pilot_effort,
            self.peak_e_y,
            self.window_start,
            self.window_end
        )
    }
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Metrics over the logged samples in `[start, end]`, integrals by the
/// trapezoidal rule.
pub fn compute_metrics(log: &SimLog, start: f64, end: f64) -> Result<RunMetrics> {
    let tol = 1e-9 * (1.0 + end.abs());
    let idx: Vec<usize> = (0..log.len())
        .filter(|&i| log.time(i) >= start - tol && log.time(i) <= end + tol)
        .collect();
    if idx.len() < 2 || !(end > start) {
        return Err(Error::EmptyWindow { start, end });
    }
    let m = log.layout().m;
    let tracking = |i: usize| {
        let y = log.get(i, Signal::Y2);
        let r = log.get(i, Signal::R);
        (0..m).map(|j| (y[j] - r[j]).powi(2)).sum::<f64>()
    };
    let saturated = |i: usize| {
        let y = log.get(i, Signal::Yh);
        let on = (0..m).any(|j| y[j].abs() >= log.y_o[j] * (1.0 - 1e-12));
        if on {
            1.0
        } else {
            0.0
        }
    };
    let trapz = |f: &dyn Fn(usize) -> f64| {
        idx.windows(2)
            .map(|w| 0.5 * (log.time(w[1]) - log.time(w[0])) * (f(w[0]) + f(w[1])))
            .sum::<f64>()
    };
    let span = log.time(*idx.last().unwrap()) - log.time(idx[0]);
    let peak = idx
        .iter()
        .map(|&i| sq(log.get(i, Signal::Ey)).sqrt())
        .fold(0.0, f64::max);
    Ok(RunMetrics {
        rms_tracking_error: (trapz(&tracking) / span).sqrt(),
        saturation_duty_cycle: (trapz(&saturated) / span).clamp(0.0, 1.0),
        control_effort: trapz(&|i| sq(log.get(i, Signal::Up))),
        pilot_effort: trapz(&|i| sq(log.get(i, Signal::Yh))),
        peak_e_y: peak,
        window_start: start,
        window_end: end,
    })
}

/// Transition matrix of `ẋ = A(t) x` with `A(t) = A_p − B_p Λ(t) K̂_x(t)`,
/// the inner closed loop seen by the pilot, reconstructed from a log.
///
/// `K̂_x` and `λ̂` are interpolated linearly between samples; `Λ` is held from
/// the left sample, matching how failure events switch at grid times.
#[derive(Debug, Clone)]
pub struct TransitionOracle<'a> {
    log: &'a SimLog,
    a_p: Matrix,
    b_p: Matrix,
    substeps: usize,
}

impl<'a> TransitionOracle<'a> {
    pub fn new(log: &'a SimLog, plant: &PlantParams) -> Result<Self> {
        if log.len() < 2 {
            return Err(Error::EmptyWindow {
                start: if log.is_empty() { f64::NAN } else { log.time(0) },
                end: f64::NAN,
            });
        }
        Ok(Self {
            log,
            a_p: plant.a_p.clone(),
            b_p: plant.b_p.clone(),
            substeps: 4,
        })
    }

    /// RK4 steps per log interval.
    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps.max(1);
        self
    }

    pub fn log(&self) -> &SimLog {
        self.log
    }

    fn span(&self) -> (f64, f64) {
        (self.log.time(0), self.log.time(self.log.len() - 1))
    }

    fn check(&self, t: f64) -> Result<()> {
        let (a, b) = self.span();
        let tol = 1e-9 * (1.0 + b.abs());
        if t < a - tol || t > b + tol || !t.is_finite() {
            return Err(Error::RangeNotLogged { time: t, start: a, end: b });
        }
        Ok(())
    }

    /// Index of the log interval holding `t` and the fraction within it.
    fn locate(&self, t: f64) -> (usize, f64) {
        let (a, _) = self.span();
        let dt = self.log.interval();
        let pos = (t - a) / dt;
        let mut i = pos.floor().max(0.0) as usize;
        if (pos - pos.round()).abs() < 1e-9 {
            i = pos.round().max(0.0) as usize;
        }
        let i = i.min(self.log.len() - 2);
        let frac = ((t - self.log.time(i)) / dt).clamp(0.0, 1.0);
        (i, frac)
    }

    fn lerp(&self, i: usize, frac: f64, s: Signal) -> Vector {
        let a = self.log.vector(i, s);
        if frac == 0.0 {
            return a;
        }
        let b = self.log.vector(i + 1, s);
        a * (1.0 - frac) + b * frac
    }

    /// Value of a logged signal at `t`, linearly interpolated.
    pub fn signal(&self, s: Signal, t: f64) -> Result<Vector> {
        self.check(t)?;
        let (i, frac) = self.locate(t);
        Ok(self.lerp(i, frac, s))
    }

    /// True effectiveness `Λ` in effect at `t`.
    pub fn lambda(&self, t: f64) -> Result<Vector> {
        self.check(t)?;
        let (i, frac) = self.locate(t);
        let i = if frac >= 1.0 { i + 1 } else { i };
        Ok(self.log.vector(i, Signal::Lambda))
    }

    fn k_hat_in(&self, i: usize, frac: f64) -> Matrix {
        let (n, m) = (self.a_p.nrows(), self.b_p.ncols());
        let k = self.lerp(i, frac, Signal::KHatX);
        Matrix::from_row_slice(m, n, k.as_slice())
    }

    /// `A(s)` on log interval `i`, with `Λ` held at its left sample.
    fn a_in(&self, i: usize, s: f64) -> Matrix {
        let dt = self.log.interval();
        let frac = ((s - self.log.time(i)) / dt).clamp(0.0, 1.0);
        let lam = self.log.vector(i, Signal::Lambda);
        let k = self.k_hat_in(i, frac);
        let mut bl = self.b_p.clone();
        for j in 0..bl.ncols() {
            bl.column_mut(j).scale_mut(lam[j]);
        }
        &self.a_p - bl * k
    }

    /// `A(t)`, right-continuous in `Λ`.
    pub fn system_matrix(&self, t: f64) -> Result<Matrix> {
        self.check(t)?;
        let (i, frac) = self.locate(t);
        if frac >= 1.0 {
            // last sample: hold the final interval's K̂ end point with its Λ
            let last = self.log.len() - 1;
            let lam = self.log.vector(last, Signal::Lambda);
            let k = self.k_hat_in(i, 1.0);
            let mut bl = self.b_p.clone();
            for j in 0..bl.ncols() {
                bl.column_mut(j).scale_mut(lam[j]);
            }
            return Ok(&self.a_p - bl * k);
        }
        Ok(self.a_in(i, t))
    }

    /// `Λ₂(t) = Λ(t) diag(λ̂(t))` as its diagonal.
    pub fn lambda2(&self, t: f64) -> Result<Vector> {
        Ok(self.lambda(t)?.component_mul(&self.signal(Signal::LambdaHat, t)?))
    }

    /// `Φ(t2, t1)`, integrating forward or backward in time.
    pub fn transition(&self, t2: f64, t1: f64) -> Result<Matrix> {
        self.check(t1)?;
        self.check(t2)?;
        let n = self.a_p.nrows();
        let mut phi = Matrix::identity(n, n);
        if t2 == t1 {
            return Ok(phi);
        }
        let dt = self.log.interval();
        let (a0, b0) = self.span();
        // check() allows a rounding tolerance past either end
        let (t1, t2) = (t1.clamp(a0, b0), t2.clamp(a0, b0));
        let forward = t2 > t1;
        let mut s = t1;
        let step_rk4 = |phi: &Matrix, i: usize, s: f64, h: f64| -> Matrix {
            let k1 = self.a_in(i, s) * phi;
            let mid = self.a_in(i, s + 0.5 * h);
            let k2 = &mid * (phi + &k1 * (0.5 * h));
            let k3 = &mid * (phi + &k2 * (0.5 * h));
            let k4 = self.a_in(i, s + h) * (phi + &k3 * h);
            phi + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
        };
        while (forward && s < t2) || (!forward && s > t2) {
            // interval containing the next piece of the path
            let pos = (s - a0) / dt;
            let near = pos.round();
            let on_grid = (pos - near).abs() < 1e-9;
            let i = if forward {
                if on_grid {
                    near as usize
                } else {
                    pos.floor() as usize
                }
            } else if on_grid {
                near as usize - 1
            } else {
                pos.floor() as usize
            };
            let i = i.min(self.log.len() - 2);
            let boundary = if forward {
                self.log.time(i + 1).min(t2)
            } else {
                self.log.time(i).max(t2)
            };
            let len = boundary - s;
            if len == 0.0 {
                break;
            }
            let pieces = ((len.abs() / dt) * self.substeps as f64).ceil().max(1.0) as usize;
            let h = len / pieces as f64;
            for p in 0..pieces {
                phi = step_rk4(&phi, i, s + p as f64 * h, h);
            }
            s = boundary;
        }
        Ok(phi)
    }
}

/// `x_p(t+τ)` predicted from `x_p(t)` and the pilot commands over
/// `[t − τ, t]`, with the integral taken on the pilot's `N`-node rule.
pub fn predict_state(oracle: &TransitionOracle<'_>, gains: &GainSet, t: f64, quad: &Quadrature) -> Result<Vector> {
    let tau = quad.tau;
    let x_p = oracle.signal(Signal::Xp, t)?;
    let mut x = oracle.transition(t + tau, t)? * x_p;
    if tau == 0.0 {
        return Ok(x);
    }
    let start = oracle.log().time(0);
    for eta in quad.nodes() {
        let s = t + eta + tau;
        let past = t + eta;
        let y_h = if past < start {
            Vector::zeros(gains.m())
        } else {
            oracle.signal(Signal::Yh, past)?
        };
        let lam2 = oracle.lambda2(s)?;
        let input = &gains.b_p * lam2.component_mul(&(&gains.l_r * y_h));
        x += oracle.transition(t + tau, s)? * input * quad.weight();
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdealValues {
    pub phi1: Matrix,
    pub phi2_nodes: Vec<Matrix>,
    pub lambda2: Vector,
    pub lambda3: Vector,
}

/// `Hᵀ(t) = −Λ(t) K̃_x(t)` with the matching gain `K*_x` solved for `Λ(t)`.
pub fn h_transpose(oracle: &TransitionOracle<'_>, plant: &PlantParams, gains: &GainSet, t: f64) -> Result<Matrix> {
    let lam = oracle.lambda(t)?;
    let k_star = solve_matching(&plant.a_p, &gains.a_r, &gains.b_p, &lam)?.k_x_star;
    let k_hat = oracle.signal(Signal::KHatX, t)?;
    let k_hat = Matrix::from_row_slice(gains.m(), gains.n_p(), k_hat.as_slice());
    let mut out = k_hat - k_star;
    for i in 0..out.nrows() {
        out.row_mut(i).scale_mut(-lam[i]);
    }
    Ok(out)
}

/// Ideal outer-loop parameters at time `t`; the log must cover `[t, t+τ]`.
pub fn ideal_values(
    oracle: &TransitionOracle<'_>,
    plant: &PlantParams,
    gains: &GainSet,
    quad: &Quadrature,
    t: f64,
) -> Result<IdealValues> {
    let tau = quad.tau;
    let h_t = h_transpose(oracle, plant, gains, t + tau)?;
    let h_bar = -(&gains.theta_x + &gains.l_r_inv * h_t);
    let phi1 = &h_bar * oracle.transition(t + tau, t)?;
    let phi2_nodes = quad
        .nodes()
        .map(|eta| {
            let s = t + eta + tau;
            let lam2 = oracle.lambda2(s)?;
            let mut b = gains.b_p.clone();
            for j in 0..b.ncols() {
                b.column_mut(j).scale_mut(lam2[j]);
            }
            Ok(&h_bar * oracle.transition(t + tau, s)? * b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IdealValues {
        phi1,
        phi2_nodes,
        lambda2: oracle.lambda2(t + tau)?.map(|v| 1.0 / v),
        lambda3: oracle.lambda2(t)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matrix_exponential;
    use crate::scenario::{Layout, SimLog};

    /// Log of a two-state system with constant `K̂_x` and optional `Λ` switch.
    fn synthetic_log(k_hat: [f64; 2], lambda_after: Option<(f64, f64)>, samples: usize, dt: f64) -> SimLog {
        let mut log = SimLog::new(Layout::new(2, 1, 2), Vector::from_element(1, 1.0), 0.2, dt);
        for i in 0..samples {
            let t = i as f64 * dt;
            let lam = match lambda_after {
                Some((ts, l)) if t >= ts - 1e-12 => l,
                _ => 1.0,
            };
            let mut row = log.push_row();
            row.set(Signal::Time, &[t]);
            row.set(Signal::KHatX, &k_hat);
            row.set(Signal::Lambda, &[lam]);
            row.set(Signal::LambdaHat, &[1.0]);
            row.set(Signal::Xp, &[1.0, 0.0]);
        }
        log
    }

    fn plant() -> PlantParams {
        PlantParams::new(
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -0.5]),
            Matrix::from_column_slice(2, 1, &[0.0, 1.0]),
            Vector::from_element(1, 1.0),
            Matrix::from_column_slice(2, 1, &[0.0, 1.0]),
            Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn identity_at_equal_times() {
        let log = synthetic_log([0.3, 0.1], None, 50, 0.01);
        let o = TransitionOracle::new(&log, &plant()).unwrap();
        assert_eq!(o.transition(0.2, 0.2).unwrap(), Matrix::identity(2, 2));
    }

    #[test]
    fn rounding_past_the_end_terminates() {
        let log = synthetic_log([0.3, 0.1], None, 51, 0.01);
        let o = TransitionOracle::new(&log, &plant()).unwrap();
        let end = 0.5 + 3e-13;
        let a = o.transition(end, 0.5).unwrap();
        assert_eq!(a, Matrix::identity(2, 2));
        let b = o.transition(end, 0.2).unwrap();
        assert!((b - o.transition(0.5, 0.2).unwrap()).amax() < 1e-12);
    }

    #[test]
    fn constant_gain_matches_matrix_exponential() {
        let log = synthetic_log([0.0, 0.0], None, 101, 0.01);
        let p = plant();
        let o = TransitionOracle::new(&log, &p).unwrap();
        let phi = o.transition(0.87, 0.123).unwrap();
        let exact = matrix_exponential(&p.a_p, 0.87 - 0.123).unwrap();
        assert!((phi - exact).amax() < 1e-8);
    }

    #[test]
    fn switched_effectiveness_composes_two_exponentials() {
        let log = synthetic_log([1.0, 0.5], Some((0.5, 0.6)), 101, 0.01);
        let p = plant();
        let o = TransitionOracle::new(&log, &p).unwrap();
        let a = |lam: f64| &p.a_p - &p.b_p * Matrix::from_row_slice(1, 2, &[lam, 0.5 * lam]);
        let exact = matrix_exponential(&a(0.6), 0.3).unwrap() * matrix_exponential(&a(1.0), 0.3).unwrap();
        let phi = o.transition(0.8, 0.2).unwrap();
        assert!((phi - &exact).amax() < 1e-8);
        let back = o.transition(0.2, 0.8).unwrap();
        assert!((back * exact - Matrix::identity(2, 2)).amax() < 1e-8);
    }

    #[test]
    fn out_of_range_rejected() {
        let log = synthetic_log([0.0, 0.0], None, 11, 0.01);
        let o = TransitionOracle::new(&log, &plant()).unwrap();
        assert!(matches!(o.transition(0.2, 0.0), Err(Error::RangeNotLogged { .. })));
        assert!(matches!(o.transition(0.05, -0.01), Err(Error::RangeNotLogged { .. })));
    }

    #[test]
    fn homogeneous_prediction_is_exponential() {
        // y_h ≡ 0 and K̂_x ≡ 0
        let log = synthetic_log([0.0, 0.0], None, 101, 0.01);
        let p = plant();
        let o = TransitionOracle::new(&log, &p).unwrap();
        let gains = crate::adaptive::GainSet::design(&crate::adaptive::DesignInputs {
            a_n: &Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -0.5]),
            b_p: &p.b_p,
            l_x: &Matrix::zeros(1, 2),
            l_r: &Matrix::from_element(1, 1, 2.0),
            c_2: &p.c_2,
            q_lqr: &Matrix::identity(2, 2),
            r_lqr: &Matrix::identity(1, 1),
            q_1: &Matrix::identity(2, 2),
            q_2: &Matrix::identity(2, 2),
        })
        .unwrap();
        let quad = Quadrature::new(0.2, 4);
        let x = predict_state(&o, &gains, 0.3, &quad).unwrap();
        let exact = matrix_exponential(&p.a_p, 0.2).unwrap() * Vector::from_vec(vec![1.0, 0.0]);
        assert!((x - exact).amax() < 1e-8);

        let ideal = ideal_values(&o, &p, &gains, &quad, 0.3).unwrap();
        // A_p = A_r here, so K*_x = 0 = K̂_x and H vanishes.
        let nominal = -&gains.theta_x * matrix_exponential(&gains.a_r, 0.2).unwrap();
        assert!((ideal.phi1 - nominal).amax() < 1e-8);
        assert_eq!(ideal.lambda2[0], 1.0);
        assert_eq!(ideal.lambda3[0], 1.0);
    }

    #[test]
    fn effectiveness_holds_from_the_switch_sample() {
        let log = synthetic_log([0.0, 0.0], Some((0.2, 0.5)), 51, 0.01);
        let o = TransitionOracle::new(&log, &plant()).unwrap();
        assert_eq!(o.lambda2(0.195).unwrap()[0], 1.0);
        assert_eq!(o.lambda2(0.2).unwrap()[0], 0.5);
        assert_eq!(o.lambda2(0.5).unwrap()[0], 0.5);
    }

    fn metrics_log(y2: f64, r: f64, y_h: f64) -> SimLog {
        let mut log = SimLog::new(Layout::new(2, 1, 1), Vector::from_element(1, 2.0), 0.1, 0.1);
        for i in 0..11 {
            let mut row = log.push_row();
            row.set(Signal::Time, &[i as f64 * 0.1]);
            row.set(Signal::Y2, &[y2]);
            row.set(Signal::R, &[r]);
            row.set(Signal::Yh, &[y_h]);
            row.set(Signal::Up, &[3.0]);
        }
        log
    }

    #[test]
    fn perfect_tracking_metrics() {
        let m = compute_metrics(&metrics_log(1.5, 1.5, 0.5), 0.0, 1.0).unwrap();
        assert_eq!(m.rms_tracking_error, 0.0);
        assert_eq!(m.saturation_duty_cycle, 0.0);
        assert!((m.control_effort - 9.0).abs() < 1e-12);
        assert!((m.pilot_effort - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pinned_command_is_full_duty() {
        let m = compute_metrics(&metrics_log(1.0, 0.0, -2.0), 0.0, 1.0).unwrap();
        assert_eq!(m.saturation_duty_cycle, 1.0);
        assert!((m.rms_tracking_error - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_window_rejected() {
        let log = metrics_log(0.0, 0.0, 0.0);
        assert!(matches!(compute_metrics(&log, 0.31, 0.35), Err(Error::EmptyWindow { .. })));
        assert!(matches!(compute_metrics(&log, 5.0, 6.0), Err(Error::EmptyWindow { .. })));
    }
}
