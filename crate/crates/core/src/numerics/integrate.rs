use crate::{Error, Result};

/// A coupled ODE whose right-hand side may read delayed signals from
/// history buffers owned by the system.
///
/// Delayed lookups made from `derivative` must only reach samples committed
/// at or before the start of the current step; `max_step` lets the system
/// enforce that by bounding the step by its smallest nonzero lag.
pub trait DelaySystem {
    fn dim(&self) -> usize;

    fn derivative(&self, t: f64, state: &[f64], out: &mut [f64]) -> Result<()>;

    fn max_step(&self) -> Option<f64> {
        None
    }

    /// Called exactly once per accepted step with the new time and state.
    /// The system may project the state in place (e.g. onto parameter
    /// bounds) before it is returned to the caller.
    fn commit(&mut self, _t: f64, _state: &mut [f64]) -> Result<()> {
        Ok(())
    }

    fn state_name(&self, index: usize) -> String {
        format!("state[{index}]")
    }
}

/// One classical fourth-order Runge–Kutta step of size `h` from `(t, state)`.
pub fn integrate_step<S: DelaySystem + ?Sized>(
    system: &mut S,
    state: &[f64],
    t: f64,
    h: f64,
) -> Result<Vec<f64>> {
    let n = system.dim();
    if state.len() != n {
        return Err(Error::dims("integrate_step", n, state.len()));
    }
    if !(h > 0.0) {
        return Err(Error::Validation(format!("step must be positive, got {h}")));
    }
    if let Some(max) = system.max_step() {
        if h > max * (1.0 + 1e-9) {
            return Err(Error::StepTooLarge { step: h, max });
        }
    }
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];

    system.derivative(t, state, &mut k1)?;
    for i in 0..n {
        stage[i] = state[i] + 0.5 * h * k1[i];
    }
    system.derivative(t + 0.5 * h, &stage, &mut k2)?;
    for i in 0..n {
        stage[i] = state[i] + 0.5 * h * k2[i];
    }
    system.derivative(t + 0.5 * h, &stage, &mut k3)?;
    for i in 0..n {
        stage[i] = state[i] + h * k3[i];
    }
    system.derivative(t + h, &stage, &mut k4)?;

    let mut next: Vec<f64> = (0..n)
        .map(|i| state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if let Some(i) = next.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState {
            time: t + h,
            signal: system.state_name(i),
        });
    }
    system.commit(t + h, &mut next)?;
    Ok(next)
}
