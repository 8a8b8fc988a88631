//! The coupled two-loop simulation: plant, inner MRAC loop and adaptive
//! pilot advanced together by one fixed-step integrator.

use super::config::{Scenario, ScenarioConfig};
use super::log::{Layout, Signal, SimLog};
use crate::adaptive::ProjectionBounds;
use crate::inner_loop::{
    inner_adaptation, inner_control, plant_derivative, reference_derivative, InnerLoopState,
    PlantParams,
};
use crate::numerics::{integrate_step, DelaySystem, HistoryBuffer, Matrix, Vector};
use crate::pilot_model::{
    aux_error_derivative, crossover_derivative, outer_adaptation, pilot_command, OuterDelayed,
    OuterLoopState, OuterRatesConfig, PilotCommand,
};
use crate::{Error, Result};

/// Offsets of each block in the flat integrator state.
#[derive(Debug, Clone, Copy)]
struct StateLayout {
    n: usize,
    m: usize,
    nodes: usize,
}

impl StateLayout {
    fn x_p(&self) -> usize {
        0
    }
    fn x_r(&self) -> usize {
        self.n
    }
    fn x_m(&self) -> usize {
        2 * self.n
    }
    fn e_delta(&self) -> usize {
        3 * self.n
    }
    fn k_hat(&self) -> usize {
        4 * self.n
    }
    fn lambda_hat(&self) -> usize {
        self.k_hat() + self.m * self.n
    }
    fn lambda2(&self) -> usize {
        self.lambda_hat() + self.m
    }
    fn lambda3(&self) -> usize {
        self.lambda2() + self.m
    }
    fn phi1(&self) -> usize {
        self.lambda3() + self.m
    }
    fn phi2(&self, k: usize) -> usize {
        self.phi1() + self.m * self.n + k * self.m * self.m
    }
    fn dim(&self) -> usize {
        self.phi2(self.nodes)
    }

    fn name(&self, i: usize) -> String {
        let (n, m) = (self.n, self.m);
        let sub = |label: &str, base: usize, width: usize| -> Option<String> {
            (i >= base && i < base + width).then(|| format!("{label}[{}]", i - base))
        };
        sub("x_p", self.x_p(), n)
            .or_else(|| sub("x_r", self.x_r(), n))
            .or_else(|| sub("x_m", self.x_m(), n))
            .or_else(|| sub("e_delta", self.e_delta(), n))
            .or_else(|| sub("k_hat_x", self.k_hat(), m * n))
            .or_else(|| sub("lambda_hat", self.lambda_hat(), m))
            .or_else(|| sub("lambda2_hat", self.lambda2(), m))
            .or_else(|| sub("lambda3_hat", self.lambda3(), m))
            .or_else(|| sub("phi1_hat", self.phi1(), m * n))
            .or_else(|| {
                let k = (i - self.phi2(0)) / (m * m);
                sub(&format!("phi2_hat[{k}]"), self.phi2(k), m * m)
            })
            .unwrap_or_else(|| format!("state[{i}]"))
    }

    fn unpack(&self, s: &[f64]) -> (InnerLoopState, OuterLoopState) {
        let (n, m) = (self.n, self.m);
        let v = |o: usize, len: usize| Vector::from_column_slice(&s[o..o + len]);
        let mat = |o: usize, r: usize, c: usize| Matrix::from_row_slice(r, c, &s[o..o + r * c]);
        let inner = InnerLoopState {
            x_p: v(self.x_p(), n),
            x_r: v(self.x_r(), n),
            k_hat_x: mat(self.k_hat(), m, n),
            lambda_hat: v(self.lambda_hat(), m),
        };
        let outer = OuterLoopState {
            x_m: v(self.x_m(), n),
            e_delta: v(self.e_delta(), n),
            lambda2_hat: v(self.lambda2(), m),
            lambda3_hat: v(self.lambda3(), m),
            phi1_hat: mat(self.phi1(), m, n),
            phi2_hat_nodes: (0..self.nodes).map(|k| mat(self.phi2(k), m, m)).collect(),
        };
        (inner, outer)
    }

    fn pack(&self, inner: &InnerLoopState, outer: &OuterLoopState, out: &mut [f64]) {
        let put_v = |out: &mut [f64], o: usize, v: &Vector| out[o..o + v.len()].copy_from_slice(v.as_slice());
        let put_m = |out: &mut [f64], o: usize, m: &Matrix| {
            let c = m.ncols();
            for i in 0..m.nrows() {
                for j in 0..c {
                    out[o + i * c + j] = m[(i, j)];
                }
            }
        };
        put_v(out, self.x_p(), &inner.x_p);
        put_v(out, self.x_r(), &inner.x_r);
        put_v(out, self.x_m(), &outer.x_m);
        put_v(out, self.e_delta(), &outer.e_delta);
        put_m(out, self.k_hat(), &inner.k_hat_x);
        put_v(out, self.lambda_hat(), &inner.lambda_hat);
        put_v(out, self.lambda2(), &outer.lambda2_hat);
        put_v(out, self.lambda3(), &outer.lambda3_hat);
        put_m(out, self.phi1(), &outer.phi1_hat);
        for (k, p) in outer.phi2_hat_nodes.iter().enumerate() {
            put_m(out, self.phi2(k), p);
        }
    }
}

/// Delayed signals read at time `t`.
struct Delayed {
    y_h: Vector,
    r: Vector,
    outer: OuterDelayed,
}

struct Simulator<'a> {
    sc: &'a Scenario,
    lay: StateLayout,
    plant: PlantParams,
    tau: f64,
    y_h_hist: HistoryBuffer,
    x_p_hist: HistoryBuffer,
    g_hist: HistoryBuffer,
    dy_hist: HistoryBuffer,
    last_cmd: Option<PilotCommand>,
}

impl<'a> Simulator<'a> {
    fn new(sc: &'a Scenario) -> Self {
        let (n, m) = (sc.gains.n_p(), sc.gains.m());
        let h = sc.config.sim.step;
        let tau = sc.quad.tau;
        Self {
            sc,
            lay: StateLayout {
                n,
                m,
                nodes: sc.quad.intervals,
            },
            plant: sc.plant.clone(),
            tau,
            y_h_hist: HistoryBuffer::new(m, h, 2.0 * tau, 0.0),
            x_p_hist: HistoryBuffer::new(n, h, tau, 0.0),
            g_hist: HistoryBuffer::new(m, h, tau, 0.0),
            dy_hist: HistoryBuffer::new(m, h, tau, 0.0),
            last_cmd: None,
        }
    }

    fn command(&self, t: f64, inner: &InnerLoopState, outer: &OuterLoopState) -> Result<PilotCommand> {
        let r = self.sc.reference.at(t);
        pilot_command(
            &inner.x_p,
            &r,
            outer,
            |eta| self.y_h_hist.lookup_at(t + eta),
            &self.sc.gains,
            &self.sc.quad,
            &self.sc.y_o,
        )
    }

    /// Signals delayed by `τ` (and `τ − η_k` for the node history); with
    /// `τ = 0` they are the current values.
    fn delayed(&self, t: f64, x_p: &Vector, cmd: &PilotCommand) -> Result<Delayed> {
        if self.tau == 0.0 {
            return Ok(Delayed {
                y_h: cmd.y_h.clone(),
                r: self.sc.reference.at(t),
                outer: OuterDelayed {
                    g: cmd.g.clone(),
                    delta_y: cmd.delta_y.clone(),
                    x_p: x_p.clone(),
                    y_h_nodes: vec![cmd.y_h.clone(); self.lay.nodes],
                },
            });
        }
        let td = t - self.tau;
        Ok(Delayed {
            y_h: self.y_h_hist.lookup_at(td)?,
            r: self.sc.reference.at(td),
            outer: OuterDelayed {
                g: self.g_hist.lookup_at(td)?,
                delta_y: self.dy_hist.lookup_at(td)?,
                x_p: self.x_p_hist.lookup_at(td)?,
                y_h_nodes: self
                    .sc
                    .quad
                    .nodes()
                    .map(|eta| self.y_h_hist.lookup_at(td + eta))
                    .collect::<Result<_>>()?,
            },
        })
    }

    fn clamp_parameters(&self, s: &mut [f64]) {
        let lay = self.lay;
        let (n, m) = (lay.n, lay.m);
        let clamp_block = |s: &mut [f64], o: usize, r: usize, c: usize, transposed: bool, b: &ProjectionBounds| {
            // The state stores the matrix row-major as (r × c); bounds may be
            // on its transpose.
            let theta = Matrix::from_row_slice(r, c, &s[o..o + r * c]);
            let clamped = if transposed {
                b.clamp(&theta.transpose()).transpose()
            } else {
                b.clamp(&theta)
            };
            for i in 0..r {
                for j in 0..c {
                    s[o + i * c + j] = clamped[(i, j)];
                }
            }
        };
        let sc = self.sc;
        clamp_block(s, lay.lambda_hat(), m, 1, false, &sc.lambda_bounds);
        clamp_block(s, lay.lambda2(), m, 1, false, &sc.lambda2_bounds);
        clamp_block(s, lay.lambda3(), m, 1, false, &sc.lambda3_bounds);
        clamp_block(s, lay.phi1(), m, n, true, &sc.phi1_bounds);
        for k in 0..lay.nodes {
            clamp_block(s, lay.phi2(k), m, m, true, &sc.phi2_bounds);
        }
        if let Some(kb) = &sc.k_bounds {
            clamp_block(s, lay.k_hat(), m, n, true, kb);
        }
    }

    /// Computes the pilot command at an accepted grid point and appends all
    /// histories.
    fn record(&mut self, t: f64, s: &[f64]) -> Result<()> {
        let (inner, outer) = self.lay.unpack(s);
        let cmd = self.command(t, &inner, &outer)?;
        self.y_h_hist.push(cmd.y_h.clone());
        self.x_p_hist.push(inner.x_p.clone());
        self.g_hist.push(cmd.g.clone());
        self.dy_hist.push(cmd.delta_y.clone());
        self.last_cmd = Some(cmd);
        Ok(())
    }

    fn log_row(&self, t: f64, s: &[f64], log: &mut SimLog) -> Result<()> {
        let (inner, outer) = self.lay.unpack(s);
        let cmd = self.last_cmd.as_ref().expect("recorded before logging");
        let d = self.delayed(t, &inner.x_p, cmd)?;
        let u_p = inner_control(&inner, &d.y_h, &self.sc.gains)?;
        let e_1 = &inner.x_p - &inner.x_r;
        let e_2 = &inner.x_p - &outer.x_m;
        let e_y = &e_2 - &outer.e_delta;
        let phi2_fro: Vec<f64> = outer.phi2_hat_nodes.iter().map(|p| p.norm()).collect();
        let y_2 = self.plant.y_2(&inner.x_p);
        let r = self.sc.reference.at(t);
        let mut row = log.push_row();
        row.set(Signal::Time, &[t]);
        row.set(Signal::Xp, inner.x_p.as_slice());
        row.set(Signal::Xr, inner.x_r.as_slice());
        row.set(Signal::Xm, outer.x_m.as_slice());
        row.set(Signal::EDelta, outer.e_delta.as_slice());
        row.set(Signal::E1, e_1.as_slice());
        row.set(Signal::E2, e_2.as_slice());
        row.set(Signal::Ey, e_y.as_slice());
        row.set(Signal::G, cmd.g.as_slice());
        row.set(Signal::V, cmd.v.as_slice());
        row.set(Signal::Yh, cmd.y_h.as_slice());
        row.set(Signal::DeltaY, cmd.delta_y.as_slice());
        row.set(Signal::Up, u_p.as_slice());
        row.set(Signal::Y2, y_2.as_slice());
        row.set(Signal::R, r.as_slice());
        row.set(Signal::LambdaHat, inner.lambda_hat.as_slice());
        row.set(Signal::Lambda2Hat, outer.lambda2_hat.as_slice());
        row.set(Signal::Lambda3Hat, outer.lambda3_hat.as_slice());
        row.set(Signal::Phi1Hat, outer.phi1_hat.transpose().as_slice());
        row.set(Signal::Phi2Fro, &phi2_fro);
        let phi2: Vec<f64> = outer
            .phi2_hat_nodes
            .iter()
            .flat_map(|p| p.transpose().as_slice().to_vec())
            .collect();
        row.set(Signal::Phi2Hat, &phi2);
        row.set(Signal::KHatX, inner.k_hat_x.transpose().as_slice());
        row.set(Signal::Lambda, self.plant.lambda.as_slice());
        Ok(())
    }
}

impl DelaySystem for Simulator<'_> {
    fn dim(&self) -> usize {
        self.lay.dim()
    }

    fn derivative(&self, t: f64, s: &[f64], out: &mut [f64]) -> Result<()> {
        let sc = self.sc;
        let g = &sc.gains;
        let cfg = &sc.config;
        let (inner, outer) = self.lay.unpack(s);
        let cmd = self.command(t, &inner, &outer)?;
        let d = self.delayed(t, &inner.x_p, &cmd)?;
        let u_p = inner_control(&inner, &d.y_h, g)?;

        let e_1 = inner.e_1();
        let inner_rates = inner_adaptation(
            &inner,
            &e_1,
            &d.y_h,
            g,
            &cfg.inner.gamma_x,
            &cfg.inner.gamma_lambda,
            &sc.lambda_bounds,
            sc.k_bounds.as_ref(),
        )?;
        let e_y = &inner.x_p - &outer.x_m - &outer.e_delta;
        let outer_rates = outer_adaptation(
            &outer,
            &e_y,
            &d.outer,
            g,
            &OuterRatesConfig {
                gamma_2: &cfg.outer.gamma_2,
                gamma_3: &cfg.outer.gamma_3,
                gamma_phi1: &cfg.outer.gamma_phi1,
                gamma_phi2: &cfg.outer.gamma_phi2,
                lambda2_bounds: &sc.lambda2_bounds,
                lambda3_bounds: &sc.lambda3_bounds,
                phi1_bounds: &sc.phi1_bounds,
                phi2_bounds: &sc.phi2_bounds,
            },
        )?;

        let d_inner = InnerLoopState {
            x_p: plant_derivative(&inner.x_p, &u_p, &self.plant)?,
            x_r: reference_derivative(&inner.x_r, &d.y_h, g)?,
            k_hat_x: inner_rates.k_hat_x,
            lambda_hat: inner_rates.lambda_hat,
        };
        let d_outer = OuterLoopState {
            x_m: crossover_derivative(&outer.x_m, &d.r, g)?,
            e_delta: aux_error_derivative(&outer.e_delta, &d.outer.delta_y, &outer.lambda3_hat, g)?,
            lambda2_hat: outer_rates.lambda2_hat,
            lambda3_hat: outer_rates.lambda3_hat,
            phi1_hat: outer_rates.phi1_hat,
            phi2_hat_nodes: outer_rates.phi2_hat_nodes,
        };
        self.lay.pack(&d_inner, &d_outer, out);
        Ok(())
    }

    fn max_step(&self) -> Option<f64> {
        (self.tau > 0.0).then(|| self.sc.quad.spacing())
    }

    fn commit(&mut self, t: f64, s: &mut [f64]) -> Result<()> {
        self.clamp_parameters(s);
        let cap = self.sc.config.sim.divergence_cap;
        if let Some(i) = s.iter().position(|v| v.abs() > cap) {
            return Err(Error::Diverged {
                time: t,
                signal: self.lay.name(i),
                value: s[i],
                cap,
            });
        }
        self.record(t, s)
    }

    fn state_name(&self, index: usize) -> String {
        self.lay.name(index)
    }
}

/// Result of a run: the log up to the last accepted step, and the error that
/// stopped it early, if any.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: SimLog,
    pub error: Option<Error>,
}

impl RunOutcome {
    pub fn into_result(self) -> Result<SimLog> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.log),
        }
    }
}

fn initial_state(sc: &Scenario, lay: StateLayout) -> Vec<f64> {
    let (n, m) = (lay.n, lay.m);
    let inner = InnerLoopState {
        x_p: Vector::zeros(n),
        x_r: Vector::zeros(n),
        k_hat_x: sc.init_k_hat_x.clone(),
        lambda_hat: sc.init_lambda_hat.clone(),
    };
    let outer = OuterLoopState {
        x_m: Vector::zeros(n),
        e_delta: Vector::zeros(n),
        lambda2_hat: sc.init_lambda2_hat.clone(),
        lambda3_hat: sc.init_lambda3_hat.clone(),
        phi1_hat: sc.init_phi1_hat.clone(),
        phi2_hat_nodes: vec![Matrix::zeros(m, m); lay.nodes],
    };
    let mut s = vec![0.0; lay.dim()];
    lay.pack(&inner, &outer, &mut s);
    s
}

/// Runs a validated scenario to completion or to the first error.
pub fn simulate(sc: &Scenario) -> RunOutcome {
    let mut sim = Simulator::new(sc);
    let lay = sim.lay;
    let h = sc.config.sim.step;
    let mut log = SimLog::new(Layout::new(lay.n, lay.m, lay.nodes), sc.y_o.clone(), sc.quad.tau, h);
    let mut state = initial_state(sc, lay);
    let mut next_event = 0;
    let mut apply_events = |sim: &mut Simulator<'_>, t: f64| {
        while next_event < sc.events.len() && sc.events[next_event].0 <= t + 1e-6 * h {
            sim.plant.lambda = sc.events[next_event].1.clone();
            next_event += 1;
        }
    };

    let error = (|| -> Result<()> {
        sim.record(0.0, &state)?;
        apply_events(&mut sim, 0.0);
        sim.log_row(0.0, &state, &mut log)?;
        for k in 0..sc.steps {
            let t = k as f64 * h;
            let t_next = (k + 1) as f64 * h;
            state = integrate_step(&mut sim, &state, t, h)?;
            apply_events(&mut sim, t_next);
            if (k + 1) % sc.log_stride == 0 {
                sim.log_row(t_next, &state, &mut log)?;
            }
        }
        Ok(())
    })()
    .err();
    RunOutcome { log, error }
}

/// Validates `config` and runs it; any divergence is returned as an error.
pub fn run_simulation(config: &ScenarioConfig) -> Result<SimLog> {
    let sc = config.validate()?;
    simulate(&sc).into_result()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin_747;

    fn short(mut c: ScenarioConfig, duration: f64) -> ScenarioConfig {
        c.sim.duration = duration;
        c.events.retain(|e| e.time <= duration);
        c
    }

    #[test]
    fn layout_names_cover_every_slot() {
        let lay = StateLayout { n: 4, m: 1, nodes: 5 };
        assert_eq!(lay.dim(), 4 * 4 + 4 + 3 + 4 + 5);
        assert_eq!(lay.name(0), "x_p[0]");
        assert_eq!(lay.name(lay.lambda2()), "lambda2_hat[0]");
        assert_eq!(lay.name(lay.phi2(4)), "phi2_hat[4][0]");
        assert_eq!(lay.name(lay.dim() - 1), "phi2_hat[4][0]");
    }

    #[test]
    fn pack_unpack_round_trip() {
        let lay = StateLayout { n: 3, m: 2, nodes: 2 };
        let s: Vec<f64> = (0..lay.dim()).map(|i| i as f64 * 0.5 - 3.0).collect();
        let (a, b) = lay.unpack(&s);
        let mut back = vec![0.0; lay.dim()];
        lay.pack(&a, &b, &mut back);
        assert_eq!(back, s);
    }

    #[test]
    fn matched_plant_without_command_stays_at_rest() {
        let mut c = short(builtin_747(), 5.0);
        c.plant.a_p = c.design.a_n.clone();
        c.reference.clear();
        c.events.clear();
        let log = run_simulation(&c).unwrap();
        for i in 0..log.len() {
            assert!(log.row(i)[1..].iter().zip(&log.row(0)[1..]).all(|(a, b)| a == b));
            assert!(log.get(i, Signal::Xp).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn logged_error_identities_hold_exactly() {
        let log = run_simulation(&short(builtin_747(), 8.0)).unwrap();
        for i in 0..log.len() {
            let (xp, xr, xm) = (log.get(i, Signal::Xp), log.get(i, Signal::Xr), log.get(i, Signal::Xm));
            let (e1, e2, ed, ey) = (
                log.get(i, Signal::E1),
                log.get(i, Signal::E2),
                log.get(i, Signal::EDelta),
                log.get(i, Signal::Ey),
            );
            for j in 0..4 {
                assert_eq!(e1[j], xp[j] - xr[j]);
                assert_eq!(e2[j], xp[j] - xm[j]);
                assert_eq!(ey[j], e2[j] - ed[j]);
            }
        }
    }

    #[test]
    fn failure_applies_from_its_grid_time() {
        let mut c = short(builtin_747(), 2.0);
        c.events = vec![super::super::config::FailureEvent {
            time: 1.0,
            lambda: vec![0.6],
        }];
        c.sim.log_interval = 0.001;
        let log = run_simulation(&c).unwrap();
        let i = log.index_at(1.0).unwrap();
        assert_eq!(log.get(i - 1, Signal::Lambda)[0], 1.0);
        assert_eq!(log.get(i, Signal::Lambda)[0], 0.6);
    }

    #[test]
    fn event_at_start_applies_before_first_step() {
        let mut c = short(builtin_747(), 0.5);
        c.events = vec![super::super::config::FailureEvent {
            time: 0.0,
            lambda: vec![0.5],
        }];
        let log = run_simulation(&c).unwrap();
        assert_eq!(log.get(0, Signal::Lambda)[0], 0.5);
    }

    #[test]
    fn divergence_is_reported_with_a_signal_name() {
        let mut c = short(builtin_747(), 5.0);
        c.sim.divergence_cap = 1e-3;
        let sc = c.validate().unwrap();
        let out = simulate(&sc);
        match out.error {
            Some(Error::Diverged { signal, .. }) => assert!(!signal.is_empty()),
            other => panic!("expected divergence, got {other:?}"),
        }
        assert!(out.log.len() >= 1);
    }

    #[test]
    fn delay_free_case_runs() {
        let mut c = short(builtin_747(), 3.0);
        c.outer.tau = 0.0;
        let log = run_simulation(&c).unwrap();
        assert_eq!(log.len(), 301);
    }

    #[test]
    fn command_respects_saturation() {
        let log = run_simulation(&short(builtin_747(), 10.0)).unwrap();
        for i in 0..log.len() {
            assert!(log.get(i, Signal::Yh)[0].abs() <= log.y_o[0]);
        }
    }
}
