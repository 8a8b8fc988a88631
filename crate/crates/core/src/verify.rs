//! Runtime acceptance checks for a scenario.
//!
//! Each check returns a [`CheckReport`] with one line per sub-check; the
//! integration tests and the `verify` command both run them from here.

use crate::adaptive::{compute_lr, solve_matching, LearningRate, ProjectionBounds};
use crate::diagnostics::{compute_metrics, predict_state, TransitionOracle};
use crate::inner_loop::{
    inner_adaptation, inner_control, plant_derivative, reference_derivative, InnerLoopState,
};
use crate::numerics::{
    eigenvalues, integrate_step, is_hurwitz, matrix_from_rows, solve_care, solve_lyapunov,
    DelaySystem, Matrix, Vector,
};
use crate::pilot_model::Quadrature;
use crate::scenario::{simulate, sweep, Feedforward, Scenario, ScenarioConfig, Signal, SimLog};
use crate::{Error, Result};
use num_complex::Complex64;
use std::fmt;
use std::time::{Duration, Instant};

/// Names accepted by [`run_checks`], in execution order.
pub const CHECKS: [&str; 10] = [
    "eigenvalues",
    "solvers",
    "design-identities",
    "inner-convergence",
    "predictor",
    "transition-matrix",
    "boundedness",
    "figures",
    "determinism",
    "sweep-trend",
];

/// Alternative names for [`CHECKS`] entries.
pub fn canonical_name(name: &str) -> Option<&'static str> {
    match name {
        "lyapunov" | "care" => Some("solvers"),
        "design" => Some("design-identities"),
        "inner" => Some("inner-convergence"),
        "transition" => Some("transition-matrix"),
        "sweep" => Some("sweep-trend"),
        _ => CHECKS.iter().copied().find(|c| *c == name),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubCheck {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub subchecks: Vec<SubCheck>,
    pub elapsed: Duration,
}

impl CheckReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            subchecks: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    fn push(&mut self, label: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.subchecks.push(SubCheck {
            label: label.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn fail(&mut self, label: impl Into<String>, err: &Error) {
        self.push(label, false, format!("error: {err}"));
    }

    pub fn passed(&self) -> bool {
        !self.subchecks.is_empty() && self.subchecks.iter().all(|s| s.passed)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} {} ({:.2} s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed.as_secs_f64()
        )?;
        for s in &self.subchecks {
            writeln!(f, "    [{}] {}: {}", if s.passed { "ok" } else { "x" }, s.label, s.detail)?;
        }
        Ok(())
    }
}

/// Options for the slower checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Worker threads for the sweep check.
    pub workers: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { workers: Some(4) }
    }
}

/// Runs the named check (or alias) against `config`.
pub fn run_check(name: &str, config: &ScenarioConfig, opts: &VerifyOptions) -> Result<CheckReport> {
    let canonical = canonical_name(name)
        .ok_or_else(|| Error::Validation(format!("unknown check `{name}`; known: {}", CHECKS.join(", "))))?;
    let start = Instant::now();
    let mut report = match canonical {
        "eigenvalues" => check_eigenvalues(config),
        "solvers" => check_solvers(config),
        "design-identities" => check_design(config),
        "inner-convergence" => check_inner_convergence(config),
        "predictor" => check_predictor(config),
        "transition-matrix" => check_transition(config),
        "boundedness" => check_boundedness(config),
        "figures" => check_figures(config),
        "determinism" => check_determinism(config),
        "sweep-trend" => check_sweep(config, opts),
        _ => unreachable!(),
    };
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Runs every check, or only `only` when given.
pub fn run_checks(config: &ScenarioConfig, only: Option<&str>, opts: &VerifyOptions) -> Result<Vec<CheckReport>> {
    match only {
        Some(name) => Ok(vec![run_check(name, config, opts)?]),
        None => CHECKS.iter().map(|c| run_check(c, config, opts)).collect(),
    }
}

const EIG_TOL: f64 = 1e-3;

/// Largest distance from each expected value to its nearest unused computed one.
fn eig_deviation(computed: &[Complex64], expected: &[Complex64]) -> f64 {
    if computed.len() != expected.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; computed.len()];
    let mut worst: f64 = 0.0;
    for e in expected {
        let (j, d) = computed
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, c)| (j, (c - e).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("same length");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn fmt_eigs(ev: &[Complex64]) -> String {
    ev.iter()
        .map(|z| {
            if z.im == 0.0 {
                format!("{:.5}", z.re)
            } else {
                format!("{:.5}{:+.5}i", z.re, z.im)
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn eig_subcheck(report: &mut CheckReport, label: &str, rows: &[Vec<f64>], expected: &[Complex64]) {
    let result = matrix_from_rows(rows).and_then(|a| eigenvalues(&a));
    match result {
        Ok(ev) => {
            let dev = eig_deviation(&ev, expected);
            report.push(
                label,
                dev <= EIG_TOL,
                format!("max deviation {dev:.2e} (tol {EIG_TOL:.0e}); computed {}", fmt_eigs(&ev)),
            );
        }
        Err(e) => report.fail(label, &e),
    }
}

fn short_period_block(config: &ScenarioConfig) -> (Vec<usize>, Vec<Vec<f64>>) {
    match &config.design.feedforward {
        Feedforward::Reduced { states, c } => (states.clone(), c.clone()),
        _ => (vec![1, 2], vec![vec![0.0], vec![1.0]]),
    }
}

fn check_eigenvalues(config: &ScenarioConfig) -> CheckReport {
    let mut r = CheckReport::new("eigenvalues");
    let c = |re: f64, im: f64| Complex64::new(re, im);
    eig_subcheck(
        &mut r,
        "A_n",
        &config.design.a_n,
        &[c(-0.3750, 0.8818), c(-0.3750, -0.8818), c(-0.0005, 0.0674), c(-0.0005, -0.0674)],
    );
    eig_subcheck(
        &mut r,
        "A_p",
        &config.plant.a_p,
        &[c(0.1, 0.0), c(0.2, 0.0), c(0.3, 0.0), c(0.4, 0.0)],
    );
    let (states, _) = short_period_block(config);
    let a_sp: Vec<Vec<f64>> = states
        .iter()
        .map(|&i| states.iter().map(|&j| config.design.a_n[i][j]).collect())
        .collect();
    eig_subcheck(&mut r, "A_sp", &a_sp, &[c(-0.3740, 0.8824), c(-0.3740, -0.8824)]);
    r
}

fn validated(report: &mut CheckReport, config: &ScenarioConfig) -> Option<Scenario> {
    match config.validate() {
        Ok(s) => Some(s),
        Err(e) => {
            report.fail("scenario validation", &e);
            None
        }
    }
}

fn lyapunov_residual(a: &Matrix, q: &Matrix, p: &Matrix) -> f64 {
    (a.transpose() * p + p * a + q).amax()
}

fn check_solvers(config: &ScenarioConfig) -> CheckReport {
    let mut r = CheckReport::new("solvers");
    let Some(sc) = validated(&mut r, config) else { return r };
    let g = &sc.gains;
    let q = |rows: &Vec<Vec<f64>>| matrix_from_rows(rows).expect("validated");
    for (label, a, q) in [
        ("Lyapunov (A_r, Q_1)", &g.a_r, q(&config.inner.q_1)),
        ("Lyapunov (A_m, Q_2)", &g.a_m, q(&config.outer.q_2)),
    ] {
        match solve_lyapunov(a, &q) {
            Ok(p) => {
                let res = lyapunov_residual(a, &q, &p);
                r.push(label, res <= 1e-10, format!("residual {res:.2e} (tol 1e-10)"));
            }
            Err(e) => r.fail(label, &e),
        }
    }
    let care = solve_care(
        &g.a_r,
        &g.b_r,
        &q(&config.design.lqr_q),
        &q(&config.design.lqr_r),
    );
    match care {
        Ok(sol) => r.push(
            "CARE (A_r, B_r, Q_LQR, R_LQR)",
            sol.residual <= 1e-8,
            format!("residual {:.2e} (tol 1e-8), {} Newton iterations", sol.residual, sol.iterations),
        ),
        Err(e) => r.fail("CARE (A_r, B_r, Q_LQR, R_LQR)", &e),
    }
    match is_hurwitz(&g.a_m) {
        Ok(h) => r.push(
            "A_m Hurwitz",
            h,
            format!("eigenvalues {}", fmt_eigs(&eigenvalues(&g.a_m).unwrap_or_default())),
        ),
        Err(e) => r.fail("A_m Hurwitz", &e),
    }
    r
}

fn check_design(config: &ScenarioConfig) -> CheckReport {
    let mut r = CheckReport::new("design-identities");
    let Some(sc) = validated(&mut r, config) else { return r };
    let g = &sc.gains;
    let (states, c_sp) = short_period_block(config);
    let k = states.len();
    let a_sp = Matrix::from_fn(k, k, |i, j| sc.a_n[(states[i], states[j])]);
    let b_sp = Matrix::from_fn(k, g.m(), |i, j| g.b_p[(states[i], j)]);
    let c_sp = matrix_from_rows(&c_sp).expect("validated");
    match a_sp.clone().try_inverse() {
        Some(inv) => {
            let dc = -(c_sp.transpose() * inv * &b_sp * &g.l_r);
            let dev = (dc - Matrix::identity(g.m(), g.m())).amax();
            r.push("-C_sp' A_sp^-1 B_sp L_r = I", dev <= 1e-10, format!("deviation {dev:.2e} (tol 1e-10)"));
        }
        None => r.push("-C_sp' A_sp^-1 B_sp L_r = I", false, "A_sp singular"),
    }
    match g.a_m.clone().try_inverse() {
        Some(inv) => {
            let dc = -(sc.plant.c_2.transpose() * inv * &g.b_r * &g.theta_r);
            let dev = (dc - Matrix::identity(g.m(), g.m())).amax();
            r.push("-C_2' A_m^-1 B_r theta_r = I", dev <= 1e-10, format!("deviation {dev:.2e} (tol 1e-10)"));
        }
        None => r.push("-C_2' A_m^-1 B_r theta_r = I", false, "A_m singular"),
    }
    match compute_lr(&g.a_r, &g.b_p, &sc.plant.c_1) {
        Err(Error::SingularDCGain { sigma_min }) => r.push(
            "full-state L_r is singular",
            true,
            format!("SingularDCGain raised (sigma_min {sigma_min:.2e})"),
        ),
        Err(e) => r.fail("full-state L_r is singular", &e),
        Ok(l) => r.push("full-state L_r is singular", false, format!("unexpectedly got L_r = {l}")),
    }
    match solve_matching(&sc.plant.a_p, &g.a_r, &g.b_p, &sc.plant.lambda) {
        Ok(m) => r.push(
            "matching residual (informational)",
            true,
            format!("||A_p - B_p Lambda K* - A_r||_F = {:.2e}", m.residual),
        ),
        Err(e) => r.fail("matching residual (informational)", &e),
    }
    r
}

/// Inner loop driven by a constant command with no delay.
struct InnerOnly<'a> {
    sc: &'a Scenario,
    gamma_x: LearningRate,
    y_h: Vector,
    bounds: &'a ProjectionBounds,
}

impl InnerOnly<'_> {
    fn unpack(&self, s: &[f64]) -> InnerLoopState {
        let (n, m) = (self.sc.gains.n_p(), self.sc.gains.m());
        InnerLoopState {
            x_p: Vector::from_column_slice(&s[..n]),
            x_r: Vector::from_column_slice(&s[n..2 * n]),
            k_hat_x: Matrix::from_row_slice(m, n, &s[2 * n..2 * n + m * n]),
            lambda_hat: Vector::from_column_slice(&s[2 * n + m * n..]),
        }
    }
}

impl DelaySystem for InnerOnly<'_> {
    fn dim(&self) -> usize {
        let (n, m) = (self.sc.gains.n_p(), self.sc.gains.m());
        2 * n + m * n + m
    }

    fn derivative(&self, _t: f64, s: &[f64], out: &mut [f64]) -> Result<()> {
        let g = &self.sc.gains;
        let st = self.unpack(s);
        let u = inner_control(&st, &self.y_h, g)?;
        let rates = inner_adaptation(
            &st,
            &st.e_1(),
            &self.y_h,
            g,
            &self.gamma_x,
            &self.sc.config.inner.gamma_lambda,
            self.bounds,
            None,
        )?;
        let n = g.n_p();
        let m = g.m();
        out[..n].copy_from_slice(plant_derivative(&st.x_p, &u, &self.sc.plant)?.as_slice());
        out[n..2 * n].copy_from_slice(reference_derivative(&st.x_r, &self.y_h, g)?.as_slice());
        out[2 * n..2 * n + m * n].copy_from_slice(rates.k_hat_x.transpose().as_slice());
        out[2 * n + m * n..].copy_from_slice(rates.lambda_hat.as_slice());
        Ok(())
    }

    fn commit(&mut self, _t: f64, s: &mut [f64]) -> Result<()> {
        let n = self.sc.gains.n_p();
        let m = self.sc.gains.m();
        let o = 2 * n + m * n;
        let lam = Matrix::from_column_slice(m, 1, &s[o..]);
        s[o..].copy_from_slice(self.bounds.clamp(&lam).as_slice());
        Ok(())
    }
}

/// Constant pitch-rate command used for the inner-loop check, crad/s.
pub const INNER_COMMAND: f64 = 1.0;
pub const INNER_HORIZON: f64 = 30.0;

/// `‖e_1‖` per integration step of the inner loop alone.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerTrace {
    pub step: f64,
    pub e1_norm: Vec<f64>,
    /// Smallest and largest `λ̂` entry seen.
    pub lambda_range: (f64, f64),
    pub lambda_in_bounds: bool,
}

impl InnerTrace {
    /// Index and value of the largest `‖e_1‖`.
    pub fn peak(&self) -> (usize, f64) {
        self.e1_norm
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc })
    }
}

/// Runs the inner loop with no delay and a constant command `y_h` for
/// `horizon` seconds, with `γ_x` fixed at 1 and the scenario's plant.
pub fn inner_trace(config: &ScenarioConfig, command: f64, horizon: f64) -> Result<InnerTrace> {
    let sc = config.validate()?;
    let (n, m) = (sc.gains.n_p(), sc.gains.m());
    let mut sys = InnerOnly {
        sc: &sc,
        gamma_x: LearningRate::Scalar(1.0),
        y_h: Vector::from_element(m, command),
        bounds: &sc.lambda_bounds,
    };
    let mut s = vec![0.0; sys.dim()];
    s[2 * n + m * n..].copy_from_slice(sc.init_lambda_hat.as_slice());
    let h = config.sim.step;
    let steps = (horizon / h).round() as usize;
    let lam_lo = sc.lambda_bounds.lower.min();
    let lam_hi = sc.lambda_bounds.upper.max();
    let mut trace = InnerTrace {
        step: h,
        e1_norm: Vec::with_capacity(steps + 1),
        lambda_range: (f64::INFINITY, f64::NEG_INFINITY),
        lambda_in_bounds: true,
    };
    trace.e1_norm.push(0.0);
    for k in 0..steps {
        s = integrate_step(&mut sys, &s, k as f64 * h, h)?;
        let st = sys.unpack(&s);
        trace.e1_norm.push(st.e_1().norm());
        for l in st.lambda_hat.iter() {
            trace.lambda_in_bounds &= (lam_lo..=lam_hi).contains(l);
            trace.lambda_range = (trace.lambda_range.0.min(*l), trace.lambda_range.1.max(*l));
        }
    }
    Ok(trace)
}

fn check_inner_convergence(config: &ScenarioConfig) -> CheckReport {
    let mut r = CheckReport::new("inner-convergence");
    let Some(sc) = validated(&mut r, config) else { return r };
    let trace = match inner_trace(config, INNER_COMMAND, INNER_HORIZON) {
        Ok(t) => t,
        Err(e) => {
            r.fail("integration", &e);
            return r;
        }
    };
    let h = trace.step;
    let (peak_i, peak) = trace.peak();
    let last = *trace.e1_norm.last().unwrap();
    let first_below = trace.e1_norm[peak_i..]
        .iter()
        .position(|v| *v < 0.01 * peak)
        .map(|p| (peak_i + p) as f64 * h);
    r.push(
        "||e_1|| below 1% of peak at 30 s",
        peak > 0.0 && last < 0.01 * peak,
        format!(
            "peak {peak:.3e} at t = {:.2} s, ||e_1(30)|| = {last:.3e} ({:.2}% of peak), first below 1% at {}",
            peak_i as f64 * h,
            100.0 * last / peak.max(f64::MIN_POSITIVE),
            first_below.map_or("never".into(), |t| format!("t = {t:.2} s"))
        ),
    );
    let lam_lo = sc.lambda_bounds.lower.min();
    let lam_hi = sc.lambda_bounds.upper.max();
    r.push(
        "lambda_hat within [lower, upper] every step",
        trace.lambda_in_bounds,
        format!(
            "range [{:.4}, {:.4}] vs [{lam_lo}, {lam_hi}]",
            trace.lambda_range.0, trace.lambda_range.1
        ),
    );
    r
}

/// The scenario with failure events removed and dense logging.
fn no_failure(config: &ScenarioConfig) -> ScenarioConfig {
    let mut c = config.clone();
    c.events.clear();
    c.sim.log_interval = c.sim.step;
    c
}

fn run_log(report: &mut CheckReport, config: &ScenarioConfig) -> Option<(Scenario, SimLog)> {
    let sc = validated(report, config)?;
    let out = simulate(&sc);
    if let Some(e) = out.error {
        report.fail("simulation", &e);
        return None;
    }
    Some((sc, out.log))
}

/// Probe times for the predictor, inside the commanded part of the run.
fn predictor_probes(config: &ScenarioConfig) -> Vec<f64> {
    let (a, b) = (6.0, config.sim.duration - config.outer.tau - 1.0);
    (0..100).map(|i| a + (b - a) * i as f64 / 99.0).collect()
}

/// Maximum relative predictor error over the probes.
pub fn predictor_error(oracle: &TransitionOracle<'_>, sc: &Scenario, probes: &[f64], intervals: usize) -> Result<f64> {
    let quad = Quadrature::new(sc.quad.tau, intervals);
    let mut worst: f64 = 0.0;
    for &t in probes {
        let pred = predict_state(oracle, &sc.gains, t, &quad)?;
        let actual = oracle.signal(Signal::Xp, t + quad.tau)?;
        worst = worst.max((pred - &actual).norm() / actual.norm());
    }
    Ok(worst)
}

fn check_predictor(config: &ScenarioConfig) -> CheckReport {
    let mut r = CheckReport::new("predictor");
    let Some((sc, log)) = run_log(&mut r, &no_failure(config)) else { return r };
    let oracle = match TransitionOracle::new(&log, &sc.plant) {
        Ok(o) => o,
        Err(e) => {
            r.fail("oracle", &e);
            return r;
        }
    };
    let probes = predictor_probes(config);
    let e5 = predictor_error(&oracle, &sc, &probes, sc.quad.intervals);
    let e40 = predictor_error(&oracle, &sc, &probes, 40);
    match (e5, e40) {
        (Ok(e5), Ok(e40)) => {
            r.push(
                format!("relative error at N = {} (100 probes)", sc.quad.intervals),
                e5 <= 1e-2,
                format!("max {e5:.3e} (tol 1e-2)"),
            );
            r.push("error decreases at N = 40", e40 < e5, format!("max {e40:.3e} vs {e5:.3e}"));
        }
        (Err(e), _) | (_, Err(e)) => r.fail("prediction", &e),
    }
    r
}

fn check_transition(config: &ScenarioConfig) -> CheckReport {
    let mut r = CheckReport::new("transition-matrix");
    let Some((sc, log)) = run_log(&mut r, config) else { return r };
    let oracle = match TransitionOracle::new(&log, &sc.plant) {
        Ok(o) => o,
        Err(e) => {
            r.fail("oracle", &e);
            return r;
        }
    };
    let tau = sc.quad.tau;
    let n = sc.gains.n_p();
    let eye = Matrix::identity(n, n);
    let end = log.time(log.len() - 1);
    let outcome = (|| -> Result<()> {
        let exact = [0.0, 12.34, 35.0, end]
            .iter()
            .map(|&t| oracle.transition(t, t))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .all(|p| *p == eye);
        r.push("Phi(t, t) = I exactly", exact, "t in {0, 12.34, 35, end}");

        let triples = [(1.0, 2.5, 4.0), (20.0, 34.9, 35.3), (34.0, 35.0, 36.2), (50.0, 55.0, 69.0)];
        let mut comp: f64 = 0.0;
        let mut inv: f64 = 0.0;
        for (t1, t2, t3) in triples {
            let p21 = oracle.transition(t2, t1)?;
            let p32 = oracle.transition(t3, t2)?;
            let p31 = oracle.transition(t3, t1)?;
            comp = comp.max((&p31 - &p32 * &p21).amax() / p31.amax().max(1.0));
            let p12 = oracle.transition(t1, t2)?;
            inv = inv.max((&p21 * &p12 - &eye).amax());
        }
        r.push("composition", comp <= 1e-6, format!("max relative deviation {comp:.2e} (tol 1e-6)"));
        r.push("inverse", inv <= 1e-6, format!("max deviation {inv:.2e} (tol 1e-6)"));

        let mut sup: f64 = 0.0;
        let mut t = 0.0;
        while t + tau <= end + 1e-9 {
            sup = sup.max(oracle.transition(t + tau, t)?.norm());
            t += 0.1;
        }
        r.push(
            "sup ||Phi(t+tau, t)||_F finite",
            sup.is_finite() && sup <= TRANSITION_CAP,
            format!("{sup:.4} (cap {TRANSITION_CAP:.0e})"),
        );

        // d/dt Φ(t+τ, t) = A(t+τ) Φ − Φ A(t). A(t) is piecewise linear between
        // log samples, so probes sit between samples (a central difference
        // straddling a kink sees the mean of two slopes) and clear of the
        // failure switch.
        let dt = log.interval();
        let delta = FD_STEP.min(0.25 * dt);
        let off_grid = |t: f64| {
            let pos = t / dt;
            (pos - pos.round()).abs() * dt > 2.0 * delta
        };
        let mut worst: f64 = 0.0;
        let mut sup_dot: f64 = 0.0;
        let mut probes = 0;
        let mut k = 0;
        loop {
            let probe = ((1.0 + 0.73 * k as f64) / dt).floor() * dt + 0.5 * dt;
            k += 1;
            if probe + tau + 2.0 * delta >= end {
                break;
            }
            let switch = sc
                .events
                .iter()
                .any(|(te, _)| *te >= probe - 2.0 * delta - dt && *te <= probe + tau + 2.0 * delta + dt);
            if switch || !off_grid(probe) || !off_grid(probe + tau) {
                continue;
            }
            let fd = (oracle.transition(probe + delta + tau, probe + delta)?
                - oracle.transition(probe - delta + tau, probe - delta)?)
                / (2.0 * delta);
            let phi = oracle.transition(probe + tau, probe)?;
            let analytic = oracle.system_matrix(probe + tau)? * &phi - &phi * oracle.system_matrix(probe)?;
            worst = worst.max((fd - &analytic).amax());
            sup_dot = sup_dot.max(analytic.norm());
            probes += 1;
        }
        r.push(
            "derivative identity vs central differences",
            probes > 0 && worst <= 1e-4,
            format!(
                "max deviation {worst:.2e} (tol 1e-4) over {probes} probes, step {delta:.1e}, sup ||dPhi/dt||_F {sup_dot:.3}"
            ),
        );
        Ok(())
    })();
    if let Err(e) = outcome {
        r.fail("oracle evaluation", &e);
    }
    r
}

/// Central-difference step for the derivative identity, seconds.
pub const FD_STEP: f64 = 2.5e-4;

/// Cap for the transition-matrix sup-norm check.
pub const TRANSITION_CAP: f64 = 1e6;

fn within(bounds: &ProjectionBounds, theta: &Matrix) -> bool {
    bounds.contains(theta)
}

fn check_boundedness(config: &ScenarioConfig) -> CheckReport {
    let mut r = CheckReport::new("boundedness");
    let Some((sc, log)) = run_log(&mut r, config) else { return r };
    let end = log.time(log.len() - 1);
    r.push(
        "run completes without divergence",
        (end - config.sim.duration).abs() < 1e-9,
        format!("{} samples to t = {end}", log.len()),
    );
    let (n, m, nodes) = (sc.gains.n_p(), sc.gains.m(), sc.quad.intervals);
    let col = |v: &[f64]| Matrix::from_column_slice(v.len(), 1, v);
    let mut inside = [true; 5];
    let mut identity = true;
    let mut saturation = true;
    let mut finite = true;
    for i in 0..log.len() {
        finite &= log.row(i).iter().all(|v| v.is_finite());
        inside[0] &= within(&sc.lambda_bounds, &col(log.get(i, Signal::LambdaHat)));
        inside[1] &= within(&sc.lambda2_bounds, &col(log.get(i, Signal::Lambda2Hat)));
        inside[2] &= within(&sc.lambda3_bounds, &col(log.get(i, Signal::Lambda3Hat)));
        let phi1 = Matrix::from_row_slice(m, n, log.get(i, Signal::Phi1Hat));
        inside[3] &= within(&sc.phi1_bounds, &phi1.transpose());
        let phi2 = log.get(i, Signal::Phi2Hat);
        for k in 0..nodes {
            let p = Matrix::from_row_slice(m, m, &phi2[k * m * m..(k + 1) * m * m]);
            inside[4] &= within(&sc.phi2_bounds, &p.transpose());
        }
        let (e2, ed, ey) = (log.get(i, Signal::E2), log.get(i, Signal::EDelta), log.get(i, Signal::Ey));
        identity &= (0..n).all(|j| ey[j] == e2[j] - ed[j]);
        let y_h = log.get(i, Signal::Yh);
        saturation &= (0..m).all(|j| y_h[j].abs() <= log.y_o[j]);
    }
    r.push("all logged values finite", finite, "");
    for (k, name) in ["lambda_hat", "lambda2_hat", "lambda3_hat", "Phi1_hat", "Phi2_hat"].iter().enumerate() {
        r.push(format!("{name} inside its projection box"), inside[k], "every sample");
    }
    r.push("e_y = e_2 - e_delta exactly", identity, "every sample");
    r.push("|y_h| <= y_o", saturation, format!("y_o = {:.4} crad/s", log.y_o[0]));
    r
}

/// Post-failure window for the paired-run comparison.
pub const FIGURE_WINDOW: (f64, f64) = (35.0, 70.0);

fn check_figures(config: &ScenarioConfig) -> CheckReport {
    let mut r = CheckReport::new("figures");
    let mut metrics = Vec::new();
    for gx in [1.0, 0.01] {
        let mut c = config.clone();
        c.inner.gamma_x = LearningRate::Scalar(gx);
        let Some((_, log)) = run_log(&mut r, &c) else { return r };
        let end = FIGURE_WINDOW.1.min(log.time(log.len() - 1));
        match compute_metrics(&log, FIGURE_WINDOW.0, end) {
            Ok(m) => metrics.push(m),
            Err(e) => {
                r.fail("metrics", &e);
                return r;
            }
        }
    }
    let (fast, slow) = (&metrics[0], &metrics[1]);
    let ratio = slow.rms_tracking_error / fast.rms_tracking_error;
    r.push(
        "RMS ratio (gamma_x 0.01 / 1) >= 2 on [35, 70] s",
        ratio >= 2.0,
        format!(
            "ratio {ratio:.4} (rms {:.4} vs {:.4} crad)",
            slow.rms_tracking_error, fast.rms_tracking_error
        ),
    );
    r.push(
        "duty cycle strictly larger for gamma_x = 0.01",
        slow.saturation_duty_cycle > fast.saturation_duty_cycle,
        format!("{:.4} vs {:.4}", slow.saturation_duty_cycle, fast.saturation_duty_cycle),
    );
    r.push(
        "gamma_x = 1 duty cycle < 0.2",
        fast.saturation_duty_cycle < 0.2,
        format!("{:.4}", fast.saturation_duty_cycle),
    );
    r
}

fn check_determinism(config: &ScenarioConfig) -> CheckReport {
    let mut r = CheckReport::new("determinism");
    let Some((_, a)) = run_log(&mut r, config) else { return r };
    let Some((_, b)) = run_log(&mut r, config) else { return r };
    let (ca, cb) = (a.to_csv(), b.to_csv());
    r.push(
        "identical CSV bytes across two runs",
        ca.as_bytes() == cb.as_bytes(),
        format!("{} bytes", ca.len()),
    );
    r
}

fn check_sweep(config: &ScenarioConfig, opts: &VerifyOptions) -> CheckReport {
    let mut r = CheckReport::new("sweep-trend");
    let table = match sweep(config, &config.sweep.tau, &config.sweep.scale, opts.workers) {
        Ok(t) => t,
        Err(e) => {
            r.fail("sweep", &e);
            return r;
        }
    };
    let trend = table.trend();
    let grid: Vec<String> = table
        .rows
        .iter()
        .map(|row| format!("({}, {}): {}", row.tau, row.scale, if row.bounded { "bounded" } else { "unbounded" }))
        .collect();
    r.push(
        "boundedness non-improving with scale at the largest delay",
        trend.non_improving_at_max_tau,
        format!("{:?} for scales in increasing order", trend.bounded_at_max_tau),
    );
    r.push(
        "soft monotonicity flag in <= 10% of scales",
        trend.flagged_fraction <= 0.1,
        format!("flagged {:?} ({:.0}%)", trend.non_prefix_scales, 100.0 * trend.flagged_fraction),
    );
    let zero_ok = table
        .rows
        .iter()
        .filter(|row| row.tau == 0.0)
        .all(|row| row.bounded);
    if table.tau.contains(&0.0) {
        r.push("tau = 0 bounded for every scale", zero_ok, "");
    }
    r.push("grid", true, grid.join("; "));
    r
}
