//! JSON scenario schema and its validation into a ready-to-run [`Scenario`].
//!
//! Matrices are row-major nested arrays. Human-facing angles carry their
//! unit in the key name (`y_o_deg_s`, `level_deg`, ...) and are converted to
//! centiradians once, here; everything downstream works in crad and crad/s.

use crate::adaptive::{compute_lr, DesignInputs, GainSet, LearningRate, ProjectionBounds};
use crate::inner_loop::{validate_effectiveness, PlantParams};
use crate::numerics::{matrix_from_rows, Matrix, Vector};
use crate::pilot_model::Quadrature;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Degrees to centiradians: `100 π / 180`.
pub const CRAD_PER_DEG: f64 = std::f64::consts::PI / 1.8;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: PlantSection,
    pub design: DesignSection,
    pub inner: InnerSection,
    pub outer: OuterSection,
    pub sim: SimSection,
    pub reference: Vec<ReferenceSegment>,
    pub events: Vec<FailureEvent>,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a_p: Rows,
    pub b_p: Rows,
    /// Diagonal of the initial control effectiveness `Λ`.
    pub lambda: Vec<f64>,
    pub c_1: Rows,
    pub c_2: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    /// Nominal system matrix `A_n`; the reference model uses `A_r = A_n − B_p L_x`.
    pub a_n: Rows,
    /// Nominal state feedback `L_x`; zero when absent.
    pub l_x: Option<Rows>,
    pub feedforward: Feedforward,
    pub lqr_q: Rows,
    pub lqr_r: Rows,
}

/// How the inner feed-forward gain `L_r` is designed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Feedforward {
    /// `L_r = −(C₁ᵀ A_r⁻¹ B_p)⁻¹` on the full model.
    Full,
    /// Same formula on the sub-model keeping `states` (0-based) of `A_r`
    /// and `B_p`, with output matrix `c`.
    Reduced { states: Vec<usize>, c: Rows },
    /// Explicit gain.
    Given { l_r: Rows },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxBounds {
    pub lower: f64,
    pub upper: f64,
    /// Boundary-layer width; 1% of the box width when absent.
    pub margin: Option<f64>,
}

impl BoxBounds {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            margin: None,
        }
    }

    pub fn build(&self, rows: usize, cols: usize) -> Result<ProjectionBounds> {
        ProjectionBounds::uniform(rows, cols, self.lower, self.upper, self.margin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerSection {
    pub gamma_x: LearningRate,
    pub gamma_lambda: LearningRate,
    pub q_1: Rows,
    pub lambda_bounds: BoxBounds,
    /// Optional box on `K̂_x`; unbounded when absent.
    pub k_bounds: Option<BoxBounds>,
    pub init_lambda_hat: Vec<f64>,
    /// Zero when absent.
    pub init_k_hat_x: Option<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterSection {
    /// Pilot internal delay, seconds.
    pub tau: f64,
    /// Number of quadrature intervals for the distributed-delay integral.
    pub intervals: usize,
    pub y_o_deg_s: Option<Vec<f64>>,
    pub y_o_crad_s: Option<Vec<f64>>,
    pub gamma_2: LearningRate,
    pub gamma_3: LearningRate,
    pub gamma_phi1: LearningRate,
    pub gamma_phi2: LearningRate,
    pub q_2: Rows,
    pub lambda2_bounds: BoxBounds,
    pub lambda3_bounds: BoxBounds,
    pub phi1_bounds: BoxBounds,
    pub phi2_bounds: BoxBounds,
    pub init_lambda2_hat: Vec<f64>,
    pub init_lambda3_hat: Vec<f64>,
    /// `−θ_x e^{A_r τ}` when absent.
    pub init_phi1_hat: Option<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    /// Integration step, seconds; must divide `τ / N`.
    pub step: f64,
    pub duration: f64,
    /// Spacing of logged samples; a multiple of `step`.
    pub log_interval: f64,
    /// Any state entry beyond this magnitude aborts the run as diverged.
    pub divergence_cap: f64,
    /// Window for run metrics, `[start, end]`; the whole run when absent.
    pub metrics_window: Option<[f64; 2]>,
}

/// Piecewise-constant reference level on `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSegment {
    pub start: f64,
    /// Open-ended when absent.
    pub end: Option<f64>,
    pub level_crad: Option<Vec<f64>>,
    pub level_deg: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureEvent {
    pub time: f64,
    /// New diagonal of `Λ`.
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub tau: Vec<f64>,
    /// Multipliers applied to `γ₂`, `γ_φ1` and `γ_φ2`.
    pub scale: Vec<f64>,
    /// A run counts as bounded when its peak `‖e_y‖` stays at or below this.
    pub e_y_cap: f64,
}

/// Reference signal `r(t)` in crad; zero outside every segment and for `t < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSignal {
    segments: Vec<(f64, f64, Vector)>,
    m: usize,
}

impl ReferenceSignal {
    pub fn at(&self, t: f64) -> Vector {
        for (start, end, level) in &self.segments {
            if t >= *start && t < *end {
                return level.clone();
            }
        }
        Vector::zeros(self.m)
    }
}

/// A validated configuration with every derived quantity computed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub plant: PlantParams,
    pub a_n: Matrix,
    pub gains: GainSet,
    pub quad: Quadrature,
    /// Saturation limits, crad/s.
    pub y_o: Vector,
    pub reference: ReferenceSignal,
    pub events: Vec<(f64, Vector)>,
    pub lambda_bounds: ProjectionBounds,
    pub k_bounds: Option<ProjectionBounds>,
    pub lambda2_bounds: ProjectionBounds,
    pub lambda3_bounds: ProjectionBounds,
    /// Box for `Φ̂₁ᵀ`.
    pub phi1_bounds: ProjectionBounds,
    /// Box for each `Φ̂₂ᵀ` node.
    pub phi2_bounds: ProjectionBounds,
    pub init_k_hat_x: Matrix,
    pub init_lambda_hat: Vector,
    pub init_lambda2_hat: Vector,
    pub init_lambda3_hat: Vector,
    pub init_phi1_hat: Matrix,
    pub steps: usize,
    pub log_stride: usize,
}

fn mat(name: &str, rows: &Rows) -> Result<Matrix> {
    matrix_from_rows(rows).map_err(|e| Error::Validation(format!("`{name}`: {e}")))
}

fn shape(name: &str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::Validation(format!(
            "`{name}` must be {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn vec_len(name: &str, v: &[f64], len: usize) -> Result<Vector> {
    if v.len() != len {
        return Err(Error::Validation(format!(
            "`{name}` must have {len} entries, got {}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation(format!("`{name}` has a non-finite entry")));
    }
    Ok(Vector::from_column_slice(v))
}

/// `ratio` is a positive integer up to a relative 1e-9.
fn integer_ratio(ratio: f64) -> Option<usize> {
    let r = ratio.round();
    if r >= 1.0 && (ratio - r).abs() <= 1e-9 * r {
        Some(r as usize)
    } else {
        None
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Applies `dotted.path=value` overrides; the value is parsed as JSON,
    /// falling back to a plain string. The path must already exist.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut value = self.to_value();
        for item in overrides {
            let item = item.as_ref();
            let (path, raw) = item.split_once('=').ok_or_else(|| {
                Error::Validation(format!("override `{item}` is not of the form key=value"))
            })?;
            let new: serde_json::Value = serde_json::from_str(raw.trim())
                .unwrap_or_else(|_| serde_json::Value::String(raw.trim().to_string()));
            let mut slot = &mut value;
            for key in path.trim().split('.') {
                slot = match slot {
                    serde_json::Value::Object(map) => map.get_mut(key),
                    serde_json::Value::Array(items) => {
                        key.parse::<usize>().ok().and_then(|i| items.get_mut(i))
                    }
                    _ => None,
                }
                .ok_or_else(|| Error::Validation(format!("override path `{path}` does not exist")))?;
            }
            *slot = new;
        }
        serde_json::from_value(value).map_err(|e| Error::Validation(format!("after overrides: {e}")))
    }

    /// Saturation limits converted to crad/s.
    pub fn y_o_crad_s(&self) -> Result<Vec<f64>> {
        match (&self.outer.y_o_deg_s, &self.outer.y_o_crad_s) {
            (Some(deg), None) => Ok(deg.iter().map(|d| d * CRAD_PER_DEG).collect()),
            (None, Some(crad)) => Ok(crad.clone()),
            _ => Err(Error::Validation(
                "exactly one of `outer.y_o_deg_s` and `outer.y_o_crad_s` must be set".into(),
            )),
        }
    }

    /// Sweep helper: sets `τ` and scales the outer learning rates `γ₂`, `γ_φ1`, `γ_φ2`.
    pub fn with_delay_and_scale(&self, tau: f64, scale: f64) -> Self {
        let mut c = self.clone();
        c.outer.tau = tau;
        c.outer.gamma_2 = c.outer.gamma_2.scaled(scale);
        c.outer.gamma_phi1 = c.outer.gamma_phi1.scaled(scale);
        c.outer.gamma_phi2 = c.outer.gamma_phi2.scaled(scale);
        c
    }

    pub fn validate(&self) -> Result<Scenario> {
        let a_p = mat("plant.a_p", &self.plant.a_p)?;
        let n = a_p.nrows();
        shape("plant.a_p", &a_p, n, n)?;
        let b_p = mat("plant.b_p", &self.plant.b_p)?;
        let m = b_p.ncols();
        shape("plant.b_p", &b_p, n, m)?;
        if m == 0 {
            return Err(Error::Validation("plant needs at least one input".into()));
        }
        let lambda = vec_len("plant.lambda", &self.plant.lambda, m)?;
        let c_1 = mat("plant.c_1", &self.plant.c_1)?;
        shape("plant.c_1", &c_1, n, m)?;
        let c_2 = mat("plant.c_2", &self.plant.c_2)?;
        shape("plant.c_2", &c_2, n, m)?;
        let plant = PlantParams::new(a_p, b_p.clone(), lambda, c_1.clone(), c_2.clone())?;

        let a_n = mat("design.a_n", &self.design.a_n)?;
        shape("design.a_n", &a_n, n, n)?;
        let l_x = match &self.design.l_x {
            Some(rows) => {
                let l = mat("design.l_x", rows)?;
                shape("design.l_x", &l, m, n)?;
                l
            }
            None => Matrix::zeros(m, n),
        };
        let a_r = &a_n - &b_p * &l_x;
        let l_r = match &self.design.feedforward {
            Feedforward::Full => compute_lr(&a_r, &b_p, &c_1)?,
            Feedforward::Reduced { states, c } => {
                if states.is_empty() || states.iter().any(|&s| s >= n) {
                    return Err(Error::Validation(
                        "`design.feedforward.states` must be nonempty indices below n_p".into(),
                    ));
                }
                let k = states.len();
                let a_red = Matrix::from_fn(k, k, |i, j| a_r[(states[i], states[j])]);
                let b_red = Matrix::from_fn(k, m, |i, j| b_p[(states[i], j)]);
                let c_red = mat("design.feedforward.c", c)?;
                shape("design.feedforward.c", &c_red, k, m)?;
                compute_lr(&a_red, &b_red, &c_red)?
            }
            Feedforward::Given { l_r } => {
                let l = mat("design.feedforward.l_r", l_r)?;
                shape("design.feedforward.l_r", &l, m, m)?;
                l
            }
        };
        let lqr_q = mat("design.lqr_q", &self.design.lqr_q)?;
        shape("design.lqr_q", &lqr_q, n, n)?;
        let lqr_r = mat("design.lqr_r", &self.design.lqr_r)?;
        shape("design.lqr_r", &lqr_r, m, m)?;
        let q_1 = mat("inner.q_1", &self.inner.q_1)?;
        shape("inner.q_1", &q_1, n, n)?;
        let q_2 = mat("outer.q_2", &self.outer.q_2)?;
        shape("outer.q_2", &q_2, n, n)?;
        let gains = GainSet::design(&DesignInputs {
            a_n: &a_n,
            b_p: &b_p,
            l_x: &l_x,
            l_r: &l_r,
            c_2: &c_2,
            q_lqr: &lqr_q,
            r_lqr: &lqr_r,
            q_1: &q_1,
            q_2: &q_2,
        })?;

        // rates
        self.inner.gamma_x.validate("inner.gamma_x", n)?;
        self.inner.gamma_lambda.validate("inner.gamma_lambda", m)?;
        self.outer.gamma_2.validate("outer.gamma_2", m)?;
        self.outer.gamma_3.validate("outer.gamma_3", m)?;
        self.outer.gamma_phi1.validate("outer.gamma_phi1", n)?;
        self.outer.gamma_phi2.validate("outer.gamma_phi2", m)?;

        // timing
        let tau = self.outer.tau;
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::Validation(format!("`outer.tau` must be >= 0, got {tau}")));
        }
        if self.outer.intervals == 0 {
            return Err(Error::Validation("`outer.intervals` must be at least 1".into()));
        }
        let h = self.sim.step;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Validation(format!("`sim.step` must be positive, got {h}")));
        }
        let quad = Quadrature::new(tau, self.outer.intervals);
        if tau > 0.0 && integer_ratio(quad.spacing() / h).is_none() {
            return Err(Error::Validation(format!(
                "`sim.step` = {h} must divide the delay grid spacing τ/N = {}",
                quad.spacing()
            )));
        }
        let duration = self.sim.duration;
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::Validation(format!("`sim.duration` must be positive, got {duration}")));
        }
        let steps = integer_ratio(duration / h).ok_or_else(|| {
            Error::Validation(format!("`sim.duration` must be a multiple of `sim.step` ({h})"))
        })?;
        let log_stride = integer_ratio(self.sim.log_interval / h).ok_or_else(|| {
            Error::Validation(format!("`sim.log_interval` must be a positive multiple of `sim.step` ({h})"))
        })?;
        if !(self.sim.divergence_cap > 0.0) {
            return Err(Error::Validation("`sim.divergence_cap` must be positive".into()));
        }
        if let Some([a, b]) = self.sim.metrics_window {
            if !(a >= 0.0 && b > a && b <= duration) {
                return Err(Error::Validation(format!(
                    "`sim.metrics_window` [{a}, {b}] must lie within [0, {duration}]"
                )));
            }
        }

        let y_o = vec_len("outer.y_o", &self.y_o_crad_s()?, m)?;
        if y_o.iter().any(|y| !(*y > 0.0)) {
            return Err(Error::Validation("saturation limits must be positive".into()));
        }

        let mut segments = Vec::new();
        for (i, seg) in self.reference.iter().enumerate() {
            let level = match (&seg.level_crad, &seg.level_deg) {
                (Some(c), None) => vec_len("reference.level_crad", c, m)?,
                (None, Some(d)) => vec_len("reference.level_deg", d, m)? * CRAD_PER_DEG,
                _ => {
                    return Err(Error::Validation(format!(
                        "reference segment {i}: set exactly one of `level_crad` and `level_deg`"
                    )))
                }
            };
            let end = seg.end.unwrap_or(f64::INFINITY);
            if !(seg.start.is_finite() && end > seg.start) {
                return Err(Error::Validation(format!(
                    "reference segment {i}: end must follow start"
                )));
            }
            if let Some(j) = segments.iter().position(|(a, b, _)| seg.start < *b && *a < end) {
                return Err(Error::Validation(format!("reference segments {j} and {i} overlap")));
            }
            segments.push((seg.start, end, level));
        }

        let mut events = Vec::new();
        for ev in &self.events {
            if !(ev.time >= 0.0 && ev.time <= duration) {
                return Err(Error::Validation(format!(
                    "failure event at t = {} lies outside [0, {duration}]",
                    ev.time
                )));
            }
            let lam = vec_len("events.lambda", &ev.lambda, m)?;
            validate_effectiveness(&lam)?;
            events.push((ev.time, lam));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));

        let lambda_bounds = self.inner.lambda_bounds.build(m, 1)?;
        let k_bounds = self.inner.k_bounds.as_ref().map(|b| b.build(n, m)).transpose()?;
        let lambda2_bounds = self.outer.lambda2_bounds.build(m, 1)?;
        let lambda3_bounds = self.outer.lambda3_bounds.build(m, 1)?;
        let phi1_bounds = self.outer.phi1_bounds.build(n, m)?;
        let phi2_bounds = self.outer.phi2_bounds.build(m, m)?;

        let init_k_hat_x = match &self.inner.init_k_hat_x {
            Some(rows) => {
                let k = mat("inner.init_k_hat_x", rows)?;
                shape("inner.init_k_hat_x", &k, m, n)?;
                k
            }
            None => Matrix::zeros(m, n),
        };
        let init_lambda_hat = vec_len("inner.init_lambda_hat", &self.inner.init_lambda_hat, m)?;
        let init_lambda2_hat = vec_len("outer.init_lambda2_hat", &self.outer.init_lambda2_hat, m)?;
        let init_lambda3_hat = vec_len("outer.init_lambda3_hat", &self.outer.init_lambda3_hat, m)?;
        let init_phi1_hat = match &self.outer.init_phi1_hat {
            Some(rows) => {
                let p = mat("outer.init_phi1_hat", rows)?;
                shape("outer.init_phi1_hat", &p, m, n)?;
                p
            }
            None => -&gains.theta_x * crate::numerics::matrix_exponential(&gains.a_r, tau)?,
        };
        let col = |v: &Vector| Matrix::from_column_slice(v.len(), 1, v.as_slice());
        for (name, theta, b) in [
            ("inner.init_lambda_hat", col(&init_lambda_hat), &lambda_bounds),
            ("outer.init_lambda2_hat", col(&init_lambda2_hat), &lambda2_bounds),
            ("outer.init_lambda3_hat", col(&init_lambda3_hat), &lambda3_bounds),
            ("outer.init_phi1_hat", init_phi1_hat.transpose(), &phi1_bounds),
        ] {
            if !b.contains(&theta) {
                return Err(Error::Validation(format!(
                    "`{name}` lies outside its projection bounds"
                )));
            }
        }
        if let Some(kb) = &k_bounds {
            if !kb.contains(&init_k_hat_x.transpose()) {
                return Err(Error::Validation(
                    "`inner.init_k_hat_x` lies outside `inner.k_bounds`".into(),
                ));
            }
        }
        if !phi2_bounds.contains(&Matrix::zeros(m, m)) {
            return Err(Error::Validation(
                "`outer.phi2_bounds` must contain the zero initial value".into(),
            ));
        }
        let sw = &self.sweep;
        if sw.tau.iter().any(|t| !(*t >= 0.0)) || sw.scale.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Validation("sweep grid values must be nonnegative".into()));
        }

        Ok(Scenario {
            config: self.clone(),
            plant,
            a_n,
            gains,
            quad,
            y_o,
            reference: ReferenceSignal { segments, m },
            events,
            lambda_bounds,
            k_bounds,
            lambda2_bounds,
            lambda3_bounds,
            phi1_bounds,
            phi2_bounds,
            init_k_hat_x,
            init_lambda_hat,
            init_lambda2_hat,
            init_lambda3_hat,
            init_phi1_hat,
            steps,
            log_stride,
        })
    }
}

/// Reads and parses a scenario file, applying no overrides.
pub fn load_config(path: impl AsRef<std::path::Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let config = ScenarioConfig::from_json(&text)?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin_747;

    #[test]
    fn json_round_trip_is_identity() {
        let c = builtin_747();
        let back = ScenarioConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn misaligned_step_rejected() {
        let mut c = builtin_747();
        c.sim.step = 0.3 / 5.0 * 1.5;
        c.sim.duration = c.sim.step * 100.0;
        c.sim.log_interval = c.sim.step;
        let err = c.validate().unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("τ/N")), "{err}");
    }

    #[test]
    fn effectiveness_above_one_rejected() {
        let mut c = builtin_747();
        c.plant.lambda = vec![1.2];
        assert!(matches!(c.validate(), Err(Error::Validation(_))));
        let mut c = builtin_747();
        c.events[0].lambda = vec![1.2];
        assert!(matches!(c.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_keys_rejected_with_position() {
        let mut v = builtin_747().to_value();
        v["sim"]["stepp"] = serde_json::json!(0.001);
        let err = ScenarioConfig::from_json(&serde_json::to_string_pretty(&v).unwrap()).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert!(line > 0);
                assert!(message.contains("stepp"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(
            ScenarioConfig::from_json("{ \"name\": "),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn overrides_set_existing_paths_only() {
        let c = builtin_747();
        let o = c.with_overrides(&["inner.gamma_x=0.01", "outer.gamma_phi1=[1,2,3,4]"]).unwrap();
        assert_eq!(o.inner.gamma_x, LearningRate::Scalar(0.01));
        assert_eq!(o.outer.gamma_phi1, LearningRate::Diagonal(vec![1.0, 2.0, 3.0, 4.0]));
        let last = c.with_overrides(&["outer.tau=0.15", "outer.tau=0.45"]).unwrap();
        assert_eq!(last.outer.tau, 0.45);
        assert!(c.with_overrides(&["inner.gama_x=1"]).is_err());
        assert!(c.with_overrides(&["inner.gamma_x"]).is_err());
        let ev = c.with_overrides(&["events.0.time=20"]).unwrap();
        assert_eq!(ev.events[0].time, 20.0);
    }

    #[test]
    fn saturation_converted_to_crad() {
        let s = builtin_747().validate().unwrap();
        assert!((s.y_o[0] - 17.453292519943297).abs() < 1e-12);
    }

    #[test]
    fn degree_reference_levels() {
        let mut c = builtin_747();
        c.reference = vec![ReferenceSegment {
            start: 0.0,
            end: None,
            level_crad: None,
            level_deg: Some(vec![1.8]),
        }];
        let s = c.validate().unwrap();
        assert!((s.reference.at(3.0)[0] - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(s.reference.at(-1.0)[0], 0.0);
    }

    #[test]
    fn overlapping_reference_segments_rejected() {
        let mut c = builtin_747();
        c.reference[1].start = 19.0;
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("segments 0 and 1 overlap"), "{err}");
    }

    #[test]
    fn event_outside_run_rejected() {
        let mut c = builtin_747();
        c.events[0].time = 80.0;
        assert!(c.validate().is_err());
    }
}
