//! Python bindings: scenarios, runs, sweeps, checks and the matrix solvers.
//!
//! Matrices cross the boundary as lists of rows; logs come back as a dict of
//! column lists keyed by the CSV header.

use pilotsim::diagnostics::{compute_metrics, RunMetrics};
use pilotsim::numerics::{self, matrix_from_rows, matrix_to_rows, Matrix};
use pilotsim::scenario::{self, ScenarioConfig, SimLog};
use pilotsim::verify::{run_checks, VerifyOptions};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

pyo3::create_exception!(pilotsim_py, DivergenceError, PyRuntimeError);

fn to_py(e: pilotsim::Error) -> PyErr {
    if e.is_divergence() {
        DivergenceError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn mat(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    matrix_from_rows(&rows).map_err(to_py)
}

/// A scenario configuration (JSON schema).
#[pyclass(name = "Scenario", module = "pilotsim_py", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    /// The built-in 747 case.
    #[staticmethod]
    fn builtin() -> Self {
        Self {
            inner: scenario::builtin_747(),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ScenarioConfig::from_json(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: scenario::load_config(path).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Returns a copy with `key=value` dotted-path overrides applied.
    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_overrides(&overrides).map_err(to_py)?,
        })
    }

    /// Raises ValueError if the configuration is invalid.
    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map(|_| ()).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    /// Designed gains as a dict of row lists.
    fn gains<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let sc = self.inner.validate().map_err(to_py)?;
        let g = &sc.gains;
        let d = PyDict::new(py);
        for (k, m) in [
            ("l_r", &g.l_r),
            ("theta_x", &g.theta_x),
            ("theta_r", &g.theta_r),
            ("a_r", &g.a_r),
            ("a_m", &g.a_m),
            ("b_r", &g.b_r),
            ("p_1", &g.p_1),
            ("p_2", &g.p_2),
        ] {
            d.set_item(k, matrix_to_rows(m))?;
        }
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Scenario(name={:?}, tau={})", self.inner.name, self.inner.outer.tau)
    }
}

/// A finished (or diverged) run.
#[pyclass(name = "Run", module = "pilotsim_py")]
struct PyRun {
    log: SimLog,
    error: Option<String>,
}

#[pymethods]
impl PyRun {
    /// Divergence message when the run stopped early.
    #[getter]
    fn error(&self) -> Option<String> {
        self.error.clone()
    }

    fn __len__(&self) -> usize {
        self.log.len()
    }

    fn header(&self) -> Vec<String> {
        self.log.csv_header()
    }

    /// Dict mapping each CSV column name to its values.
    fn columns<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let header = self.log.csv_header();
        let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(self.log.len()); header.len()];
        for i in 0..self.log.len() {
            for (c, v) in cols.iter_mut().zip(self.log.csv_row(i)) {
                c.push(v);
            }
        }
        let d = PyDict::new(py);
        for (h, c) in header.into_iter().zip(cols) {
            d.set_item(h, c)?;
        }
        Ok(d)
    }

    fn to_csv(&self) -> String {
        self.log.to_csv()
    }

    /// Metrics over `[start, end]` (whole run by default).
    #[pyo3(signature = (start=None, end=None))]
    fn metrics<'py>(&self, py: Python<'py>, start: Option<f64>, end: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
        let last = self.log.time(self.log.len() - 1);
        let m = compute_metrics(&self.log, start.unwrap_or(0.0), end.unwrap_or(last)).map_err(to_py)?;
        metrics_dict(py, &m)
    }
}

fn metrics_dict<'py>(py: Python<'py>, m: &RunMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("rms_tracking_error", m.rms_tracking_error)?;
    d.set_item("saturation_duty_cycle", m.saturation_duty_cycle)?;
    d.set_item("control_effort", m.control_effort)?;
    d.set_item("pilot_effort", m.pilot_effort)?;
    d.set_item("peak_e_y", m.peak_e_y)?;
    d.set_item("window_start", m.window_start)?;
    d.set_item("window_end", m.window_end)?;
    Ok(d)
}

/// Simulates a scenario. A diverged run is returned with `error` set.
#[pyfunction]
fn run_simulation(py: Python<'_>, scenario: &PyScenario) -> PyResult<PyRun> {
    let sc = scenario.inner.validate().map_err(to_py)?;
    let out = py.detach(|| scenario::simulate(&sc));
    Ok(PyRun {
        log: out.log,
        error: out.error.map(|e| e.to_string()),
    })
}

/// Sweep over delays and outer learning-rate scales; returns the CSV text.
#[pyfunction]
#[pyo3(signature = (scenario, tau=None, scale=None, workers=None))]
fn sweep(
    py: Python<'_>,
    scenario: &PyScenario,
    tau: Option<Vec<f64>>,
    scale: Option<Vec<f64>>,
    workers: Option<usize>,
) -> PyResult<String> {
    let cfg = &scenario.inner;
    let tau = tau.unwrap_or_else(|| cfg.sweep.tau.clone());
    let scale = scale.unwrap_or_else(|| cfg.sweep.scale.clone());
    let table = py
        .detach(|| scenario::sweep(cfg, &tau, &scale, workers))
        .map_err(to_py)?;
    Ok(table.to_csv())
}

/// Runs acceptance checks; returns `[(name, passed, [detail lines])]`.
#[pyfunction]
#[pyo3(signature = (scenario, only=None, workers=None))]
fn verify(
    py: Python<'_>,
    scenario: &PyScenario,
    only: Option<String>,
    workers: Option<usize>,
) -> PyResult<Vec<(String, bool, Vec<String>)>> {
    let opts = VerifyOptions {
        workers: workers.or(VerifyOptions::default().workers),
    };
    let reports = py
        .detach(|| run_checks(&scenario.inner, only.as_deref(), &opts))
        .map_err(to_py)?;
    Ok(reports
        .into_iter()
        .map(|r| {
            let lines = r
                .subchecks
                .iter()
                .map(|s| format!("[{}] {}: {}", if s.passed { "ok" } else { "x" }, s.label, s.detail))
                .collect();
            (r.name.to_string(), r.passed(), lines)
        })
        .collect())
}

#[pyfunction]
fn solve_lyapunov(a: Vec<Vec<f64>>, q: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let p = numerics::solve_lyapunov(&mat(a)?, &mat(q)?).map_err(to_py)?;
    Ok(matrix_to_rows(&p))
}

/// Returns `(P, K, residual)`.
#[pyfunction]
fn solve_care(
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, f64)> {
    let s = numerics::solve_care(&mat(a)?, &mat(b)?, &mat(q)?, &mat(r)?).map_err(to_py)?;
    Ok((matrix_to_rows(&s.p), matrix_to_rows(&s.k), s.residual))
}

/// Eigenvalues as `(re, im)` pairs.
#[pyfunction]
fn eigenvalues(a: Vec<Vec<f64>>) -> PyResult<Vec<(f64, f64)>> {
    let ev = numerics::eigenvalues(&mat(a)?).map_err(to_py)?;
    Ok(ev.into_iter().map(|z| (z.re, z.im)).collect())
}

#[pyfunction]
fn matrix_exponential(a: Vec<Vec<f64>>, t: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(matrix_to_rows(&numerics::matrix_exponential(&mat(a)?, t).map_err(to_py)?))
}

#[pymodule]
fn pilotsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRun>()?;
    m.add("DivergenceError", m.py().get_type::<DivergenceError>())?;
    m.add("CRAD_PER_DEG", scenario::CRAD_PER_DEG)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(solve_care, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(matrix_exponential, m)?)?;
    Ok(())
}
