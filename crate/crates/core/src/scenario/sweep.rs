//! Grid of runs over delay and outer learning-rate scale.

use super::config::ScenarioConfig;
use super::simulate::simulate;
use crate::diagnostics::{compute_metrics, RunMetrics};
use crate::{Error, Result};
use rayon::prelude::*;
use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    pub scale: f64,
    pub bounded: bool,
    /// Whole-run metrics; absent when the run stopped early.
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    /// Row-major over `(scale, tau)`: all delays for the first scale, then the next.
    pub rows: Vec<SweepRow>,
    pub tau: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Soft trend check over a finished sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    /// Scales whose bounded set is not a prefix of the delay grid.
    pub non_prefix_scales: Vec<f64>,
    /// Fraction of scales flagged.
    pub flagged_fraction: f64,
    /// Boundedness at the largest delay, in scale order.
    pub bounded_at_max_tau: Vec<bool>,
    /// At the largest delay, boundedness never reappears once lost as the scale grows.
    pub non_improving_at_max_tau: bool,
}

impl SweepTable {
    pub fn get(&self, tau: f64, scale: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.tau == tau && r.scale == scale)
    }

    pub fn trend(&self) -> TrendReport {
        let mut non_prefix = Vec::new();
        for &s in &self.scale {
            let flags: Vec<bool> = self
                .tau
                .iter()
                .map(|&t| self.get(t, s).map_or(false, |r| r.bounded))
                .collect();
            let first_unbounded = flags.iter().position(|b| !b).unwrap_or(flags.len());
            if flags[first_unbounded..].iter().any(|b| *b) {
                non_prefix.push(s);
            }
        }
        let tau_max = self.tau.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut scales = self.scale.clone();
        scales.sort_by(f64::total_cmp);
        let at_max: Vec<bool> = scales
            .iter()
            .map(|&s| self.get(tau_max, s).map_or(false, |r| r.bounded))
            .collect();
        let non_improving = at_max.windows(2).all(|w| w[0] || !w[1]);
        TrendReport {
            flagged_fraction: non_prefix.len() as f64 / self.scale.len().max(1) as f64,
            non_prefix_scales: non_prefix,
            bounded_at_max_tau: at_max,
            non_improving_at_max_tau: non_improving,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tau,scale,bounded,rms,duty_cycle,peak_e_y")?;
        for r in &self.rows {
            let (rms, duty, peak) = match &r.metrics {
                Some(m) => (m.rms_tracking_error, m.saturation_duty_cycle, m.peak_e_y),
                None => (f64::NAN, f64::NAN, f64::NAN),
            };
            writeln!(w, "{},{},{},{},{},{}", r.tau, r.scale, r.bounded, rms, duty, peak)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn one_run(base: &ScenarioConfig, tau: f64, scale: f64, cap: f64) -> SweepRow {
    let row = |bounded, metrics, error| SweepRow {
        tau,
        scale,
        bounded,
        metrics,
        error,
    };
    let sc = match base.with_delay_and_scale(tau, scale).validate() {
        Ok(sc) => sc,
        Err(e) => return row(false, None, Some(e.to_string())),
    };
    let out = simulate(&sc);
    if let Some(e) = out.error {
        return row(false, None, Some(e.to_string()));
    }
    let end = out.log.time(out.log.len() - 1);
    match compute_metrics(&out.log, 0.0, end) {
        Ok(m) => row(m.peak_e_y <= cap, Some(m), None),
        Err(e) => row(false, None, Some(e.to_string())),
    }
}

/// Runs every `(τ, scale)` pair of the grid on `workers` threads (all
/// logical cores when `None`). Per-run failures become table rows.
pub fn sweep(base: &ScenarioConfig, tau: &[f64], scale: &[f64], workers: Option<usize>) -> Result<SweepTable> {
    if tau.is_empty() || scale.is_empty() {
        return Err(Error::Validation("sweep grid must have at least one delay and one scale".into()));
    }
    if tau.iter().chain(scale).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Validation("sweep grid values must be finite and nonnegative".into()));
    }
    let cap = base.sweep.e_y_cap;
    let points: Vec<(f64, f64)> = scale
        .iter()
        .flat_map(|&s| tau.iter().map(move |&t| (t, s)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::Validation("worker count must be positive".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
    let rows = pool.install(|| {
        points
            .par_iter()
            .map(|&(t, s)| one_run(base, t, s, cap))
            .collect::<Vec<_>>()
    });
    Ok(SweepTable {
        rows,
        tau: tau.to_vec(),
        scale: scale.to_vec(),
    })
}

/// Sweep over the grid stored in the configuration.
pub fn sweep_default(base: &ScenarioConfig, workers: Option<usize>) -> Result<SweepTable> {
    sweep(base, &base.sweep.tau, &base.sweep.scale, workers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(flags: &[(f64, f64, bool)], tau: &[f64], scale: &[f64]) -> SweepTable {
        SweepTable {
            rows: flags
                .iter()
                .map(|&(t, s, b)| SweepRow {
                    tau: t,
                    scale: s,
                    bounded: b,
                    metrics: None,
                    error: None,
                })
                .collect(),
            tau: tau.to_vec(),
            scale: scale.to_vec(),
        }
    }

    #[test]
    fn trend_flags_gaps() {
        let t = table(
            &[
                (0.0, 1.0, true),
                (0.5, 1.0, false),
                (1.0, 1.0, true),
                (0.0, 2.0, true),
                (0.5, 2.0, true),
                (1.0, 2.0, false),
            ],
            &[0.0, 0.5, 1.0],
            &[1.0, 2.0],
        );
        let r = t.trend();
        assert_eq!(r.non_prefix_scales, vec![1.0]);
        assert_eq!(r.flagged_fraction, 0.5);
        assert_eq!(r.bounded_at_max_tau, vec![true, false]);
        assert!(r.non_improving_at_max_tau);
    }

    #[test]
    fn improvement_with_scale_detected() {
        let t = table(&[(1.0, 1.0, false), (1.0, 2.0, true)], &[1.0], &[1.0, 2.0]);
        assert!(!t.trend().non_improving_at_max_tau);
    }

    #[test]
    fn empty_grid_rejected() {
        let base = crate::scenario::builtin_747();
        assert!(sweep(&base, &[], &[1.0], Some(1)).is_err());
        assert!(sweep(&base, &[0.3], &[], Some(1)).is_err());
    }

    #[test]
    fn csv_shape() {
        let t = table(&[(0.0, 1.0, true)], &[0.0], &[1.0]);
        let csv = t.to_csv();
        assert_eq!(csv, "tau,scale,bounded,rms,duty_cycle,peak_e_y\n0,1,true,NaN,NaN,NaN\n");
    }
}
