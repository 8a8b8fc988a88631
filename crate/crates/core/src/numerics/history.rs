use super::Vector;
use crate::{Error, Result};
use std::collections::VecDeque;

/// Uniformly sampled past values of a vector signal over a fixed horizon.
///
/// Samples are pushed at `start_time + k * sample_period`. Lookups between
/// samples interpolate linearly; lookups that land on a sample (within a
/// relative 1e-9 of the period) return that sample unchanged. Times before
/// the first sample return the configured initial value.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    sample_period: f64,
    horizon: f64,
    start_time: f64,
    initial: Vector,
    samples: VecDeque<Vector>,
    capacity: usize,
    pushed: u64,
}

const SNAP: f64 = 1e-9;

impl HistoryBuffer {
    pub fn new(dim: usize, sample_period: f64, horizon: f64, start_time: f64) -> Self {
        Self::with_initial(Vector::zeros(dim), sample_period, horizon, start_time)
    }

    pub fn with_initial(initial: Vector, sample_period: f64, horizon: f64, start_time: f64) -> Self {
        assert!(sample_period > 0.0, "sample period must be positive");
        assert!(horizon >= 0.0, "horizon must be nonnegative");
        let capacity = (horizon / sample_period).ceil() as usize + 2;
        Self {
            sample_period,
            horizon,
            start_time,
            initial,
            samples: VecDeque::with_capacity(capacity),
            capacity,
            pushed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Time of the newest sample, or the start time minus one period when empty.
    pub fn current_time(&self) -> f64 {
        self.start_time + (self.pushed as f64 - 1.0) * self.sample_period
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends the sample for the next grid time.
    pub fn push(&mut self, value: Vector) {
        debug_assert_eq!(value.len(), self.dim());
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(value);
        self.pushed += 1;
    }

    pub fn newest(&self) -> Option<&Vector> {
        self.samples.back()
    }

    /// Value `lag` seconds before the newest sample.
    pub fn lookup_lag(&self, lag: f64) -> Result<Vector> {
        if self.samples.is_empty() {
            return Ok(self.initial.clone());
        }
        let newest = self.pushed as f64 - 1.0;
        let pos = newest - lag / self.sample_period;
        self.at_position(pos)
    }

    /// Value at absolute time `time`.
    pub fn lookup_at(&self, time: f64) -> Result<Vector> {
        if self.samples.is_empty() {
            return Ok(self.initial.clone());
        }
        let pos = (time - self.start_time) / self.sample_period;
        self.at_position(pos)
    }

    fn at_position(&self, pos: f64) -> Result<Vector> {
        let newest = self.pushed as f64 - 1.0;
        let oldest = self.pushed as f64 - self.samples.len() as f64;
        if pos < -SNAP {
            return Ok(self.initial.clone());
        }
        if pos > newest + SNAP || pos < oldest - SNAP {
            return Err(Error::RangeNotLogged {
                time: self.start_time + pos * self.sample_period,
                start: self.start_time + oldest * self.sample_period,
                end: self.start_time + newest * self.sample_period,
            });
        }
        let rounded = pos.round();
        let index = |p: f64| (p - oldest) as usize;
        if (pos - rounded).abs() <= SNAP {
            return Ok(self.samples[index(rounded.clamp(oldest, newest))].clone());
        }
        let lo = pos.floor();
        let frac = pos - lo;
        let a = &self.samples[index(lo)];
        let b = &self.samples[index(lo + 1.0)];
        Ok(a * (1.0 - frac) + b * frac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(n: usize) -> HistoryBuffer {
        let mut h = HistoryBuffer::new(2, 0.01, 0.05, 0.0);
        for k in 0..n {
            let t = k as f64 * 0.01;
            h.push(Vector::from_vec(vec![t.sin(), 3.0 * t + 1.0]));
        }
        h
    }

    #[test]
    fn lag_zero_is_newest() {
        let h = filled(20);
        assert_eq!(h.lookup_lag(0.0).unwrap(), *h.newest().unwrap());
    }

    #[test]
    fn grid_lags_are_bit_exact() {
        let h = filled(20);
        for k in 0..=5 {
            let t = (19 - k) as f64 * 0.01;
            let got = h.lookup_lag(k as f64 * 0.01).unwrap();
            assert_eq!(got[0], t.sin());
            assert_eq!(got[1], 3.0 * t + 1.0);
        }
    }

    #[test]
    fn interpolates_linear_signals_exactly() {
        let h = filled(20);
        let got = h.lookup_lag(0.0234).unwrap();
        let t = 0.19 - 0.0234;
        assert!((got[1] - (3.0 * t + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn before_start_returns_initial() {
        let mut h = HistoryBuffer::with_initial(Vector::from_element(1, 7.0), 0.1, 1.0, 0.0);
        assert_eq!(h.lookup_lag(0.3).unwrap()[0], 7.0);
        h.push(Vector::from_element(1, 1.0));
        h.push(Vector::from_element(1, 2.0));
        assert_eq!(h.lookup_lag(0.5).unwrap()[0], 7.0);
        assert_eq!(h.lookup_lag(0.1).unwrap()[0], 1.0);
    }

    #[test]
    fn whole_horizon_retained() {
        let h = filled(100);
        assert!(h.lookup_lag(0.05).is_ok());
        assert!(matches!(h.lookup_lag(0.2), Err(Error::RangeNotLogged { .. })));
        assert!(h.lookup_lag(-0.01).is_err());
    }
}
