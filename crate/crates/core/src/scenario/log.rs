//! Logged time series of a run and its CSV form.

use crate::numerics::Vector;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::io::Write;

/// Signals stored per logged sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    Time,
    Xp,
    Xr,
    Xm,
    EDelta,
    E1,
    E2,
    Ey,
    G,
    V,
    Yh,
    DeltaY,
    Up,
    Y2,
    R,
    LambdaHat,
    Lambda2Hat,
    Lambda3Hat,
    /// `Φ̂₁`, row-major `m × n_p`.
    Phi1Hat,
    /// `‖Φ̂₂(η_k)‖_F` per node.
    Phi2Fro,
    /// `Φ̂₂(η_k)` per node, each row-major `m × m`.
    Phi2Hat,
    /// `K̂_x`, row-major `m × n_p`.
    KHatX,
    /// True effectiveness `Λ` (diagonal).
    Lambda,
}

impl Signal {
    pub const ALL: [Signal; 23] = [
        Signal::Time,
        Signal::Xp,
        Signal::Xr,
        Signal::Xm,
        Signal::EDelta,
        Signal::E1,
        Signal::E2,
        Signal::Ey,
        Signal::G,
        Signal::V,
        Signal::Yh,
        Signal::DeltaY,
        Signal::Up,
        Signal::Y2,
        Signal::R,
        Signal::LambdaHat,
        Signal::Lambda2Hat,
        Signal::Lambda3Hat,
        Signal::Phi1Hat,
        Signal::Phi2Fro,
        Signal::Phi2Hat,
        Signal::KHatX,
        Signal::Lambda,
    ];
}

/// Offsets of each signal within a flat row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub n_p: usize,
    pub m: usize,
    pub nodes: usize,
    offsets: [usize; 24],
}

impl Layout {
    pub fn new(n_p: usize, m: usize, nodes: usize) -> Self {
        let mut offsets = [0usize; 24];
        let mut acc = 0;
        for (i, s) in Signal::ALL.iter().enumerate() {
            offsets[i] = acc;
            acc += Self::width_of(*s, n_p, m, nodes);
        }
        offsets[23] = acc;
        Self {
            n_p,
            m,
            nodes,
            offsets,
        }
    }

    fn width_of(s: Signal, n: usize, m: usize, nodes: usize) -> usize {
        use Signal::*;
        match s {
            Time => 1,
            Xp | Xr | Xm | EDelta | E1 | E2 | Ey => n,
            G | V | Yh | DeltaY | Up | Y2 | R | LambdaHat | Lambda2Hat | Lambda3Hat | Lambda => m,
            Phi1Hat | KHatX => m * n,
            Phi2Fro => nodes,
            Phi2Hat => nodes * m * m,
        }
    }

    pub fn width(&self, s: Signal) -> usize {
        Self::width_of(s, self.n_p, self.m, self.nodes)
    }

    pub fn offset(&self, s: Signal) -> usize {
        self.offsets[s as usize]
    }

    pub fn row_len(&self) -> usize {
        self.offsets[23]
    }
}

/// Row-major table of logged samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    layout: Layout,
    data: Vec<f64>,
    /// Saturation limits, crad/s.
    pub y_o: Vector,
    pub tau: f64,
    pub step: f64,
}

impl SimLog {
    pub fn new(layout: Layout, y_o: Vector, tau: f64, step: f64) -> Self {
        Self {
            layout,
            data: Vec::new(),
            y_o,
            tau,
            step,
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.layout.row_len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Appends a zeroed row and returns it for filling.
    pub(crate) fn push_row(&mut self) -> RowWriter<'_> {
        let start = self.data.len();
        self.data.resize(start + self.layout.row_len(), 0.0);
        RowWriter {
            layout: &self.layout,
            row: &mut self.data[start..],
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.layout.row_len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn get(&self, i: usize, s: Signal) -> &[f64] {
        let o = self.layout.offset(s);
        &self.row(i)[o..o + self.layout.width(s)]
    }

    pub fn vector(&self, i: usize, s: Signal) -> Vector {
        Vector::from_column_slice(self.get(i, s))
    }

    pub fn time(&self, i: usize) -> f64 {
        self.get(i, Signal::Time)[0]
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// One scalar component over the whole run.
    pub fn series(&self, s: Signal, component: usize) -> Vec<f64> {
        assert!(component < self.layout.width(s));
        (0..self.len()).map(|i| self.get(i, s)[component]).collect()
    }

    /// Sample spacing of the log (seconds).
    pub fn interval(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        self.time(1) - self.time(0)
    }

    /// Index of the sample at `t`, which must lie on the log grid.
    pub fn index_at(&self, t: f64) -> Result<usize> {
        let n = self.len();
        if n == 0 {
            return Err(Error::RangeNotLogged {
                time: t,
                start: f64::NAN,
                end: f64::NAN,
            });
        }
        let dt = self.interval();
        let start = self.time(0);
        let end = self.time(n - 1);
        let pos = if dt > 0.0 { (t - start) / dt } else { 0.0 };
        let k = pos.round();
        if k < 0.0 || k as usize >= n || (pos - k).abs() > 1e-6 {
            return Err(Error::RangeNotLogged { time: t, start, end });
        }
        Ok(k as usize)
    }

    pub fn csv_header(&self) -> Vec<String> {
        let l = &self.layout;
        let mut h = vec!["t".to_string()];
        let idx = |prefix: &str, count: usize, h: &mut Vec<String>| {
            for i in 1..=count {
                h.push(format!("{prefix}{i}"));
            }
        };
        idx("x_p", l.n_p, &mut h);
        idx("x_r", l.n_p, &mut h);
        idx("x_m", l.n_p, &mut h);
        h.push("e_y_norm".into());
        idx("y_h", l.m, &mut h);
        idx("v", l.m, &mut h);
        idx("u_p", l.m, &mut h);
        if l.m == 1 {
            h.push("y_2".into());
            h.push("r".into());
        } else {
            idx("y_2_", l.m, &mut h);
            idx("r", l.m, &mut h);
        }
        idx("lambda_hat", l.m, &mut h);
        idx("lambda2_hat", l.m, &mut h);
        idx("lambda3_hat", l.m, &mut h);
        h.push("phi1_fro".into());
        idx("phi2_fro_", l.nodes, &mut h);
        h
    }

    pub fn csv_row(&self, i: usize) -> Vec<f64> {
        use Signal::*;
        let mut out = Vec::with_capacity(self.layout.row_len());
        out.push(self.time(i));
        for s in [Xp, Xr, Xm] {
            out.extend_from_slice(self.get(i, s));
        }
        out.push(norm(self.get(i, Ey)));
        for s in [Yh, V, Up, Y2, R, LambdaHat, Lambda2Hat, Lambda3Hat] {
            out.extend_from_slice(self.get(i, s));
        }
        out.push(norm(self.get(i, Phi1Hat)));
        out.extend_from_slice(self.get(i, Phi2Fro));
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.csv_header().join(","))?;
        let mut line = String::new();
        for i in 0..self.len() {
            line.clear();
            for (k, v) in self.csv_row(i).iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                write!(line, "{v}").expect("string write");
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) struct RowWriter<'a> {
    layout: &'a Layout,
    row: &'a mut [f64],
}

impl RowWriter<'_> {
    pub fn set(&mut self, s: Signal, values: &[f64]) {
        let o = self.layout.offset(s);
        let w = self.layout.width(s);
        assert_eq!(values.len(), w, "width of {s:?}");
        self.row[o..o + w].copy_from_slice(values);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_contiguous() {
        let l = Layout::new(4, 1, 5);
        let mut acc = 0;
        for s in Signal::ALL {
            assert_eq!(l.offset(s), acc);
            acc += l.width(s);
        }
        assert_eq!(l.row_len(), acc);
    }

    #[test]
    fn header_matches_row_width() {
        let mut log = SimLog::new(Layout::new(4, 1, 5), Vector::from_element(1, 1.0), 0.3, 0.01);
        log.push_row().set(Signal::Time, &[0.5]);
        let h = log.csv_header();
        assert_eq!(h.len(), log.csv_row(0).len());
        assert_eq!(h[0], "t");
        assert_eq!(h[13], "e_y_norm");
        assert_eq!(h.last().unwrap(), "phi2_fro_5");
        let csv = log.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("0.5,"));
    }

    #[test]
    fn index_lookup() {
        let mut log = SimLog::new(Layout::new(1, 1, 1), Vector::from_element(1, 1.0), 0.0, 0.1);
        for k in 0..5 {
            log.push_row().set(Signal::Time, &[k as f64 * 0.1]);
        }
        assert_eq!(log.index_at(0.3).unwrap(), 3);
        assert!(log.index_at(0.55).is_err());
        assert!(log.index_at(0.9).is_err());
    }
}
