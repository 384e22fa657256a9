//! Forward elastic model: detectors, recorded traces, the Lamé solver and the
//! Kupradze fundamental solution.

mod green;
mod solver;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, VectorField2};

pub use green::{kupradze_green, KupradzeMatrices, TimeKernel};
pub use solver::{apply_lame_operator, check_support, simulate, ElasticSolver, ElasticState};

/// Receivers on the unit circle and the instants at which they are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorArray {
    pub positions: Vec<[f64; 2]>,
    pub times: Vec<f64>,
}

impl DetectorArray {
    /// `m_count` equally spaced detectors and `n_count` equally spaced times
    /// `t_n = n t_max / n_count`, `n = 1..=n_count`.
    pub fn uniform(m_count: usize, n_count: usize, grid: &GridSpec) -> Result<Self> {
        if m_count == 0 || n_count == 0 {
            return Err(Error::InvalidDetectors("empty detector array".into()));
        }
        let positions = (0..m_count)
            .map(|m| {
                let th = 2.0 * PI * m as f64 / m_count as f64;
                [th.cos(), th.sin()]
            })
            .collect();
        let times = (1..=n_count).map(|n| n as f64 * grid.t_max / n_count as f64).collect();
        let d = Self { positions, times };
        d.validate(grid)?;
        Ok(d)
    }

    pub fn m(&self) -> usize {
        self.positions.len()
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.positions.is_empty() || self.times.is_empty() {
            return Err(Error::InvalidDetectors("empty detector array".into()));
        }
        for (i, p) in self.positions.iter().enumerate() {
            let r = p[0].hypot(p[1]);
            if (r - 1.0).abs() > 0.5 * grid.h_x {
                return Err(Error::InvalidDetectors(format!("detector {i} at radius {r}")));
            }
            for q in &self.positions[..i] {
                if (p[0] - q[0]).hypot(p[1] - q[1]) < 1e-12 {
                    return Err(Error::InvalidDetectors(format!("detector {i} duplicated")));
                }
            }
        }
        for w in self.times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidDetectors("times not strictly increasing".into()));
            }
        }
        let last = *self.times.last().unwrap();
        if self.times[0] < 0.0 || last > grid.t_max * (1.0 + 1e-12) {
            return Err(Error::InvalidDetectors(format!("times outside [0, {}]", grid.t_max)));
        }
        Ok(())
    }

    /// Sample index on the `h_t` lattice for each time.
    pub fn time_indices(&self, grid: &GridSpec) -> Result<Vec<usize>> {
        self.times
            .iter()
            .map(|&t| {
                let k = t / grid.h_t;
                if (k - k.round()).abs() > 1e-6 {
                    return Err(Error::InvalidDetectors(format!("time {t} is not a multiple of h_t")));
                }
                Ok(k.round() as usize)
            })
            .collect()
    }
}

/// Recorded displacement traces, flattened as `i*(N*M) + n*M + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub detectors: DetectorArray,
    pub traces: Vec<f64>,
}

impl MeasurementSet {
    pub fn zeros(detectors: DetectorArray) -> Self {
        let len = 2 * detectors.m() * detectors.n();
        Self { detectors, traces: vec![0.0; len] }
    }

    pub fn new(detectors: DetectorArray, traces: Vec<f64>) -> Result<Self> {
        if traces.len() != 2 * detectors.m() * detectors.n() {
            return Err(Error::DimMismatch(format!(
                "{} trace values for {} detectors x {} times",
                traces.len(),
                detectors.m(),
                detectors.n()
            )));
        }
        if traces.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        Ok(Self { detectors, traces })
    }

    pub fn index(&self, i: usize, n: usize, m: usize) -> usize {
        let (mm, nn) = (self.detectors.m(), self.detectors.n());
        i * nn * mm + n * mm + m
    }

    pub fn get(&self, i: usize, n: usize, m: usize) -> f64 {
        self.traces[self.index(i, n, m)]
    }

    pub fn vector(&self) -> Vec<f64> {
        self.traces.clone()
    }

    pub fn norm(&self) -> f64 {
        self.traces.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { detectors: self.detectors.clone(), traces: self.traces.iter().map(|v| a * v).collect() }
    }

    /// Keeps `keep_detectors` equally spaced detectors and `keep_times` equally
    /// spaced instants (the last instant of each block is retained).
    pub fn subsample(&self, keep_detectors: usize, keep_times: usize) -> Result<Self> {
        let (mm, nn) = (self.detectors.m(), self.detectors.n());
        if keep_detectors == 0 || mm % keep_detectors != 0 {
            return Err(Error::NotDivisor { keep: keep_detectors, total: mm });
        }
        if keep_times == 0 || nn % keep_times != 0 {
            return Err(Error::NotDivisor { keep: keep_times, total: nn });
        }
        let sm = mm / keep_detectors;
        let sn = nn / keep_times;
        let det_idx: Vec<usize> = (0..keep_detectors).map(|k| k * sm).collect();
        let time_idx: Vec<usize> = (0..keep_times).map(|k| (k + 1) * sn - 1).collect();
        let detectors = DetectorArray {
            positions: det_idx.iter().map(|&m| self.detectors.positions[m]).collect(),
            times: time_idx.iter().map(|&n| self.detectors.times[n]).collect(),
        };
        let mut traces = Vec::with_capacity(2 * keep_detectors * keep_times);
        for i in 0..2 {
            for &n in &time_idx {
                for &m in &det_idx {
                    traces.push(self.get(i, n, m));
                }
            }
        }
        Ok(Self { detectors, traces })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("component,time_index,detector_index,value\n");
        for i in 0..2 {
            for n in 0..self.detectors.n() {
                for m in 0..self.detectors.m() {
                    writeln!(s, "{i},{n},{m},{:.16e}", self.get(i, n, m)).unwrap();
                }
            }
        }
        s
    }

    pub fn from_csv(csv: &str, detectors: DetectorArray) -> Result<Self> {
        let mut out = Self::zeros(detectors);
        let mut lines = csv.lines();
        if lines.next().map(str::trim) != Some("component,time_index,detector_index,value") {
            return Err(Error::InvalidParameter("missing measurement CSV header".into()));
        }
        let mut seen = 0;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || Error::InvalidParameter(format!("malformed CSV row: {line}"));
            if cols.len() != 4 {
                return Err(bad());
            }
            let i: usize = cols[0].trim().parse().map_err(|_| bad())?;
            let n: usize = cols[1].trim().parse().map_err(|_| bad())?;
            let m: usize = cols[2].trim().parse().map_err(|_| bad())?;
            let v: f64 = cols[3].trim().parse().map_err(|_| bad())?;
            if i >= 2 || n >= out.detectors.n() || m >= out.detectors.m() {
                return Err(bad());
            }
            if !v.is_finite() {
                return Err(Error::NonFiniteData);
            }
            let idx = out.index(i, n, m);
            out.traces[idx] = v;
            seen += 1;
        }
        if seen != out.traces.len() {
            return Err(Error::DimMismatch(format!("{seen} CSV rows, expected {}", out.traces.len())));
        }
        Ok(out)
    }

    /// Writes `<stem>.csv` and the `<stem>.json` detector sidecar.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&self.detectors)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let dir = dir.as_ref();
        let detectors: DetectorArray =
            serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        Self::from_csv(&std::fs::read_to_string(dir.join(format!("{stem}.csv")))?, detectors)
    }
}

/// Bilinear stencil of a point on the periodic grid: `(flat index, weight)`.
pub(crate) fn bilinear_stencil(p: [f64; 2], grid: &GridSpec) -> [(usize, f64); 4] {
    let n = grid.n_x;
    let fx = (p[0] + 0.5 * grid.beta) / grid.h_x;
    let fy = (p[1] + 0.5 * grid.beta) / grid.h_x;
    let (ix, iy) = (fx.floor(), fy.floor());
    let (wx, wy) = (fx - ix, fy - iy);
    let wrap = |i: f64| (i as i64).rem_euclid(n as i64) as usize;
    let (x0, y0) = (wrap(ix), wrap(iy));
    let (x1, y1) = ((x0 + 1) % n, (y0 + 1) % n);
    [
        (y0 * n + x0, (1.0 - wx) * (1.0 - wy)),
        (y0 * n + x1, wx * (1.0 - wy)),
        (y1 * n + x0, (1.0 - wx) * wy),
        (y1 * n + x1, wx * wy),
    ]
}

/// Evaluates a field at an off-grid point by bilinear interpolation.
pub fn sample_bilinear(field: &[f64], p: [f64; 2], grid: &GridSpec) -> f64 {
    bilinear_stencil(p, grid).iter().map(|&(i, w)| w * field[i]).sum()
}

/// Quadrature weight of one trace sample: `(t_max / N) * (2 pi / M)`.
pub fn trace_weight(m: &MeasurementSet, grid: &GridSpec) -> f64 {
    grid.t_max / m.detectors.n() as f64 * 2.0 * PI / m.detectors.m() as f64
}

/// Weighted trace inner product matching [`trace_weight`].
pub fn trace_dot(a: &MeasurementSet, b: &MeasurementSet, grid: &GridSpec) -> f64 {
    trace_weight(a, grid) * a.traces.iter().zip(&b.traces).map(|(x, y)| x * y).sum::<f64>()
}

/// Grid inner product `h_x^2 sum F.G`.
pub fn field_dot(a: &VectorField2, b: &VectorField2, grid: &GridSpec) -> f64 {
    grid.h_x * grid.h_x * a.dot(b)
}
