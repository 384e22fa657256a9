//! 2D FFT helpers on the periodic box.
//!
//! Forward transforms return the spectrum in transposed layout: entry
//! `kx * n_rows + ky`. Multipliers are applied in that layout and the inverse
//! transform undoes the transposition, so no extra copy is needed.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Spectral2 {
    pub n_rows: usize,
    pub n_cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    /// Angular wavenumbers along x (columns) and y (rows), FFT order.
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
}

/// FFT-ordered angular wavenumbers for `n` points with spacing `h`.
pub fn wavenumbers(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            2.0 * PI * m / (n as f64 * h)
        })
        .collect()
}

/// Wavenumbers for first derivatives: the Nyquist mode is dropped so that the
/// discrete derivative is real and antisymmetric.
pub fn derivative_wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let mut k = wavenumbers(n, h);
    if n % 2 == 0 {
        k[n / 2] = 0.0;
    }
    k
}

fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

impl Spectral2 {
    pub fn new(n_rows: usize, n_cols: usize, h: f64) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_rows,
            n_cols,
            row_fwd: planner.plan_fft_forward(n_cols),
            row_inv: planner.plan_fft_inverse(n_cols),
            col_fwd: planner.plan_fft_forward(n_rows),
            col_inv: planner.plan_fft_inverse(n_rows),
            kx: wavenumbers(n_cols, h),
            ky: wavenumbers(n_rows, h),
        }
    }

    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spectrum of a real field (transposed layout).
    pub fn forward(&self, data: &[f64]) -> Vec<Complex64> {
        assert_eq!(data.len(), self.len());
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.row_fwd.process(&mut buf);
        let mut t = vec![Complex64::default(); buf.len()];
        transpose(&buf, self.n_rows, self.n_cols, &mut t);
        self.col_fwd.process(&mut t);
        t
    }

    /// Real part of the inverse transform of a transposed-layout spectrum.
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        assert_eq!(spec.len(), self.len());
        self.col_inv.process(&mut spec);
        let mut t = vec![Complex64::default(); spec.len()];
        transpose(&spec, self.n_cols, self.n_rows, &mut t);
        self.row_inv.process(&mut t);
        let scale = 1.0 / self.len() as f64;
        t.iter().map(|c| c.re * scale).collect()
    }

    /// Wavevector `(kx, ky)` of transposed-layout index `idx`.
    pub fn k_at(&self, idx: usize) -> (f64, f64) {
        (self.kx[idx / self.n_rows], self.ky[idx % self.n_rows])
    }
}

/// Spectral first derivatives on a square periodic grid.
pub struct Derivatives {
    pub fft: Spectral2,
    dkx: Vec<f64>,
    dky: Vec<f64>,
}

impl Derivatives {
    pub fn new(n: usize, h: f64) -> Self {
        Self { fft: Spectral2::new(n, n, h), dkx: derivative_wavenumbers(n, h), dky: derivative_wavenumbers(n, h) }
    }

    /// `d/dx` applied to an already transformed field.
    pub fn dx_spec(&self, spec: &[Complex64]) -> Vec<f64> {
        let n = self.fft.n_rows;
        let out: Vec<Complex64> = spec
            .iter()
            .enumerate()
            .map(|(i, &c)| c * Complex64::new(0.0, self.dkx[i / n]))
            .collect();
        self.fft.inverse(out)
    }

    pub fn dy_spec(&self, spec: &[Complex64]) -> Vec<f64> {
        let n = self.fft.n_rows;
        let out: Vec<Complex64> = spec
            .iter()
            .enumerate()
            .map(|(i, &c)| c * Complex64::new(0.0, self.dky[i % n]))
            .collect();
        self.fft.inverse(out)
    }

    pub fn dx(&self, f: &[f64]) -> Vec<f64> {
        self.dx_spec(&self.fft.forward(f))
    }

    pub fn dy(&self, f: &[f64]) -> Vec<f64> {
        self.dy_spec(&self.fft.forward(f))
    }
}
