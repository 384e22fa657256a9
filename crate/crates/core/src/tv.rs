//! Isotropic total-variation denoising by FISTA on the dual problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TVParams {
    pub gamma: f64,
    pub max_iters: usize,
    /// Relative change of the primal iterate at which to stop.
    pub tol: f64,
}

impl Default for TVParams {
    fn default() -> Self {
        Self { gamma: 0.02, max_iters: 500, tol: 1e-6 }
    }
}

/// Forward differences with zero flux across the last row and column.
fn gradient(x: &[f64], rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; x.len()];
    let mut gy = vec![0.0; x.len()];
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                gx[i] = x[i + 1] - x[i];
            }
            if r + 1 < rows {
                gy[i] = x[i + cols] - x[i];
            }
        }
    }
    (gx, gy)
}

/// `div = -grad^T`.
fn divergence(px: &[f64], py: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut d = vec![0.0; px.len()];
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            let mut v = 0.0;
            if c + 1 < cols {
                v += px[i];
            }
            if c > 0 {
                v -= px[i - 1];
            }
            if r + 1 < rows {
                v += py[i];
            }
            if r > 0 {
                v -= py[i - cols];
            }
            d[i] = v;
        }
    }
    d
}

/// Isotropic TV, `sum |grad x|`.
pub fn total_variation(img: &ScalarField) -> f64 {
    let (gx, gy) = gradient(&img.data, img.n_rows, img.n_cols);
    gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).sum()
}

/// `1/2 ||x - b||^2 + gamma TV(x)`.
pub fn tv_objective(x: &ScalarField, b: &ScalarField, gamma: f64) -> f64 {
    let fid: f64 = x.data.iter().zip(&b.data).map(|(p, q)| (p - q).powi(2)).sum();
    0.5 * fid + gamma * total_variation(x)
}

pub fn tv_denoise(img: &ScalarField, params: &TVParams) -> Result<ScalarField> {
    if img.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if !(params.gamma >= 0.0) || params.max_iters == 0 {
        return Err(Error::InvalidParameter(format!("{params:?}")));
    }
    if params.gamma == 0.0 {
        return Ok(img.clone());
    }
    let (rows, cols) = (img.n_rows, img.n_cols);
    let n = img.data.len();
    let g = params.gamma;
    let b = &img.data;
    let primal = |px: &[f64], py: &[f64]| -> Vec<f64> {
        divergence(px, py, rows, cols).iter().zip(b).map(|(d, v)| v + g * d).collect()
    };

    let (mut px, mut py) = (vec![0.0; n], vec![0.0; n]);
    let (mut qx, mut qy) = (px.clone(), py.clone());
    let mut t = 1.0f64;
    let mut x = b.clone();
    let step = 1.0 / (8.0 * g);
    for _ in 0..params.max_iters {
        let (gx, gy) = gradient(&primal(&qx, &qy), rows, cols);
        let mut nx = vec![0.0; n];
        let mut ny = vec![0.0; n];
        for i in 0..n {
            let (a, c) = (qx[i] + step * gx[i], qy[i] + step * gy[i]);
            let s = a.hypot(c).max(1.0);
            nx[i] = a / s;
            ny[i] = c / s;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let mom = (t - 1.0) / t_next;
        for i in 0..n {
            qx[i] = nx[i] + mom * (nx[i] - px[i]);
            qy[i] = ny[i] + mom * (ny[i] - py[i]);
        }
        px = nx;
        py = ny;
        t = t_next;

        let x_next = primal(&px, &py);
        let change = x_next.iter().zip(&x).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        let scale = x_next.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        x = x_next;
        if change <= params.tol * scale {
            break;
        }
    }
    Ok(ScalarField { data: x, ..*img })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gamma_and_constant_images() {
        let img = ScalarField::new(3, 4, (0..12).map(|i| (i as f64).sin()).collect()).unwrap();
        let p = TVParams { gamma: 0.0, ..Default::default() };
        assert_eq!(tv_denoise(&img, &p).unwrap(), img);
        let k = ScalarField::new(5, 5, vec![0.4; 25]).unwrap();
        let out = tv_denoise(&k, &TVParams { gamma: 0.3, ..Default::default() }).unwrap();
        assert!(out.data.iter().all(|v| (v - 0.4).abs() < 1e-12));
    }

    #[test]
    fn divergence_is_negative_adjoint() {
        let (r, c) = (4, 5);
        let x: Vec<f64> = (0..20).map(|i| (1.3 * i as f64).cos()).collect();
        let px: Vec<f64> = (0..20).map(|i| (0.7 * i as f64).sin()).collect();
        let py: Vec<f64> = (0..20).map(|i| (0.2 * i as f64 + 1.0).sin()).collect();
        let (gx, gy) = gradient(&x, r, c);
        let lhs: f64 = (0..20).map(|i| gx[i] * px[i] + gy[i] * py[i]).sum();
        let rhs: f64 = -divergence(&px, &py, r, c).iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let img = ScalarField { n_rows: 1, n_cols: 2, data: vec![0.0, f64::NAN] };
        assert!(matches!(tv_denoise(&img, &TVParams::default()), Err(Error::NonFinite)));
    }
}
