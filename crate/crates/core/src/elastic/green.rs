//! Kupradze fundamental solution of the time-harmonic Lamé system and its
//! time-domain derivative.

use std::f64::consts::PI;

use num_complex::Complex64;
use puruspe::{Jn, Yn};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

pub type CMat2 = [[Complex64; 2]; 2];

/// Pressure and shear parts of the Kupradze matrix at one `(x, omega)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KupradzeMatrices {
    pub p: CMat2,
    pub s: CMat2,
}

impl KupradzeMatrices {
    pub fn total(&self) -> CMat2 {
        add(self.p, 1.0, self.s, 1.0)
    }

    /// `c_P G^P + c_S G^S`.
    pub fn weighted(&self, c_p: f64, c_s: f64) -> CMat2 {
        add(self.p, c_p, self.s, c_s)
    }
}

fn add(a: CMat2, ca: f64, b: CMat2, cb: f64) -> CMat2 {
    let mut out = [[Complex64::default(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][j] * ca + b[i][j] * cb;
        }
    }
    out
}

/// `(H_0^(1)(z), H_1^(1)(z))` for `z > 0`.
pub fn hankel01(z: f64) -> (Complex64, Complex64) {
    (Complex64::new(Jn(0, z), Yn(0, z)), Complex64::new(Jn(1, z), Yn(1, z)))
}

/// Hessian of `(i/4) H_0^(1)(kappa |x|)` as `(a, b)` with
/// `Hess = a gamma gamma^T + b (I - gamma gamma^T)`, `gamma = x / |x|`.
fn hessian_coeffs(kappa: f64, r: f64) -> (Complex64, Complex64) {
    let z = kappa * r;
    let (h0, h1) = hankel01(z);
    let quarter_i = Complex64::new(0.0, 0.25);
    let k2 = kappa * kappa;
    let a = -k2 * (h0 - h1 / z) * quarter_i;
    let b = -k2 * (h1 / z) * quarter_i;
    (a, b)
}

fn kupradze_positive(x: [f64; 2], omega: f64, c_p: f64, c_s: f64) -> KupradzeMatrices {
    let r = x[0].hypot(x[1]);
    let g = [x[0] / r, x[1] / r];
    let w2 = omega * omega;
    let (kp, ks) = (omega / c_p, omega / c_s);
    let (ap, bp) = hessian_coeffs(kp, r);
    let (as_, bs) = hessian_coeffs(ks, r);
    let gs = Complex64::new(0.0, 0.25) * hankel01(ks * r).0;
    let mut p = [[Complex64::default(); 2]; 2];
    let mut s = [[Complex64::default(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let gg = g[i] * g[j];
            let delta = if i == j { 1.0 } else { 0.0 };
            let hess_p = ap * gg + bp * (delta - gg);
            let hess_s = as_ * gg + bs * (delta - gg);
            p[i][j] = -hess_p / w2;
            s[i][j] = (gs * (ks * ks * delta) + hess_s) / w2;
        }
    }
    KupradzeMatrices { p, s }
}

/// `G_omega(x) = G^P + G^S`, the outgoing fundamental solution with
/// `(L + omega^2) G = -delta I`.
pub fn kupradze_green(x: [f64; 2], omega: f64, grid: &GridSpec) -> Result<KupradzeMatrices> {
    let r = x[0].hypot(x[1]);
    if r < 0.25 * grid.h_x {
        return Err(Error::SingularPoint { distance: r });
    }
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!("omega = {omega}")));
    }
    let k = kupradze_positive(x, omega.abs(), grid.c_p(), grid.c_s());
    if omega > 0.0 {
        Ok(k)
    } else {
        let conj = |m: CMat2| m.map(|row| row.map(|c| c.conj()));
        Ok(KupradzeMatrices { p: conj(k.p), s: conj(k.s) })
    }
}

/// Time-domain `d/dt G(x, t)` by a Hann-tapered midpoint sum over
/// `omega_k = (k + 1/2) d_omega`, `d_omega = 2 pi / (4 t_max)`, up to `pi / h_t`.
pub struct TimeKernel {
    c_p: f64,
    c_s: f64,
    omegas: Vec<f64>,
    /// `taper(omega_k) * d_omega / pi`.
    weights: Vec<f64>,
    min_distance: f64,
}

impl TimeKernel {
    pub fn new(grid: &GridSpec) -> Self {
        let d_omega = 2.0 * PI / (4.0 * grid.t_max);
        let omega_max = PI / grid.h_t;
        let count = (omega_max / d_omega).floor() as usize;
        let omegas: Vec<f64> = (0..count).map(|k| (k as f64 + 0.5) * d_omega).collect();
        let weights = omegas
            .iter()
            .map(|&w| {
                let c = (0.5 * PI * w / omega_max).cos();
                c * c * d_omega / PI
            })
            .collect();
        Self { c_p: grid.c_p(), c_s: grid.c_s(), omegas, weights, min_distance: 0.25 * grid.h_x }
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.omegas
    }

    /// Frequency-domain factors `(-i omega_k) G_{omega_k}(x) w_k` for one offset.
    pub fn spectrum(&self, x: [f64; 2]) -> Result<Vec<CMat2>> {
        let r = x[0].hypot(x[1]);
        if r < self.min_distance {
            return Err(Error::SingularPoint { distance: r });
        }
        Ok(self
            .omegas
            .iter()
            .zip(&self.weights)
            .map(|(&w, &wt)| {
                let g = kupradze_positive(x, w, self.c_p, self.c_s).total();
                let f = Complex64::new(0.0, -w) * wt;
                g.map(|row| row.map(|c| c * f))
            })
            .collect())
    }

    /// Phase table `exp(-i omega_k t)` for a list of times, row per time.
    pub fn phases(&self, times: &[f64]) -> Vec<Vec<Complex64>> {
        times
            .iter()
            .map(|&t| self.omegas.iter().map(|&w| Complex64::from_polar(1.0, -w * t)).collect())
            .collect()
    }

    /// `d/dt G(x, t)` at each of the given times (phase rows from [`Self::phases`]).
    pub fn eval_with(&self, spectrum: &[CMat2], phases: &[Vec<Complex64>]) -> Vec<[[f64; 2]; 2]> {
        phases
            .iter()
            .map(|row| {
                let mut acc = [[0.0; 2]; 2];
                for (m, ph) in spectrum.iter().zip(row) {
                    for i in 0..2 {
                        for j in 0..2 {
                            acc[i][j] += (m[i][j] * ph).re;
                        }
                    }
                }
                acc
            })
            .collect()
    }

    pub fn eval(&self, x: [f64; 2], times: &[f64]) -> Result<Vec<[[f64; 2]; 2]>> {
        Ok(self.eval_with(&self.spectrum(x)?, &self.phases(times)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn grid() -> GridSpec {
        make_grid(4.0, 128, 2.0, 64, 1.0, 1.0, 16).unwrap()
    }

    #[test]
    fn bessel_reference_values() {
        // scipy.special.hankel1 reference values
        let (h0, h1) = hankel01(1.0);
        assert!((h0.re - 0.765_197_686_557_966_6).abs() < 1e-7);
        assert!((h0.im - 0.088_256_964_215_676_96).abs() < 1e-7);
        assert!((h1.re - 0.440_050_585_744_933_5).abs() < 1e-7);
        assert!((h1.im + 0.781_212_821_300_288_7).abs() < 1e-7);
        let (h0, _) = hankel01(7.5);
        assert!((h0.re - 0.266_339_657_880_378_1).abs() < 1e-7);
        assert!((h0.im - 0.117_313_286_148_821_2).abs() < 1e-7);
    }

    #[test]
    fn symmetric_and_even() {
        let g = grid();
        for &(x, w) in &[([0.3, -0.7], 2.0), ([1.1, 0.2], 9.0), ([-0.05, 0.4], -3.0)] {
            let k = kupradze_green(x, w, &g).unwrap().total();
            let km = kupradze_green([-x[0], -x[1]], w, &g).unwrap().total();
            assert_eq!(k[0][1], k[1][0]);
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(k[i][j], km[i][j]);
                }
            }
        }
    }

    #[test]
    fn radial_scaling() {
        let g = grid();
        let a = kupradze_green([0.4, 0.3], 2.0, &g).unwrap();
        let b = kupradze_green([0.8, 0.6], 1.0, &g).unwrap();
        // G^S(x, w) = H(k|x|) scaled: with k|x| fixed, G scales like 1
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.s[i][j] - b.s[i][j]).norm() < 1e-12);
                assert!((a.p[i][j] - b.p[i][j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_point_rejected() {
        let g = grid();
        assert!(matches!(kupradze_green([0.001, 0.0], 1.0, &g), Err(Error::SingularPoint { .. })));
    }

    #[test]
    fn default_frequency_count() {
        assert_eq!(TimeKernel::new(&grid()).frequencies().len(), 128);
    }
}
