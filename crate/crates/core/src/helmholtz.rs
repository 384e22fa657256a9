//! Periodic Helmholtz decomposition `w - mean(w) = grad(phi) + curl(psi)` with
//! `curl(psi) = (-d_y psi, d_x psi)`.

use num_complex::Complex64;

use crate::error::Result;
use crate::grid::{GridSpec, ScalarField, VectorField2};
use crate::spectral::Spectral2;

#[derive(Debug, Clone, PartialEq)]
pub struct HelmholtzParts {
    pub grad_phi: VectorField2,
    pub curl_psi: VectorField2,
    pub phi: ScalarField,
    pub psi: ScalarField,
    /// Removed mean of each component.
    pub mean: [f64; 2],
}

/// Splits `w` into its irrotational and solenoidal parts on the periodic box.
///
/// The parts are computed directly as the Fourier projectors `k k^T / |k|^2`
/// and `I - k k^T / |k|^2`, so they sum to `w - mean(w)` to rounding error.
/// The potentials use `phi_hat = -i k.w_hat / |k|^2` and
/// `psi_hat = -i (k_x w_hat_y - k_y w_hat_x) / |k|^2`.
pub fn decompose(w: &VectorField2, grid: &GridSpec) -> Result<HelmholtzParts> {
    w.check_grid(grid)?;
    let n = grid.n_x;
    let fft = Spectral2::new(n, n, grid.h_x);
    let wx = fft.forward(&w.comp_x.data);
    let wy = fft.forward(&w.comp_y.data);
    let len = n * n;
    let mut gx = vec![Complex64::default(); len];
    let mut gy = vec![Complex64::default(); len];
    let mut cx = vec![Complex64::default(); len];
    let mut cy = vec![Complex64::default(); len];
    let mut phi = vec![Complex64::default(); len];
    let mut psi = vec![Complex64::default(); len];
    let nyq = n / 2;
    for i in 0..len {
        let (kx, ky) = fft.k_at(i);
        let k2 = kx * kx + ky * ky;
        if k2 == 0.0 {
            continue;
        }
        let kdotw = wx[i] * kx + wy[i] * ky;
        gx[i] = kdotw * (kx / k2);
        gy[i] = kdotw * (ky / k2);
        cx[i] = wx[i] - gx[i];
        cy[i] = wy[i] - gy[i];
        // The Nyquist row/column has no real-valued first derivative, so the
        // potentials leave it out; the projected parts keep it.
        if i / n != nyq && i % n != nyq {
            phi[i] = Complex64::new(0.0, -1.0) * kdotw / k2;
            psi[i] = Complex64::new(0.0, -1.0) * (wy[i] * kx - wx[i] * ky) / k2;
        }
    }
    let field = |v: Vec<f64>| ScalarField { n_rows: n, n_cols: n, data: v };
    Ok(HelmholtzParts {
        grad_phi: VectorField2 { comp_x: field(fft.inverse(gx)), comp_y: field(fft.inverse(gy)) },
        curl_psi: VectorField2 { comp_x: field(fft.inverse(cx)), comp_y: field(fft.inverse(cy)) },
        phi: field(fft.inverse(phi)),
        psi: field(fft.inverse(psi)),
        mean: [w.comp_x.mean(), w.comp_y.mean()],
    })
}

/// `c_S curl(psi) + c_P grad(phi)`.
pub fn weighted_recombine(parts: &HelmholtzParts, c_p: f64, c_s: f64) -> VectorField2 {
    parts.curl_psi.combine(c_s, &parts.grad_phi, c_p)
}
