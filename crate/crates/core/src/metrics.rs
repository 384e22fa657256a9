//! Image quality metrics: the printed PSNR formula, conventional PSNR and
//! global SSIM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub psnr_conventional: f64,
    pub ssim: f64,
    pub mse: f64,
    pub dims: (usize, usize),
}

fn check_dims(a: &ScalarField, b: &ScalarField) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimMismatch(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    if a.data.is_empty() {
        return Err(Error::DimMismatch("empty image".into()));
    }
    Ok(())
}

/// `20 log10(N M ||f_hat||_inf^2 / ||f_hat - f*||_2)`, as printed.
pub fn psnr(reconstructed: &ScalarField, truth: &ScalarField) -> Result<f64> {
    check_dims(reconstructed, truth)?;
    let diff = reconstructed.data.iter().zip(&truth.data).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if diff == 0.0 {
        return Err(Error::IdenticalImages);
    }
    let sup = reconstructed.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let count = (reconstructed.n_rows * reconstructed.n_cols) as f64;
    Ok(20.0 * (count * sup * sup / diff).log10())
}

pub fn mse(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.data.len() as f64)
}

/// `10 log10(peak^2 / MSE)` with `peak = max |truth|`.
pub fn psnr_conventional(reconstructed: &ScalarField, truth: &ScalarField) -> Result<f64> {
    let e = mse(reconstructed, truth)?;
    if e == 0.0 {
        return Err(Error::IdenticalImages);
    }
    let peak = truth.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(10.0 * (peak * peak / e).log10())
}

/// Single-window SSIM with `c1 = (0.01 xi)^2`, `c2 = (0.03 xi)^2`.
pub fn ssim(a: &ScalarField, b: &ScalarField, dynamic_range: f64) -> Result<f64> {
    check_dims(a, b)?;
    if !(dynamic_range > 0.0) {
        return Err(Error::InvalidParameter(format!("dynamic range {dynamic_range}")));
    }
    let n = a.data.len() as f64;
    let mu_a = a.data.iter().sum::<f64>() / n;
    let mu_b = b.data.iter().sum::<f64>() / n;
    let cov = |x: &[f64], mx: f64, y: &[f64], my: f64| {
        x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / n
    };
    let var_a = cov(&a.data, mu_a, &a.data, mu_a);
    let var_b = cov(&b.data, mu_b, &b.data, mu_b);
    let cross = cov(&a.data, mu_a, &b.data, mu_b);
    let c1 = (0.01 * dynamic_range).powi(2);
    let c2 = (0.03 * dynamic_range).powi(2);
    let num = (2.0 * (mu_a * mu_b) + c1) * (2.0 * cross + c2);
    let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
    Ok(num / den)
}

/// Both PSNR variants and SSIM of a reconstruction against the truth.
pub fn report(reconstructed: &ScalarField, truth: &ScalarField, dynamic_range: f64) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr_db: psnr(reconstructed, truth)?,
        psnr_conventional: psnr_conventional(reconstructed, truth)?,
        ssim: ssim(reconstructed, truth, dynamic_range)?,
        mse: mse(reconstructed, truth)?,
        dims: reconstructed.dims(),
    })
}

/// Pearson correlation of two images.
pub fn ncc(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Affine map of the values onto `[0, 1]`; constant images map to zero.
pub fn normalize_unit(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; values.len()]
    }
}
