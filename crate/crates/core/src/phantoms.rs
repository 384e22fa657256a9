//! Random-ellipse and Shepp-Logan phantoms, and measurement noise.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::elastic::MeasurementSet;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, VectorField2};
use crate::rng::CounterRng;

const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseSpec {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    pub angle: f64,
    pub intensity: f64,
}

impl EllipseSpec {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let (s, c) = self.angle.sin_cos();
        let xr = dx * c + dy * s;
        let yr = -dx * s + dy * c;
        (xr / self.semi_axes[0]).powi(2) + (yr / self.semi_axes[1]).powi(2) <= 1.0
    }

    /// Radius of a disc about the origin that contains the ellipse.
    pub fn reach(&self) -> f64 {
        self.center[0].hypot(self.center[1]) + self.semi_axes[0].max(self.semi_axes[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomImage {
    pub image: ScalarField,
    pub ellipses: Vec<EllipseSpec>,
    pub seed: u64,
}

/// Radius of the admissible support disc.
pub fn support_radius(grid: &GridSpec) -> f64 {
    1.0 - 4.0 * grid.h_x
}

fn rasterize(ellipses: &[EllipseSpec], grid: &GridSpec) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.intensity).sum())
}

/// Min-max normalization of the raster, restricted to the support disc.
///
/// The background is part of the raster, so with negative intensities it maps
/// above zero; it is cut to the support disc to keep the source inside the
/// domain.
fn normalize_in_disc(raw: &ScalarField, grid: &GridSpec) -> Option<ScalarField> {
    let lo = raw.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return None;
    }
    let r = support_radius(grid);
    let n = grid.n_x;
    let data = raw
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| if grid.coord(i % n).hypot(grid.coord(i / n)) <= r { (v - lo) / (hi - lo) } else { 0.0 })
        .collect();
    Some(ScalarField { data, ..*raw })
}

fn draw_ellipse(rng: &mut CounterRng, grid: &GridSpec) -> EllipseSpec {
    let min_axis = 2.0 * grid.h_x;
    loop {
        let center = [rng.uniform(-0.375, 0.375), rng.uniform(-0.375, 0.375)];
        let mut axis = || loop {
            let a = rng.uniform(-0.525, 0.525).abs();
            if a >= min_axis {
                return a;
            }
        };
        let semi_axes = [axis(), axis()];
        let angle = rng.uniform(-PI, PI);
        let intensity = rng.uniform(-10.0, 10.0);
        let e = EllipseSpec { center, semi_axes, angle, intensity };
        if e.reach() <= support_radius(grid) {
            return e;
        }
    }
}

/// One to ten random ellipses with signed intensities, min-max normalized.
pub fn random_phantom(seed: u64, grid: &GridSpec) -> Result<PhantomImage> {
    let mut rng = CounterRng::new(seed);
    for _ in 0..MAX_REDRAWS {
        let count = rng.range_inclusive(1, 10) as usize;
        let ellipses: Vec<EllipseSpec> = (0..count).map(|_| draw_ellipse(&mut rng, grid)).collect();
        if let Some(image) = normalize_in_disc(&rasterize(&ellipses, grid), grid) {
            return Ok(PhantomImage { image, ellipses, seed });
        }
    }
    Err(Error::DegenerateImage)
}

/// Ellipse table of the modified Shepp-Logan phantom:
/// intensity, semi-axes, centre, rotation in degrees.
const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

pub fn shepp_logan_ellipses(scale: f64) -> Vec<EllipseSpec> {
    SHEPP_LOGAN
        .iter()
        .map(|r| EllipseSpec {
            center: [scale * r[3], scale * r[4]],
            semi_axes: [scale * r[1], scale * r[2]],
            angle: r[5].to_radians(),
            intensity: r[0],
        })
        .collect()
}

/// Modified Shepp-Logan phantom shrunk by `scale`, normalized to `[0, 1]`.
pub fn shepp_logan(grid: &GridSpec, scale: f64) -> Result<PhantomImage> {
    let ellipses = shepp_logan_ellipses(scale);
    if ellipses[0].reach() > support_radius(grid) {
        return Err(Error::InvalidParameter(format!("scale {scale} leaves the support disc")));
    }
    let image = normalize_in_disc(&rasterize(&ellipses, grid), grid).ok_or(Error::DegenerateImage)?;
    Ok(PhantomImage { image, ellipses, seed: 0 })
}

/// Source density from phantoms: `x` drives the first component, the second is
/// an independent phantom or zero.
pub fn source_from_phantoms(x: &PhantomImage, y: Option<&PhantomImage>) -> VectorField2 {
    let comp_y = match y {
        Some(p) => p.image.clone(),
        None => ScalarField::zeros(x.image.n_rows, x.image.n_cols),
    };
    VectorField2 { comp_x: x.image.clone(), comp_y }
}

/// Adds white Gaussian noise at the requested SNR (dB). `f64::INFINITY`
/// returns the measurements unchanged.
pub fn add_noise(m: &MeasurementSet, snr_db: f64, seed: u64) -> Result<MeasurementSet> {
    if snr_db == f64::INFINITY {
        return Ok(m.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!("snr {snr_db}")));
    }
    let power = m.traces.iter().map(|v| v * v).sum::<f64>() / m.traces.len() as f64;
    if power == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = CounterRng::with_stream(seed, 0x6e6f_6973_65);
    let traces = m.traces.iter().map(|v| v + sigma * rng.normal()).collect();
    Ok(MeasurementSet { detectors: m.detectors.clone(), traces })
}
