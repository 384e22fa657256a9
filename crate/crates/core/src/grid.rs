//! Simulation grid, scalar/vector fields and the image-domain crop.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Safety factor applied to the leapfrog limit when choosing substeps.
const CFL_SAFETY: f64 = 0.9;

/// Simulation box `[-beta/2, beta/2]^2` sampled on an `n_x x n_x` periodic grid.
///
/// `h_t` is the sampling step of the recorded traces. The solver advances with
/// `h_t / substeps`, which has to satisfy the stability bound of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub beta: f64,
    pub n_x: usize,
    pub h_x: f64,
    pub t_max: f64,
    pub n_t: usize,
    pub h_t: f64,
    pub lambda: f64,
    pub mu: f64,
    pub pml_width: usize,
    #[serde(default = "one")]
    pub substeps: usize,
}

fn one() -> usize {
    1
}

/// Builds a validated grid, choosing the smallest number of solver substeps per
/// `h_t` that keeps the scheme stable.
pub fn make_grid(
    beta: f64,
    n_x: usize,
    t_max: f64,
    n_t: usize,
    lambda: f64,
    mu: f64,
    pml_width: usize,
) -> Result<GridSpec> {
    if !(beta.is_finite() && beta > 0.0 && t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidGrid(format!("beta = {beta}, t_max = {t_max}")));
    }
    if !n_x.is_power_of_two() || n_x < 4 {
        return Err(Error::InvalidGrid(format!("n_x = {n_x} is not a power of two >= 4")));
    }
    if !n_t.is_power_of_two() {
        return Err(Error::InvalidGrid(format!("n_t = {n_t} is not a power of two")));
    }
    check_lame(lambda, mu)?;
    if 2 * pml_width >= n_x {
        return Err(Error::InvalidGrid(format!("pml_width {pml_width} too large for n_x {n_x}")));
    }
    let h_x = beta / n_x as f64;
    let h_t = t_max / n_t as f64;
    let c_p = (lambda + 2.0 * mu).sqrt();
    let target = CFL_SAFETY * leapfrog_limit(h_x, c_p);
    let substeps = (h_t / target).ceil().max(1.0) as usize;
    let grid = GridSpec { beta, n_x, h_x, t_max, n_t, h_t, lambda, mu, pml_width, substeps };
    grid.validate()?;
    Ok(grid)
}

/// Largest stable leapfrog step for the pseudo-spectral Lamé operator:
/// `dt * c_P * |k|_max <= 2` with `|k|_max = sqrt(2) * pi / h_x`.
fn leapfrog_limit(h_x: f64, c_p: f64) -> f64 {
    std::f64::consts::SQRT_2 * h_x / (std::f64::consts::PI * c_p)
}

fn check_lame(lambda: f64, mu: f64) -> Result<()> {
    if !(mu > 0.0 && lambda + 2.0 * mu > 0.0 && lambda.is_finite() && mu.is_finite()) {
        return Err(Error::InvalidLame { lambda, mu });
    }
    Ok(())
}

impl GridSpec {
    pub fn c_p(&self) -> f64 {
        (self.lambda + 2.0 * self.mu).sqrt()
    }

    pub fn c_s(&self) -> f64 {
        self.mu.sqrt()
    }

    /// Internal solver step.
    pub fn dt(&self) -> f64 {
        self.h_t / self.substeps as f64
    }

    /// The step bound `h_x / (c_P sqrt 2)` checked against the solver step.
    pub fn stability_bound(&self) -> f64 {
        self.h_x / (self.c_p() * std::f64::consts::SQRT_2)
    }

    /// Same grid with an explicit substep count.
    pub fn with_substeps(mut self, substeps: usize) -> Result<GridSpec> {
        self.substeps = substeps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_pml_width(mut self, pml_width: usize) -> Result<GridSpec> {
        self.pml_width = pml_width;
        self.validate()?;
        Ok(self)
    }

    /// Checks every stored invariant, including the redundant steps.
    pub fn validate(&self) -> Result<()> {
        check_lame(self.lambda, self.mu)?;
        if self.n_x == 0 || self.n_t == 0 || self.substeps == 0 {
            return Err(Error::InvalidGrid("zero-sized dimension".into()));
        }
        if self.h_x != self.beta / self.n_x as f64 {
            return Err(Error::InvalidGrid(format!("h_x {} != beta/n_x", self.h_x)));
        }
        if self.h_t != self.t_max / self.n_t as f64 {
            return Err(Error::InvalidGrid(format!("h_t {} != t_max/n_t", self.h_t)));
        }
        if 2 * self.pml_width >= self.n_x {
            return Err(Error::InvalidGrid("PML covers the whole box".into()));
        }
        let bound = self.stability_bound().min(leapfrog_limit(self.h_x, self.c_p()));
        if self.dt() > bound {
            return Err(Error::StabilityViolation { step: self.dt(), bound });
        }
        Ok(())
    }

    /// x (or y) coordinate of grid index `j`.
    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.beta + j as f64 * self.h_x
    }

    /// Square window covering `[-1, 1)^2`, the image domain.
    pub fn crop(&self) -> Crop {
        let start = ((0.5 * self.beta - 1.0) / self.h_x).round() as usize;
        let len = (2.0 / self.h_x).round() as usize;
        Crop { row0: start, col0: start, len }
    }

    /// Number of image pixels `Q`.
    pub fn q(&self) -> usize {
        let c = self.crop();
        c.len * c.len
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<GridSpec> {
        let g: GridSpec = serde_json::from_str(s)?;
        g.validate()?;
        Ok(g)
    }
}

/// Square sub-window of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crop {
    pub row0: usize,
    pub col0: usize,
    pub len: usize,
}

impl Crop {
    pub fn full(n: usize) -> Crop {
        Crop { row0: 0, col0: 0, len: n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, data: vec![0.0; n_rows * n_cols] }
    }

    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimMismatch(format!(
                "{} values for a {n_rows}x{n_cols} field",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        Ok(Self { n_rows, n_cols, data })
    }

    /// Field sampled from `f(x, y)` at the grid nodes.
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = grid.n_x;
        let mut data = Vec::with_capacity(n * n);
        for iy in 0..n {
            let y = grid.coord(iy);
            for ix in 0..n {
                data.push(f(grid.coord(ix), y));
            }
        }
        Self { n_rows: n, n_cols: n, data }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { data: self.data.iter().map(|v| a * v).collect(), ..*self }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.n_rows != grid.n_x || self.n_cols != grid.n_x {
            return Err(Error::DimMismatch(format!(
                "field is {}x{}, grid is {}x{}",
                self.n_rows, self.n_cols, grid.n_x, grid.n_x
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    pub comp_x: ScalarField,
    pub comp_y: ScalarField,
}

impl VectorField2 {
    pub fn new(comp_x: ScalarField, comp_y: ScalarField) -> Result<Self> {
        if comp_x.dims() != comp_y.dims() {
            return Err(Error::DimMismatch("components differ in shape".into()));
        }
        Ok(Self { comp_x, comp_y })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { comp_x: ScalarField::zeros(n_rows, n_cols), comp_y: ScalarField::zeros(n_rows, n_cols) }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.comp_x.dims()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { comp_x: self.comp_x.scale(a), comp_y: self.comp_y.scale(a) }
    }

    pub fn norm(&self) -> f64 {
        (self.comp_x.norm().powi(2) + self.comp_y.norm().powi(2)).sqrt()
    }

    /// Componentwise `a*self + b*other`.
    pub fn combine(&self, a: f64, other: &VectorField2, b: f64) -> Self {
        let lin = |p: &ScalarField, q: &ScalarField| ScalarField {
            data: p.data.iter().zip(&q.data).map(|(x, y)| a * x + b * y).collect(),
            ..*p
        };
        Self { comp_x: lin(&self.comp_x, &other.comp_x), comp_y: lin(&self.comp_y, &other.comp_y) }
    }

    /// Plain (unweighted) inner product of the stacked components.
    pub fn dot(&self, other: &VectorField2) -> f64 {
        let d = |p: &ScalarField, q: &ScalarField| p.data.iter().zip(&q.data).map(|(x, y)| x * y).sum::<f64>();
        d(&self.comp_x, &other.comp_x) + d(&self.comp_y, &other.comp_y)
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        self.comp_x.check_grid(grid)?;
        self.comp_y.check_grid(grid)
    }
}

/// Row-major raster of one field component over the image crop.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageVector {
    pub values: Vec<f64>,
    pub side: usize,
}

impl ImageVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField { n_rows: self.side, n_cols: self.side, data: self.values.clone() }
    }
}

pub fn field_to_image(field: &ScalarField, grid: &GridSpec) -> Result<ImageVector> {
    field.check_grid(grid)?;
    crop_to_image(field, grid.crop())
}

pub fn crop_to_image(field: &ScalarField, crop: Crop) -> Result<ImageVector> {
    if crop.row0 + crop.len > field.n_rows || crop.col0 + crop.len > field.n_cols {
        return Err(Error::DimMismatch("crop exceeds field".into()));
    }
    let mut values = Vec::with_capacity(crop.len * crop.len);
    for r in 0..crop.len {
        let start = (crop.row0 + r) * field.n_cols + crop.col0;
        values.extend_from_slice(&field.data[start..start + crop.len]);
    }
    Ok(ImageVector { values, side: crop.len })
}

/// Embeds an image into a zero grid field.
pub fn image_to_field(img: &ImageVector, grid: &GridSpec) -> Result<ScalarField> {
    let crop = grid.crop();
    let mut field = ScalarField::zeros(grid.n_x, grid.n_x);
    image_into_crop(img, &mut field, crop)?;
    Ok(field)
}

pub fn image_into_crop(img: &ImageVector, field: &mut ScalarField, crop: Crop) -> Result<()> {
    if img.side != crop.len || img.values.len() != crop.len * crop.len {
        return Err(Error::DimMismatch(format!("image side {} vs crop {}", img.side, crop.len)));
    }
    if crop.row0 + crop.len > field.n_rows || crop.col0 + crop.len > field.n_cols {
        return Err(Error::DimMismatch("crop exceeds field".into()));
    }
    for r in 0..crop.len {
        let start = (crop.row0 + r) * field.n_cols + crop.col0;
        field.data[start..start + crop.len].copy_from_slice(&img.values[r * crop.len..(r + 1) * crop.len]);
    }
    Ok(())
}

const MAGIC: &[u8; 4] = b"EFD1";

pub fn encode_field(field: &ScalarField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * field.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(field.n_rows as u32).to_le_bytes());
    out.extend_from_slice(&(field.n_cols as u32).to_le_bytes());
    for v in &field.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<ScalarField> {
    if bytes.len() < 12 {
        return Err(Error::TruncatedFile { expected: 12, found: bytes.len() });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let n_rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n_cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + 8 * n_rows * n_cols;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile { expected, found: bytes.len() });
    }
    let data: Vec<f64> = bytes[12..expected]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarField::new(n_rows, n_cols, data)
}

pub fn write_field(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_field(field))?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_field(&bytes)
}
