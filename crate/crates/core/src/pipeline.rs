//! End-to-end experiment: phantom, simulated measurements, reconstruction and
//! metrics. The CLI writes the artifacts; everything here is in memory.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::elastic::{simulate, DetectorArray, MeasurementSet};
use crate::error::{Error, Result};
use crate::framelets::{right_singular_vectors, FrameletBasis, LayerSpec};
use crate::grid::{make_grid, GridSpec, ScalarField, VectorField2};
use crate::hankel::lift;
use crate::metrics::{ncc, report, MetricReport};
use crate::phantoms::{add_noise, random_phantom, shepp_logan, source_from_phantoms, PhantomImage};
use crate::time_reversal::{normalized_crop, weighted_time_reversal, TRImage};
use crate::tv::{tv_denoise, TVParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "tr")]
    Tr,
    #[serde(rename = "wtr")]
    Wtr,
    #[serde(rename = "wtr+tv")]
    WtrTv,
    #[serde(rename = "wtr+framelet")]
    WtrFramelet,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Tr, Method::Wtr, Method::WtrTv, Method::WtrFramelet];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tr => "tr",
            Method::Wtr => "wtr",
            Method::WtrTv => "wtr+tv",
            Method::WtrFramelet => "wtr+framelet",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

/// Arguments of [`make_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub beta: f64,
    pub n_x: usize,
    pub t_max: f64,
    pub n_t: usize,
    pub lambda: f64,
    pub mu: f64,
    pub pml_width: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { beta: 4.0, n_x: 128, t_max: 2.0, n_t: 64, lambda: 1.0, mu: 1.0, pml_width: 16 }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<GridSpec> {
        make_grid(self.beta, self.n_x, self.t_max, self.n_t, self.lambda, self.mu, self.pml_width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    Random,
    SheppLogan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub kind: PhantomKind,
    pub seed: u64,
    /// Shrink factor of the Shepp-Logan table.
    pub scale: f64,
    /// Draw an independent phantom for the second component instead of zero.
    pub second_component: bool,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self { kind: PhantomKind::Random, seed: 0, scale: 0.9, second_component: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameletConfig {
    pub pencil: usize,
    pub rank: usize,
    pub relu: bool,
    /// Learned filters; without them the filters are the leading right
    /// singular vectors of the lifted image.
    pub basis: Option<PathBuf>,
}

impl Default for FrameletConfig {
    fn default() -> Self {
        Self { pencil: 8, rank: 4, relu: false, basis: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub grid: GridConfig,
    pub detectors: usize,
    pub times: usize,
    pub phantom: PhantomConfig,
    /// `None` for clean measurements.
    pub snr_db: Option<f64>,
    pub noise_seed: u64,
    pub method: Method,
    pub tv: TVParams,
    pub framelet: FrameletConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            detectors: 64,
            times: 64,
            phantom: PhantomConfig::default(),
            snr_db: None,
            noise_seed: 1,
            method: Method::Wtr,
            tv: TVParams::default(),
            framelet: FrameletConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Seeds both the phantom and the noise from one value.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.phantom.seed = seed;
        self.noise_seed = seed.wrapping_add(1);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub method: Method,
    pub detectors: usize,
    pub times: usize,
    pub snr_db: Option<f64>,
    /// First component against the phantom, both cropped and scaled to `[0, 1]`.
    pub metrics: MetricReport,
    pub ncc: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub grid: GridSpec,
    pub phantoms: Vec<PhantomImage>,
    pub source: VectorField2,
    pub measurements: MeasurementSet,
    pub images: TRImage,
    /// Reconstruction of each component on the image crop, in `[0, 1]`.
    pub reconstruction: [ScalarField; 2],
    pub truth: ScalarField,
    pub report: PipelineReport,
}

pub fn make_phantoms(cfg: &PhantomConfig, grid: &GridSpec) -> Result<Vec<PhantomImage>> {
    let one = |seed| match cfg.kind {
        PhantomKind::Random => random_phantom(seed, grid),
        PhantomKind::SheppLogan => shepp_logan(grid, cfg.scale),
    };
    let mut out = vec![one(cfg.seed)?];
    if cfg.second_component {
        out.push(random_phantom(cfg.seed.wrapping_add(0x9e37_79b9), grid)?);
    }
    Ok(out)
}

/// Local-filter projection of an image vector with identity pooling.
pub fn framelet_filter(v: &[f64], cfg: &FrameletConfig) -> Result<Vec<f64>> {
    let (psi, psi_dual) = match &cfg.basis {
        Some(path) => {
            let b = FrameletBasis::from_json_unchecked(&std::fs::read_to_string(path)?)?;
            (b.psi, b.psi_dual)
        }
        None => {
            let psi = right_singular_vectors(&lift(v, cfg.pencil)?.matrix, cfg.rank);
            (psi.clone(), psi)
        }
    };
    if psi.nrows() >= v.len() {
        return Err(Error::BadPencil { pencil: psi.nrows(), len: v.len() });
    }
    let layer = LayerSpec::from_stacked(&psi, &psi_dual, 1);
    let mut coeff = layer.encode(&DMatrix::from_column_slice(v.len(), 1, v));
    if cfg.relu {
        coeff.apply(|c| *c = c.max(0.0));
    }
    Ok(layer.decode(&coeff).column(0).iter().cloned().collect())
}

fn postprocess(img: &ScalarField, cfg: &PipelineConfig) -> Result<ScalarField> {
    match cfg.method {
        Method::Tr | Method::Wtr => Ok(img.clone()),
        Method::WtrTv => tv_denoise(img, &cfg.tv),
        Method::WtrFramelet => {
            let out = framelet_filter(&img.data, &cfg.framelet)?;
            Ok(ScalarField { data: crate::metrics::normalize_unit(&out), ..*img })
        }
    }
}

/// Reconstruction and metrics from given measurements.
pub fn reconstruct(m: &MeasurementSet, grid: &GridSpec, cfg: &PipelineConfig) -> Result<(TRImage, [ScalarField; 2])> {
    let images = weighted_time_reversal(m, grid)?;
    let field = if cfg.method == Method::Tr { &images.raw } else { &images.weighted };
    let x = postprocess(&normalized_crop(&field.comp_x, grid)?, cfg)?;
    let y = postprocess(&normalized_crop(&field.comp_y, grid)?, cfg)?;
    Ok((images, [x, y]))
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun> {
    let grid = cfg.grid.build()?;
    let detectors = DetectorArray::uniform(cfg.detectors, cfg.times, &grid)?;
    let phantoms = make_phantoms(&cfg.phantom, &grid)?;
    let source = source_from_phantoms(&phantoms[0], phantoms.get(1));
    let clean = simulate(&source, &grid, &detectors)?;
    let measurements = match cfg.snr_db {
        Some(snr) => add_noise(&clean, snr, cfg.noise_seed)?,
        None => clean,
    };
    let (images, reconstruction) = reconstruct(&measurements, &grid, cfg)?;
    let truth = normalized_crop(&source.comp_x, &grid)?;
    let report = PipelineReport {
        method: cfg.method,
        detectors: cfg.detectors,
        times: cfg.times,
        snr_db: cfg.snr_db,
        metrics: report(&reconstruction[0], &truth, 1.0)?,
        ncc: ncc(&reconstruction[0].data, &truth.data),
    };
    Ok(PipelineRun { grid, phantoms, source, measurements, images, reconstruction, truth, report })
}
