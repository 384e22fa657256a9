//! Time-reversal imaging `I_TR` and its Helmholtz-weighted variant `I_WTR`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elastic::{ElasticSolver, MeasurementSet};
use crate::error::{Error, Result};
use crate::grid::{field_to_image, write_field, GridSpec, ScalarField, VectorField2};
use crate::helmholtz::{decompose, weighted_recombine};
use crate::metrics::normalize_unit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrMeta {
    pub grid: GridSpec,
    pub detectors: usize,
    pub times: usize,
    /// Quadrature weight per trace sample.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TRImage {
    pub raw: VectorField2,
    pub weighted: VectorField2,
    pub meta: TrMeta,
}

impl TRImage {
    /// Writes `raw_x.efd`, `raw_y.efd`, `wtr_x.efd`, `wtr_y.efd` and `tr_meta.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_field(&self.raw.comp_x, dir.join("raw_x.efd"))?;
        write_field(&self.raw.comp_y, dir.join("raw_y.efd"))?;
        write_field(&self.weighted.comp_x, dir.join("wtr_x.efd"))?;
        write_field(&self.weighted.comp_y, dir.join("wtr_y.efd"))?;
        std::fs::write(dir.join("tr_meta.json"), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }
}

fn check_measurements(m: &MeasurementSet) -> Result<()> {
    if m.detectors.m() == 0 || m.detectors.n() == 0 {
        return Err(Error::EmptyMeasurements);
    }
    if m.traces.len() != 2 * m.detectors.m() * m.detectors.n() {
        return Err(Error::DimMismatch("trace count does not match detector array".into()));
    }
    Ok(())
}

/// `I_TR`: time-reversed traces injected at the detectors and propagated in a
/// single reversed sweep. This is the adjoint of [`crate::elastic::simulate`]
/// for the weighted trace product and the `h_x^2` grid product.
pub fn back_propagate(m: &MeasurementSet, grid: &GridSpec) -> Result<VectorField2> {
    check_measurements(m)?;
    ElasticSolver::new(grid)?.back_propagate(m)
}

/// `I_WTR = c_S curl(psi) + c_P grad(phi)` of the Helmholtz parts of `I_TR`.
pub fn weighted_time_reversal(m: &MeasurementSet, grid: &GridSpec) -> Result<TRImage> {
    let raw = back_propagate(m, grid)?;
    let weighted = weighted_recombine(&decompose(&raw, grid)?, grid.c_p(), grid.c_s());
    let meta = TrMeta {
        grid: *grid,
        detectors: m.detectors.m(),
        times: m.detectors.n(),
        weight: crate::elastic::trace_weight(m, grid),
    };
    Ok(TRImage { raw, weighted, meta })
}

/// Crop of one component mapped affinely onto `[0, 1]`, the form in which
/// reconstructions are compared with phantoms.
pub fn normalized_crop(field: &ScalarField, grid: &GridSpec) -> Result<ScalarField> {
    let img = field_to_image(field, grid)?;
    ScalarField::new(img.side, img.side, normalize_unit(&img.values))
}
