//! Files written by the subcommands: CSV tables, PNG renderings, manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use elastic_imaging::elastic::{DetectorArray, MeasurementSet};
use elastic_imaging::grid::ScalarField;
use elastic_imaging::metrics::normalize_unit;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bad invocation or configuration; exits with status 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Grayscale rendering, min-max scaled; row 0 is the bottom of the image.
pub fn write_png(field: &ScalarField, path: &Path) -> Result<()> {
    let (rows, cols) = field.dims();
    let unit = normalize_unit(&field.data);
    let mut px = Vec::with_capacity(rows * cols);
    for r in (0..rows).rev() {
        px.extend(unit[r * cols..(r + 1) * cols].iter().map(|v| (v * 255.0).round() as u8));
    }
    let img = image::GrayImage::from_raw(cols as u32, rows as u32, px).context("image buffer size")?;
    img.save(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    component: usize,
    time_index: usize,
    detector: usize,
    value: f64,
}

/// `measurements.csv` plus the `detectors.json` needed to read it back.
pub fn write_measurements(m: &MeasurementSet, dir: &Path) -> Result<Vec<PathBuf>> {
    let (mm, nn) = (m.detectors.m(), m.detectors.n());
    let mut rows = Vec::with_capacity(m.traces.len());
    for i in 0..2 {
        for n in 0..nn {
            for d in 0..mm {
                rows.push(vec![i.to_string(), n.to_string(), d.to_string(), fmt17(m.get(i, n, d))]);
            }
        }
    }
    let csv_path = dir.join("measurements.csv");
    write_csv(&csv_path, &["component", "time_index", "detector", "value"], &rows)?;
    let det_path = dir.join("detectors.json");
    std::fs::write(&det_path, serde_json::to_string_pretty(&m.detectors)?)?;
    Ok(vec![csv_path, det_path])
}

pub fn read_measurements(dir: &Path) -> Result<MeasurementSet> {
    let det: DetectorArray = serde_json::from_str(
        &std::fs::read_to_string(dir.join("detectors.json")).with_context(|| format!("reading {}", dir.display()))?,
    )?;
    let mut m = MeasurementSet::zeros(det);
    let (mm, nn) = (m.detectors.m(), m.detectors.n());
    let mut seen = 0;
    for row in csv::Reader::from_path(dir.join("measurements.csv"))?.deserialize() {
        let row: TraceRow = row?;
        if row.component > 1 || row.time_index >= nn || row.detector >= mm {
            anyhow::bail!("trace row out of range: {row:?}");
        }
        let idx = m.index(row.component, row.time_index, row.detector);
        m.traces[idx] = row.value;
        seen += 1;
    }
    if seen != m.traces.len() {
        anyhow::bail!("expected {} trace rows, found {seen}", m.traces.len());
    }
    Ok(MeasurementSet::new(m.detectors, m.traces)?)
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub tolerances: BTreeMap<&'static str, f64>,
    pub outputs: Vec<String>,
}

/// SHA-256 of the compact JSON form; object keys are sorted, so equal
/// configurations hash equally.
pub fn config_hash(config: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            version: elastic_imaging::VERSION,
            config_hash: config_hash(&config),
            config,
            seed,
            tolerances: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_outputs(&mut self, dir: &Path, paths: impl IntoIterator<Item = PathBuf>) {
        for p in paths {
            let rel = p.strip_prefix(dir).unwrap_or(&p);
            self.outputs.push(rel.display().to_string());
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
