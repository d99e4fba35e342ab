use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fit::Fit;
use super::sweep::{LimitSource, SweepConfig, SweepPoint, SweepResult};
use crate::criteria::SCHEMA_VERSION;
use crate::error::{Error, Result};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

/// One row of `sweep.csv`. Empty cells stand for a failed run (`error`) or
/// disabled timing (`wall_ms`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub error: Option<f64>,
    pub dt: f64,
    /// Cells per axis joined by `x`, e.g. `128x128`.
    pub cells: String,
    pub wall_ms: Option<u64>,
}

impl From<&SweepPoint> for SweepRow {
    fn from(p: &SweepPoint) -> Self {
        Self {
            eps: p.eps,
            error: p.error,
            dt: p.dt,
            cells: p.cells.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("x"),
            wall_ms: p.wall_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub model: String,
    pub config: SweepConfig,
    pub seed: u64,
    pub limit: LimitSource,
    pub fit: Option<Fit>,
    pub slope_window: (f64, f64),
    pub passed: bool,
    pub monotone: bool,
    pub diverged: bool,
    pub points: Vec<SweepPoint>,
}

impl Manifest {
    pub fn new(result: &SweepResult) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            model: result.model_id.clone(),
            config: result.config.clone(),
            seed: result.config.seed,
            limit: result.limit,
            fit: result.fit,
            slope_window: super::SLOPE_WINDOW,
            passed: result.passed(),
            monotone: result.monotone,
            diverged: result.diverged,
            points: result.points.clone(),
        }
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serde(format!("{}: {other:?}", path.display())),
    }
}

/// Writes `sweep.csv` and `manifest.json` into `dir` (created if missing) and
/// returns their paths.
pub fn persist_result(result: &SweepResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(SWEEP_CSV);
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err(&csv_path))?;
    for p in &result.points {
        w.serialize(SweepRow::from(p)).map_err(csv_err(&csv_path))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let manifest_path = dir.join(MANIFEST_JSON);
    let json = serde_json::to_string_pretty(&Manifest::new(result)).map_err(|e| Error::Serde(e.to_string()))?;
    fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(&manifest_path, e))?;
    Ok((csv_path, manifest_path))
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))
}
