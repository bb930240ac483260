//! Interchange files: points CSV and manifest, cells JSON, histogram CSV and
//! analysis JSON. Every JSON file is a plain serde structure, so
//! `read(write(x)) == x` holds bit for bit (floats use shortest round-trip
//! formatting).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{AreaHistogram, BinDeviation, SlopeFit};
use crate::distributions::{AreaFractions, ScaleVector};
use crate::fit::FitResult;
use crate::geometry::{Point, Rect};
use crate::pointgen::{DomainSpec, ScaleAssignment, ShuffleReport};
use crate::voronoi::{Cell, CellSet};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {message}")]
    Row {
        path: String,
        row: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| IoError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| file_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Format {
        path: path.display().to_string(),
        message: format!("line {}: {e}", e.line()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRow {
    pub x: f64,
    pub y: f64,
    pub label: usize,
}

/// `x,y,label` with a header row.
pub fn write_points_csv(path: &Path, sites: &[Point], labels: &[usize]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| IoError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    for (p, &label) in sites.iter().zip(labels) {
        w.serialize(PointRow {
            x: p.x,
            y: p.y,
            label,
        })
        .map_err(|e| IoError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| file_err(path, e))
}

/// Reads `x,y,label` rows. Errors name the 1-based line of the offending row.
pub fn read_points_csv(path: &Path) -> Result<(Vec<Point>, Vec<usize>), IoError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| IoError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut sites = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in r.deserialize::<PointRow>().enumerate() {
        let row = row.map_err(|e| IoError::Row {
            path: path.display().to_string(),
            row: e.position().map(|p| p.line()).unwrap_or(i as u64 + 2),
            message: e.to_string(),
        })?;
        if !(row.x.is_finite() && row.y.is_finite()) {
            return Err(IoError::Row {
                path: path.display().to_string(),
                row: i as u64 + 2,
                message: "coordinates must be finite".into(),
            });
        }
        sites.push(Point::new(row.x, row.y));
        labels.push(row.label);
    }
    Ok((sites, labels))
}

/// Written next to the points CSV by `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsManifest {
    pub domain: DomainSpec,
    pub seed: u64,
    pub scales: ScaleVector,
    pub alpha: AreaFractions,
    pub num_points: usize,
    /// Points per scale class.
    pub class_counts: Vec<usize>,
    /// Subdomains per scale class.
    pub subdomain_counts: Vec<usize>,
    pub adjacency_penalty: f64,
    pub shuffle: Option<ShuffleRecord>,
    pub assignment: ScaleAssignment,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuffleRecord {
    pub window: f64,
    #[serde(flatten)]
    pub report: ShuffleReport,
}

/// Output of `tessellate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellsFile {
    pub domain: Rect,
    pub total_area: f64,
    pub relative_area_error: f64,
    pub interior_cells: usize,
    pub scales: Option<ScaleVector>,
    pub alpha: Option<AreaFractions>,
    /// Scale label of each site, when known.
    pub labels: Option<Vec<usize>>,
    pub cells: Vec<Cell>,
}

impl CellsFile {
    pub fn new(
        cells: CellSet,
        labels: Option<Vec<usize>>,
        scales: Option<ScaleVector>,
        alpha: Option<AreaFractions>,
    ) -> Self {
        Self {
            domain: cells.domain,
            total_area: cells.total_area(),
            relative_area_error: cells.relative_area_error(),
            interior_cells: cells.interior_count(),
            scales,
            alpha,
            labels,
            cells: cells.cells,
        }
    }

    pub fn cell_set(&self) -> CellSet {
        CellSet {
            cells: self.cells.clone(),
            domain: self.domain,
        }
    }
}

/// Output of `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisFile {
    pub total_cells: usize,
    pub included_cells: usize,
    pub exclude_boundary: bool,
    /// Area used to normalize number densities (total area of included cells).
    pub normalization_area: f64,
    pub histogram: AreaHistogram,
    pub slope: Option<SlopeFit>,
    pub target_slope: Option<f64>,
    pub slope_tolerance: f64,
    pub slope_within_tolerance: Option<bool>,
    pub comparison: Option<Vec<BinDeviation>>,
    pub warnings: Vec<String>,
}

/// `bin_center,count,density` with a header row.
pub fn write_histogram_csv(path: &Path, hist: &AreaHistogram) -> Result<(), IoError> {
    let mut out = String::from("bin_center,count,density\n");
    for ((c, n), d) in hist
        .bin_centers()
        .iter()
        .zip(&hist.counts)
        .zip(&hist.densities)
    {
        out.push_str(&format!("{c},{n},{d}\n"));
    }
    fs::write(path, out).map_err(|e| file_err(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin_center: f64,
    pub count: usize,
    pub density: f64,
}

pub fn read_histogram_csv(path: &Path) -> Result<Vec<HistogramRow>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| IoError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e: csv::Error| IoError::Row {
                path: path.display().to_string(),
                row: e.position().map(|p| p.line()).unwrap_or(i as u64 + 2),
                message: e.to_string(),
            })
        })
        .collect()
}

/// The `alpha` entry of a fit result, manifest, or bare `{"alpha": [...]}` file.
pub fn read_alpha(path: &Path) -> Result<AreaFractions, IoError> {
    #[derive(Deserialize)]
    struct AlphaOnly {
        alpha: AreaFractions,
    }
    read_json::<AlphaOnly>(path).map(|a| a.alpha)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    let mut f = fs::File::create(path).map_err(|e| file_err(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| file_err(path, e))
}

/// Output of `fit`: the result plus the problem it solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub alpha: AreaFractions,
    #[serde(rename = "A")]
    pub log_amplitude: f64,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub projected_gradient_norm: f64,
    pub start: usize,
    pub scales: ScaleVector,
    pub y_targets: Vec<f64>,
    pub weights: Vec<f64>,
    pub m: f64,
}

impl FitFile {
    pub fn new(result: FitResult, problem: &crate::fit::FitProblem) -> Self {
        Self {
            alpha: result.alpha,
            log_amplitude: result.log_amplitude,
            objective: result.objective,
            converged: result.converged,
            iterations: result.iterations,
            projected_gradient_norm: result.projected_gradient_norm,
            start: result.start,
            scales: problem.scales().clone(),
            y_targets: problem.y_targets().to_vec(),
            weights: problem.weights().to_vec(),
            m: problem.m(),
        }
    }
}
