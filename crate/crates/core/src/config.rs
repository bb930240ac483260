//! TOML run configuration shared by all CLI commands.
//!
//! ```toml
//! [model]
//! a = 3.61
//! b = 3.57
//! scales = [1.0, 0.5, 0.25, 0.125]
//!
//! [fit]
//! y_targets = [0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0]
//! m = 1.75
//!
//! [generate]
//! width = 60.0
//! height = 60.0
//! grid_nx = 20
//! grid_ny = 20
//! seed = 1
//!
//! [analyze]
//! num_bins = 30
//! range = [0.01, 10.0]
//! fit_range = [0.15, 1.5]
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::RegressionWeights;
use crate::distributions::{GammaParams, ScaleVector};
use crate::error::Error;
use crate::fit::{FitProblem, SolverConfig};
use crate::pointgen::DomainSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub fit: Option<FitSection>,
    pub generate: Option<GenerateSection>,
    #[serde(default)]
    pub analyze: AnalyzeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    pub scales: Vec<f64>,
}

fn default_a() -> f64 {
    GammaParams::default().a
}

fn default_b() -> f64 {
    GammaParams::default().b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub y_targets: Vec<f64>,
    pub m: f64,
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub width: f64,
    pub height: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    #[serde(default)]
    pub seed: u64,
    pub shuffle: Option<ShuffleSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuffleSection {
    pub num_swaps: usize,
    pub window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeSection {
    pub num_bins: usize,
    pub range: (f64, f64),
    pub fit_range: (f64, f64),
    pub slope_tolerance: f64,
    pub min_interior_cells: usize,
    pub exclude_boundary: bool,
    pub regression: RegressionWeights,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            num_bins: 30,
            range: (0.01, 10.0),
            fit_range: (0.15, 1.5),
            slope_tolerance: 0.2,
            min_interior_cells: 100,
            exclude_boundary: true,
            regression: RegressionWeights::Unweighted,
        }
    }
}

/// A configuration error, optionally anchored to a line of the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of `key = ...` inside `[section]`.
fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Line number of a byte offset.
fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(source).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of(source, s.start)),
            message: e.message().to_string(),
        })?;
        config.validate(source)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&source).map_err(|e| ConfigError {
            line: e.line,
            message: format!("{}: {}", path.display(), e.message),
        })
    }

    fn validate(&self, source: &str) -> Result<(), ConfigError> {
        let anchored = |section: &str, key: &str, err: Error| ConfigError {
            line: locate(source, section, key),
            message: format!("[{section}] {key}: {err}"),
        };
        let params = self.params().map_err(|e| {
            let key = if GammaParams::new(self.model.a, 1.0).is_err() {
                "a"
            } else {
                "b"
            };
            anchored("model", key, e)
        })?;
        let scales = self.scales().map_err(|e| anchored("model", "scales", e))?;
        if let Some(fit) = &self.fit {
            if !(fit.m.is_finite() && fit.m > 0.0) {
                return Err(anchored(
                    "fit",
                    "m",
                    Error::Domain(format!("exponent must be > 0, got {}", fit.m)),
                ));
            }
            FitProblem::new(
                params,
                scales.clone(),
                fit.y_targets.clone(),
                fit.m,
                fit.weights.clone(),
            )
            .map_err(|e| {
                let key = match &e {
                    Error::Argument(msg) | Error::Domain(msg) if msg.contains("weight") => {
                        "weights"
                    }
                    _ => "y_targets",
                };
                anchored("fit", key, e)
            })?;
        }
        if let Some(gen) = &self.generate {
            let domain = self
                .domain()
                .expect("generate section present")
                .map_err(|e| anchored("generate", "width", e))?;
            if let Some(shuffle) = &gen.shuffle {
                let limit = 0.5 * domain.width.min(domain.height);
                if !(shuffle.window > 0.0 && shuffle.window <= limit) {
                    return Err(anchored(
                        "generate.shuffle",
                        "window",
                        Error::Argument(format!(
                            "window must lie in (0, {limit}], got {}",
                            shuffle.window
                        )),
                    ));
                }
            }
        }
        let an = &self.analyze;
        if an.num_bins < 2 {
            return Err(anchored(
                "analyze",
                "num_bins",
                Error::Argument("at least 2 bins are required".into()),
            ));
        }
        if !(an.range.0 > 0.0 && an.range.1 > an.range.0 && an.range.1.is_finite()) {
            return Err(anchored(
                "analyze",
                "range",
                Error::Argument("range must satisfy 0 < min < max".into()),
            ));
        }
        if !(an.fit_range.0 < an.fit_range.1) {
            return Err(anchored(
                "analyze",
                "fit_range",
                Error::Argument("fit_range must satisfy min < max".into()),
            ));
        }
        if !(an.slope_tolerance >= 0.0) {
            return Err(anchored(
                "analyze",
                "slope_tolerance",
                Error::Argument("tolerance must be >= 0".into()),
            ));
        }
        Ok(())
    }

    pub fn params(&self) -> crate::Result<GammaParams> {
        GammaParams::new(self.model.a, self.model.b)
    }

    pub fn scales(&self) -> crate::Result<ScaleVector> {
        ScaleVector::new(self.model.scales.clone())
    }

    pub fn fit_problem(&self) -> Option<crate::Result<FitProblem>> {
        let fit = self.fit.as_ref()?;
        Some((|| {
            FitProblem::new(
                self.params()?,
                self.scales()?,
                fit.y_targets.clone(),
                fit.m,
                fit.weights.clone(),
            )
        })())
    }

    pub fn domain(&self) -> Option<crate::Result<DomainSpec>> {
        let g = self.generate.as_ref()?;
        Some(DomainSpec::new(g.width, g.height, g.grid_nx, g.grid_ny))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\nscales = [1.0]\n";

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.params().unwrap(), GammaParams::default());
        assert_eq!(c.analyze, AnalyzeSection::default());
        assert!(c.fit.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let err = RunConfig::parse("[model]\nscales = [1.0]\nbogus = 3\n").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("bogus"), "{err}");
    }

    #[test]
    fn negative_exponent_is_anchored() {
        let src = "[model]\nscales = [1.0]\n\n[fit]\ny_targets = [0.5, 1.0]\nm = -1.0\n";
        let err = RunConfig::parse(src).unwrap_err();
        assert_eq!(err.line, Some(6));
        assert!(err.to_string().starts_with("line 6: [fit] m"), "{err}");
    }

    #[test]
    fn bad_scales_and_window() {
        let err = RunConfig::parse("[model]\nscales = [0.5, 1.0]\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        let src = "[model]\nscales = [1.0]\n[generate]\nwidth = 10.0\nheight = 10.0\ngrid_nx = 2\ngrid_ny = 2\n[generate.shuffle]\nnum_swaps = 3\nwindow = 6.0\n";
        let err = RunConfig::parse(src).unwrap_err();
        assert_eq!(err.line, Some(10));
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let err = RunConfig::parse("[model]\nscales = [1.0,\n\n[fit\n").unwrap_err();
        assert!(err.line.is_some());
    }
}
