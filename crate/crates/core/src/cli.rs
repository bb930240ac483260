//! Command-line front end: `fit`, `generate`, `tessellate`, `analyze` and
//! `pipeline`, exchanging CSV and JSON files.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 quality or
//! convergence warning (outputs are still written).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_slope_weighted, histogram, log_edges, model_comparison, AreaHistogram};
use crate::config::{ConfigError, RunConfig};
use crate::distributions::{mixture_density, AreaFractions, ScaleVector};
use crate::fit::solve;
use crate::geometry::Rect;
use crate::io::{self, AnalysisFile, CellsFile, FitFile, IoError, PointsManifest, ShuffleRecord};
use crate::pointgen::{
    adjacency_penalty, assign_scales, sample_points, shuffle_regions, PointCloud,
};
use crate::voronoi::{cell_areas, tessellate_sites};
use crate::{svg, Error};

pub const FIT_FILE: &str = "fit.json";
pub const POINTS_FILE: &str = "points.csv";
pub const POINTS_MANIFEST: &str = "points.json";
pub const CELLS_FILE: &str = "cells.json";
pub const CELLS_SVG: &str = "cells.svg";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const DISTRIBUTION_SVG: &str = "distribution.svg";
pub const RUN_MANIFEST: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(
    name = "voronoi-area",
    version,
    about = "Voronoi cell-area mixtures matching a power-law target"
)]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the area fractions alpha.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Generate a point cloud for given area fractions.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// JSON file with an `alpha` array (e.g. the output of `fit`).
        /// May be omitted for a single scale.
        #[arg(long)]
        alpha: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Compute clipped Voronoi cells of a points CSV.
    Tessellate {
        #[arg(long)]
        points: PathBuf,
        /// Points manifest giving the domain; defaults to the CSV path with a
        /// `.json` extension.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, requires = "height")]
        width: Option<f64>,
        #[arg(long, requires = "width")]
        height: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Histogram, slope fit and model comparison of a cells file.
    Analyze {
        #[arg(long)]
        cells: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<PathBuf>,
        #[command(flatten)]
        boundary: BoundaryArg,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// fit, generate, tessellate and analyze into one run directory.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "run")]
        out: PathBuf,
        #[command(flatten)]
        boundary: BoundaryArg,
    },
}

#[derive(Debug, Args)]
pub struct BoundaryArg {
    /// Drop cells touching the domain boundary (default from config, true).
    #[arg(long, action = ArgAction::Set, value_name = "BOOL")]
    pub exclude_boundary: Option<bool>,
}

/// Command failure, reported with exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(#[from] IoError),
    #[error("{0}")]
    Model(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

/// Successful completion, possibly with warnings (exit code 2).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub warnings: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.warnings.is_empty() {
            0
        } else {
            2
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Io(IoError::File {
            path: dir.display().to_string(),
            source,
        })
    })
}

pub fn cmd_fit(config: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let fit = config
        .fit
        .as_ref()
        .ok_or_else(|| CliError::Usage("config has no [fit] section".into()))?;
    let problem = config.fit_problem().expect("fit section present")?;
    let result = solve(&problem, &fit.solver)?;
    let mut outcome = Outcome::default();
    if !result.converged {
        outcome.warnings.push(format!(
            "fit did not converge after {} iterations (projected gradient norm {:.3e})",
            result.iterations, result.projected_gradient_norm
        ));
    }
    ensure_dir(out)?;
    let path = out.join(FIT_FILE);
    io::write_json(&path, &FitFile::new(result, &problem))?;
    outcome.outputs.push(path);
    Ok(outcome)
}

fn default_alpha(scales: &ScaleVector) -> Result<AreaFractions, CliError> {
    if scales.len() == 1 {
        Ok(AreaFractions::unit(1, 0)?)
    } else {
        Err(CliError::Usage(format!(
            "{} scales need an alpha file",
            scales.len()
        )))
    }
}

/// Build the point cloud described by the `[generate]` section.
pub fn build_cloud(
    config: &RunConfig,
    alpha: &AreaFractions,
    seed: u64,
) -> Result<(PointCloud, PointsManifest), CliError> {
    let gen = config
        .generate
        .as_ref()
        .ok_or_else(|| CliError::Usage("config has no [generate] section".into()))?;
    let domain = config.domain().expect("generate section present")?;
    let scales = config.scales()?;
    if alpha.len() != scales.len() {
        return Err(CliError::Usage(format!(
            "alpha has {} entries but the config lists {} scales",
            alpha.len(),
            scales.len()
        )));
    }
    let assignment = assign_scales(&domain, alpha, &scales, seed)?;
    let mut cloud = sample_points(&domain, &assignment, &scales, seed)?;
    let mut shuffle = None;
    if let Some(sh) = &gen.shuffle {
        let (shuffled, report) = shuffle_regions(&cloud, sh.num_swaps, sh.window, seed)?;
        cloud = shuffled;
        shuffle = Some(ShuffleRecord {
            window: sh.window,
            report,
        });
    }
    let manifest = PointsManifest {
        domain,
        seed,
        scales: scales.clone(),
        alpha: alpha.clone(),
        num_points: cloud.len(),
        class_counts: cloud.class_counts(scales.len()),
        subdomain_counts: assignment.counts(scales.len()),
        adjacency_penalty: adjacency_penalty(&assignment, &scales),
        shuffle,
        assignment,
        warnings: domain.warning().into_iter().collect(),
    };
    Ok((cloud, manifest))
}

pub fn cmd_generate(
    config: &RunConfig,
    alpha: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> Result<Outcome, CliError> {
    let scales = config.scales()?;
    let alpha = match alpha {
        Some(path) => io::read_alpha(path)?,
        None => default_alpha(&scales)?,
    };
    let seed = seed
        .or(config.generate.as_ref().map(|g| g.seed))
        .unwrap_or(0);
    let (cloud, manifest) = build_cloud(config, &alpha, seed)?;
    ensure_dir(out)?;
    let csv_path = out.join(POINTS_FILE);
    let manifest_path = out.join(POINTS_MANIFEST);
    io::write_points_csv(&csv_path, &cloud.sites, &cloud.labels)?;
    io::write_json(&manifest_path, &manifest)?;
    // Domain-shape advice is informational and does not change the exit code.
    for w in &manifest.warnings {
        eprintln!("note: {w}");
    }
    Ok(Outcome {
        warnings: Vec::new(),
        outputs: vec![csv_path, manifest_path],
    })
}

pub fn cmd_tessellate(
    points: &Path,
    manifest: Option<&Path>,
    size: Option<(f64, f64)>,
    out: &Path,
) -> Result<Outcome, CliError> {
    let (sites, labels) = io::read_points_csv(points)?;
    if sites.is_empty() {
        return Err(CliError::Usage(format!("{}: no points", points.display())));
    }
    let default_manifest = points.with_extension("json");
    let manifest_path = manifest
        .map(Path::to_path_buf)
        .or_else(|| (size.is_none() && default_manifest.exists()).then_some(default_manifest));
    let points_manifest: Option<PointsManifest> = match &manifest_path {
        Some(p) => Some(io::read_json(p)?),
        None => None,
    };
    let domain = match (size, &points_manifest) {
        (Some((w, h)), _) => Rect::new(w, h),
        (None, Some(m)) => m.domain.rect(),
        (None, None) => {
            return Err(CliError::Usage(
                "domain unknown: pass --manifest or --width and --height".into(),
            ))
        }
    };
    let cells = tessellate_sites(&sites, domain)?;
    let file = CellsFile::new(
        cells,
        Some(labels),
        points_manifest.as_ref().map(|m| m.scales.clone()),
        points_manifest.map(|m| m.alpha),
    );
    ensure_dir(out)?;
    let json = out.join(CELLS_FILE);
    let picture = out.join(CELLS_SVG);
    io::write_json(&json, &file)?;
    io::write_text(
        &picture,
        &svg::cells_svg(&file.cell_set(), file.labels.as_deref()),
    )?;
    Ok(Outcome {
        warnings: Vec::new(),
        outputs: vec![json, picture],
    })
}

/// Analysis of a cells file under the `[analyze]` settings of `config`.
pub fn analyze_cells(
    cells: &CellsFile,
    config: &RunConfig,
    alpha: Option<AreaFractions>,
    exclude_boundary: bool,
) -> Result<AnalysisFile, CliError> {
    let settings = &config.analyze;
    let set = cells.cell_set();
    let areas = cell_areas(&set, exclude_boundary);
    let normalization_area: f64 = areas.iter().sum();
    let mut warnings = Vec::new();
    if areas.len() < settings.min_interior_cells {
        warnings.push(format!(
            "only {} cells included, at least {} are needed for reliable statistics",
            areas.len(),
            settings.min_interior_cells
        ));
    }
    let histogram = if areas.is_empty() {
        let bin_edges = log_edges(settings.range.0, settings.range.1, settings.num_bins);
        AreaHistogram {
            bin_edges,
            counts: vec![0; settings.num_bins],
            densities: vec![0.0; settings.num_bins],
            domain_area: 0.0,
            dropped_below: 0,
            dropped_above: 0,
        }
    } else {
        histogram(
            &areas,
            normalization_area,
            settings.num_bins,
            settings.range,
        )?
    };
    let slope = match fit_slope_weighted(&histogram, settings.fit_range, settings.regression) {
        Ok(fit) => Some(fit),
        Err(e) => {
            warnings.push(format!("no slope fit: {e}"));
            None
        }
    };
    let target_slope = config.fit.as_ref().map(|f| -f.m);
    let slope_within_tolerance = match (&slope, target_slope) {
        (Some(fit), Some(target)) => Some((fit.slope - target).abs() <= settings.slope_tolerance),
        _ => None,
    };
    let scales = match &cells.scales {
        Some(s) => Some(s.clone()),
        None => config.scales().ok(),
    };
    let alpha = alpha.or_else(|| cells.alpha.clone()).or_else(|| {
        scales
            .as_ref()
            .filter(|s| s.len() == 1)
            .and_then(|_| AreaFractions::unit(1, 0).ok())
    });
    let comparison = match (&scales, &alpha) {
        (Some(s), Some(a)) if s.len() == a.len() && histogram.total_count() > 0 => {
            Some(model_comparison(&histogram, &config.params()?, s, a)?)
        }
        (Some(s), Some(a)) if s.len() != a.len() => {
            return Err(CliError::Usage(format!(
                "alpha has {} entries but there are {} scales",
                a.len(),
                s.len()
            )))
        }
        _ => None,
    };
    Ok(AnalysisFile {
        total_cells: set.cells.len(),
        included_cells: areas.len(),
        exclude_boundary,
        normalization_area,
        histogram,
        slope,
        target_slope,
        slope_tolerance: settings.slope_tolerance,
        slope_within_tolerance,
        comparison,
        warnings,
    })
}

pub fn cmd_analyze(
    cells_path: &Path,
    config: &RunConfig,
    alpha: Option<&Path>,
    exclude_boundary: Option<bool>,
    out: &Path,
) -> Result<Outcome, CliError> {
    let cells: CellsFile = io::read_json(cells_path)?;
    let alpha = alpha.map(io::read_alpha).transpose()?;
    let exclude = exclude_boundary.unwrap_or(config.analyze.exclude_boundary);
    let analysis = analyze_cells(&cells, config, alpha.clone(), exclude)?;

    ensure_dir(out)?;
    let hist_path = out.join(HISTOGRAM_FILE);
    let json_path = out.join(ANALYSIS_FILE);
    let svg_path = out.join(DISTRIBUTION_SVG);
    io::write_histogram_csv(&hist_path, &analysis.histogram)?;
    io::write_json(&json_path, &analysis)?;

    let params = config.params()?;
    let model_inputs = cells
        .scales
        .clone()
        .zip(alpha.or_else(|| cells.alpha.clone()))
        .filter(|(s, a)| s.len() == a.len());
    let model =
        model_inputs.map(|(s, a)| move |y: f64| mixture_density(&params, &s, &a, y).unwrap_or(0.0));
    // Target line drawn through the fitted line at the middle of the fit range.
    let target = match (&analysis.slope, analysis.target_slope) {
        (Some(fit), Some(t)) => {
            let mid = 0.5 * (fit.fit_range.0.ln() + fit.fit_range.1.ln());
            Some((fit.intercept + (fit.slope - t) * mid, -t))
        }
        _ => None,
    };
    let picture = svg::distribution_svg(
        &analysis.histogram,
        model.as_ref().map(|f| f as &dyn Fn(f64) -> f64),
        target,
    );
    io::write_text(&svg_path, &picture)?;
    Ok(Outcome {
        warnings: analysis.warnings.clone(),
        outputs: vec![hist_path, json_path, svg_path],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub exit_code: i32,
    pub outputs: Vec<String>,
    pub seconds: f64,
    pub warnings: Vec<String>,
}

/// `manifest.json` of a pipeline run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: String,
    pub seed: u64,
    pub solver_seed: Option<u64>,
    pub threads: usize,
    pub stages: Vec<StageRecord>,
    pub exit_code: i32,
}

pub fn cmd_pipeline(
    config_path: &Path,
    config: &RunConfig,
    seed: Option<u64>,
    exclude_boundary: Option<bool>,
    out: &Path,
) -> Result<(Outcome, RunManifest), CliError> {
    ensure_dir(out)?;
    let seed = seed
        .or(config.generate.as_ref().map(|g| g.seed))
        .unwrap_or(0);
    let mut manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config_path.display().to_string(),
        seed,
        solver_seed: config.fit.as_ref().map(|f| f.solver.seed),
        threads: rayon::current_num_threads(),
        stages: Vec::new(),
        exit_code: 0,
    };
    let mut total = Outcome::default();
    let record = |name: &str,
                  start: Instant,
                  res: Result<Outcome, CliError>,
                  manifest: &mut RunManifest,
                  total: &mut Outcome|
     -> Result<(), CliError> {
        let seconds = start.elapsed().as_secs_f64();
        match res {
            Ok(o) => {
                manifest.stages.push(StageRecord {
                    name: name.into(),
                    exit_code: o.exit_code(),
                    outputs: o
                        .outputs
                        .iter()
                        .filter_map(|p| p.file_name())
                        .map(|f| f.to_string_lossy().into_owned())
                        .collect(),
                    seconds,
                    warnings: o.warnings.clone(),
                });
                total
                    .warnings
                    .extend(o.warnings.iter().map(|w| format!("{name}: {w}")));
                total.outputs.extend(o.outputs);
                Ok(())
            }
            Err(e) => {
                manifest.stages.push(StageRecord {
                    name: name.into(),
                    exit_code: 1,
                    outputs: Vec::new(),
                    seconds,
                    warnings: vec![e.to_string()],
                });
                Err(e)
            }
        }
    };
    let finish = |manifest: &mut RunManifest, failed: bool| -> Result<PathBuf, CliError> {
        manifest.exit_code = if failed {
            1
        } else {
            manifest
                .stages
                .iter()
                .map(|s| s.exit_code)
                .find(|&c| c != 0)
                .unwrap_or(0)
        };
        let path = out.join(RUN_MANIFEST);
        io::write_json(&path, manifest)?;
        Ok(path)
    };

    macro_rules! stage {
        ($name:expr, $body:expr) => {{
            let start = Instant::now();
            let res = $body;
            if let Err(e) = record($name, start, res, &mut manifest, &mut total) {
                finish(&mut manifest, true)?;
                return Err(e);
            }
        }};
    }

    let alpha_path = if config.fit.is_some() {
        stage!("fit", cmd_fit(config, out));
        Some(out.join(FIT_FILE))
    } else {
        None
    };
    stage!(
        "generate",
        cmd_generate(config, alpha_path.as_deref(), Some(seed), out)
    );
    stage!(
        "tessellate",
        cmd_tessellate(
            &out.join(POINTS_FILE),
            Some(&out.join(POINTS_MANIFEST)),
            None,
            out
        )
    );
    stage!(
        "analyze",
        cmd_analyze(&out.join(CELLS_FILE), config, None, exclude_boundary, out)
    );
    let path = finish(&mut manifest, false)?;
    total.outputs.push(path);
    Ok((total, manifest))
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    Ok(RunConfig::load(path)?)
}

fn dispatch(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Fit { config, out } => cmd_fit(&load_config(&config)?, &out),
        Command::Generate {
            config,
            alpha,
            seed,
            out,
        } => cmd_generate(&load_config(&config)?, alpha.as_deref(), seed, &out),
        Command::Tessellate {
            points,
            manifest,
            width,
            height,
            out,
        } => cmd_tessellate(&points, manifest.as_deref(), width.zip(height), &out),
        Command::Analyze {
            cells,
            config,
            alpha,
            boundary,
            out,
        } => {
            let config = match config {
                Some(path) => load_config(&path)?,
                None => {
                    let cells_file: CellsFile = io::read_json(&cells)?;
                    let scales = cells_file
                        .scales
                        .map(|s| s.as_slice().to_vec())
                        .unwrap_or_else(|| vec![1.0]);
                    RunConfig::parse(&format!("[model]\nscales = {scales:?}\n"))?
                }
            };
            cmd_analyze(
                &cells,
                &config,
                alpha.as_deref(),
                boundary.exclude_boundary,
                &out,
            )
        }
        Command::Pipeline {
            config,
            seed,
            out,
            boundary,
        } => {
            let parsed = load_config(&config)?;
            cmd_pipeline(&config, &parsed, seed, boundary.exclude_boundary, &out).map(|r| r.0)
        }
    }
}

/// Parse `args` (including the program name), run, print diagnostics to
/// stderr and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for p in &outcome.outputs {
                println!("{}", p.display());
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
