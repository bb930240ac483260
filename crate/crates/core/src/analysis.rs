//! Empirical cell-area statistics.
//!
//! Histograms use log-spaced bins and report number densities: cells per unit
//! domain area per unit cell area, `count / (bin width * domain area)`, which
//! is directly comparable with [`mixture_density`]. Bin centers are geometric
//! means of the bin edges.

use serde::{Deserialize, Serialize};

use crate::distributions::{mixture_density, AreaFractions, GammaParams, ScaleVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub densities: Vec<f64>,
    pub domain_area: f64,
    pub dropped_below: usize,
    pub dropped_above: usize,
}

impl AreaHistogram {
    pub fn num_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|e| (e[0] * e[1]).sqrt())
            .collect()
    }

    pub fn bin_widths(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|e| e[1] - e[0]).collect()
    }

    pub fn total_count(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Replace every density with `f(bin center)`, recomputing counts as
    /// `density * width * domain_area` rounded. Handy for synthetic fixtures.
    pub fn with_densities(mut self, f: impl Fn(f64) -> f64) -> Self {
        let centers = self.bin_centers();
        let widths = self.bin_widths();
        self.densities = centers.iter().map(|&c| f(c)).collect();
        self.counts = self
            .densities
            .iter()
            .zip(&widths)
            .map(|(d, w)| (d * w * self.domain_area).round().max(1.0) as usize)
            .collect();
        self
    }
}

/// Log-spaced edges `lo * (hi/lo)^(k/n)`, with the last edge exactly `hi`.
pub fn log_edges(lo: f64, hi: f64, num_bins: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln();
    let mut edges: Vec<f64> = (0..=num_bins)
        .map(|k| lo * (ratio * k as f64 / num_bins as f64).exp())
        .collect();
    edges[0] = lo;
    edges[num_bins] = hi;
    edges
}

/// Log-binned number-density histogram. Areas outside `[range.0, range.1]`
/// are dropped and counted in `dropped_below` / `dropped_above`.
pub fn histogram(
    areas: &[f64],
    domain_area: f64,
    num_bins: usize,
    range: (f64, f64),
) -> Result<AreaHistogram> {
    let (lo, hi) = range;
    if areas.is_empty() {
        return Err(Error::Argument("no cell areas to bin".into()));
    }
    if num_bins < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 bins, got {num_bins}"
        )));
    }
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Argument(format!(
            "histogram range must satisfy 0 < min < max, got ({lo}, {hi})"
        )));
    }
    if !(domain_area > 0.0 && domain_area.is_finite()) {
        return Err(Error::Argument(format!(
            "domain area must be positive, got {domain_area}"
        )));
    }

    let edges = log_edges(lo, hi, num_bins);
    let scale = num_bins as f64 / (hi / lo).ln();
    let mut counts = vec![0usize; num_bins];
    let (mut below, mut above) = (0, 0);
    for &a in areas {
        if !(a >= lo) {
            below += 1;
            continue;
        }
        if a > hi {
            above += 1;
            continue;
        }
        let mut k = (((a / lo).ln() * scale).floor() as usize).min(num_bins - 1);
        while k > 0 && a < edges[k] {
            k -= 1;
        }
        while k + 1 < num_bins && a >= edges[k + 1] {
            k += 1;
        }
        counts[k] += 1;
    }
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / ((e[1] - e[0]) * domain_area))
        .collect();
    Ok(AreaHistogram {
        bin_edges: edges,
        counts,
        densities,
        domain_area,
        dropped_below: below,
        dropped_above: above,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionWeights {
    #[default]
    Unweighted,
    /// Weight each bin by its raw count.
    Counts,
}

/// Straight line `log(density) = intercept + slope * log(area)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub fit_range: (f64, f64),
    pub r_squared: f64,
    pub bins_used: usize,
}

pub fn fit_slope(hist: &AreaHistogram, fit_range: (f64, f64)) -> Result<SlopeFit> {
    fit_slope_weighted(hist, fit_range, RegressionWeights::Unweighted)
}

/// Least squares of log density against log bin center over the nonzero bins
/// whose center lies in `fit_range`.
pub fn fit_slope_weighted(
    hist: &AreaHistogram,
    fit_range: (f64, f64),
    weighting: RegressionWeights,
) -> Result<SlopeFit> {
    let centers = hist.bin_centers();
    let points: Vec<(f64, f64, f64)> = centers
        .iter()
        .zip(&hist.densities)
        .zip(&hist.counts)
        .filter(|((c, _), n)| **n > 0 && **c >= fit_range.0 && **c <= fit_range.1)
        .map(|((c, d), n)| {
            let w = match weighting {
                RegressionWeights::Unweighted => 1.0,
                RegressionWeights::Counts => *n as f64,
            };
            (c.ln(), d.ln(), w)
        })
        .collect();
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} nonzero bins in [{}, {}]; at least 2 are needed",
            points.len(),
            fit_range.0,
            fit_range.1
        )));
    }
    let wsum: f64 = points.iter().map(|p| p.2).sum();
    let mx = points.iter().map(|p| p.2 * p.0).sum::<f64>() / wsum;
    let my = points.iter().map(|p| p.2 * p.1).sum::<f64>() / wsum;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| p.2 * (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData(
            "all usable bins share one center".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        fit_range,
        r_squared,
        bins_used: points.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDeviation {
    pub bin: usize,
    pub center: f64,
    pub count: usize,
    pub empirical: f64,
    pub model: f64,
    /// `(empirical - model) / model`.
    pub relative_deviation: f64,
}

/// Relative deviation of every nonzero bin from the mixture density at the
/// bin center. Empty bins are skipped.
pub fn model_comparison(
    hist: &AreaHistogram,
    params: &GammaParams,
    s: &ScaleVector,
    alpha: &AreaFractions,
) -> Result<Vec<BinDeviation>> {
    let centers = hist.bin_centers();
    let mut out = Vec::new();
    for (bin, ((&center, &count), &empirical)) in centers
        .iter()
        .zip(&hist.counts)
        .zip(&hist.densities)
        .enumerate()
    {
        if count == 0 {
            continue;
        }
        let model = mixture_density(params, s, alpha, center)?;
        out.push(BinDeviation {
            bin,
            center,
            count,
            empirical,
            model,
            relative_deviation: (empirical - model) / model,
        });
    }
    Ok(out)
}
