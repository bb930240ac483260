//! Cell-area densities for Voronoi tessellations of uniform random points.
//!
//! The area `y` of a cell generated by uniformly distributed points of unit
//! density is well modelled by a two-parameter generalized Gamma density
//! `b^a / Γ(a) · y^(a-1) · exp(-b y)`. Denser point clouds (mean cell area `s`)
//! follow the rescaled density `f_s(y) = f(y/s) / s`, and a domain partitioned
//! into area fractions `alpha_i` of scale `s_i` produces the number density
//! `Σ alpha_i / s_i · f_{s_i}(y)`.
//!
//! All densities are evaluated in log space and exponentiated last.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Absolute tolerance on `Σ alpha = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Shape/rate pair of the generalized Gamma cell-area model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaParams {
    pub a: f64,
    pub b: f64,
}

impl Default for GammaParams {
    fn default() -> Self {
        Self { a: 3.61, b: 3.57 }
    }
}

impl GammaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let params = Self { a, b };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 1.0) {
            return Err(Error::Domain(format!(
                "shape a must be > 1, got {}",
                self.a
            )));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::Domain(format!("rate b must be > 0, got {}", self.b)));
        }
        Ok(())
    }

    /// Mean of the unit-scale density, `a / b`.
    pub fn mean(&self) -> f64 {
        self.a / self.b
    }

    /// `a log b - ln Γ(a)`, the log of the normalization constant.
    fn log_norm(&self) -> f64 {
        self.a * self.b.ln() - ln_gamma(self.a)
    }

    /// Log density of the unit-scale model at `y > 0`.
    pub fn ln_pdf(&self, y: f64) -> f64 {
        self.log_norm() + (self.a - 1.0) * y.ln() - self.b * y
    }
}

/// Strictly decreasing list of positive scales (mean cell areas).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ScaleVector(Vec<f64>);

impl ScaleVector {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::Argument("scale vector must not be empty".into()));
        }
        if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Domain(format!("scales must be positive, got {s}")));
        }
        if scales.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Argument("scales must be strictly decreasing".into()));
        }
        Ok(Self(scales))
    }

    /// Dyadic scales `1, 1/2, ..., 1/2^(k-1)`.
    pub fn dyadic(k: usize) -> Result<Self> {
        Self::new((0..k).map(|i| 0.5f64.powi(i as i32)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max(&self) -> f64 {
        self.0[0]
    }
}

impl<'de> Deserialize<'de> for ScaleVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        ScaleVector::new(raw).map_err(serde::de::Error::custom)
    }
}

/// Nonnegative weights on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AreaFractions(Vec<f64>);

impl AreaFractions {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Argument("area fractions must not be empty".into()));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::Domain(format!(
                "area fractions must be nonnegative, got {a}"
            )));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::Domain(format!(
                "area fractions must sum to 1, got {sum}"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    /// The `i`-th vertex of the simplex.
    pub fn unit(k: usize, i: usize) -> Result<Self> {
        if i >= k {
            return Err(Error::Argument(format!(
                "unit index {i} out of range for K={k}"
            )));
        }
        let mut alpha = vec![0.0; k];
        alpha[i] = 1.0;
        Self::new(alpha)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for AreaFractions {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        AreaFractions::new(raw).map_err(serde::de::Error::custom)
    }
}

/// Power law `C y^(-m)` stored as `(m, A = log C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawTarget {
    pub m: f64,
    #[serde(rename = "A")]
    pub log_amplitude: f64,
}

impl PowerLawTarget {
    pub fn new(m: f64, log_amplitude: f64) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Domain(format!("exponent m must be > 0, got {m}")));
        }
        if !log_amplitude.is_finite() {
            return Err(Error::Domain("log-amplitude must be finite".into()));
        }
        Ok(Self { m, log_amplitude })
    }
}

pub fn gamma_pdf(params: &GammaParams, y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::Domain(format!("cell area must be >= 0, got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    Ok(params.ln_pdf(y).exp())
}

/// Density of cell areas for points of mean cell area `s`: `gamma_pdf(y/s) / s`.
pub fn scaled_pdf(params: &GammaParams, s: f64, y: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("scale must be > 0, got {s}")));
    }
    if !(y >= 0.0) {
        return Err(Error::Domain(format!("cell area must be >= 0, got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    Ok((params.ln_pdf(y / s) - s.ln()).exp())
}

/// `(1/s) · scaled_pdf(s, y)`, the number density contributed by a unit area
/// fraction of scale `s`. Expects `y > 0`.
pub(crate) fn component_density(params: &GammaParams, s: f64, y: f64) -> f64 {
    (params.ln_pdf(y / s) - 2.0 * s.ln()).exp()
}

/// Number density (cells per unit domain area per unit cell area) of a
/// domain covered in fractions `alpha` by points of scales `s`.
pub fn mixture_density(
    params: &GammaParams,
    s: &ScaleVector,
    alpha: &AreaFractions,
    y: f64,
) -> Result<f64> {
    if alpha.len() != s.len() {
        return Err(Error::Argument(format!(
            "alpha has {} entries but there are {} scales",
            alpha.len(),
            s.len()
        )));
    }
    if !(y >= 0.0) {
        return Err(Error::Domain(format!("cell area must be >= 0, got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    Ok(mixture_unchecked(params, s.as_slice(), alpha.as_slice(), y))
}

/// Mixture density for arbitrary (not necessarily normalized) weights.
pub(crate) fn mixture_unchecked(params: &GammaParams, s: &[f64], weights: &[f64], y: f64) -> f64 {
    s.iter()
        .zip(weights)
        .filter(|(_, w)| **w != 0.0)
        .map(|(&si, &wi)| wi * component_density(params, si, y))
        .sum()
}

/// `A - m log y`.
pub fn log_target(target: &PowerLawTarget, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("cell area must be > 0, got {y}")));
    }
    Ok(target.log_amplitude - target.m * y.ln())
}
