//! Area fractions that make a mixture of scaled cell-area densities follow a
//! power law.
//!
//! For targets `y_1 < ... < y_L` and weights `ω_l` we minimize
//!
//! ```text
//! J(alpha, A) = 1/2 Σ_l ω_l (log f(alpha; y_l) - (A - m log y_l))^2
//! ```
//!
//! over `alpha` on the probability simplex and `A >= 0`. For fixed `alpha` the
//! problem is linear least squares in `A`, so `A` is eliminated in closed form
//! (clamped at zero) and the reduced objective is minimized over the simplex
//! with a spectral projected-gradient method. Starts are the simplex barycenter
//! plus seeded Dirichlet(1) draws; the best local solution wins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{component_density, AreaFractions, GammaParams, ScaleVector};
use crate::error::{Error, Result};

/// Discretized least-squares problem for the area fractions.
#[derive(Debug, Clone)]
pub struct FitProblem {
    params: GammaParams,
    scales: ScaleVector,
    y_targets: Vec<f64>,
    m: f64,
    weights: Vec<f64>,
    // basis[l][i] = f_{s_i}(y_l) / s_i
    basis: Vec<Vec<f64>>,
    log_y: Vec<f64>,
}

impl FitProblem {
    pub fn new(
        params: GammaParams,
        scales: ScaleVector,
        y_targets: Vec<f64>,
        m: f64,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        params.validate()?;
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Domain(format!("exponent m must be > 0, got {m}")));
        }
        if y_targets.is_empty() {
            return Err(Error::Argument(
                "at least one target area is required".into(),
            ));
        }
        if let Some(y) = y_targets.iter().find(|y| !(y.is_finite() && **y > 0.0)) {
            return Err(Error::Domain(format!(
                "target areas must be positive, got {y}"
            )));
        }
        if y_targets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument(
                "target areas must be strictly increasing".into(),
            ));
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; y_targets.len()]);
        if weights.len() != y_targets.len() {
            return Err(Error::Argument(format!(
                "{} weights given for {} target areas",
                weights.len(),
                y_targets.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Domain(format!("weights must be positive, got {w}")));
        }
        let basis = y_targets
            .iter()
            .map(|&y| {
                scales
                    .as_slice()
                    .iter()
                    .map(|&s| component_density(&params, s, y))
                    .collect()
            })
            .collect();
        let log_y = y_targets.iter().map(|y| y.ln()).collect();
        Ok(Self {
            params,
            scales,
            y_targets,
            m,
            weights,
            basis,
            log_y,
        })
    }

    pub fn params(&self) -> &GammaParams {
        &self.params
    }

    pub fn scales(&self) -> &ScaleVector {
        &self.scales
    }

    pub fn y_targets(&self) -> &[f64] {
        &self.y_targets
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of scales `K`.
    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    /// `true` when `L >= K + 1`.
    pub fn is_overdetermined(&self) -> bool {
        self.y_targets.len() > self.dim()
    }

    /// A copy of the problem with every weight multiplied by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.params,
            self.scales.clone(),
            self.y_targets.clone(),
            self.m,
            Some(self.weights.iter().map(|w| w * factor).collect()),
        )
    }

    fn check_len(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.dim() {
            return Err(Error::Argument(format!(
                "alpha has {} entries but there are {} scales",
                alpha.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `log f(alpha; y_l) + m log y_l` for every target, i.e. the residual at `A = 0`.
    fn shifted_log_density(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        self.basis
            .iter()
            .zip(&self.log_y)
            .zip(&self.y_targets)
            .map(|((row, ly), y)| {
                let f: f64 = row.iter().zip(alpha).map(|(p, a)| p * a).sum();
                if !(f > 0.0) || !f.is_finite() {
                    return Err(Error::Evaluation(format!(
                        "mixture density is {f} at y = {y}; log is undefined"
                    )));
                }
                Ok(f.ln() + self.m * ly)
            })
            .collect()
    }

    /// Objective at arbitrary (not necessarily normalized) weights.
    pub fn objective_at(&self, alpha: &[f64], log_amplitude: f64) -> Result<f64> {
        self.check_len(alpha)?;
        let r0 = self.shifted_log_density(alpha)?;
        Ok(0.5
            * r0.iter()
                .zip(&self.weights)
                .map(|(r, w)| w * (r - log_amplitude).powi(2))
                .sum::<f64>())
    }

    /// Exact gradient of the objective with respect to `(alpha, A)` at
    /// arbitrary weights.
    pub fn gradient_at(&self, alpha: &[f64], log_amplitude: f64) -> Result<Gradient> {
        self.check_len(alpha)?;
        let r0 = self.shifted_log_density(alpha)?;
        let residuals: Vec<f64> = r0.iter().map(|r| r - log_amplitude).collect();
        Ok(Gradient {
            alpha: self.alpha_gradient(alpha, &residuals),
            log_amplitude: -residuals
                .iter()
                .zip(&self.weights)
                .map(|(r, w)| w * r)
                .sum::<f64>(),
        })
    }

    fn alpha_gradient(&self, alpha: &[f64], residuals: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.dim()];
        for ((row, r), w) in self.basis.iter().zip(residuals).zip(&self.weights) {
            let f: f64 = row.iter().zip(alpha).map(|(p, a)| p * a).sum();
            let coeff = w * r / f;
            for (g, p) in grad.iter_mut().zip(row) {
                *g += coeff * p;
            }
        }
        grad
    }

    /// Unconstrained minimizer of the objective in `A` for fixed `alpha`:
    /// the weighted mean of `log f(alpha; y_l) + m log y_l`.
    pub fn unconstrained_log_amplitude(&self, alpha: &[f64]) -> Result<f64> {
        self.check_len(alpha)?;
        let r0 = self.shifted_log_density(alpha)?;
        Ok(weighted_mean(&r0, &self.weights))
    }

    /// Optimal `A >= 0` for fixed `alpha`.
    pub fn optimal_log_amplitude(&self, alpha: &[f64]) -> Result<f64> {
        Ok(self.unconstrained_log_amplitude(alpha)?.max(0.0))
    }

    /// Objective with `A` eliminated, and its gradient in `alpha`.
    fn reduced(&self, alpha: &[f64]) -> Result<Reduced> {
        let r0 = self.shifted_log_density(alpha)?;
        let log_amplitude = weighted_mean(&r0, &self.weights).max(0.0);
        let residuals: Vec<f64> = r0.iter().map(|r| r - log_amplitude).collect();
        let value = 0.5
            * residuals
                .iter()
                .zip(&self.weights)
                .map(|(r, w)| w * r * r)
                .sum::<f64>();
        // Danskin: the minimizer in A is unique, so the reduced gradient is the
        // partial gradient at that minimizer.
        let grad = self.alpha_gradient(alpha, &residuals);
        Ok(Reduced {
            value,
            grad,
            log_amplitude,
        })
    }
}

fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
}

struct Reduced {
    value: f64,
    grad: Vec<f64>,
    log_amplitude: f64,
}

/// Partial derivatives of the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub alpha: Vec<f64>,
    pub log_amplitude: f64,
}

pub fn objective(problem: &FitProblem, alpha: &AreaFractions, log_amplitude: f64) -> Result<f64> {
    problem.objective_at(alpha.as_slice(), log_amplitude)
}

pub fn objective_gradient(
    problem: &FitProblem,
    alpha: &AreaFractions,
    log_amplitude: f64,
) -> Result<Gradient> {
    problem.gradient_at(alpha.as_slice(), log_amplitude)
}

/// Euclidean projection onto `{x : x >= 0, Σ x = 1}` (sort-based).
pub fn project_onto_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    let mut x: Vec<f64> = v.iter().map(|vi| (vi - theta).max(0.0)).collect();
    let sum: f64 = x.iter().sum();
    if sum > 0.0 {
        x.iter_mut().for_each(|xi| *xi /= sum);
    }
    x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Seeded Dirichlet(1) starts in addition to the barycenter.
    pub random_starts: usize,
    pub seed: u64,
    /// Stop when `||P(alpha - grad) - alpha||_inf` falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the relative objective decrease over `stall_window`
    /// iterations falls below this.
    pub objective_tolerance: f64,
    pub stall_window: usize,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            random_starts: 8,
            seed: 0x5eed_a1fa,
            gradient_tolerance: 1e-9,
            objective_tolerance: 1e-12,
            stall_window: 5,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha: AreaFractions,
    #[serde(rename = "A")]
    pub log_amplitude: f64,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub projected_gradient_norm: f64,
    /// Index of the winning start (0 is the barycenter).
    pub start: usize,
}

#[derive(Debug, Clone)]
struct LocalSolution {
    alpha: Vec<f64>,
    log_amplitude: f64,
    objective: f64,
    converged: bool,
    iterations: usize,
    pg_norm: f64,
}

const BB_STEP_MIN: f64 = 1e-12;
const BB_STEP_MAX: f64 = 1e12;
const ARMIJO: f64 = 1e-4;
const NONMONOTONE_MEMORY: usize = 10;

fn projected_gradient_norm(alpha: &[f64], grad: &[f64]) -> f64 {
    let trial: Vec<f64> = alpha.iter().zip(grad).map(|(a, g)| a - g).collect();
    project_onto_simplex(&trial)
        .iter()
        .zip(alpha)
        .map(|(p, a)| (p - a).abs())
        .fold(0.0, f64::max)
}

fn local_solve(
    problem: &FitProblem,
    start: Vec<f64>,
    config: &SolverConfig,
) -> Result<LocalSolution> {
    let mut alpha = project_onto_simplex(&start);
    let mut current = problem.reduced(&alpha)?;
    let mut history = vec![current.value];
    let mut step = 1.0 / current.grad.iter().map(|g| g.abs()).fold(1.0, f64::max);
    let mut iterations = 0;
    let mut converged = false;
    let mut stalled = false;
    let mut pg_norm = projected_gradient_norm(&alpha, &current.grad);

    while iterations < config.max_iterations {
        if pg_norm < config.gradient_tolerance {
            converged = true;
            break;
        }
        let w = config.stall_window;
        if history.len() > w {
            let old = history[history.len() - 1 - w];
            let new = current.value;
            if (old - new) <= config.objective_tolerance * old.abs().max(f64::MIN_POSITIVE) {
                stalled = true;
                break;
            }
        }
        iterations += 1;

        let trial: Vec<f64> = alpha
            .iter()
            .zip(&current.grad)
            .map(|(a, g)| a - step * g)
            .collect();
        let direction: Vec<f64> = project_onto_simplex(&trial)
            .iter()
            .zip(&alpha)
            .map(|(p, a)| p - a)
            .collect();
        let slope: f64 = direction
            .iter()
            .zip(&current.grad)
            .map(|(d, g)| d * g)
            .sum();
        if slope >= 0.0 {
            // The projected step is not a descent direction at this resolution.
            stalled = true;
            break;
        }
        let reference = history
            .iter()
            .rev()
            .take(NONMONOTONE_MEMORY)
            .fold(f64::NEG_INFINITY, |acc, v| acc.max(*v));

        let mut t = 1.0;
        let (next_alpha, next) = loop {
            let candidate: Vec<f64> = alpha
                .iter()
                .zip(&direction)
                .map(|(a, d)| (a + t * d).max(0.0))
                .collect();
            let reduced = problem.reduced(&candidate)?;
            if reduced.value <= reference + ARMIJO * t * slope || t < 1e-20 {
                break (candidate, reduced);
            }
            t *= 0.5;
        };

        let s: Vec<f64> = next_alpha.iter().zip(&alpha).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next
            .grad
            .iter()
            .zip(&current.grad)
            .map(|(a, b)| a - b)
            .collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy > 0.0 {
            (ss / sy).clamp(BB_STEP_MIN, BB_STEP_MAX)
        } else {
            BB_STEP_MAX.min(1.0 / BB_STEP_MIN.max(ss.sqrt()))
        };

        alpha = next_alpha;
        current = next;
        history.push(current.value);
        pg_norm = projected_gradient_norm(&alpha, &current.grad);
    }
    if stalled {
        let budget = POLISH_STEPS.min(config.max_iterations - iterations);
        let (a, r, steps) = newton_polish(problem, alpha, current, budget, config)?;
        alpha = a;
        current = r;
        iterations += steps;
        pg_norm = projected_gradient_norm(&alpha, &current.grad);
        // The stall rule is itself a stopping criterion.
        converged = true;
    }
    if pg_norm < config.gradient_tolerance {
        converged = true;
    }

    Ok(LocalSolution {
        alpha,
        log_amplitude: current.log_amplitude,
        objective: current.value,
        converged,
        iterations,
        pg_norm,
    })
}

const POLISH_STEPS: usize = 20;
const HESSIAN_STEP: f64 = 1e-6;

/// Newton steps restricted to the face of the simplex spanned by the positive
/// components. The Hessian is a central difference of the analytic gradient.
#[allow(clippy::needless_range_loop)]
fn newton_polish(
    problem: &FitProblem,
    mut alpha: Vec<f64>,
    mut current: Reduced,
    budget: usize,
    config: &SolverConfig,
) -> Result<(Vec<f64>, Reduced, usize)> {
    let mut steps = 0;
    for _ in 0..budget {
        if projected_gradient_norm(&alpha, &current.grad) < config.gradient_tolerance {
            break;
        }
        let free: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > 0.0).collect();
        let n = free.len();
        if n < 2 {
            break;
        }
        // KKT system [H 1; 1' 0] [d; lambda] = [-g; 0] on the free components.
        let mut kkt = vec![vec![0.0; n + 2]; n + 1];
        for (col, &j) in free.iter().enumerate() {
            let h = HESSIAN_STEP.min(0.5 * alpha[j]);
            let mut plus = alpha.clone();
            let mut minus = alpha.clone();
            plus[j] += h;
            minus[j] -= h;
            let gp = problem.reduced(&plus)?.grad;
            let gm = problem.reduced(&minus)?.grad;
            for (row, &i) in free.iter().enumerate() {
                kkt[row][col] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        for row in 0..n {
            for col in row + 1..n {
                let sym = 0.5 * (kkt[row][col] + kkt[col][row]);
                kkt[row][col] = sym;
                kkt[col][row] = sym;
            }
            kkt[row][n] = 1.0;
            kkt[n][row] = 1.0;
            kkt[row][n + 1] = -current.grad[free[row]];
        }
        let Some(solution) = solve_dense(kkt) else {
            break;
        };

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-6 {
            let mut candidate = alpha.clone();
            for (row, &i) in free.iter().enumerate() {
                candidate[i] += t * solution[row];
            }
            if candidate.iter().all(|a| *a >= 0.0) {
                let reduced = problem.reduced(&candidate)?;
                let pg = projected_gradient_norm(&candidate, &reduced.grad);
                if reduced.value <= current.value + 4.0 * f64::EPSILON * current.value.abs()
                    && pg < projected_gradient_norm(&alpha, &current.grad)
                {
                    accepted = Some((candidate, reduced));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((a, r)) => {
                alpha = a;
                current = r;
                steps += 1;
            }
            None => break,
        }
    }
    Ok((alpha, current, steps))
}

/// Gaussian elimination with partial pivoting on an augmented `n x (n+1)`
/// matrix. `None` when singular.
#[allow(clippy::needless_range_loop)]
fn solve_dense(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][n] - tail) / m[row][row];
    }
    Some(x)
}

/// Barycenter followed by `config.random_starts` Dirichlet(1) draws.
pub fn multistart_points(dim: usize, config: &SolverConfig) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts = vec![vec![1.0 / dim as f64; dim]];
    for _ in 0..config.random_starts {
        let draws: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = draws.iter().sum();
        starts.push(draws.iter().map(|d| d / total).collect());
    }
    starts
}

/// Multistart solve. Non-convergence is reported through
/// `FitResult::converged`, not as an error.
pub fn solve(problem: &FitProblem, config: &SolverConfig) -> Result<FitResult> {
    let starts = multistart_points(problem.dim(), config);
    let solutions: Vec<LocalSolution> = starts
        .into_par_iter()
        .map(|start| local_solve(problem, start, config))
        .collect::<Result<_>>()?;

    let best_value = solutions
        .iter()
        .map(|s| s.objective)
        .fold(f64::INFINITY, f64::min);
    let (start, best) = solutions
        .iter()
        .enumerate()
        .filter(|(_, s)| s.objective <= best_value + 1e-10)
        .min_by(|(_, a), (_, b)| {
            a.alpha
                .iter()
                .zip(&b.alpha)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least one start");

    let mut alpha: Vec<f64> = best.alpha.iter().map(|a| a.max(0.0)).collect();
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= total);

    Ok(FitResult {
        alpha: AreaFractions::new(alpha)?,
        log_amplitude: best.log_amplitude,
        objective: best.objective,
        converged: best.converged,
        iterations: best.iterations,
        projected_gradient_norm: best.pg_norm,
        start,
    })
}
