#![allow(dead_code)]

use voronoi_area::distributions::{GammaParams, ScaleVector};
use voronoi_area::fit::FitProblem;

pub const EXAMPLE_ONE_Y: [f64; 9] = [0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0];
pub const EXAMPLE_TWO_Y: [f64; 11] = [0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0];

pub fn example_one() -> FitProblem {
    FitProblem::new(
        GammaParams::default(),
        ScaleVector::dyadic(4).unwrap(),
        EXAMPLE_ONE_Y.to_vec(),
        1.75,
        None,
    )
    .unwrap()
}

pub fn example_two() -> FitProblem {
    FitProblem::new(
        GammaParams::default(),
        ScaleVector::dyadic(5).unwrap(),
        EXAMPLE_TWO_Y.to_vec(),
        1.5,
        None,
    )
    .unwrap()
}

pub fn example_two_short_targets() -> FitProblem {
    FitProblem::new(
        GammaParams::default(),
        ScaleVector::dyadic(5).unwrap(),
        EXAMPLE_ONE_Y.to_vec(),
        1.5,
        None,
    )
    .unwrap()
}

/// Composite Gauss-Legendre (5 nodes) on `[lo, hi]` with `panels` panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    let h = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut panel = 0.0;
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            panel += w * f(mid + half * x);
        }
        total += panel * half;
    }
    total
}

/// Central finite difference of `f` at `x` along coordinate `i`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], i: usize, h: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[i] += h;
    minus[i] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

pub fn dirichlet(rng: &mut impl rand::Rng, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|d| d / total).collect()
}

/// Uniform sites in `[0, w] x [0, h]`.
pub fn uniform_sites(n: usize, w: f64, h: f64, seed: u64) -> Vec<voronoi_area::geometry::Point> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| voronoi_area::geometry::Point::new(rng.gen::<f64>() * w, rng.gen::<f64>() * h))
        .collect()
}

/// Areas of nearest-site regions by counting pixel centers of a
/// `pixels x pixels` raster over a square domain of side `side`.
pub fn raster_areas(sites: &[voronoi_area::geometry::Point], side: f64, pixels: usize) -> Vec<f64> {
    use rayon::prelude::*;
    let px = side / pixels as f64;
    let counts = (0..pixels)
        .into_par_iter()
        .map(|row| {
            let mut counts = vec![0usize; sites.len()];
            let y = (row as f64 + 0.5) * px;
            for col in 0..pixels {
                let x = (col as f64 + 0.5) * px;
                let mut best = (f64::INFINITY, 0);
                for (i, s) in sites.iter().enumerate() {
                    let d = (s.x - x).powi(2) + (s.y - y).powi(2);
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                counts[best.1] += 1;
            }
            counts
        })
        .reduce(
            || vec![0usize; sites.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    counts.iter().map(|&c| c as f64 * px * px).collect()
}

/// Index of the site nearest to `p` (lowest index on ties).
pub fn nearest_site(
    sites: &[voronoi_area::geometry::Point],
    p: voronoi_area::geometry::Point,
) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, s) in sites.iter().enumerate() {
        let d = s.dist2(p);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}
