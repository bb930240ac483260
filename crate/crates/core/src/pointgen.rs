//! Point clouds whose local density realizes a vector of area fractions.
//!
//! The domain is cut into a grid of equal subdomains, each subdomain gets one
//! scale label so that label counts match the area fractions, labels are
//! arranged so neighbouring subdomains have similar scales, and each subdomain
//! is filled with uniform points at density `1 / s_label`.
//!
//! Every random stream is derived from the caller's seed and a fixed salt; the
//! per-subdomain streams are additionally keyed by subdomain index, so results
//! do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{AreaFractions, ScaleVector};
use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::voronoi::{find_duplicates, DUPLICATE_EPS};

const ASSIGN_SALT: u64 = 0x61_7373_6967_6e00;
const SAMPLE_SALT: u64 = 0x73_616d_706c_6500;
const RESAMPLE_SALT: u64 = 0x72_6573_616d_7000;
const SHUFFLE_SALT: u64 = 0x73_6875_6666_6c00;

/// Largest expected point count allowed in a single subdomain.
pub const MAX_POINTS_PER_SUBDOMAIN: f64 = 1e8;
/// Below this many subdomains the arrangement is too coarse to mix well.
pub const RECOMMENDED_SUBDOMAINS: usize = 100;
const MAX_WINDOW_TRIES: usize = 100;
const MAX_RESAMPLE_ROUNDS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub width: f64,
    pub height: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
}

impl DomainSpec {
    pub fn new(width: f64, height: f64, grid_nx: usize, grid_ny: usize) -> Result<Self> {
        let spec = Self {
            width,
            height,
            grid_nx,
            grid_ny,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width.is_finite()
            && self.width > 0.0
            && self.height.is_finite()
            && self.height > 0.0)
        {
            return Err(Error::Domain(format!(
                "domain size must be positive, got {} x {}",
                self.width, self.height
            )));
        }
        if self.grid_nx == 0 || self.grid_ny == 0 {
            return Err(Error::Argument(
                "grid must have at least one subdomain per axis".into(),
            ));
        }
        Ok(())
    }

    /// Advisory message when the grid has fewer than
    /// [`RECOMMENDED_SUBDOMAINS`] subdomains.
    pub fn warning(&self) -> Option<String> {
        (self.subdomains() < RECOMMENDED_SUBDOMAINS).then(|| {
            format!(
                "only {} subdomains; at least {RECOMMENDED_SUBDOMAINS} are recommended for mixing",
                self.subdomains()
            )
        })
    }

    pub fn rect(&self) -> Rect {
        Rect::new(self.width, self.height)
    }

    pub fn subdomains(&self) -> usize {
        self.grid_nx * self.grid_ny
    }

    pub fn subdomain_size(&self) -> (f64, f64) {
        (
            self.width / self.grid_nx as f64,
            self.height / self.grid_ny as f64,
        )
    }

    /// Lower-left corner of subdomain `index` (row-major, rows along y).
    pub fn subdomain_origin(&self, index: usize) -> (f64, f64) {
        let (w, h) = self.subdomain_size();
        (
            (index % self.grid_nx) as f64 * w,
            (index / self.grid_nx) as f64 * h,
        )
    }
}

/// One scale index per subdomain, row-major with rows along y.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleAssignment {
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub labels: Vec<usize>,
}

impl ScaleAssignment {
    pub fn label(&self, ix: usize, iy: usize) -> usize {
        self.labels[iy * self.grid_nx + ix]
    }

    pub fn counts(&self, k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Right and up neighbours of every subdomain, each 4-neighbour pair once.
    fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nx = self.grid_nx;
        (0..self.labels.len()).flat_map(move |i| {
            let right = (i % nx + 1 < nx).then_some((i, i + 1));
            let up = (i + nx < self.labels.len()).then_some((i, i + nx));
            right.into_iter().chain(up)
        })
    }

    fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> {
        let (nx, ny) = (self.grid_nx, self.grid_ny);
        let (x, y) = (i % nx, i / nx);
        [
            (x > 0).then(|| i - 1),
            (x + 1 < nx).then(|| i + 1),
            (y > 0).then(|| i - nx),
            (y + 1 < ny).then(|| i + nx),
        ]
        .into_iter()
        .flatten()
    }
}

fn label_weights(scales: &ScaleVector) -> Vec<Vec<f64>> {
    let logs: Vec<f64> = scales.as_slice().iter().map(|s| s.log2()).collect();
    logs.iter()
        .map(|a| logs.iter().map(|b| (a - b).abs()).collect())
        .collect()
}

/// Σ over 4-neighbour pairs of `|log2 s_p - log2 s_q|`.
pub fn adjacency_penalty(assignment: &ScaleAssignment, scales: &ScaleVector) -> f64 {
    let w = label_weights(scales);
    assignment
        .edges()
        .map(|(p, q)| w[assignment.labels[p]][assignment.labels[q]])
        .sum()
}

/// Subdomain counts per class by largest remainder; ties favour the lower index.
pub fn class_counts(alpha: &AreaFractions, total: usize) -> Vec<usize> {
    let exact: Vec<f64> = alpha.as_slice().iter().map(|a| a * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = exact[i] - exact[i].floor();
        let rj = exact[j] - exact[j].floor();
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Arrange scale labels on the subdomain grid: counts from [`class_counts`],
/// greedy placement followed by `10 * total` random pair-swap hill-climbing steps.
pub fn assign_scales(
    domain: &DomainSpec,
    alpha: &AreaFractions,
    scales: &ScaleVector,
    seed: u64,
) -> Result<ScaleAssignment> {
    domain.validate()?;
    if alpha.len() != scales.len() {
        return Err(Error::Argument(format!(
            "alpha has {} entries but there are {} scales",
            alpha.len(),
            scales.len()
        )));
    }
    let total = domain.subdomains();
    let k = scales.len();
    let w = label_weights(scales);
    let mut remaining = class_counts(alpha, total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ASSIGN_SALT);

    let mut assignment = ScaleAssignment {
        grid_nx: domain.grid_nx,
        grid_ny: domain.grid_ny,
        labels: vec![usize::MAX; total],
    };
    // Greedy: cheapest label against already placed left/lower neighbours,
    // random among ties.
    for i in 0..total {
        let placed: Vec<usize> = assignment
            .neighbours(i)
            .filter(|&j| j < i)
            .map(|j| assignment.labels[j])
            .collect();
        let costs: Vec<(usize, f64)> = (0..k)
            .filter(|&l| remaining[l] > 0)
            .map(|l| (l, placed.iter().map(|&m| w[l][m]).sum()))
            .collect();
        let best = costs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let ties: Vec<usize> = costs.iter().filter(|c| c.1 <= best).map(|c| c.0).collect();
        let label = ties[rng.gen_range(0..ties.len())];
        remaining[label] -= 1;
        assignment.labels[i] = label;
    }

    let local = |a: &ScaleAssignment, i: usize| -> f64 {
        a.neighbours(i).map(|j| w[a.labels[i]][a.labels[j]]).sum()
    };
    if k > 1 {
        for _ in 0..10 * total {
            let p = rng.gen_range(0..total);
            let q = rng.gen_range(0..total);
            if assignment.labels[p] == assignment.labels[q] {
                continue;
            }
            let before = local(&assignment, p) + local(&assignment, q);
            assignment.labels.swap(p, q);
            let after = local(&assignment, p) + local(&assignment, q);
            if after >= before {
                assignment.labels.swap(p, q);
            }
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub sites: Vec<Point>,
    /// Scale index of the subdomain each site was drawn in.
    pub labels: Vec<usize>,
    pub domain: DomainSpec,
    pub seed: u64,
    pub assignment: ScaleAssignment,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn class_counts(&self, k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn subdomain_rng(salt: u64, seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    rng.set_stream(index);
    rng
}

/// Uniform point in the open rectangle `(x0, x0 + w) x (y0, y0 + h)`,
/// additionally strictly inside the domain.
fn draw_in(rng: &mut ChaCha8Rng, origin: (f64, f64), size: (f64, f64), domain: Rect) -> Point {
    loop {
        let x = origin.0 + rng.gen::<f64>() * size.0;
        let y = origin.1 + rng.gen::<f64>() * size.1;
        if x > origin.0 && y > origin.1 && x < domain.width && y < domain.height {
            return Point::new(x, y);
        }
    }
}

/// Fill every subdomain with `floor(e) + Bernoulli(frac(e))` uniform points,
/// `e = area / s_label`.
pub fn sample_points(
    domain: &DomainSpec,
    assignment: &ScaleAssignment,
    scales: &ScaleVector,
    seed: u64,
) -> Result<PointCloud> {
    domain.validate()?;
    if assignment.grid_nx != domain.grid_nx
        || assignment.grid_ny != domain.grid_ny
        || assignment.labels.len() != domain.subdomains()
    {
        return Err(Error::Argument(
            "assignment grid does not match the domain grid".into(),
        ));
    }
    if let Some(l) = assignment.labels.iter().find(|&&l| l >= scales.len()) {
        return Err(Error::Argument(format!("label {l} has no matching scale")));
    }
    let size = domain.subdomain_size();
    let area = size.0 * size.1;
    let max_expected = area / scales.as_slice()[scales.len() - 1];
    if max_expected > MAX_POINTS_PER_SUBDOMAIN {
        return Err(Error::Resource(format!(
            "{max_expected:.3e} expected points in one subdomain exceeds {MAX_POINTS_PER_SUBDOMAIN:.0e}"
        )));
    }
    let rect = domain.rect();

    let per_subdomain: Vec<Vec<Point>> = (0..domain.subdomains())
        .into_par_iter()
        .map(|idx| {
            let label = assignment.labels[idx];
            let expected = area / scales.as_slice()[label];
            let mut rng = subdomain_rng(SAMPLE_SALT, seed, idx as u64);
            let base = expected.floor();
            let extra = rng.gen::<f64>() < expected - base;
            let n = base as usize + usize::from(extra);
            let origin = domain.subdomain_origin(idx);
            (0..n)
                .map(|_| draw_in(&mut rng, origin, size, rect))
                .collect()
        })
        .collect();

    let mut sites = Vec::new();
    let mut labels = Vec::new();
    let mut home = Vec::new();
    for (idx, pts) in per_subdomain.into_iter().enumerate() {
        labels.extend(std::iter::repeat_n(assignment.labels[idx], pts.len()));
        home.extend(std::iter::repeat_n(idx, pts.len()));
        sites.extend(pts);
    }

    let tol = DUPLICATE_EPS * domain.width.min(domain.height);
    for round in 0..MAX_RESAMPLE_ROUNDS {
        let dups = find_duplicates(&sites, rect, tol);
        if dups.is_empty() {
            break;
        }
        if round + 1 == MAX_RESAMPLE_ROUNDS {
            return Err(Error::Resource(
                "could not separate coincident points".into(),
            ));
        }
        for (_, j) in dups {
            let key = ((round as u64) << 40) | j as u64;
            let mut rng = subdomain_rng(RESAMPLE_SALT, seed, key);
            sites[j] = draw_in(&mut rng, domain.subdomain_origin(home[j]), size, rect);
        }
    }

    Ok(PointCloud {
        sites,
        labels,
        domain: *domain,
        seed,
        assignment: assignment.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffleReport {
    pub requested: usize,
    pub applied: usize,
    /// Swaps abandoned because no disjoint window pair was found.
    pub skipped: usize,
}

fn in_window(p: Point, origin: (f64, f64), side: f64) -> bool {
    p.x >= origin.0 && p.x < origin.0 + side && p.y >= origin.1 && p.y < origin.1 + side
}

/// Translate into the half-open window `[lo, lo + side)`.
fn shift(v: f64, from: f64, to: f64, side: f64) -> f64 {
    let moved = v - from + to;
    if moved >= to + side {
        (to + side).next_down()
    } else {
        moved.max(to)
    }
}

/// Exchange the point sets of `num_swaps` random pairs of disjoint square
/// windows of side `window`.
pub fn shuffle_regions(
    cloud: &PointCloud,
    num_swaps: usize,
    window: f64,
    seed: u64,
) -> Result<(PointCloud, ShuffleReport)> {
    let rect = cloud.domain.rect();
    if !(window > 0.0 && window <= 0.5 * rect.width.min(rect.height)) {
        return Err(Error::Argument(format!(
            "shuffle window {window} must lie in (0, min(width, height) / 2]"
        )));
    }
    let mut out = cloud.clone();
    let mut report = ShuffleReport {
        requested: num_swaps,
        applied: 0,
        skipped: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SHUFFLE_SALT);
    let (max_x, max_y) = (rect.width - window, rect.height - window);

    for _ in 0..num_swaps {
        let mut pair = None;
        for _ in 0..MAX_WINDOW_TRIES {
            let a = (rng.gen::<f64>() * max_x, rng.gen::<f64>() * max_y);
            let b = (rng.gen::<f64>() * max_x, rng.gen::<f64>() * max_y);
            if (a.0 - b.0).abs() >= window || (a.1 - b.1).abs() >= window {
                pair = Some((a, b));
                break;
            }
        }
        let Some((a, b)) = pair else {
            report.skipped += 1;
            continue;
        };
        for p in out.sites.iter_mut() {
            if in_window(*p, a, window) {
                *p = Point::new(shift(p.x, a.0, b.0, window), shift(p.y, a.1, b.1, window));
            } else if in_window(*p, b, window) {
                *p = Point::new(shift(p.x, b.0, a.0, window), shift(p.y, b.1, a.1, window));
            }
        }
        report.applied += 1;
    }
    Ok((out, report))
}
