//! Voronoi tessellation clipped to the domain rectangle.
//!
//! Each cell is built independently: start from the rectangle and intersect
//! with the bisector half-planes of neighbouring sites, visiting a uniform
//! bucket grid in rings of growing Chebyshev radius around the site. A cell is
//! final once twice its circumradius (about the site) is no larger than the
//! distance to the nearest unvisited bucket, since no site beyond that can
//! cut it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clip_by_bisector, signed_area, Point, Rect};
use crate::pointgen::PointCloud;

/// Relative (to the domain diagonal) tolerance for vertex merging and
/// boundary detection.
pub const VERTEX_EPS: f64 = 1e-12;
/// Relative (to the shorter domain side) distance below which two sites are
/// considered coincident.
pub const DUPLICATE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub site_index: usize,
    /// Counter-clockwise polygon.
    pub vertices: Vec<Point>,
    pub area: f64,
    pub touches_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSet {
    pub cells: Vec<Cell>,
    pub domain: Rect,
}

impl CellSet {
    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// `|Σ areas - domain area| / domain area`.
    pub fn relative_area_error(&self) -> f64 {
        (self.total_area() - self.domain.area()).abs() / self.domain.area()
    }

    pub fn interior_count(&self) -> usize {
        self.cells.iter().filter(|c| !c.touches_boundary).count()
    }
}

/// Uniform bucket grid over the domain, stored as compressed rows.
pub(crate) struct SiteGrid {
    nx: usize,
    ny: usize,
    cell_w: f64,
    cell_h: f64,
    starts: Vec<usize>,
    members: Vec<usize>,
}

impl SiteGrid {
    pub(crate) fn new(sites: &[Point], domain: Rect, per_bucket: f64) -> Self {
        let n = sites.len().max(1) as f64;
        let side = (per_bucket * domain.area() / n).sqrt();
        let nx = ((domain.width / side).ceil() as usize).clamp(1, 1 << 14);
        let ny = ((domain.height / side).ceil() as usize).clamp(1, 1 << 14);
        let cell_w = domain.width / nx as f64;
        let cell_h = domain.height / ny as f64;
        let mut grid = Self {
            nx,
            ny,
            cell_w,
            cell_h,
            starts: vec![0; nx * ny + 1],
            members: vec![0; sites.len()],
        };
        let keys: Vec<usize> = sites.iter().map(|&p| grid.key(p)).collect();
        for &k in &keys {
            grid.starts[k + 1] += 1;
        }
        for k in 0..nx * ny {
            grid.starts[k + 1] += grid.starts[k];
        }
        let mut fill = grid.starts.clone();
        for (i, &k) in keys.iter().enumerate() {
            grid.members[fill[k]] = i;
            fill[k] += 1;
        }
        grid
    }

    fn coords(&self, p: Point) -> (usize, usize) {
        let bx = ((p.x / self.cell_w).floor().max(0.0) as usize).min(self.nx - 1);
        let by = ((p.y / self.cell_h).floor().max(0.0) as usize).min(self.ny - 1);
        (bx, by)
    }

    fn key(&self, p: Point) -> usize {
        let (bx, by) = self.coords(p);
        by * self.nx + bx
    }

    fn bucket(&self, bx: usize, by: usize) -> &[usize] {
        let k = by * self.nx + bx;
        &self.members[self.starts[k]..self.starts[k + 1]]
    }

    /// Buckets at Chebyshev distance exactly `r` from `(bx, by)`.
    fn ring(&self, bx: usize, by: usize, r: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (bx, by, r) = (bx as isize, by as isize, r as isize);
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        (by - r..=by + r)
            .flat_map(move |y| (bx - r..=bx + r).map(move |x| (x, y)))
            .filter(move |&(x, y)| {
                ((x - bx).abs() == r || (y - by).abs() == r) && x >= 0 && y >= 0 && x < nx && y < ny
            })
            .map(|(x, y)| (x as usize, y as usize))
    }

    /// Lower bound on the distance from `p` to any point outside the block of
    /// buckets within Chebyshev radius `r` of `(bx, by)`; infinite when the
    /// block covers the whole grid.
    fn unvisited_distance(&self, p: Point, bx: usize, by: usize, r: usize) -> f64 {
        let mut d = f64::INFINITY;
        if bx > r {
            d = d.min(p.x - (bx - r) as f64 * self.cell_w);
        }
        if bx + r + 1 < self.nx {
            d = d.min((bx + r + 1) as f64 * self.cell_w - p.x);
        }
        if by > r {
            d = d.min(p.y - (by - r) as f64 * self.cell_h);
        }
        if by + r + 1 < self.ny {
            d = d.min((by + r + 1) as f64 * self.cell_h - p.y);
        }
        d.max(0.0)
    }

    fn max_radius(&self) -> usize {
        self.nx.max(self.ny)
    }
}

/// Pairs of sites closer than `tol`, each pair reported once as `(i, j)`, `i < j`.
pub fn find_duplicates(sites: &[Point], domain: Rect, tol: f64) -> Vec<(usize, usize)> {
    let grid = SiteGrid::new(sites, domain, 2.0);
    let tol2 = tol * tol;
    let mut pairs = Vec::new();
    for (i, &p) in sites.iter().enumerate() {
        let (bx, by) = grid.coords(p);
        for r in 0..=1 {
            for (x, y) in grid.ring(bx, by, r) {
                for &j in grid.bucket(x, y) {
                    if j > i && p.dist2(sites[j]) <= tol2 {
                        pairs.push((i, j));
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

fn validate_sites(sites: &[Point], domain: Rect) -> Result<()> {
    if !(domain.width > 0.0 && domain.height > 0.0 && domain.area().is_finite()) {
        return Err(Error::Argument(format!(
            "domain must have positive finite size, got {} x {}",
            domain.width, domain.height
        )));
    }
    if sites.is_empty() {
        return Err(Error::Argument("at least one site is required".into()));
    }
    if let Some((i, p)) = sites
        .iter()
        .enumerate()
        .find(|(_, p)| !domain.contains(**p))
    {
        return Err(Error::Argument(format!(
            "site {i} at ({}, {}) lies outside the {} x {} domain",
            p.x, p.y, domain.width, domain.height
        )));
    }
    let tol = DUPLICATE_EPS * domain.width.min(domain.height);
    let dups = find_duplicates(sites, domain, tol);
    if !dups.is_empty() {
        return Err(Error::DuplicateSites(dups));
    }
    Ok(())
}

fn build_cell(sites: &[Point], grid: &SiteGrid, domain: Rect, index: usize) -> Cell {
    let eps = VERTEX_EPS * domain.diagonal();
    let p = sites[index];
    let (bx, by) = grid.coords(p);
    let mut poly = domain.corners();
    let mut radius2 = poly.iter().map(|v| v.dist2(p)).fold(0.0, f64::max);

    for r in 0..=grid.max_radius() {
        for (x, y) in grid.ring(bx, by, r) {
            for &j in grid.bucket(x, y) {
                if j == index {
                    continue;
                }
                let q = sites[j];
                // A site farther than twice the circumradius cannot cut the cell.
                if p.dist2(q) > 4.0 * radius2 {
                    continue;
                }
                poly = clip_by_bisector(&poly, p, q, eps);
                radius2 = poly.iter().map(|v| v.dist2(p)).fold(0.0, f64::max);
            }
        }
        let reach = grid.unvisited_distance(p, bx, by, r);
        if reach.is_infinite() || 4.0 * radius2 <= reach * reach {
            break;
        }
    }

    let touches_boundary = (0..poly.len()).any(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        (a.x <= eps && b.x <= eps)
            || (a.y <= eps && b.y <= eps)
            || (a.x >= domain.width - eps && b.x >= domain.width - eps)
            || (a.y >= domain.height - eps && b.y >= domain.height - eps)
    });
    Cell {
        site_index: index,
        area: signed_area(&poly),
        vertices: poly,
        touches_boundary,
    }
}

/// Tessellate arbitrary sites inside `[0, width] x [0, height]`.
pub fn tessellate_sites(sites: &[Point], domain: Rect) -> Result<CellSet> {
    validate_sites(sites, domain)?;
    let grid = SiteGrid::new(sites, domain, 2.0);
    let cells = (0..sites.len())
        .into_par_iter()
        .map(|i| build_cell(sites, &grid, domain, i))
        .collect();
    Ok(CellSet { cells, domain })
}

pub fn tessellate(cloud: &PointCloud) -> Result<CellSet> {
    tessellate_sites(&cloud.sites, cloud.domain.rect())
}

/// Areas of the selected cells, in site order.
pub fn cell_areas(cells: &CellSet, exclude_boundary: bool) -> Vec<f64> {
    cells
        .cells
        .iter()
        .filter(|c| !(exclude_boundary && c.touches_boundary))
        .map(|c| c.area)
        .collect()
}
