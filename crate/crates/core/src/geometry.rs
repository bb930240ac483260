//! Planar primitives shared by the point generator and the tessellator.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist2(other).sqrt()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned rectangle `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(width: f64, height: f64) -> Self {
        Self { width, height }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    /// Counter-clockwise corners starting at the origin.
    pub fn corners(&self) -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(self.width, 0.0),
            Point::new(self.width, self.height),
            Point::new(0.0, self.height),
        ]
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }
}

/// Signed shoelace area; positive for counter-clockwise vertex order.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    0.5 * twice
}

pub fn perimeter(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].dist(poly[(i + 1) % n])).sum()
}

/// Clip a convex polygon to the half-plane of points at least as close to
/// `site` as to `other` (the side of their perpendicular bisector holding
/// `site`). Vertices closer than `eps` are merged.
pub fn clip_by_bisector(poly: &[Point], site: Point, other: Point, eps: f64) -> Vec<Point> {
    let nx = other.x - site.x;
    let ny = other.y - site.y;
    let mx = 0.5 * (site.x + other.x);
    let my = 0.5 * (site.y + other.y);
    let side = |p: Point| (p.x - mx) * nx + (p.y - my) * ny;

    let values: Vec<f64> = poly.iter().map(|&p| side(p)).collect();
    if values.iter().all(|v| *v <= 0.0) {
        return poly.to_vec();
    }
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let (sa, sb) = (values[i], values[(i + 1) % n]);
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa <= 0.0) != (sb <= 0.0) {
            let t = sa / (sa - sb);
            out.push(Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
        }
    }
    dedup_ring(&mut out, eps);
    out
}

/// Remove consecutive (cyclically) vertices closer than `eps`.
pub fn dedup_ring(poly: &mut Vec<Point>, eps: f64) {
    let eps2 = eps * eps;
    poly.dedup_by(|b, a| a.dist2(*b) <= eps2);
    while poly.len() > 1 && poly[0].dist2(poly[poly.len() - 1]) <= eps2 {
        poly.pop();
    }
}

/// `true` if `p` lies in the closed convex counter-clockwise polygon, with
/// edge slack `eps` (in length units).
pub fn convex_contains(poly: &[Point], p: Point, eps: f64) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let len = a.dist(b);
        let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        cross >= -eps * len
    })
}

/// `true` if every turn of the counter-clockwise ring is a left turn (up to `eps`).
pub fn is_convex_ccw(poly: &[Point], eps: f64) -> bool {
    let n = poly.len();
    n >= 3
        && (0..n).all(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            let c = poly[(i + 2) % n];
            (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x) >= -eps
        })
}
