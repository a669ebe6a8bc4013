//! Regular-hexagon geometry and packing validation.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Overlap/protrusion tolerance used by the packing evaluator.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("DegeneratePolygon: {0}")]
    DegeneratePolygon(String),
    #[error("MalformedLayout: {0}")]
    MalformedLayout(String),
}

/// Vertices `(x + s cos(θ + kπ/3), y + s sin(θ + kπ/3))`, k = 0..5, in
/// counter-clockwise order. The circumradius equals the side length.
pub fn hex_vertices(x: f64, y: f64, theta: f64, side: f64) -> [Point; 6] {
    std::array::from_fn(|k| {
        let a = theta + k as f64 * PI / 3.0;
        Point::new(x + side * a.cos(), y + side * a.sin())
    })
}

fn unit_edge_normals(poly: &[Point]) -> Result<Vec<Point>, GeometryError> {
    if poly.len() < 3 {
        return Err(GeometryError::DegeneratePolygon(format!(
            "{} vertices, need at least 3",
            poly.len()
        )));
    }
    poly.iter()
        .enumerate()
        .map(|(i, &a)| {
            let b = poly[(i + 1) % poly.len()];
            let e = b.sub(a);
            let len = e.norm();
            if !(len > 1e-12) {
                return Err(GeometryError::DegeneratePolygon(format!("edge {i} has zero length")));
            }
            Ok(Point::new(-e.y / len, e.x / len))
        })
        .collect()
}

fn project(poly: &[Point], axis: Point) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let v = p.dot(axis);
        (lo.min(v), hi.max(v))
    })
}

/// Separating-axis test over the edge normals of both convex polygons.
/// Projections that overlap by at most `tol` count as separated, so touching
/// polygons are disjoint.
pub fn sat_disjoint(a: &[Point], b: &[Point], tol: f64) -> Result<bool, GeometryError> {
    let mut axes = unit_edge_normals(a)?;
    axes.extend(unit_edge_normals(b)?);
    Ok(axes.into_iter().any(|axis| {
        let (a_lo, a_hi) = project(a, axis);
        let (b_lo, b_hi) = project(b, axis);
        let gap = (b_lo - a_hi).max(a_lo - b_hi);
        gap > -tol
    }))
}

/// Half-plane test against every edge of a counter-clockwise convex polygon.
pub fn point_in_convex(poly: &[Point], p: Point, tol: f64) -> bool {
    poly.iter().enumerate().all(|(i, &a)| {
        let b = poly[(i + 1) % poly.len()];
        let e = b.sub(a);
        e.cross(p.sub(a)) / e.norm() >= -tol
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// A candidate packing: unit hexagons inside a regular outer hexagon of side
/// `outer_side`. The outer hexagon sits at the origin unless moved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HexLayout {
    pub outer_side: f64,
    #[serde(default)]
    pub outer_x: f64,
    #[serde(default)]
    pub outer_y: f64,
    #[serde(default)]
    pub outer_theta: f64,
    pub hexagons: Vec<Placement>,
}

impl HexLayout {
    /// Applies one rotation about the origin followed by a translation to
    /// the outer hexagon and every inner hexagon.
    pub fn rigid_motion(&self, angle: f64, dx: f64, dy: f64) -> HexLayout {
        let (s, c) = angle.sin_cos();
        let mv = |x: f64, y: f64| (c * x - s * y + dx, s * x + c * y + dy);
        let (ox, oy) = mv(self.outer_x, self.outer_y);
        HexLayout {
            outer_side: self.outer_side,
            outer_x: ox,
            outer_y: oy,
            outer_theta: self.outer_theta + angle,
            hexagons: self
                .hexagons
                .iter()
                .map(|h| {
                    let (x, y) = mv(h.x, h.y);
                    Placement { x, y, theta: h.theta + angle }
                })
                .collect(),
        }
    }

    /// Pretty JSON with one hexagon per line.
    pub fn to_document(&self) -> String {
        let mut out = format!("{{\n  \"outer_side\": {:?},\n", self.outer_side);
        if self.outer_x != 0.0 || self.outer_y != 0.0 || self.outer_theta != 0.0 {
            out.push_str(&format!(
                "  \"outer_x\": {:?},\n  \"outer_y\": {:?},\n  \"outer_theta\": {:?},\n",
                self.outer_x, self.outer_y, self.outer_theta
            ));
        }
        out.push_str("  \"hexagons\": [\n");
        for (i, h) in self.hexagons.iter().enumerate() {
            let sep = if i + 1 == self.hexagons.len() { "" } else { "," };
            out.push_str(&format!(
                "    {{\"x\": {:?}, \"y\": {:?}, \"theta\": {:?}}}{sep}\n",
                h.x, h.y, h.theta
            ));
        }
        out.push_str("  ]\n}\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PackingViolation {
    /// Inner hexagons `i` and `j` (0-based) overlap.
    Overlap(usize, usize),
    /// Vertex `vertex` of inner hexagon `index` lies outside the outer hexagon.
    Protrusion { index: usize, vertex: usize },
}

impl fmt::Display for PackingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PackingViolation::Overlap(i, j) => write!(f, "hexagons {i} and {j} overlap"),
            PackingViolation::Protrusion { index, vertex } => {
                write!(f, "hexagon {index} vertex {vertex} lies outside the outer hexagon")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackingCheck {
    pub valid: bool,
    /// `1 / outer_side` when valid, otherwise 0.
    pub rho: f64,
    pub violations: Vec<PackingViolation>,
}

/// Pairwise disjointness plus vertex containment, all at tolerance `tol`.
pub fn validate_packing(layout: &HexLayout, tol: f64) -> Result<PackingCheck, GeometryError> {
    let r = layout.outer_side;
    if !r.is_finite() || r <= 0.0 {
        return Err(GeometryError::MalformedLayout(format!("outer_side must be positive, got {r}")));
    }
    let outer_ok = [layout.outer_x, layout.outer_y, layout.outer_theta]
        .iter()
        .all(|v| v.is_finite());
    if !outer_ok {
        return Err(GeometryError::MalformedLayout("outer placement is not finite".into()));
    }
    if let Some(i) = layout
        .hexagons
        .iter()
        .position(|h| !(h.x.is_finite() && h.y.is_finite() && h.theta.is_finite()))
    {
        return Err(GeometryError::MalformedLayout(format!("hexagon {i} has a non-finite field")));
    }

    let outer = hex_vertices(layout.outer_x, layout.outer_y, layout.outer_theta, r);
    let inner: Vec<[Point; 6]> = layout
        .hexagons
        .iter()
        .map(|h| hex_vertices(h.x, h.y, h.theta, 1.0))
        .collect();

    let mut violations = Vec::new();
    for i in 0..inner.len() {
        for j in i + 1..inner.len() {
            if !sat_disjoint(&inner[i], &inner[j], tol)? {
                violations.push(PackingViolation::Overlap(i, j));
            }
        }
    }
    for (index, poly) in inner.iter().enumerate() {
        if let Some(vertex) = poly.iter().position(|&p| !point_in_convex(&outer, p, tol)) {
            violations.push(PackingViolation::Protrusion { index, vertex });
        }
    }
    let valid = violations.is_empty();
    Ok(PackingCheck { valid, rho: if valid { 1.0 / r } else { 0.0 }, violations })
}

/// The sparse starting layout: 11 flat hexagons on a spacing-3 lattice
/// (rows of 3, 5 and 3) inside an outer hexagon of side 8.
pub fn baseline_layout() -> HexLayout {
    let mut hexagons = Vec::with_capacity(11);
    for x in [-3.0, 0.0, 3.0] {
        hexagons.push(Placement { x, y: 3.0, theta: 0.0 });
    }
    for x in [-6.0, -3.0, 0.0, 3.0, 6.0] {
        hexagons.push(Placement { x, y: 0.0, theta: 0.0 });
    }
    for x in [-3.0, 0.0, 3.0] {
        hexagons.push(Placement { x, y: -3.0, theta: 0.0 });
    }
    HexLayout { outer_side: 8.0, outer_x: 0.0, outer_y: 0.0, outer_theta: 0.0, hexagons }
}
