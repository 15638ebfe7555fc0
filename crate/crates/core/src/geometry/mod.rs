//! Planar polygon kernel: area, perimeter, centroid, bounding boxes,
//! boundary resampling and polygon-polygon intersection area.
//!
//! All polygons are simple rings without holes, stored counter-clockwise
//! with an implicit closing edge. Everything here is a pure function over
//! immutable values; no exact arithmetic is attempted.

mod clip;

use thiserror::Error;

/// Identifier attached to every geometry; unique within its dataset.
pub type GeomId = u64;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("polygon {id}: at least 3 vertices required, got {got}")]
    TooFewVertices { id: GeomId, got: usize },
    #[error("polygon {id}: non-finite coordinate at vertex {index}")]
    NonFiniteCoordinate { id: GeomId, index: usize },
    #[error("polygon {id}: duplicate consecutive vertices at index {index}")]
    DuplicateVertex { id: GeomId, index: usize },
    #[error("polygon {id}: ring self-intersects (edges {first} and {second})")]
    SelfIntersecting {
        id: GeomId,
        first: usize,
        second: usize,
    },
    #[error("polygon {id}: ring has zero area")]
    ZeroArea { id: GeomId },
    #[error("intersection of polygons {a} and {b} is numerically degenerate")]
    NumericalDegeneracy { a: GeomId, b: GeomId },
}

/// A point in dataset units. Coordinates are always finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    fn dist(self, o: Point2) -> f64 {
        let d = self.sub(o);
        (d.x * d.x + d.y * d.y).sqrt()
    }
}

/// z-component of (b - a) x (c - a).
fn cross3(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Axis-aligned minimum bounding rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mbr {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Mbr {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            0.5 * (self.min_x + self.max_x),
            0.5 * (self.min_y + self.max_y),
        )
    }

    pub fn diagonal(&self) -> f64 {
        (self.width() * self.width() + self.height() * self.height()).sqrt()
    }

    /// Closed-interval overlap: touching boundaries count as intersecting,
    /// so grid filtering never drops a true candidate.
    pub fn intersects(&self, other: &Mbr) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }
}

/// Closed-interval MBR overlap test.
pub fn mbr_intersects(a: &Mbr, b: &Mbr) -> bool {
    a.intersects(b)
}

/// A simple polygon: one exterior ring, counter-clockwise, first vertex not
/// repeated at the end. Validated on construction; every operation below may
/// assume the invariants hold.
#[derive(Debug, Clone)]
pub struct Polygon {
    id: GeomId,
    vertices: Vec<Point2>,
}

impl Polygon {
    /// Validates and normalizes a ring. A trailing vertex equal to the first
    /// is stripped (WKT closes rings explicitly). Clockwise input is reversed
    /// so the stored orientation is always counter-clockwise; vertex 0 stays
    /// first either way.
    pub fn new(id: GeomId, mut vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices {
                id,
                got: vertices.len(),
            });
        }
        for (index, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(GeometryError::NonFiniteCoordinate { id, index });
            }
        }
        for i in 0..vertices.len() {
            let j = (i + 1) % vertices.len();
            if vertices[i] == vertices[j] {
                return Err(GeometryError::DuplicateVertex { id, index: i });
            }
        }
        if let Some((first, second)) = find_self_intersection(&vertices) {
            return Err(GeometryError::SelfIntersecting { id, first, second });
        }
        let twice_area = signed_area_2x(&vertices);
        if twice_area == 0.0 {
            return Err(GeometryError::ZeroArea { id });
        }
        if twice_area < 0.0 {
            vertices[1..].reverse();
        }
        Ok(Polygon { id, vertices })
    }

    pub fn id(&self) -> GeomId {
        self.id
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    /// Directed edges including the closing one.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Absolute enclosed area (shoelace).
    pub fn area(&self) -> f64 {
        0.5 * signed_area_2x(&self.vertices).abs()
    }

    /// Total boundary length including the closing edge.
    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }

    /// Area-weighted centroid of the ring interior. Computed in a local
    /// frame anchored at vertex 0: far from the origin the raw shoelace
    /// terms cancel catastrophically, and centering must stay stable under
    /// large translations.
    pub fn centroid(&self) -> Point2 {
        let ref_pt = self.vertices[0];
        let mut twice_area = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for (a, b) in self.edges() {
            let (ax, ay) = (a.x - ref_pt.x, a.y - ref_pt.y);
            let (bx, by) = (b.x - ref_pt.x, b.y - ref_pt.y);
            let w = ax * by - bx * ay;
            twice_area += w;
            cx += (ax + bx) * w;
            cy += (ay + by) * w;
        }
        let scale = 1.0 / (3.0 * twice_area);
        Point2::new(ref_pt.x + cx * scale, ref_pt.y + cy * scale)
    }

    /// Tight axis-aligned bounds of the vertices.
    pub fn mbr(&self) -> Mbr {
        let mut it = self.vertices.iter();
        let first = it.next().expect("validated ring");
        let mut mbr = Mbr {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        for v in it {
            mbr.min_x = mbr.min_x.min(v.x);
            mbr.min_y = mbr.min_y.min(v.y);
            mbr.max_x = mbr.max_x.max(v.x);
            mbr.max_y = mbr.max_y.max(v.y);
        }
        mbr
    }

    /// Same shape translated by (dx, dy).
    pub fn translate(&self, dx: f64, dy: f64) -> Polygon {
        Polygon {
            id: self.id,
            vertices: self
                .vertices
                .iter()
                .map(|v| Point2::new(v.x + dx, v.y + dy))
                .collect(),
        }
    }

    /// Congruent copy whose centroid sits at the origin.
    pub fn center_at_origin(&self) -> Polygon {
        let c = self.centroid();
        self.translate(-c.x, -c.y)
    }

    /// `m` points uniformly spaced by arc length along the ring, starting at
    /// vertex 0 and walking in storage order.
    pub fn resample_boundary(&self, m: usize) -> Vec<Point2> {
        assert!(m >= 1, "resample count must be positive");
        let n = self.vertices.len();
        let lengths: Vec<f64> = self.edges().map(|(a, b)| a.dist(b)).collect();
        let total: f64 = lengths.iter().sum();
        let step = total / m as f64;

        let mut out = Vec::with_capacity(m);
        let mut edge = 0usize;
        let mut walked = 0.0; // distance already consumed on the current edge
        for k in 0..m {
            let mut target = k as f64 * step - walked;
            while edge < n && target >= lengths[edge] {
                target -= lengths[edge];
                walked += lengths[edge];
                edge += 1;
            }
            if edge >= n {
                // Rounding pushed us past the final edge; clamp to vertex 0.
                out.push(self.vertices[0]);
                continue;
            }
            let a = self.vertices[edge];
            let b = self.vertices[(edge + 1) % n];
            let t = if lengths[edge] > 0.0 {
                target / lengths[edge]
            } else {
                0.0
            };
            out.push(Point2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t));
        }
        out
    }

    /// Vertex count after dropping collinear vertices. Collinearity is
    /// scale-aware: |cross| <= 1e-12 * |e1| * |e2| on the adjacent edges.
    pub fn complexity_count(&self) -> usize {
        let n = self.vertices.len();
        let mut count = 0;
        for i in 0..n {
            let prev = self.vertices[(i + n - 1) % n];
            let cur = self.vertices[i];
            let next = self.vertices[(i + 1) % n];
            let cross = cross3(prev, cur, next);
            let tol = 1e-12 * prev.dist(cur) * cur.dist(next);
            if cross.abs() > tol {
                count += 1;
            }
        }
        count.max(3)
    }

    /// All consecutive turns are left turns or straight (ring is CCW).
    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            cross3(a, b, c) >= -1e-12 * a.dist(b) * b.dist(c)
        })
    }
}

/// Twice the signed area; positive for counter-clockwise rings.
fn signed_area_2x(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc
}

/// Returns the first pair of non-adjacent edges that touch, if any.
fn find_self_intersection(vertices: &[Point2]) -> Option<(usize, usize)> {
    let n = vertices.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // Adjacent edges share an endpoint by construction.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (p1, p2) = (vertices[i], vertices[(i + 1) % n]);
            let (q1, q2) = (vertices[j], vertices[(j + 1) % n]);
            if segments_touch(p1, p2, q1, q2) {
                return Some((i, j));
            }
        }
    }
    None
}

/// True when the closed segments share at least one point.
fn segments_touch(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = cross3(q1, q2, p1);
    let d2 = cross3(q1, q2, p2);
    let d3 = cross3(p1, p2, q1);
    let d4 = cross3(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// `p` collinear with [a, b] assumed; is it within the segment's box?
fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Area of the geometric intersection of two simple polygons.
///
/// Convex pairs go through half-plane clipping; everything else through a
/// boundary-segment decomposition of Green's theorem. The two routes agree
/// to floating-point noise and are cross-checked in tests. The evaluation
/// order is canonicalized so the result is bitwise symmetric in `a`, `b`.
pub fn intersection_area(a: &Polygon, b: &Polygon) -> Result<f64, GeometryError> {
    if !a.mbr().intersects(&b.mbr()) {
        return Ok(0.0);
    }
    let (first, second) = if clip::canonical_le(a, b) {
        (a, b)
    } else {
        (b, a)
    };
    let raw = if first.is_convex() && second.is_convex() {
        clip::convex_intersection_area(first, second)
    } else {
        clip::general_intersection_area(first, second)
    };
    let max_area = a.area().max(b.area());
    let min_area = a.area().min(b.area());
    let slack = 1e-9 * max_area;
    if raw < -slack || raw > min_area + slack {
        return Err(GeometryError::NumericalDegeneracy { a: a.id, b: b.id });
    }
    Ok(raw.clamp(0.0, min_area))
}
