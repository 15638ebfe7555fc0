//! Intersection-area kernels.
//!
//! Two routes:
//! - `convex_intersection_area`: Sutherland-Hodgman half-plane clipping,
//!   valid when both rings are convex.
//! - `general_intersection_area`: Green's theorem over the boundary of the
//!   intersection region. Each ring's edges are split at every crossing with
//!   the other ring; a sub-segment contributes its line integral weighted by
//!   where its midpoint falls relative to the other ring (inside 1, on the
//!   boundary 1/2, outside 0). Shared boundary runs are therefore counted
//!   once in total, and opposite-direction touching runs cancel.

use super::{Point2, Polygon};

/// Deterministic argument ordering so the area is bitwise symmetric.
pub(super) fn canonical_le(a: &Polygon, b: &Polygon) -> bool {
    let (va, vb) = (a.vertices(), b.vertices());
    for (p, q) in va.iter().zip(vb.iter()) {
        match p
            .x
            .total_cmp(&q.x)
            .then_with(|| p.y.total_cmp(&q.y))
        {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    va.len() <= vb.len()
}

fn cross(a: Point2, b: Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn sub(a: Point2, b: Point2) -> Point2 {
    Point2::new(a.x - b.x, a.y - b.y)
}

/// Clips `subject` against every half-plane of convex `clip` and returns the
/// remaining area. Both rings must be convex and CCW.
pub(super) fn convex_intersection_area(subject: &Polygon, clip: &Polygon) -> f64 {
    let mut ring: Vec<Point2> = subject.vertices().to_vec();
    for (a, b) in clip.edges() {
        if ring.len() < 3 {
            return 0.0;
        }
        let dir = sub(b, a);
        let mut out = Vec::with_capacity(ring.len() + 2);
        for i in 0..ring.len() {
            let cur = ring[i];
            let nxt = ring[(i + 1) % ring.len()];
            let dc = cross(dir, sub(cur, a));
            let dn = cross(dir, sub(nxt, a));
            if dc >= 0.0 {
                out.push(cur);
            }
            if (dc > 0.0 && dn < 0.0) || (dc < 0.0 && dn > 0.0) {
                let t = dc / (dc - dn);
                out.push(Point2::new(
                    cur.x + (nxt.x - cur.x) * t,
                    cur.y + (nxt.y - cur.y) * t,
                ));
            }
        }
        ring = out;
    }
    if ring.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        acc += cross(a, b);
    }
    (0.5 * acc).max(0.0)
}

#[derive(Clone, Copy, PartialEq)]
enum Place {
    Inside,
    Boundary,
    Outside,
}

pub(super) fn general_intersection_area(first: &Polygon, second: &Polygon) -> f64 {
    let scale = first.mbr().diagonal().max(second.mbr().diagonal());
    let eps = 1e-9 * scale.max(f64::MIN_POSITIVE);
    boundary_contribution(first, second, eps) + boundary_contribution(second, first, eps)
}

/// Line integral of x dy - y dx over the parts of `subject`'s boundary that
/// bound the intersection region, halved on shared boundary runs.
fn boundary_contribution(subject: &Polygon, other: &Polygon, eps: f64) -> f64 {
    let mut acc = 0.0;
    let mut params: Vec<f64> = Vec::with_capacity(8);
    for (p, q) in subject.edges() {
        params.clear();
        params.push(0.0);
        params.push(1.0);
        for (a, b) in other.edges() {
            collect_cross_params(p, q, a, b, eps, &mut params);
        }
        params.sort_by(|x, y| x.total_cmp(y));
        let mut prev = params[0];
        for &t in &params[1..] {
            if t - prev < 1e-12 {
                continue;
            }
            let mid = Point2::new(
                p.x + (q.x - p.x) * (0.5 * (prev + t)),
                p.y + (q.y - p.y) * (0.5 * (prev + t)),
            );
            let weight = match classify(mid, other, eps) {
                Place::Inside => 1.0,
                Place::Boundary => 0.5,
                Place::Outside => 0.0,
            };
            if weight > 0.0 {
                let p0 = Point2::new(p.x + (q.x - p.x) * prev, p.y + (q.y - p.y) * prev);
                let p1 = Point2::new(p.x + (q.x - p.x) * t, p.y + (q.y - p.y) * t);
                acc += weight * 0.5 * cross(p0, p1);
            }
            prev = t;
        }
    }
    acc
}

/// Pushes the parameters along [p, q] where it meets [a, b], including
/// collinear overlap endpoints.
fn collect_cross_params(p: Point2, q: Point2, a: Point2, b: Point2, eps: f64, out: &mut Vec<f64>) {
    let r = sub(q, p);
    let s = sub(b, a);
    let denom = cross(r, s);
    let r_len = (r.x * r.x + r.y * r.y).sqrt();
    let s_len = (s.x * s.x + s.y * s.y).sqrt();
    if denom.abs() > 1e-12 * r_len * s_len {
        let ap = sub(a, p);
        let t = cross(ap, s) / denom;
        let u = cross(ap, r) / denom;
        if (-1e-12..=1.0 + 1e-12).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&u) {
            out.push(t.clamp(0.0, 1.0));
        }
        return;
    }
    // Parallel edges: only collinear overlaps produce split points.
    if r_len == 0.0 {
        return;
    }
    let dist_a = cross(r, sub(a, p)).abs() / r_len;
    if dist_a > eps {
        return;
    }
    let len2 = r.x * r.x + r.y * r.y;
    for e in [a, b] {
        let t = ((e.x - p.x) * r.x + (e.y - p.y) * r.y) / len2;
        if (-1e-12..=1.0 + 1e-12).contains(&t) {
            out.push(t.clamp(0.0, 1.0));
        }
    }
}

/// Boundary band of half-width `eps`, then even-odd ray parity.
fn classify(pt: Point2, ring: &Polygon, eps: f64) -> Place {
    let eps2 = eps * eps;
    for (a, b) in ring.edges() {
        if dist2_point_segment(pt, a, b) <= eps2 {
            return Place::Boundary;
        }
    }
    let mut inside = false;
    for (a, b) in ring.edges() {
        if (a.y > pt.y) != (b.y > pt.y) {
            let x_cross = a.x + (pt.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if pt.x < x_cross {
                inside = !inside;
            }
        }
    }
    if inside {
        Place::Inside
    } else {
        Place::Outside
    }
}

fn dist2_point_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = sub(b, a);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = p.x - (a.x + t * ab.x);
    let dy = p.y - (a.y + t * ab.y);
    dx * dx + dy * dy
}
