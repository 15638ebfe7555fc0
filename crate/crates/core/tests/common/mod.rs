//! Shared test fixtures: seeded random polygon generators and the
//! Monte-Carlo intersection-area oracle. The oracle deliberately knows
//! nothing about the clipping implementation: it samples points in the
//! intersection of the two MBRs and counts membership via ray casting.

// Each integration test compiles its own copy and uses a subset.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topsim::geometry::{GeomId, Point2, Polygon};

/// Strictly convex polygon: vertices on an ellipse at sorted random angles.
pub fn random_convex(rng: &mut ChaCha8Rng, id: GeomId) -> Polygon {
    let n = rng.gen_range(5..12usize);
    let rx = rng.gen_range(0.5..2.0);
    let ry = rng.gen_range(0.5..2.0);
    let mut angles: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI))
        .collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    while angles.len() < 5 {
        angles.push(angles.last().unwrap() + 0.3);
    }
    let pts: Vec<Point2> = angles
        .iter()
        .map(|t| Point2::new(rx * t.cos(), ry * t.sin()))
        .collect();
    Polygon::new(id, pts).expect("ellipse samples are convex and simple")
}

/// Star-shaped (hence simple) non-convex polygon: alternating radii on
/// sorted angles.
pub fn random_star(rng: &mut ChaCha8Rng, id: GeomId) -> Polygon {
    let points = rng.gen_range(5..10usize);
    let outer = rng.gen_range(1.0..2.2);
    let inner = outer * rng.gen_range(0.35..0.7);
    let phase = rng.gen_range(0.0..1.0);
    let pts: Vec<Point2> = (0..2 * points)
        .map(|k| {
            let r = if k % 2 == 0 { outer } else { inner } * rng.gen_range(0.9..1.1);
            let t = phase + std::f64::consts::PI * k as f64 / points as f64;
            Point2::new(r * t.cos(), r * t.sin())
        })
        .collect();
    Polygon::new(id, pts).expect("radial rings are simple")
}

/// Either of the above, translated a little so pairs overlap but rarely nest.
pub fn random_shape_pair(rng: &mut ChaCha8Rng, id: GeomId) -> (Polygon, Polygon) {
    let a = if rng.gen_bool(0.5) {
        random_convex(rng, 2 * id)
    } else {
        random_star(rng, 2 * id)
    };
    let b = if rng.gen_bool(0.5) {
        random_convex(rng, 2 * id + 1)
    } else {
        random_star(rng, 2 * id + 1)
    };
    let b = b.translate(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8));
    (a, b)
}

pub fn axis_rectangle(id: GeomId, x: f64, y: f64, w: f64, h: f64) -> Polygon {
    Polygon::new(
        id,
        vec![
            Point2::new(x, y),
            Point2::new(x + w, y),
            Point2::new(x + w, y + h),
            Point2::new(x, y + h),
        ],
    )
    .expect("rectangles are simple")
}

fn point_in_polygon(p: Point2, poly: &Polygon) -> bool {
    let mut inside = false;
    for (a, b) in poly.edges() {
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Monte-Carlo estimate of |A n B| from `samples` points drawn uniformly in
/// the intersection of the two MBRs.
pub fn mc_intersection_area(a: &Polygon, b: &Polygon, samples: usize, seed: u64) -> f64 {
    let ma = a.mbr();
    let mb = b.mbr();
    let min_x = ma.min_x.max(mb.min_x);
    let max_x = ma.max_x.min(mb.max_x);
    let min_y = ma.min_y.max(mb.min_y);
    let max_y = ma.max_y.min(mb.max_y);
    if min_x >= max_x || min_y >= max_y {
        return 0.0;
    }
    let box_area = (max_x - min_x) * (max_y - min_y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let p = Point2::new(rng.gen_range(min_x..max_x), rng.gen_range(min_y..max_y));
        if point_in_polygon(p, a) && point_in_polygon(p, b) {
            hits += 1;
        }
    }
    box_area * hits as f64 / samples as f64
}
