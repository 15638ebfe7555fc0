//! Pairwise polygon similarity metrics, their weighted combination, and the
//! cluster similarity index.
//!
//! Every pairwise operation expects polygons that have already been centered
//! at the origin (the pipeline centers each polygon exactly once); absolute
//! position must never influence a score. All metrics are symmetric by
//! construction: no code path depends on argument order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{intersection_area, GeometryError, Polygon};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("polygon {id}: degenerate Fourier descriptor (|F1| < 1e-12)")]
    DegenerateDescriptor { id: u64 },
    #[error("metric weights invalid: {reason}")]
    BadWeights { reason: String },
    #[error("similarity index of an empty cluster is undefined")]
    EmptyCluster,
}

/// Weights for the eight pairwise metrics; nonnegative, summing to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricWeights {
    pub jaccard: f64,
    pub area: f64,
    pub curvature: f64,
    pub fourier: f64,
    pub aspect_ratio: f64,
    pub perimeter: f64,
    pub bbox_distance: f64,
    pub circularity: f64,
}

impl MetricWeights {
    pub fn equal() -> Self {
        MetricWeights::new([0.125; 8]).expect("equal weights are valid")
    }

    /// Order: jaccard, area, curvature, fourier, aspect ratio, perimeter,
    /// bbox distance, circularity.
    pub fn new(w: [f64; 8]) -> Result<Self, MetricsError> {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(MetricsError::BadWeights {
                reason: "weights must be finite and nonnegative".into(),
            });
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MetricsError::BadWeights {
                reason: format!("weights must sum to 1, got {sum}"),
            });
        }
        Ok(MetricWeights {
            jaccard: w[0],
            area: w[1],
            curvature: w[2],
            fourier: w[3],
            aspect_ratio: w[4],
            perimeter: w[5],
            bbox_distance: w[6],
            circularity: w[7],
        })
    }
}

/// Fourier descriptor construction parameters: the boundary is resampled to
/// `points` arc-length-uniform samples and the magnitudes of DFT coefficients
/// 1..=`magnitudes` are kept, scale-normalized by the first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierParams {
    pub points: usize,
    pub magnitudes: usize,
}

impl Default for FourierParams {
    fn default() -> Self {
        FourierParams {
            points: 64,
            magnitudes: 10,
        }
    }
}

/// Scale-normalized Fourier coefficient magnitudes; entry 0 is always 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeDescriptor {
    magnitudes: Vec<f64>,
}

impl ShapeDescriptor {
    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }
}

/// Resamples the boundary, runs a DFT over the samples as complex values, and
/// keeps coefficients 1..=K scale-normalized by coefficient 1. Coefficient 0
/// (position) is discarded; centering already removed it anyway.
pub fn fourier_descriptor(p: &Polygon, params: FourierParams) -> Result<ShapeDescriptor, MetricsError> {
    let samples = p.resample_boundary(params.points);
    let m = samples.len() as f64;
    let mut magnitudes = Vec::with_capacity(params.magnitudes);
    for j in 1..=params.magnitudes {
        let mut re = 0.0;
        let mut im = 0.0;
        for (k, s) in samples.iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * (j as f64) * (k as f64) / m;
            let (sin, cos) = angle.sin_cos();
            re += s.x * cos - s.y * sin;
            im += s.x * sin + s.y * cos;
        }
        magnitudes.push((re * re + im * im).sqrt());
    }
    let base = magnitudes[0];
    if base < 1e-12 {
        return Err(MetricsError::DegenerateDescriptor { id: p.id() });
    }
    for v in &mut magnitudes {
        *v /= base;
    }
    Ok(ShapeDescriptor { magnitudes })
}

/// 1 / (1 + ||F(A) - F(B)||_2) on precomputed descriptors.
pub fn descriptor_similarity(a: &ShapeDescriptor, b: &ShapeDescriptor) -> f64 {
    let mut sum = 0.0;
    for (x, y) in a.magnitudes.iter().zip(&b.magnitudes) {
        let d = x - y;
        sum += d * d;
    }
    1.0 / (1.0 + sum.sqrt())
}

/// |A n B| / |A u B|.
pub fn jaccard(a: &Polygon, b: &Polygon) -> Result<f64, MetricsError> {
    let inter = intersection_area(a, b)?;
    Ok(jaccard_from_parts(a.area(), b.area(), inter))
}

fn jaccard_from_parts(area_a: f64, area_b: f64, inter: f64) -> f64 {
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// 2 |A n B| / (|A| + |B|).
pub fn area_similarity(a: &Polygon, b: &Polygon) -> Result<f64, MetricsError> {
    let inter = intersection_area(a, b)?;
    Ok(2.0 * inter / (a.area() + b.area()))
}

/// exp(-|n_A - n_B| / max(n_A, n_B)) on collinearity-pruned vertex counts.
pub fn curvature_similarity(a: &Polygon, b: &Polygon) -> f64 {
    curvature_from_counts(a.complexity_count(), b.complexity_count())
}

fn curvature_from_counts(na: usize, nb: usize) -> f64 {
    let diff = na.abs_diff(nb) as f64;
    let max = na.max(nb) as f64;
    (-diff / max).exp()
}

/// 1 / (1 + ||F(A) - F(B)||).
pub fn fourier_similarity(
    a: &Polygon,
    b: &Polygon,
    params: FourierParams,
) -> Result<f64, MetricsError> {
    let fa = fourier_descriptor(a, params)?;
    let fb = fourier_descriptor(b, params)?;
    Ok(descriptor_similarity(&fa, &fb))
}

/// 1 / (1 + |r(A) - r(B)|) with r = MBR width / height.
pub fn aspect_ratio_similarity(a: &Polygon, b: &Polygon) -> f64 {
    inverse_abs_diff(aspect_ratio(a), aspect_ratio(b))
}

fn aspect_ratio(p: &Polygon) -> f64 {
    let m = p.mbr();
    m.width() / m.height().max(1e-12)
}

/// 1 / (1 + |P(A) - P(B)|).
pub fn perimeter_similarity(a: &Polygon, b: &Polygon) -> f64 {
    inverse_abs_diff(a.perimeter(), b.perimeter())
}

/// 1 / (1 + ||c(A) - c(B)||_2) with c = MBR center. After centering the MBR
/// centers sit near the origin, so this metric is close to constant; it is
/// still evaluated as specified.
pub fn bbox_distance_similarity(a: &Polygon, b: &Polygon) -> f64 {
    let ca = a.mbr().center();
    let cb = b.mbr().center();
    let dx = ca.x - cb.x;
    let dy = ca.y - cb.y;
    1.0 / (1.0 + (dx * dx + dy * dy).sqrt())
}

/// 4 pi |A| / P(A)^2, in (0, 1] for simple polygons.
pub fn circularity(p: &Polygon) -> f64 {
    circularity_from_parts(p.area(), p.perimeter())
}

fn circularity_from_parts(area: f64, perimeter: f64) -> f64 {
    4.0 * std::f64::consts::PI * area / (perimeter * perimeter)
}

/// 1 / (1 + |phi(A) - phi(B)|).
pub fn circularity_similarity(a: &Polygon, b: &Polygon) -> f64 {
    inverse_abs_diff(circularity(a), circularity(b))
}

fn inverse_abs_diff(x: f64, y: f64) -> f64 {
    1.0 / (1.0 + (x - y).abs())
}

/// The eight per-metric scores plus their weighted combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSimilarity {
    pub jaccard: f64,
    pub area: f64,
    pub curvature: f64,
    pub fourier: f64,
    pub aspect_ratio: f64,
    pub perimeter: f64,
    pub bbox_distance: f64,
    pub circularity: f64,
    pub combined: f64,
}

impl PairSimilarity {
    pub fn scores(&self) -> [f64; 8] {
        [
            self.jaccard,
            self.area,
            self.curvature,
            self.fourier,
            self.aspect_ratio,
            self.perimeter,
            self.bbox_distance,
            self.circularity,
        ]
    }
}

/// All eight metrics and their weighted sum for a centered pair.
pub fn combined_similarity(
    a: &Polygon,
    b: &Polygon,
    w: &MetricWeights,
    params: FourierParams,
) -> Result<PairSimilarity, MetricsError> {
    let pa = PreparedShape::from_centered(a.clone(), params)?;
    let pb = PreparedShape::from_centered(b.clone(), params)?;
    pair_similarity(&pa, &pb, w)
}

/// A centered polygon with every per-shape quantity the metrics need
/// computed once. Pipelines prepare each polygon a single time and reuse it
/// across all pairs it participates in.
#[derive(Debug, Clone)]
pub struct PreparedShape {
    polygon: Polygon,
    pub area: f64,
    pub perimeter: f64,
    pub complexity: usize,
    pub circularity: f64,
    pub aspect_ratio: f64,
    pub mbr_center: (f64, f64),
    descriptor: ShapeDescriptor,
}

impl PreparedShape {
    /// Centers the polygon, then caches derived quantities.
    pub fn from_raw(p: &Polygon, params: FourierParams) -> Result<Self, MetricsError> {
        Self::from_centered(p.center_at_origin(), params)
    }

    /// Caches derived quantities of an already-centered polygon.
    pub fn from_centered(polygon: Polygon, params: FourierParams) -> Result<Self, MetricsError> {
        let descriptor = fourier_descriptor(&polygon, params)?;
        let mbr = polygon.mbr();
        let center = mbr.center();
        Ok(PreparedShape {
            area: polygon.area(),
            perimeter: polygon.perimeter(),
            complexity: polygon.complexity_count(),
            circularity: circularity(&polygon),
            aspect_ratio: mbr.width() / mbr.height().max(1e-12),
            mbr_center: (center.x, center.y),
            descriptor,
            polygon,
        })
    }

    pub fn polygon(&self) -> &Polygon {
        &self.polygon
    }

    pub fn descriptor(&self) -> &ShapeDescriptor {
        &self.descriptor
    }
}

/// Cached-path evaluation of all eight metrics plus the weighted combination.
/// The weighted sum runs in a fixed metric order so results are bitwise
/// reproducible.
pub fn pair_similarity(
    a: &PreparedShape,
    b: &PreparedShape,
    w: &MetricWeights,
) -> Result<PairSimilarity, MetricsError> {
    let inter = intersection_area(&a.polygon, &b.polygon)?;
    let jaccard = jaccard_from_parts(a.area, b.area, inter);
    let area = 2.0 * inter / (a.area + b.area);
    let curvature = curvature_from_counts(a.complexity, b.complexity);
    let fourier = descriptor_similarity(&a.descriptor, &b.descriptor);
    let aspect_ratio = inverse_abs_diff(a.aspect_ratio, b.aspect_ratio);
    let perimeter = inverse_abs_diff(a.perimeter, b.perimeter);
    let dx = a.mbr_center.0 - b.mbr_center.0;
    let dy = a.mbr_center.1 - b.mbr_center.1;
    let bbox_distance = 1.0 / (1.0 + (dx * dx + dy * dy).sqrt());
    let circularity = inverse_abs_diff(a.circularity, b.circularity);

    let combined = (w.jaccard * jaccard
        + w.area * area
        + w.curvature * curvature
        + w.fourier * fourier
        + w.aspect_ratio * aspect_ratio
        + w.perimeter * perimeter
        + w.bbox_distance * bbox_distance
        + w.circularity * circularity)
        .clamp(0.0, 1.0);

    Ok(PairSimilarity {
        jaccard,
        area,
        curvature,
        fourier,
        aspect_ratio,
        perimeter,
        bbox_distance,
        circularity,
        combined,
    })
}

/// Above this many objects the all-pairs mean switches to a seeded subsample.
pub const SI_EXACT_LIMIT: usize = 200;
/// Pair budget when subsampling: the number of pairs of a 200-object cluster.
pub const SI_PAIR_BUDGET: usize = SI_EXACT_LIMIT * (SI_EXACT_LIMIT - 1) / 2;

/// Similarity index of a cluster's object set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiOutcome {
    pub value: f64,
    /// True when the pair mean was subsampled rather than exact.
    pub sampled: bool,
    /// True for single-object sets, whose index is defined as 1.
    pub singleton: bool,
}

/// Mean combined similarity over all unordered object pairs, enumerated in a
/// fixed order. Sets larger than [`SI_EXACT_LIMIT`] are averaged over a
/// seeded uniform subsample of [`SI_PAIR_BUDGET`] pairs instead.
pub fn similarity_index(
    shapes: &[&PreparedShape],
    w: &MetricWeights,
    seed: u64,
) -> Result<SiOutcome, MetricsError> {
    mean_pairwise(shapes.len(), seed, |i, j| {
        Ok(pair_similarity(shapes[i], shapes[j], w)?.combined)
    })
}

/// Core of the similarity index: the (sub)sampled mean over unordered pairs
/// of `n` objects, scored by `pair_score`.
fn mean_pairwise(
    n: usize,
    seed: u64,
    mut pair_score: impl FnMut(usize, usize) -> Result<f64, MetricsError>,
) -> Result<SiOutcome, MetricsError> {
    match n {
        0 => return Err(MetricsError::EmptyCluster),
        1 => {
            return Ok(SiOutcome {
                value: 1.0,
                sampled: false,
                singleton: true,
            })
        }
        _ => {}
    }
    let total_pairs = n * (n - 1) / 2;
    let mut sum = 0.0;
    let mut count = 0usize;
    if n <= SI_EXACT_LIMIT {
        for i in 0..n {
            for j in (i + 1)..n {
                sum += pair_score(i, j)?;
                count += 1;
            }
        }
        Ok(SiOutcome {
            value: sum / count as f64,
            sampled: false,
            singleton: false,
        })
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks = rand::seq::index::sample(&mut rng, total_pairs, SI_PAIR_BUDGET).into_vec();
        picks.sort_unstable();
        for linear in picks {
            let (i, j) = unrank_pair(linear, n);
            sum += pair_score(i, j)?;
            count += 1;
        }
        Ok(SiOutcome {
            value: sum / count as f64,
            sampled: true,
            singleton: false,
        })
    }
}

/// Inverse of the lexicographic (i < j) pair enumeration.
fn unrank_pair(linear: usize, n: usize) -> (usize, usize) {
    let mut i = 0usize;
    let mut offset = 0usize;
    loop {
        let row = n - 1 - i;
        if linear < offset + row {
            let j = i + 1 + (linear - offset);
            return (i, j);
        }
        offset += row;
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use std::f64::consts::PI;

    fn poly(id: u64, pts: &[(f64, f64)]) -> Polygon {
        Polygon::new(id, pts.iter().map(|&(x, y)| Point2::new(x, y)).collect()).unwrap()
    }

    fn centered_square(id: u64) -> Polygon {
        poly(id, &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]).center_at_origin()
    }

    fn centered_ngon(id: u64, n: usize, radius: f64) -> Polygon {
        let pts: Vec<Point2> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                Point2::new(radius * t.cos(), radius * t.sin())
            })
            .collect();
        Polygon::new(id, pts).unwrap().center_at_origin()
    }

    #[test]
    fn jaccard_cases() {
        let a = centered_square(0);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);

        let square = poly(0, &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let shifted = square.translate(0.5, 0.0);
        // Analytic overlap 0.5, union 1.5.
        let got = jaccard(&square, &shifted).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-12);

        let far = square.translate(10.0, 0.0);
        assert_eq!(jaccard(&square, &far).unwrap(), 0.0);
    }

    #[test]
    fn area_similarity_cases() {
        let square = poly(0, &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        assert_eq!(area_similarity(&square, &square).unwrap(), 1.0);
        let shifted = square.translate(0.5, 0.0);
        let got = area_similarity(&square, &shifted).unwrap();
        assert!((got - 0.5).abs() < 1e-12);
        let far = square.translate(10.0, 0.0);
        assert_eq!(area_similarity(&square, &far).unwrap(), 0.0);
    }

    #[test]
    fn curvature_cases() {
        let square = centered_square(0);
        let octagon = centered_ngon(1, 8, 1.0);
        assert_eq!(curvature_similarity(&square, &square), 1.0);
        // exp(-|4-8|/8)
        let got = curvature_similarity(&square, &octagon);
        assert!((got - (-0.5f64).exp()).abs() < 1e-12);
        // exp(-297/300)
        let tri = centered_ngon(2, 3, 1.0);
        let big = centered_ngon(3, 300, 1.0);
        let got = curvature_similarity(&tri, &big);
        assert!((got - (-297.0f64 / 300.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn descriptor_of_regular_64gon_is_impulse() {
        // The boundary samples of a regular 64-gon at 64 points form a pure
        // rotation sequence, so the DFT concentrates on coefficient 1.
        let circle = centered_ngon(0, 64, 1.0);
        let d = fourier_descriptor(&circle, FourierParams::default()).unwrap();
        assert!((d.magnitudes()[0] - 1.0).abs() < 1e-12);
        for &m in &d.magnitudes()[1..] {
            assert!(m < 1e-9, "higher harmonic {m}");
        }
    }

    #[test]
    fn descriptor_rotation_of_start_invariant() {
        let n = 16;
        let base: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                (t.cos(), t.sin())
            })
            .collect();
        let rotated: Vec<(f64, f64)> = (0..n).map(|k| base[(k + 5) % n]).collect();
        let a = poly(0, &base).center_at_origin();
        let b = poly(1, &rotated).center_at_origin();
        let params = FourierParams {
            points: n,
            magnitudes: 6,
        };
        let da = fourier_descriptor(&a, params).unwrap();
        let db = fourier_descriptor(&b, params).unwrap();
        for (x, y) in da.magnitudes().iter().zip(db.magnitudes()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn descriptor_scale_invariant() {
        let a = centered_ngon(0, 20, 1.0);
        let b = centered_ngon(1, 20, 3.0);
        let da = fourier_descriptor(&a, FourierParams::default()).unwrap();
        let db = fourier_descriptor(&b, FourierParams::default()).unwrap();
        for (x, y) in da.magnitudes().iter().zip(db.magnitudes()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn descriptor_similarity_formula() {
        let a = ShapeDescriptor {
            magnitudes: vec![1.0, 0.0],
        };
        let b = ShapeDescriptor {
            magnitudes: vec![1.0, 1.0],
        };
        assert_eq!(descriptor_similarity(&a, &b), 0.5);
        let c = ShapeDescriptor {
            magnitudes: vec![1.0, 3.0],
        };
        assert_eq!(descriptor_similarity(&a, &c), 0.25);
        assert_eq!(descriptor_similarity(&a, &a), 1.0);
    }

    #[test]
    fn aspect_ratio_cases() {
        let square = centered_square(0);
        assert_eq!(aspect_ratio_similarity(&square, &square), 1.0);
        let wide = poly(1, &[(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (0.0, 1.0)]).center_at_origin();
        assert_eq!(aspect_ratio_similarity(&wide, &square), 0.5);
        let wider = poly(2, &[(0.0, 0.0), (4.0, 0.0), (4.0, 1.0), (0.0, 1.0)]).center_at_origin();
        assert_eq!(aspect_ratio_similarity(&wider, &square), 0.25);
    }

    #[test]
    fn perimeter_similarity_cases() {
        let p4 = centered_square(0);
        assert_eq!(perimeter_similarity(&p4, &p4), 1.0);
        let p5 = poly(1, &[(0.0, 0.0), (1.25, 0.0), (1.25, 1.25), (0.0, 1.25)]).center_at_origin();
        assert!((perimeter_similarity(&p4, &p5) - 0.5).abs() < 1e-12);
        let p8 = poly(2, &[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]).center_at_origin();
        assert!((perimeter_similarity(&p4, &p8) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn bbox_distance_cases() {
        let square = centered_square(0);
        assert_eq!(bbox_distance_similarity(&square, &square), 1.0);
        // Centered 3-4-5 triangle has MBR center (2/3, 1/2); its x-mirror
        // lands at (-2/3, 1/2), so the centers are 4/3 apart.
        let tri = poly(1, &[(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)]).center_at_origin();
        let mirrored = poly(
            2,
            &[(0.0, 0.0), (-4.0, 0.0), (0.0, 3.0)],
        )
        .center_at_origin();
        let got = bbox_distance_similarity(&tri, &mirrored);
        assert!((got - 3.0 / 7.0).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn circularity_cases() {
        let square = centered_square(0);
        assert!((circularity(&square) - PI / 4.0).abs() < 1e-12);
        let tri = poly(1, &[(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)]).center_at_origin();
        // 4 pi * 6 / 144
        assert!((circularity(&tri) - PI / 6.0).abs() < 1e-12);
        // Many-sided regular polygons approach the isoperimetric limit.
        assert!(circularity(&centered_ngon(2, 4096, 1.0)) > 0.999);

        let got = circularity_similarity(&square, &tri);
        assert!((got - 1.0 / (1.0 + PI / 12.0)).abs() < 1e-12);
        assert_eq!(circularity_similarity(&square, &square), 1.0);
    }

    #[test]
    fn combined_identity_is_one() {
        let p = centered_ngon(0, 9, 1.4);
        let sim = combined_similarity(&p, &p, &MetricWeights::equal(), FourierParams::default())
            .unwrap();
        assert_eq!(sim.combined, 1.0);
        for s in sim.scores() {
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn combined_one_hot_projects() {
        let a = centered_square(0);
        let b = centered_ngon(1, 8, 1.0);
        let w = MetricWeights::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let sim = combined_similarity(&a, &b, &w, FourierParams::default()).unwrap();
        assert_eq!(sim.combined, sim.jaccard);
        assert_eq!(sim.jaccard, jaccard(&a, &b).unwrap());
    }

    #[test]
    fn combined_equal_weights_matches_hand_sum() {
        let a = centered_square(0);
        let b = centered_ngon(1, 8, 1.0);
        let params = FourierParams::default();
        let hand = (jaccard(&a, &b).unwrap()
            + area_similarity(&a, &b).unwrap()
            + curvature_similarity(&a, &b)
            + fourier_similarity(&a, &b, params).unwrap()
            + aspect_ratio_similarity(&a, &b)
            + perimeter_similarity(&a, &b)
            + bbox_distance_similarity(&a, &b)
            + circularity_similarity(&a, &b))
            / 8.0;
        let sim = combined_similarity(&a, &b, &MetricWeights::equal(), params).unwrap();
        assert!((sim.combined - hand).abs() < 1e-12);
    }

    #[test]
    fn combined_within_weight_sum_invariant() {
        let a = centered_square(0);
        let b = centered_ngon(1, 5, 0.8);
        let w = MetricWeights::new([0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]).unwrap();
        let sim = combined_similarity(&a, &b, &w, FourierParams::default()).unwrap();
        let dot: f64 = sim
            .scores()
            .iter()
            .zip([
                w.jaccard,
                w.area,
                w.curvature,
                w.fourier,
                w.aspect_ratio,
                w.perimeter,
                w.bbox_distance,
                w.circularity,
            ])
            .map(|(m, wi)| m * wi)
            .sum();
        assert!((sim.combined - dot).abs() <= 1e-12);
        assert!((0.0..=1.0).contains(&sim.combined));
    }

    #[test]
    fn weights_validation() {
        assert!(MetricWeights::new([0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_ok());
        assert!(MetricWeights::new([0.5, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(MetricWeights::new([1.5, -0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn si_identical_cluster_is_one() {
        let params = FourierParams::default();
        let shape = PreparedShape::from_raw(&centered_ngon(0, 6, 1.0), params).unwrap();
        let objects: Vec<&PreparedShape> = (0..5).map(|_| &shape).collect();
        let si = similarity_index(&objects, &MetricWeights::equal(), 7).unwrap();
        assert_eq!(si.value, 1.0);
        assert!(!si.sampled && !si.singleton);
    }

    #[test]
    fn si_of_two_equals_pair() {
        let params = FourierParams::default();
        let a = PreparedShape::from_raw(&centered_square(0), params).unwrap();
        let b = PreparedShape::from_raw(&centered_ngon(1, 8, 1.0), params).unwrap();
        let w = MetricWeights::equal();
        let si = similarity_index(&[&a, &b], &w, 7).unwrap();
        let pair = pair_similarity(&a, &b, &w).unwrap();
        assert_eq!(si.value, pair.combined);
    }

    #[test]
    fn si_mean_of_three_pairs() {
        // Averaging logic checked against hand scores 0.9, 0.8, 0.7.
        let scores = [0.9, 0.8, 0.7];
        let mut k = 0;
        let si = mean_pairwise(3, 0, |_, _| {
            let s = scores[k];
            k += 1;
            Ok(s)
        })
        .unwrap();
        assert!((si.value - 0.8).abs() < 1e-15);
    }

    #[test]
    fn si_singleton_and_empty() {
        let si = mean_pairwise(1, 0, |_, _| unreachable!()).unwrap();
        assert_eq!(si.value, 1.0);
        assert!(si.singleton);
        assert!(matches!(
            mean_pairwise(0, 0, |_, _| unreachable!()),
            Err(MetricsError::EmptyCluster)
        ));
    }

    #[test]
    fn si_matches_brute_force_on_small_clusters() {
        let params = FourierParams::default();
        let shapes: Vec<PreparedShape> = (0..7)
            .map(|k| PreparedShape::from_raw(&centered_ngon(k, 3 + k as usize, 1.0), params).unwrap())
            .collect();
        let refs: Vec<&PreparedShape> = shapes.iter().collect();
        let w = MetricWeights::equal();
        let si = similarity_index(&refs, &w, 3).unwrap();

        let mut sum = 0.0;
        let mut count = 0;
        for i in 0..refs.len() {
            for j in (i + 1)..refs.len() {
                sum += pair_similarity(refs[i], refs[j], &w).unwrap().combined;
                count += 1;
            }
        }
        assert!((si.value - sum / count as f64).abs() < 1e-15);
    }

    #[test]
    fn si_large_cluster_samples_deterministically() {
        let n = SI_EXACT_LIMIT + 30;
        let score = |i: usize, j: usize| Ok(((i * 31 + j * 17) % 100) as f64 / 100.0);
        let a = mean_pairwise(n, 42, score).unwrap();
        let b = mean_pairwise(n, 42, score).unwrap();
        assert!(a.sampled);
        assert_eq!(a.value, b.value);
        // The subsample mean stays near the exact mean.
        let exact: f64 = {
            let mut s = 0.0;
            let mut cnt = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += ((i * 31 + j * 17) % 100) as f64 / 100.0;
                    cnt += 1;
                }
            }
            s / cnt as f64
        };
        assert!((a.value - exact).abs() < 0.02);
    }

    #[test]
    fn unrank_pair_is_lexicographic() {
        let n = 6;
        let mut linear = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                assert_eq!(unrank_pair(linear, n), (i, j));
                linear += 1;
            }
        }
    }

    #[test]
    fn metrics_symmetric_exactly() {
        let a = centered_ngon(0, 7, 1.3);
        let b = poly(1, &[(0.0, 0.0), (2.0, 0.3), (1.7, 1.9), (0.2, 1.1)]).center_at_origin();
        let w = MetricWeights::equal();
        let params = FourierParams::default();
        let ab = combined_similarity(&a, &b, &w, params).unwrap();
        let ba = combined_similarity(&b, &a, &w, params).unwrap();
        assert_eq!(ab.scores(), ba.scores());
        assert_eq!(ab.combined, ba.combined);
    }
}
