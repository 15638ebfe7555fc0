//! Desk-scale analysis harness: coverage sweeps over top fractions, the
//! similarity-index histogram, and metric-kernel timings.
//!
//! Timed numbers are reported, never asserted; sweep and histogram contents
//! are reproducible from the seed (timings of course are not).

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{GeomId, Point2, Polygon};
use crate::metrics::{self, FourierParams, MetricWeights, PreparedShape};
use crate::pipeline::{
    self, brute_force_oracle_from, find_clusters, PipelineConfig, PipelineError, ReportRow,
    SimilarityContext,
};

/// One pipeline run per requested top fraction, all sharing the seed.
pub fn sweep(
    sources: &[Polygon],
    targets: &[Polygon],
    base: &PipelineConfig,
    p_values: &[f64],
) -> Result<Vec<ReportRow>, PipelineError> {
    let mut rows = Vec::with_capacity(p_values.len());
    for &p in p_values {
        let cfg = PipelineConfig {
            top_fraction: p,
            ..base.clone()
        };
        let outcome = pipeline::run(sources, targets, &cfg, None)?;
        rows.push(outcome.report_row);
    }
    Ok(rows)
}

pub const HISTOGRAM_BINS: usize = 10;

/// Decile counts of exact cluster similarity indexes. Runs the oracle, so
/// the scale guard applies.
pub fn si_histogram(
    sources: &[Polygon],
    targets: &[Polygon],
    cfg: &PipelineConfig,
    force: bool,
) -> Result<[u64; HISTOGRAM_BINS], PipelineError> {
    cfg.validate()?;
    let set = find_clusters(sources, targets, cfg)?;
    let ctx = SimilarityContext::new(sources, targets, cfg)?;
    let oracle = brute_force_oracle_from(&ctx, &set, cfg, force)?;
    let mut bins = [0u64; HISTOGRAM_BINS];
    for (_, si) in oracle {
        let bin = ((si * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        bins[bin] += 1;
    }
    Ok(bins)
}

pub fn write_histogram(path: &Path, bins: &[u64; HISTOGRAM_BINS]) -> Result<(), PipelineError> {
    let mut out = String::from("bin_low,bin_high,count\n");
    for (k, count) in bins.iter().enumerate() {
        let low = k as f64 / HISTOGRAM_BINS as f64;
        let high = (k + 1) as f64 / HISTOGRAM_BINS as f64;
        out.push_str(&format!("{low},{high},{count}\n"));
    }
    std::fs::write(path, out).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// ns/op of one metric kernel over the fixed pair set, repeated over rounds.
#[derive(Debug, Clone)]
pub struct KernelTiming {
    pub name: &'static str,
    pub mean_ns: f64,
    pub variance_ns2: f64,
}

const TIMING_ROUNDS: usize = 5;

fn random_shape(rng: &mut ChaCha8Rng, id: GeomId) -> Polygon {
    let sides = rng.gen_range(4..16usize);
    let radius = rng.gen_range(0.5..2.0);
    let pts: Vec<Point2> = (0..sides)
        .map(|k| {
            let r = radius * rng.gen_range(0.7..1.0);
            let t = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
            Point2::new(r * t.cos(), r * t.sin())
        })
        .collect();
    Polygon::new(id, pts).expect("sorted-angle rings are simple")
}

/// Times each pairwise metric over `n_pairs` seeded random shape pairs.
/// Pinned single-threaded; per-metric variance across rounds is reported
/// alongside the mean.
pub fn time_kernels(n_pairs: usize, seed: u64) -> Vec<KernelTiming> {
    if n_pairs == 0 {
        return Vec::new();
    }
    let params = FourierParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(PreparedShape, PreparedShape)> = (0..n_pairs)
        .map(|k| {
            let a = random_shape(&mut rng, 2 * k as GeomId);
            let b = random_shape(&mut rng, 2 * k as GeomId + 1);
            (
                PreparedShape::from_raw(&a, params).expect("valid shape"),
                PreparedShape::from_raw(&b, params).expect("valid shape"),
            )
        })
        .collect();

    type Kernel = fn(&PreparedShape, &PreparedShape) -> f64;
    let kernels: [(&'static str, Kernel); 9] = [
        ("jaccard", |a, b| {
            metrics::jaccard(a.polygon(), b.polygon()).unwrap_or(0.0)
        }),
        ("area_similarity", |a, b| {
            metrics::area_similarity(a.polygon(), b.polygon()).unwrap_or(0.0)
        }),
        ("curvature_similarity", |a, b| {
            metrics::curvature_similarity(a.polygon(), b.polygon())
        }),
        ("fourier_similarity", |a, b| {
            metrics::descriptor_similarity(a.descriptor(), b.descriptor())
        }),
        ("aspect_ratio_similarity", |a, b| {
            metrics::aspect_ratio_similarity(a.polygon(), b.polygon())
        }),
        ("perimeter_similarity", |a, b| {
            metrics::perimeter_similarity(a.polygon(), b.polygon())
        }),
        ("bbox_distance_similarity", |a, b| {
            metrics::bbox_distance_similarity(a.polygon(), b.polygon())
        }),
        ("circularity_similarity", |a, b| {
            metrics::circularity_similarity(a.polygon(), b.polygon())
        }),
        ("combined_similarity", |a, b| {
            metrics::pair_similarity(a, b, &MetricWeights::equal())
                .map(|s| s.combined)
                .unwrap_or(0.0)
        }),
    ];

    let mut out = Vec::with_capacity(kernels.len());
    for (name, kernel) in kernels {
        let mut samples = [0.0f64; TIMING_ROUNDS];
        for slot in &mut samples {
            let start = Instant::now();
            let mut sink = 0.0;
            for (a, b) in &pairs {
                sink += kernel(a, b);
            }
            let elapsed = start.elapsed().as_nanos() as f64;
            std::hint::black_box(sink);
            *slot = elapsed / n_pairs as f64;
        }
        let mean = samples.iter().sum::<f64>() / TIMING_ROUNDS as f64;
        let variance = samples
            .iter()
            .map(|s| (s - mean) * (s - mean))
            .sum::<f64>()
            / TIMING_ROUNDS as f64;
        out.push(KernelTiming {
            name,
            mean_ns: mean,
            variance_ns2: variance,
        });
    }
    out
}

pub fn write_timings(path: &Path, timings: &[KernelTiming]) -> Result<(), PipelineError> {
    let mut out = String::from("metric,mean_ns_per_op,variance_ns2\n");
    for t in timings {
        out.push_str(&format!("{},{},{}\n", t.name, t.mean_ns, t.variance_ns2));
    }
    std::fs::write(path, out).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{GeneratorProfile, GeneratorSpec};

    #[test]
    fn zero_pairs_gives_empty_table() {
        assert!(time_kernels(0, 1).is_empty());
    }

    #[test]
    fn timings_cover_all_kernels() {
        let t = time_kernels(8, 2);
        assert_eq!(t.len(), 9);
        for k in &t {
            assert!(k.mean_ns > 0.0);
            assert!(k.variance_ns2 >= 0.0);
        }
    }

    #[test]
    fn histogram_counts_partition_clusters() {
        let (sources, targets) = pipeline::generate_synthetic(&GeneratorSpec {
            targets: 60,
            ..GeneratorSpec::default()
        });
        let cfg = PipelineConfig {
            sample_size: 60,
            class_size: 20,
            ..PipelineConfig::with_seed(3)
        };
        let bins = si_histogram(&sources, &targets, &cfg, false).unwrap();
        let total: u64 = bins.iter().sum();
        assert_eq!(total, 60); // every target formed a cluster
    }

    #[test]
    fn histogram_identical_shapes_in_top_bin() {
        let (sources, targets) = pipeline::generate_synthetic(&GeneratorSpec {
            targets: 20,
            members_per_cluster: 4,
            high_fraction: 1.0,
            noise: 0.0,
            seed: 4,
            profile: GeneratorProfile::SeparableFamilies,
        });
        let cfg = PipelineConfig {
            sample_size: 40,
            class_size: 10,
            ..PipelineConfig::with_seed(4)
        };
        let bins = si_histogram(&sources, &targets, &cfg, false).unwrap();
        assert_eq!(bins[9], 20, "bins {bins:?}");
        assert!(bins[..9].iter().all(|&c| c == 0));
    }

    #[test]
    fn bimodal_families_fill_two_regions() {
        let (sources, targets) = pipeline::generate_synthetic(&GeneratorSpec {
            targets: 120,
            members_per_cluster: 6,
            high_fraction: 0.5,
            noise: 1.0,
            seed: 5,
            profile: GeneratorProfile::SeparableFamilies,
        });
        let cfg = PipelineConfig {
            sample_size: 80,
            class_size: 30,
            ..PipelineConfig::with_seed(5)
        };
        let bins = si_histogram(&sources, &targets, &cfg, false).unwrap();
        // High-similarity neighborhoods pile into the top bin; mixed-family
        // clusters stay below 0.8, leaving a gap in between.
        assert!(bins[9] > 30, "bins {bins:?}");
        let low: u64 = bins[..8].iter().sum();
        assert!(low > 30, "bins {bins:?}");
    }
}
