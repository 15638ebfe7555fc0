//! Lightweight per-pair cluster features and the two-level min-max
//! normalization that turns them into one 16-value vector per cluster.
//!
//! Per (member, representative) pair, 15 features are extracted:
//!
//! - F1/F2: source / representative MBR area
//! - F3/F4: grid tiles occupied by the source / representative MBR
//! - F5: real (MBR-intersecting) pairs the source participates in
//! - F6/F7: vertex counts
//! - F8/F9: perimeters
//! - F10: tile-level co-occurrences of the source, with multiplicity
//! - F11: distinct targets sharing at least one tile with the source
//! - F12: members of the cluster passing the MBR test against the
//!   representative (all of them, by construction)
//! - F13: sum of real-pair counts over the cluster's members
//! - F14: members whose MBR intersects the representative's MBR
//! - F15: cluster size
//!
//! Geometry-level normalization runs per feature over all pair rows of the
//! registry population, cluster-level normalization over the per-cluster
//! aggregates (mean normalized features, plus raw cluster size as the 16th
//! value). Both levels use the formula (v - min) / max * 10000 verbatim;
//! the denominator is the maximum, not the range, unless the conventional
//! range variant is switched on. Values outside [0, 10000] are never
//! clipped: the classifier must tolerate out-of-population clusters.

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{mbr_intersects, GeomId, Polygon};
use crate::grid::GridIndex;

pub const PAIR_FEATURE_COUNT: usize = 15;
pub const CLUSTER_FEATURE_COUNT: usize = 16;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("source {id} has no recorded statistics")]
    UnknownSourceId { id: GeomId },
    #[error("representative of cluster {target} does not reach member {member}")]
    RepresentativeMismatch { target: GeomId, member: GeomId },
}

/// First-pass counts per source geometry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SourceCounts {
    /// Tile-level (source, target) encounters, with multiplicity.
    pub total_cooccurrences: u64,
    /// Unique targets sharing at least one tile.
    pub distinct_cooccurrences: u64,
    /// MBR-intersecting (source, target) pairs.
    pub real_pairs: u64,
}

/// Accumulates per-source statistics during the cluster-finding pass.
#[derive(Debug, Clone, Default)]
pub struct SourceStats {
    counts: HashMap<GeomId, SourceCounts>,
}

impl SourceStats {
    /// One (source, target) tile co-occurrence: the source appeared in
    /// `multiplicity` tiles of the target's block.
    pub fn record_cooccurrence(&mut self, source: GeomId, multiplicity: u64) {
        let c = self.counts.entry(source).or_default();
        c.total_cooccurrences += multiplicity;
        c.distinct_cooccurrences += 1;
    }

    /// The (source, target) pair passed the MBR intersection test.
    pub fn record_real_pair(&mut self, source: GeomId) {
        self.counts.entry(source).or_default().real_pairs += 1;
    }

    pub fn get(&self, source: GeomId) -> Result<SourceCounts, FeatureError> {
        self.counts
            .get(&source)
            .copied()
            .ok_or(FeatureError::UnknownSourceId { id: source })
    }
}

/// Raw values F1..F15 for one (member, representative) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeatures(pub [f64; PAIR_FEATURE_COUNT]);

/// Cluster-level inputs shared by every pair row of one cluster.
#[derive(Debug, Clone, Copy)]
pub struct ClusterPairContext {
    /// Members passing the MBR test against the representative (F12, F14).
    pub mbr_hits: u64,
    /// Sum of member real-pair counts (F13).
    pub sum_real_pairs: u64,
    /// Cluster size (F15).
    pub size: u64,
}

/// Raw feature row for one member against the representative geometry.
/// Both polygons are the raw (uncentered) dataset geometries; tile counts
/// depend on true positions.
pub fn extract_pair_features(
    member: &Polygon,
    representative: &Polygon,
    counts: SourceCounts,
    ctx: ClusterPairContext,
    idx: &GridIndex,
) -> PairFeatures {
    let m_mbr = member.mbr();
    let g_mbr = representative.mbr();
    PairFeatures([
        m_mbr.area(),
        g_mbr.area(),
        idx.tile_count(&m_mbr) as f64,
        idx.tile_count(&g_mbr) as f64,
        counts.real_pairs as f64,
        member.vertices().len() as f64,
        representative.vertices().len() as f64,
        member.perimeter(),
        representative.perimeter(),
        counts.total_cooccurrences as f64,
        counts.distinct_cooccurrences as f64,
        ctx.mbr_hits as f64,
        ctx.sum_real_pairs as f64,
        ctx.mbr_hits as f64,
        ctx.size as f64,
    ])
}

/// Checks that the representative's envelope reaches every member, as the
/// cluster construction promises.
pub fn check_representative(
    representative: &Polygon,
    members: &[&Polygon],
) -> Result<(), FeatureError> {
    let g_mbr = representative.mbr();
    for m in members {
        if !mbr_intersects(&g_mbr, &m.mbr()) {
            return Err(FeatureError::RepresentativeMismatch {
                target: representative.id(),
                member: m.id(),
            });
        }
    }
    Ok(())
}

/// Frozen two-level min-max bounds. Built once from the labeled-sample
/// population, then applied unchanged to every cluster.
#[derive(Debug, Clone)]
pub struct MinMaxRegistry {
    geom_min: [f64; PAIR_FEATURE_COUNT],
    geom_max: [f64; PAIR_FEATURE_COUNT],
    cluster_min: [f64; CLUSTER_FEATURE_COUNT],
    cluster_max: [f64; CLUSTER_FEATURE_COUNT],
    range_normalize: bool,
}

/// One population cluster: its id, pair rows in member-id order, and size.
pub type PopulationCluster = (GeomId, Vec<PairFeatures>, u64);

impl MinMaxRegistry {
    /// Fits both normalization levels over the population.
    pub fn fit(population: &[PopulationCluster], range_normalize: bool) -> Self {
        let mut reg = MinMaxRegistry {
            geom_min: [f64::INFINITY; PAIR_FEATURE_COUNT],
            geom_max: [f64::NEG_INFINITY; PAIR_FEATURE_COUNT],
            cluster_min: [f64::INFINITY; CLUSTER_FEATURE_COUNT],
            cluster_max: [f64::NEG_INFINITY; CLUSTER_FEATURE_COUNT],
            range_normalize,
        };
        for (_, rows, _) in population {
            for row in rows {
                for (j, v) in row.0.iter().enumerate() {
                    reg.geom_min[j] = reg.geom_min[j].min(*v);
                    reg.geom_max[j] = reg.geom_max[j].max(*v);
                }
            }
        }
        for j in 0..PAIR_FEATURE_COUNT {
            if reg.geom_min[j] > reg.geom_max[j] {
                reg.geom_min[j] = 0.0;
                reg.geom_max[j] = 0.0;
            }
        }
        for (_, rows, size) in population {
            let agg = reg.aggregate(rows, *size);
            for (j, v) in agg.iter().enumerate() {
                reg.cluster_min[j] = reg.cluster_min[j].min(*v);
                reg.cluster_max[j] = reg.cluster_max[j].max(*v);
            }
        }
        for j in 0..CLUSTER_FEATURE_COUNT {
            if reg.cluster_min[j] > reg.cluster_max[j] {
                reg.cluster_min[j] = 0.0;
                reg.cluster_max[j] = 0.0;
            }
        }
        reg
    }

    fn scale(v: f64, min: f64, max: f64, range_normalize: bool) -> f64 {
        let denom = if range_normalize { max - min } else { max };
        if denom == 0.0 {
            0.0
        } else {
            (v - min) / denom * 10000.0
        }
    }

    /// Geometry-level normalization of one raw feature value.
    pub fn normalize_geometry_feature(&self, value: f64, j: usize) -> f64 {
        Self::scale(value, self.geom_min[j], self.geom_max[j], self.range_normalize)
    }

    /// Per-feature mean of normalized pair rows, plus the raw cluster size
    /// as the 16th aggregate. Rows must arrive in a fixed member order.
    pub fn aggregate(&self, rows: &[PairFeatures], size: u64) -> [f64; CLUSTER_FEATURE_COUNT] {
        let mut agg = [0.0; CLUSTER_FEATURE_COUNT];
        if !rows.is_empty() {
            for row in rows {
                for (j, v) in row.0.iter().enumerate() {
                    agg[j] += self.normalize_geometry_feature(*v, j);
                }
            }
            for slot in agg.iter_mut().take(PAIR_FEATURE_COUNT) {
                *slot /= rows.len() as f64;
            }
        }
        agg[CLUSTER_FEATURE_COUNT - 1] = size as f64;
        agg
    }

    /// Cluster-level normalization of an aggregate into the final vector.
    pub fn cluster_feature_vector(
        &self,
        agg: &[f64; CLUSTER_FEATURE_COUNT],
    ) -> ClusterFeatureVector {
        let mut out = [0.0; CLUSTER_FEATURE_COUNT];
        for j in 0..CLUSTER_FEATURE_COUNT {
            out[j] = Self::scale(
                agg[j],
                self.cluster_min[j],
                self.cluster_max[j],
                self.range_normalize,
            );
        }
        ClusterFeatureVector(out)
    }

    /// Full path: pair rows -> aggregate -> normalized 16-value vector.
    pub fn vector_for(&self, rows: &[PairFeatures], size: u64) -> ClusterFeatureVector {
        self.cluster_feature_vector(&self.aggregate(rows, size))
    }
}

/// The 16 normalized cluster features fed to the classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterFeatureVector(pub [f64; CLUSTER_FEATURE_COUNT]);

impl ClusterFeatureVector {
    /// CSV row: cluster id followed by the 16 values.
    pub fn csv_row(&self, cluster: GeomId) -> String {
        let mut row = cluster.to_string();
        for v in &self.0 {
            row.push(',');
            row.push_str(&v.to_string());
        }
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn square(id: GeomId, x: f64, y: f64, side: f64) -> Polygon {
        Polygon::new(
            id,
            vec![
                Point2::new(x, y),
                Point2::new(x + side, y),
                Point2::new(x + side, y + side),
                Point2::new(x, y + side),
            ],
        )
        .unwrap()
    }

    fn registry_with(geom: (f64, f64), range_normalize: bool) -> MinMaxRegistry {
        MinMaxRegistry {
            geom_min: [geom.0; PAIR_FEATURE_COUNT],
            geom_max: [geom.1; PAIR_FEATURE_COUNT],
            cluster_min: [0.0; CLUSTER_FEATURE_COUNT],
            cluster_max: [1.0; CLUSTER_FEATURE_COUNT],
            range_normalize,
        }
    }

    #[test]
    fn verbatim_formula_cases() {
        let reg = registry_with((4.0, 10.0), false);
        // Value at the minimum zeroes the numerator.
        assert_eq!(reg.normalize_geometry_feature(4.0, 0), 0.0);
        // Denominator is the max, not the range: (10-4)/10 * 10000.
        assert_eq!(reg.normalize_geometry_feature(10.0, 0), 6000.0);

        let zero_min = registry_with((0.0, 10.0), false);
        assert_eq!(zero_min.normalize_geometry_feature(10.0, 0), 10000.0);

        let degenerate = registry_with((0.0, 0.0), false);
        assert_eq!(degenerate.normalize_geometry_feature(5.0, 0), 0.0);

        // Out-of-population values pass through unclipped.
        let reg = registry_with((0.0, 1.0), false);
        assert_eq!(reg.normalize_geometry_feature(2.5, 0), 25000.0);
        assert_eq!(reg.normalize_geometry_feature(-1.0, 0), -10000.0);
    }

    #[test]
    fn range_variant_restores_convention() {
        let reg = registry_with((4.0, 10.0), true);
        assert_eq!(reg.normalize_geometry_feature(10.0, 0), 10000.0);
        assert_eq!(reg.normalize_geometry_feature(4.0, 0), 0.0);
    }

    #[test]
    fn normalization_is_monotone() {
        let reg = registry_with((0.0, 7.0), false);
        let mut prev = f64::NEG_INFINITY;
        for v in [0.0, 1.0, 2.5, 6.9, 7.0, 9.0] {
            let nf = reg.normalize_geometry_feature(v, 3);
            assert!(nf >= prev);
            prev = nf;
        }
    }

    #[test]
    fn two_cluster_population_hand_computed() {
        // Cluster X: rows of constant 2 and 4 per feature, size 2.
        // Cluster Y: one row of constant 10, size 1.
        // Geometry level (verbatim): min 2, max 10 -> NF = (v-2)/10*1e4,
        // so 0, 2000, 8000. Mean NF: X -> 1000, Y -> 8000.
        // Cluster level features 1..15: min 1000, max 8000 ->
        //   X: 0, Y: (8000-1000)/8000*1e4 = 8750.
        // Feature 16 (raw sizes 2 and 1): min 1, max 2 ->
        //   X: (2-1)/2*1e4 = 5000, Y: 0.
        let x_rows = vec![
            PairFeatures([2.0; PAIR_FEATURE_COUNT]),
            PairFeatures([4.0; PAIR_FEATURE_COUNT]),
        ];
        let y_rows = vec![PairFeatures([10.0; PAIR_FEATURE_COUNT])];
        let population = vec![(0, x_rows.clone(), 2), (1, y_rows.clone(), 1)];

        let reg = MinMaxRegistry::fit(&population, false);
        let x = reg.vector_for(&x_rows, 2);
        let y = reg.vector_for(&y_rows, 1);
        for j in 0..PAIR_FEATURE_COUNT {
            assert_eq!(x.0[j], 0.0, "x feature {j}");
            assert_eq!(y.0[j], 8750.0, "y feature {j}");
        }
        assert_eq!(x.0[15], 5000.0);
        assert_eq!(y.0[15], 0.0);

        // Range-normalized variant, same population:
        // NF = (v-2)/8*1e4 -> 0, 2500, 10000; means 1250 and 10000.
        // Cluster level: (agg-1250)/8750*1e4 -> X: 0, Y: 10000.
        // Feature 16 range 1 -> X: 10000, Y: 0.
        let reg = MinMaxRegistry::fit(&population, true);
        let x = reg.vector_for(&x_rows, 2);
        let y = reg.vector_for(&y_rows, 1);
        for j in 0..PAIR_FEATURE_COUNT {
            assert_eq!(x.0[j], 0.0);
            assert_eq!(y.0[j], 10000.0);
        }
        assert_eq!(x.0[15], 10000.0);
        assert_eq!(y.0[15], 0.0);
    }

    #[test]
    fn single_cluster_population_gives_zeros() {
        let rows = vec![PairFeatures([3.0; PAIR_FEATURE_COUNT])];
        let population = vec![(0, rows.clone(), 1)];
        let reg = MinMaxRegistry::fit(&population, false);
        let v = reg.vector_for(&rows, 1);
        // Every aggregate equals its own min; numerators vanish where the
        // max is nonzero and the degenerate guard returns 0 elsewhere.
        for j in 0..PAIR_FEATURE_COUNT {
            assert_eq!(v.0[j], 0.0);
        }
    }

    #[test]
    fn pair_features_on_a_real_scene() {
        // Unit-square source at the origin, target shifted by (0.25, 0.25),
        // unit granularity. Worked out by hand:
        //   f1 = 1, f3 = 4 (tiles 0..=1 squared), f2 = 1,
        //   f4 = 9 (floor(0.25)=0 to ceil(1.25)=2 on both axes),
        //   f10 = 4 (source sits in 4 tiles of the target's 3x3 block).
        let source = square(0, 0.0, 0.0, 1.0);
        let target = square(0, 0.25, 0.25, 1.0);
        let mut idx = GridIndex::new(1.0, 1.0);
        idx.add(&source);

        let mut stats = SourceStats::default();
        let mut multiplicity = 0;
        idx.for_each_tile_hit(&target.mbr(), |id| {
            assert_eq!(id, 0);
            multiplicity += 1;
        });
        stats.record_cooccurrence(0, multiplicity);
        stats.record_real_pair(0);

        let ctx = ClusterPairContext {
            mbr_hits: 1,
            sum_real_pairs: 1,
            size: 1,
        };
        let f = extract_pair_features(&source, &target, stats.get(0).unwrap(), ctx, &idx);
        assert_eq!(f.0[0], 1.0); // f1
        assert_eq!(f.0[1], 1.0); // f2
        assert_eq!(f.0[2], 4.0); // f3
        assert_eq!(f.0[3], 9.0); // f4
        assert_eq!(f.0[4], 1.0); // f5
        assert_eq!(f.0[5], 4.0); // f6
        assert_eq!(f.0[6], 4.0); // f7
        assert_eq!(f.0[7], 4.0); // f8
        assert_eq!(f.0[8], 4.0); // f9
        assert_eq!(f.0[9], 4.0); // f10
        assert_eq!(f.0[10], 1.0); // f11
        assert_eq!(f.0[11], 1.0); // f12
        assert_eq!(f.0[12], 1.0); // f13
        assert_eq!(f.0[13], 1.0); // f14
        assert_eq!(f.0[14], 1.0); // f15
    }

    #[test]
    fn stats_invariants_hold() {
        let mut stats = SourceStats::default();
        stats.record_cooccurrence(3, 4);
        stats.record_real_pair(3);
        stats.record_cooccurrence(3, 2);
        let c = stats.get(3).unwrap();
        assert_eq!(c.total_cooccurrences, 6);
        assert_eq!(c.distinct_cooccurrences, 2);
        assert_eq!(c.real_pairs, 1);
        assert!(c.real_pairs <= c.total_cooccurrences);
        assert!(c.distinct_cooccurrences <= c.total_cooccurrences);
        assert!(matches!(
            stats.get(99),
            Err(FeatureError::UnknownSourceId { id: 99 })
        ));
    }

    #[test]
    fn representative_check() {
        let g = square(10, 0.0, 0.0, 2.0);
        let near = square(0, 1.0, 1.0, 1.0);
        let far = square(1, 10.0, 10.0, 1.0);
        assert!(check_representative(&g, &[&near]).is_ok());
        assert!(matches!(
            check_representative(&g, &[&near, &far]),
            Err(FeatureError::RepresentativeMismatch {
                target: 10,
                member: 1
            })
        ));
    }

    #[test]
    fn csv_row_shape() {
        let v = ClusterFeatureVector([1.5; CLUSTER_FEATURE_COUNT]);
        let row = v.csv_row(42);
        assert!(row.starts_with("42,1.5,"));
        assert_eq!(row.split(',').count(), 17);
    }
}
