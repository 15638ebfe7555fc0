//! Uniform-grid tile index over source-geometry MBRs.
//!
//! `delta_x` / `delta_y` are tiles per unit: a geometry's MBR maps to the
//! inclusive tile block `floor(min * delta) ..= ceil(max * delta)`. The ceil
//! upper bound can over-cover by one row or column; candidate retrieval only
//! needs the superset property, so that is kept as-is.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::geometry::{GeomId, Mbr, Polygon};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot derive index granularity from an empty source set")]
    EmptySources,
}

/// Tiles per unit: the reciprocal of the mean source MBR extent per axis, so
/// one tile spans roughly one average geometry. Clamped to stay finite and
/// positive for degenerate inputs.
pub fn define_granularity(sources: &[Polygon]) -> Result<(f64, f64), IndexError> {
    if sources.is_empty() {
        return Err(IndexError::EmptySources);
    }
    let n = sources.len() as f64;
    let (mut w, mut h) = (0.0, 0.0);
    for s in sources {
        let m = s.mbr();
        w += m.width();
        h += m.height();
    }
    let clamp = |mean: f64| {
        let delta = 1.0 / mean;
        if delta.is_finite() && delta > 0.0 {
            delta
        } else {
            1.0
        }
    };
    Ok((clamp(w / n), clamp(h / n)))
}

#[derive(Debug, Clone)]
pub struct GridIndex {
    delta_x: f64,
    delta_y: f64,
    tiles: BTreeMap<(i64, i64), BTreeSet<GeomId>>,
}

impl GridIndex {
    pub fn new(delta_x: f64, delta_y: f64) -> Self {
        assert!(delta_x > 0.0 && delta_y > 0.0, "granularity must be positive");
        GridIndex {
            delta_x,
            delta_y,
            tiles: BTreeMap::new(),
        }
    }

    /// Granularity from the sources, then every source indexed.
    pub fn build(sources: &[Polygon]) -> Result<Self, IndexError> {
        let (dx, dy) = define_granularity(sources)?;
        let mut idx = GridIndex::new(dx, dy);
        for s in sources {
            idx.add(s);
        }
        Ok(idx)
    }

    pub fn granularity(&self) -> (f64, f64) {
        (self.delta_x, self.delta_y)
    }

    /// Inclusive tile block covered by an MBR.
    pub fn tile_range(&self, mbr: &Mbr) -> (i64, i64, i64, i64) {
        let to_tile = |v: f64| v.clamp(i64::MIN as f64, i64::MAX as f64) as i64;
        (
            to_tile((mbr.min_x * self.delta_x).floor()),
            to_tile((mbr.max_x * self.delta_x).ceil()),
            to_tile((mbr.min_y * self.delta_y).floor()),
            to_tile((mbr.max_y * self.delta_y).ceil()),
        )
    }

    /// Number of tiles in an MBR's block; feature inputs F3/F4.
    pub fn tile_count(&self, mbr: &Mbr) -> u64 {
        let (i0, i1, j0, j1) = self.tile_range(mbr);
        ((i1 - i0 + 1) as u64) * ((j1 - j0 + 1) as u64)
    }

    /// Registers the polygon's id in every tile its MBR block covers.
    /// Re-adding the same polygon is a no-op (tiles hold sets).
    pub fn add(&mut self, p: &Polygon) {
        let (i0, i1, j0, j1) = self.tile_range(&p.mbr());
        for i in i0..=i1 {
            for j in j0..=j1 {
                self.tiles.entry((i, j)).or_default().insert(p.id());
            }
        }
    }

    pub fn tile_contents(&self, i: i64, j: i64) -> Option<&BTreeSet<GeomId>> {
        self.tiles.get(&(i, j))
    }

    /// Union of tile contents over the target's MBR block: a superset of the
    /// sources whose MBR intersects the target's.
    pub fn candidate_set(&self, target: &Polygon) -> BTreeSet<GeomId> {
        let mut out = BTreeSet::new();
        self.for_each_tile_hit(&target.mbr(), |id| {
            out.insert(id);
        });
        out
    }

    /// Visits every (tile, source id) hit in the target MBR's block, in
    /// deterministic tile-then-id order. Ids shared by several tiles are
    /// visited once per tile; callers track multiplicity themselves.
    pub fn for_each_tile_hit(&self, mbr: &Mbr, mut visit: impl FnMut(GeomId)) {
        let (i0, i1, j0, j1) = self.tile_range(mbr);
        for i in i0..=i1 {
            for j in j0..=j1 {
                if let Some(ids) = self.tiles.get(&(i, j)) {
                    for &id in ids {
                        visit(id);
                    }
                }
            }
        }
    }

    pub fn tile_count_total(&self) -> usize {
        self.tiles.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{mbr_intersects, Point2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

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

    #[test]
    fn granularity_is_reciprocal_of_mean_extent() {
        let sources = vec![square(0, 0.0, 0.0, 1.0), square(1, 5.0, 5.0, 1.0)];
        assert_eq!(define_granularity(&sources).unwrap(), (1.0, 1.0));

        // Mean width 2, mean height 0.5.
        let wide = Polygon::new(
            2,
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(2.0, 0.0),
                Point2::new(2.0, 0.5),
                Point2::new(0.0, 0.5),
            ],
        )
        .unwrap();
        let (dx, dy) = define_granularity(&[wide]).unwrap();
        assert_eq!((dx, dy), (0.5, 2.0));

        let single = square(3, 2.0, 2.0, 4.0);
        assert_eq!(define_granularity(&[single]).unwrap(), (0.25, 0.25));
    }

    #[test]
    fn granularity_rejects_empty() {
        assert!(matches!(
            define_granularity(&[]),
            Err(IndexError::EmptySources)
        ));
    }

    #[test]
    fn unit_square_occupies_four_tiles() {
        // floor(0)=0 to ceil(1)=1 on both axes.
        let mut idx = GridIndex::new(1.0, 1.0);
        let s = square(7, 0.0, 0.0, 1.0);
        idx.add(&s);
        for tile in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!(idx.tile_contents(tile.0, tile.1).unwrap().contains(&7));
        }
        assert_eq!(idx.tile_count_total(), 4);
        assert_eq!(idx.tile_count(&s.mbr()), 4);
    }

    #[test]
    fn tiny_polygon_gets_ceil_expanded_block() {
        let mut idx = GridIndex::new(1.0, 1.0);
        let tiny = square(3, 2.25, 2.25, 0.1);
        idx.add(&tiny);
        // floor(2.25)=2 to ceil(2.35)=3 on both axes.
        let (i0, i1, j0, j1) = idx.tile_range(&tiny.mbr());
        assert_eq!((i0, i1, j0, j1), (2, 3, 2, 3));
        assert_eq!(idx.tile_count_total(), 4);
    }

    #[test]
    fn negative_coordinates_index_fine() {
        let mut idx = GridIndex::new(1.0, 1.0);
        let s = square(1, -2.5, -2.5, 1.0);
        idx.add(&s);
        let (i0, i1, j0, j1) = idx.tile_range(&s.mbr());
        assert_eq!((i0, i1, j0, j1), (-3, -1, -3, -1));
    }

    #[test]
    fn adding_twice_is_idempotent() {
        let mut once = GridIndex::new(1.0, 1.0);
        let s = square(5, 0.3, 0.3, 1.2);
        once.add(&s);
        let mut twice = GridIndex::new(1.0, 1.0);
        twice.add(&s);
        twice.add(&s);
        assert_eq!(once.tiles, twice.tiles);
    }

    #[test]
    fn candidate_set_empty_and_full() {
        let sources: Vec<Polygon> = (0..5).map(|k| square(k, k as f64 * 3.0, 0.0, 1.0)).collect();
        let idx = GridIndex::build(&sources).unwrap();

        let far = square(99, 100.0, 100.0, 1.0);
        assert!(idx.candidate_set(&far).is_empty());

        let everything = square(98, -2.0, -2.0, 20.0);
        assert_eq!(idx.candidate_set(&everything).len(), 5);
    }

    #[test]
    fn candidate_set_superset_of_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sources: Vec<Polygon> = (0..120)
            .map(|k| {
                square(
                    k,
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(0.2..3.0),
                )
            })
            .collect();
        let idx = GridIndex::build(&sources).unwrap();
        for t in 0..60 {
            let target = square(
                1000 + t,
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
                rng.gen_range(0.2..4.0),
            );
            let candidates = idx.candidate_set(&target);
            for s in &sources {
                if mbr_intersects(&s.mbr(), &target.mbr()) {
                    assert!(
                        candidates.contains(&s.id()),
                        "source {} missing for target {}",
                        s.id(),
                        target.id()
                    );
                }
            }
        }
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let sources: Vec<Polygon> = (0..10).map(|k| square(k, k as f64, 0.0, 1.5)).collect();
        let mut fwd = GridIndex::new(0.7, 0.7);
        for s in &sources {
            fwd.add(s);
        }
        let mut rev = GridIndex::new(0.7, 0.7);
        for s in sources.iter().rev() {
            rev.add(s);
        }
        assert_eq!(fwd.tiles, rev.tiles);
    }
}
