//! End-to-end orchestration: ingest, index, cluster finding, seeded
//! sampling, KDE thresholding, labeling and training, recall simulation,
//! budgeted verification, and output files.

pub mod synth;
pub mod wkt;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::features::{
    check_representative, ClusterFeatureVector, ClusterPairContext, FeatureError, PairFeatures,
    PopulationCluster, SourceStats,
};
use crate::geometry::{mbr_intersects, GeomId, GeometryError, Mbr, Polygon};
use crate::grid::{GridIndex, IndexError};
use crate::kde;
use crate::metrics::{
    FourierParams, MetricWeights, MetricsError, PreparedShape, SiOutcome, similarity_index,
};
use crate::scheduler::{
    self, compute_max_size, label_sample, simulate_recall, verify, Classifier, LabeledCluster,
    TrainError,
};

pub use synth::{generate_synthetic, GeneratorProfile, GeneratorSpec};
pub use wkt::{read_wkt_file, write_wkt_file, WktError};

/// Clusters past this count refuse exhaustive oracle computation unless forced.
pub const ORACLE_SCALE_GUARD: usize = 100_000;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Wkt(#[from] WktError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("invalid configuration: {reason}")]
    Config { reason: String },
    #[error("{which} dataset is empty")]
    EmptyDataset { which: &'static str },
    #[error("no clusters could be formed: no source MBR intersects any target MBR")]
    NoClusters,
    #[error("the {which} sample is empty; raise --sample-size")]
    InsufficientSample { which: &'static str },
    #[error("{count} clusters exceed the oracle scale guard of {limit}; use --force to override")]
    ScaleGuard { count: usize, limit: usize },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit code: 2 for input problems, 3 for the scale guard,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Wkt(_)
            | PipelineError::Config { .. }
            | PipelineError::EmptyDataset { .. }
            | PipelineError::NoClusters
            | PipelineError::InsufficientSample { .. } => 2,
            PipelineError::ScaleGuard { .. } => 3,
            _ => 1,
        }
    }
}

/// Which objects the similarity index averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiMembers {
    /// Representative geometry plus the source members (default).
    WithRepresentative,
    /// Source members only.
    SourcesOnly,
}

/// How sampled pair ids become cluster samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Map sampled encounter ids to their target: clusters are drawn with
    /// probability proportional to their candidate counts (default).
    PairWeighted,
    /// Uniform over emitted clusters.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Requested share of highest-SI clusters, in (0, 1).
    pub top_fraction: f64,
    /// Desired recall r_d, in (0, 1].
    pub desired_recall: f64,
    /// Pair ids drawn per sample (m).
    pub sample_size: usize,
    /// Class size N: labeling target and simulation queue width.
    pub class_size: usize,
    pub weights: MetricWeights,
    pub fourier: FourierParams,
    pub seed: u64,
    /// Normalize by (max - min) instead of the verbatim max denominator.
    pub range_normalize: bool,
    pub si_members: SiMembers,
    pub sample_mode: SampleMode,
    /// Debug flag: force the verification budget to the cluster count.
    pub exhaustive: bool,
    /// Compute the brute-force oracle (scale-guarded) and report recall.
    pub oracle_check: bool,
}

impl PipelineConfig {
    pub fn with_seed(seed: u64) -> Self {
        PipelineConfig {
            top_fraction: 0.1,
            desired_recall: 0.9,
            sample_size: 800,
            class_size: 400,
            weights: MetricWeights::equal(),
            fourier: FourierParams::default(),
            seed,
            range_normalize: false,
            si_members: SiMembers::WithRepresentative,
            sample_mode: SampleMode::PairWeighted,
            exhaustive: false,
            oracle_check: false,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |reason: String| Err(PipelineError::Config { reason });
        if !(self.top_fraction > 0.0 && self.top_fraction < 1.0) {
            return fail(format!("top fraction must be in (0, 1), got {}", self.top_fraction));
        }
        if !(self.desired_recall > 0.0 && self.desired_recall <= 1.0) {
            return fail(format!(
                "desired recall must be in (0, 1], got {}",
                self.desired_recall
            ));
        }
        if self.class_size == 0 {
            return fail("class size must be positive".into());
        }
        if self.sample_size < 2 * self.class_size {
            return fail(format!(
                "sample size {} must be at least twice the class size {}",
                self.sample_size, self.class_size
            ));
        }
        if self.fourier.points < 8 {
            return fail("fourier resampling needs at least 8 points".into());
        }
        if self.fourier.magnitudes == 0 || self.fourier.magnitudes > self.fourier.points / 2 {
            return fail("fourier magnitude count must be in 1..=points/2".into());
        }
        Ok(())
    }
}

/// One candidate cluster: a target (representative) geometry and the source
/// geometries whose MBR intersects its MBR. The similarity index is
/// memoized on first computation.
#[derive(Debug)]
pub struct Cluster {
    target: GeomId,
    members: Vec<GeomId>,
    si: OnceLock<SiOutcome>,
}

impl Cluster {
    pub fn target(&self) -> GeomId {
        self.target
    }

    pub fn members(&self) -> &[GeomId] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn cached_si(&self) -> Option<SiOutcome> {
        self.si.get().copied()
    }
}

/// Output of the cluster-finding pass.
#[derive(Debug)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
    pub stats: SourceStats,
    pub index: GridIndex,
    /// Cluster indexes of the training sample, ascending.
    pub sample: Vec<usize>,
    /// Cluster indexes of the KDE sample, ascending; disjoint from `sample`.
    pub kde_sample: Vec<usize>,
    /// Targets whose candidate set was empty.
    pub dropped_targets: usize,
    /// Total tile-level encounter count (the pair-id space actually walked).
    pub encounters: u64,
}

const SAMPLE_STREAM: u64 = 0x53414d50;
const SHUFFLE_STREAM: u64 = 0x53484646;
const KDE_STREAM: u64 = 0x4b444553;
const SI_STREAM: u64 = 0x9e3779b97f4a7c15;

/// Builds the grid index, forms one cluster per target with a nonempty
/// candidate set, accumulates source statistics, and draws the two disjoint
/// seeded cluster samples.
pub fn find_clusters(
    sources: &[Polygon],
    targets: &[Polygon],
    cfg: &PipelineConfig,
) -> Result<ClusterSet, PipelineError> {
    if sources.is_empty() {
        return Err(PipelineError::EmptyDataset { which: "source" });
    }
    if targets.is_empty() {
        return Err(PipelineError::EmptyDataset { which: "target" });
    }
    let index = GridIndex::build(sources)?;
    let src_mbr: HashMap<GeomId, Mbr> = sources.iter().map(|s| (s.id(), s.mbr())).collect();

    let mut stats = SourceStats::default();
    let mut clusters: Vec<Cluster> = Vec::new();
    // Per target: (first encounter id, encounter count, emitted cluster).
    let mut spans: Vec<(u64, u64, Option<usize>)> = Vec::with_capacity(targets.len());
    let mut encounters: u64 = 0;
    let mut dropped = 0usize;

    for t in targets {
        let t_mbr = t.mbr();
        let mut order: Vec<GeomId> = Vec::new();
        let mut mult: HashMap<GeomId, u64> = HashMap::new();
        index.for_each_tile_hit(&t_mbr, |id| {
            *mult.entry(id).or_insert_with(|| {
                order.push(id);
                0
            }) += 1;
        });

        let mut candidates: Vec<GeomId> = Vec::new();
        for &s in &order {
            stats.record_cooccurrence(s, mult[&s]);
            if mbr_intersects(&src_mbr[&s], &t_mbr) {
                stats.record_real_pair(s);
                candidates.push(s);
            }
        }

        let span_start = encounters;
        encounters += order.len() as u64;
        if candidates.is_empty() {
            dropped += 1;
            spans.push((span_start, order.len() as u64, None));
            continue;
        }
        candidates.sort_unstable();
        spans.push((span_start, order.len() as u64, Some(clusters.len())));
        clusters.push(Cluster {
            target: t.id(),
            members: candidates,
            si: OnceLock::new(),
        });
    }
    if clusters.is_empty() {
        return Err(PipelineError::NoClusters);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SAMPLE_STREAM);
    let m = cfg.sample_size;
    let (sample, kde_sample) = match cfg.sample_mode {
        SampleMode::PairWeighted => {
            let space = encounters as usize;
            let amount = (2 * m).min(space);
            let ids = rand::seq::index::sample(&mut rng, space, amount).into_vec();
            // Halve when the id space is smaller than two full draws so
            // neither sample starves.
            let (train_ids, kde_ids) = ids.split_at(amount / 2);
            let empty = BTreeSet::new();
            let sample = map_encounters_to_clusters(train_ids, &spans, &empty);
            let kde = map_encounters_to_clusters(kde_ids, &spans, &sample);
            (sample, kde)
        }
        SampleMode::Uniform => {
            let n = clusters.len();
            let amount = (2 * m).min(n);
            let ids = rand::seq::index::sample(&mut rng, n, amount).into_vec();
            let (a, b) = ids.split_at(amount / 2);
            let sample: BTreeSet<usize> = a.iter().copied().collect();
            let kde: BTreeSet<usize> = b.iter().copied().filter(|ci| !sample.contains(ci)).collect();
            (sample, kde)
        }
    };

    Ok(ClusterSet {
        clusters,
        stats,
        index,
        sample: sample.into_iter().collect(),
        kde_sample: kde_sample.into_iter().collect(),
        dropped_targets: dropped,
        encounters,
    })
}

/// Maps sampled encounter ids to the cluster of the target that owns the
/// encounter span. Targets with more candidates own more ids, so clusters
/// are drawn with probability proportional to their candidate counts.
fn map_encounters_to_clusters(
    ids: &[usize],
    spans: &[(u64, u64, Option<usize>)],
    exclude: &BTreeSet<usize>,
) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for &id in ids {
        let id = id as u64;
        let pos = spans.partition_point(|&(start, _, _)| start <= id);
        if pos == 0 {
            continue;
        }
        let (start, count, cluster) = spans[pos - 1];
        if id < start + count {
            if let Some(ci) = cluster {
                if !exclude.contains(&ci) {
                    out.insert(ci);
                }
            }
        }
    }
    out
}

/// Prepared (centered, cached) shapes for every geometry plus the similarity
/// configuration; computes and memoizes cluster similarity indexes.
pub struct SimilarityContext {
    source_shapes: HashMap<GeomId, PreparedShape>,
    target_shapes: HashMap<GeomId, PreparedShape>,
    weights: MetricWeights,
    si_members: SiMembers,
    seed: u64,
}

impl SimilarityContext {
    pub fn new(
        sources: &[Polygon],
        targets: &[Polygon],
        cfg: &PipelineConfig,
    ) -> Result<Self, PipelineError> {
        let mut source_shapes = HashMap::with_capacity(sources.len());
        for s in sources {
            source_shapes.insert(s.id(), PreparedShape::from_raw(s, cfg.fourier)?);
        }
        let mut target_shapes = HashMap::with_capacity(targets.len());
        for t in targets {
            target_shapes.insert(t.id(), PreparedShape::from_raw(t, cfg.fourier)?);
        }
        Ok(SimilarityContext {
            source_shapes,
            target_shapes,
            weights: cfg.weights,
            si_members: cfg.si_members,
            seed: cfg.seed,
        })
    }

    /// Memoized similarity index of a cluster. The object set is the
    /// representative plus members, or members only under `SourcesOnly`.
    pub fn cluster_si(&self, cluster: &Cluster) -> Result<SiOutcome, PipelineError> {
        if let Some(cached) = cluster.si.get() {
            return Ok(*cached);
        }
        let mut objects: Vec<&PreparedShape> = Vec::with_capacity(cluster.members.len() + 1);
        if self.si_members == SiMembers::WithRepresentative {
            objects.push(&self.target_shapes[&cluster.target]);
        }
        for m in &cluster.members {
            objects.push(&self.source_shapes[m]);
        }
        let seed = self.seed ^ cluster.target.wrapping_mul(SI_STREAM);
        let outcome = similarity_index(&objects, &self.weights, seed)?;
        Ok(*cluster.si.get_or_init(|| outcome))
    }
}

/// One row of the coverage report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReportRow {
    pub p: f64,
    pub targeted_fraction: f64,
    pub checked_fraction: f64,
    pub checked_to_targeted: f64,
    pub achieved_recall: Option<f64>,
}

/// Run accounting written to `run_metrics.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub total_clusters: usize,
    pub dropped_targets: usize,
    pub sample_clusters: usize,
    pub kde_sample_clusters: usize,
    pub threshold: f64,
    pub kde_used: bool,
    pub label_positives: usize,
    pub label_negatives: usize,
    pub label_exhausted: bool,
    pub classifier_trained: bool,
    pub classifier_iterations: usize,
    pub recall_approx: f64,
    pub high_sim_indices: usize,
    pub max_size: usize,
    pub checked: usize,
    pub hits: usize,
    pub targeted_fraction: f64,
    pub checked_fraction: f64,
    pub checked_to_targeted: f64,
    pub si_sampled_clusters: usize,
    pub singleton_clusters: usize,
    pub achieved_recall_vs_oracle: Option<f64>,
    pub wall_time_s: f64,
}

/// Full pipeline result.
pub struct RunOutcome {
    /// Verified clusters with SI at or above the threshold, SI descending,
    /// ties by ascending cluster id.
    pub l_r: Vec<(GeomId, f64)>,
    pub metrics: RunMetrics,
    pub report_row: ReportRow,
    /// Feature vectors of every cluster, by ascending cluster id.
    pub feature_rows: Vec<(GeomId, ClusterFeatureVector)>,
}

fn ceil_with_slack(x: f64) -> usize {
    ((x - 1e-9).ceil().max(0.0)) as usize
}

struct FeatureBuilder<'a> {
    target_by_id: HashMap<GeomId, &'a Polygon>,
    source_by_id: HashMap<GeomId, &'a Polygon>,
}

impl<'a> FeatureBuilder<'a> {
    fn new(sources: &'a [Polygon], targets: &'a [Polygon]) -> Self {
        FeatureBuilder {
            target_by_id: targets.iter().map(|t| (t.id(), t)).collect(),
            source_by_id: sources.iter().map(|s| (s.id(), s)).collect(),
        }
    }

    /// Pair rows for one cluster, in ascending member-id order.
    fn pair_rows(
        &self,
        cluster: &Cluster,
        stats: &SourceStats,
        index: &GridIndex,
    ) -> Result<Vec<PairFeatures>, PipelineError> {
        let g = self.target_by_id[&cluster.target];
        let members: Vec<&Polygon> = cluster
            .members
            .iter()
            .map(|id| self.source_by_id[id])
            .collect();
        check_representative(g, &members)?;

        let g_mbr = g.mbr();
        let mbr_hits = members
            .iter()
            .filter(|m| mbr_intersects(&m.mbr(), &g_mbr))
            .count() as u64;
        let mut sum_real_pairs = 0;
        for id in &cluster.members {
            sum_real_pairs += stats.get(*id)?.real_pairs;
        }
        let ctx = ClusterPairContext {
            mbr_hits,
            sum_real_pairs,
            size: cluster.members.len() as u64,
        };
        let mut rows = Vec::with_capacity(members.len());
        for (member, id) in members.iter().zip(&cluster.members) {
            rows.push(crate::features::extract_pair_features(
                member,
                g,
                stats.get(*id)?,
                ctx,
                index,
            ));
        }
        Ok(rows)
    }
}

/// Executes the full pipeline over pre-loaded datasets and, when `out_dir`
/// is given, writes `l_r.csv`, `features.csv` and `run_metrics.json` there.
pub fn run(
    sources: &[Polygon],
    targets: &[Polygon],
    cfg: &PipelineConfig,
    out_dir: Option<&Path>,
) -> Result<RunOutcome, PipelineError> {
    cfg.validate()?;
    let started = Instant::now();

    let set = find_clusters(sources, targets, cfg)?;
    let ctx = SimilarityContext::new(sources, targets, cfg)?;
    let total = set.clusters.len();

    // KDE phase: similarity indexes of the KDE sample, then the threshold.
    if set.kde_sample.is_empty() {
        return Err(PipelineError::InsufficientSample { which: "kde" });
    }
    let mut kde_sis = Vec::with_capacity(set.kde_sample.len());
    for &ci in &set.kde_sample {
        kde_sis.push(ctx.cluster_si(&set.clusters[ci])?.value);
    }
    let (threshold, kde_used) =
        kde::threshold_from_values(&kde_sis, cfg.top_fraction, cfg.seed ^ KDE_STREAM);

    // Labeling over the seeded-shuffled training sample.
    if set.sample.is_empty() {
        return Err(PipelineError::InsufficientSample { which: "training" });
    }
    let mut shuffled = set.sample.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    shuffled.shuffle(&mut rng);
    let shuffled_ids: Vec<GeomId> = shuffled.iter().map(|&ci| set.clusters[ci].target).collect();

    let idx_by_target: HashMap<GeomId, usize> = set
        .clusters
        .iter()
        .enumerate()
        .map(|(i, c)| (c.target, i))
        .collect();

    let mut si_error: Option<PipelineError> = None;
    {
        // Compute SIs for the walked prefix eagerly so labeling can use a
        // plain f64 closure; errors are stashed and re-raised below.
        for &ci in &shuffled {
            if let Err(e) = ctx.cluster_si(&set.clusters[ci]) {
                si_error = Some(e);
                break;
            }
        }
    }
    if let Some(e) = si_error {
        return Err(e);
    }
    let label_out = label_sample(
        &shuffled_ids,
        |id| {
            set.clusters[idx_by_target[&id]]
                .cached_si()
                .expect("prefix SIs precomputed")
                .value
        },
        threshold,
        cfg.class_size,
    );

    // Feature rows for every cluster; registries fit on the labeled sample.
    let builder = FeatureBuilder::new(sources, targets);
    let mut rows_all: Vec<Vec<PairFeatures>> = Vec::with_capacity(total);
    for cluster in &set.clusters {
        rows_all.push(builder.pair_rows(cluster, &set.stats, &set.index)?);
    }

    let mut population: Vec<PopulationCluster> = Vec::new();
    for id in label_out.positives.iter().chain(&label_out.negatives) {
        let ci = idx_by_target[id];
        population.push((
            *id,
            rows_all[ci].clone(),
            set.clusters[ci].size() as u64,
        ));
    }
    let registry = crate::features::MinMaxRegistry::fit(&population, cfg.range_normalize);

    let vectors: Vec<ClusterFeatureVector> = set
        .clusters
        .iter()
        .enumerate()
        .map(|(ci, c)| registry.vector_for(&rows_all[ci], c.size() as u64))
        .collect();

    // Training; a single-class sample degrades to an uninformative scorer
    // rather than failing the run.
    let mut labeled: Vec<LabeledCluster> = Vec::new();
    for (ids, label) in [(&label_out.positives, true), (&label_out.negatives, false)] {
        for id in ids {
            let ci = idx_by_target[id];
            labeled.push(LabeledCluster {
                cluster: *id,
                features: vectors[ci],
                label,
                true_si: set.clusters[ci].cached_si().expect("labeled SIs computed").value,
            });
        }
    }
    let (classifier, classifier_trained) = match scheduler::train(&labeled) {
        Ok(model) => (model, true),
        Err(TrainError::SingleClass) => (
            Classifier::from_parts([0.0; crate::features::CLUSTER_FEATURE_COUNT], 0.0),
            false,
        ),
        Err(e) => return Err(e.into()),
    };

    // Recall simulation on the KDE sample.
    let scored_kde: Vec<(GeomId, f64)> = set
        .kde_sample
        .iter()
        .map(|&ci| (set.clusters[ci].target, classifier.score(&vectors[ci])))
        .collect();
    let est = simulate_recall(
        &scored_kde,
        |id| {
            set.clusters[idx_by_target[&id]]
                .cached_si()
                .expect("kde SIs precomputed")
                .value
        },
        threshold,
        cfg.top_fraction,
        cfg.class_size,
    );
    let max_size = if cfg.exhaustive {
        total
    } else {
        compute_max_size(cfg.desired_recall, &est, cfg.class_size, total)
    };

    // Budgeted verification over every rankable cluster. Singleton-object
    // clusters (possible under SourcesOnly) have SI 1 by definition and are
    // excluded from top-p ranking.
    let mut singleton_clusters = 0usize;
    let mut scored_all: Vec<(GeomId, f64)> = Vec::with_capacity(total);
    for (ci, cluster) in set.clusters.iter().enumerate() {
        if cfg.si_members == SiMembers::SourcesOnly && cluster.size() == 1 {
            singleton_clusters += 1;
            continue;
        }
        scored_all.push((cluster.target, classifier.score(&vectors[ci])));
    }

    let mut verify_error: Option<PipelineError> = None;
    let out = verify(
        &scored_all,
        |id| {
            if verify_error.is_some() {
                return f64::NEG_INFINITY;
            }
            match ctx.cluster_si(&set.clusters[idx_by_target[&id]]) {
                Ok(si) => si.value,
                Err(e) => {
                    verify_error = Some(e);
                    f64::NEG_INFINITY
                }
            }
        },
        threshold,
        max_size,
    );
    if let Some(e) = verify_error {
        return Err(e);
    }

    let mut l_r = out.results;
    l_r.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let si_sampled_clusters = set
        .clusters
        .iter()
        .filter(|c| c.cached_si().is_some_and(|si| si.sampled))
        .count();

    let achieved_recall_vs_oracle = if cfg.oracle_check {
        let oracle = brute_force_oracle_from(&ctx, &set, cfg, false)?;
        measured_recall(&l_r, &oracle, cfg.top_fraction)
    } else {
        None
    };

    let targeted = ceil_with_slack(cfg.top_fraction * total as f64);
    let targeted_fraction = targeted as f64 / total as f64;
    let checked_fraction = out.checked as f64 / total as f64;
    let checked_to_targeted = if targeted_fraction > 0.0 {
        checked_fraction / targeted_fraction
    } else {
        0.0
    };

    let metrics = RunMetrics {
        total_clusters: total,
        dropped_targets: set.dropped_targets,
        sample_clusters: set.sample.len(),
        kde_sample_clusters: set.kde_sample.len(),
        threshold,
        kde_used,
        label_positives: label_out.positives.len(),
        label_negatives: label_out.negatives.len(),
        label_exhausted: label_out.exhausted,
        classifier_trained,
        classifier_iterations: classifier.iterations,
        recall_approx: est.recall_approx,
        high_sim_indices: est.high_sim_indices,
        max_size,
        checked: out.checked,
        hits: out.hits,
        targeted_fraction,
        checked_fraction,
        checked_to_targeted,
        si_sampled_clusters,
        singleton_clusters,
        achieved_recall_vs_oracle,
        wall_time_s: started.elapsed().as_secs_f64(),
    };

    let report_row = ReportRow {
        p: cfg.top_fraction,
        targeted_fraction,
        checked_fraction,
        checked_to_targeted,
        achieved_recall: achieved_recall_vs_oracle,
    };

    let mut feature_rows: Vec<(GeomId, ClusterFeatureVector)> = set
        .clusters
        .iter()
        .enumerate()
        .map(|(ci, c)| (c.target, vectors[ci]))
        .collect();
    feature_rows.sort_by_key(|&(id, _)| id);

    let outcome = RunOutcome {
        l_r,
        metrics,
        report_row,
        feature_rows,
    };
    if let Some(dir) = out_dir {
        write_run_outputs(dir, &outcome)?;
    }
    Ok(outcome)
}

fn write_file(path: &Path, content: &str) -> Result<(), PipelineError> {
    std::fs::write(path, content).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `l_r.csv`, `features.csv` and `run_metrics.json`.
pub fn write_run_outputs(dir: &Path, outcome: &RunOutcome) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.display().to_string(),
        source,
    })?;

    let mut l_r = String::from("cluster_id,similarity_index\n");
    for (id, si) in &outcome.l_r {
        l_r.push_str(&format!("{id},{si}\n"));
    }
    write_file(&dir.join("l_r.csv"), &l_r)?;

    let mut features = String::from(
        "cluster_id,ncf1,ncf2,ncf3,ncf4,ncf5,ncf6,ncf7,ncf8,ncf9,ncf10,ncf11,ncf12,ncf13,ncf14,ncf15,ncf16\n",
    );
    for (id, v) in &outcome.feature_rows {
        features.push_str(&v.csv_row(*id));
        features.push('\n');
    }
    write_file(&dir.join("features.csv"), &features)?;

    let json = serde_json::to_string_pretty(&outcome.metrics).expect("metrics serialize");
    write_file(&dir.join("run_metrics.json"), &json)?;
    Ok(())
}

/// Writes the per-p coverage report. Wall time deliberately stays out of
/// this file so reports are byte-identical across runs of the same seed.
pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<(), PipelineError> {
    let mut out =
        String::from("p,targeted_fraction,checked_fraction,checked_to_targeted,achieved_recall\n");
    for r in rows {
        let recall = r
            .achieved_recall
            .map(|v| v.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.p, r.targeted_fraction, r.checked_fraction, r.checked_to_targeted, recall
        ));
    }
    write_file(path, &out)
}

/// Exact SI for every rankable cluster, sorted SI descending with ties by
/// ascending cluster id. Guarded against accidental use at scale.
pub fn brute_force_oracle(
    sources: &[Polygon],
    targets: &[Polygon],
    cfg: &PipelineConfig,
    force: bool,
) -> Result<Vec<(GeomId, f64)>, PipelineError> {
    cfg.validate()?;
    let set = find_clusters(sources, targets, cfg)?;
    if set.clusters.len() > ORACLE_SCALE_GUARD && !force {
        return Err(PipelineError::ScaleGuard {
            count: set.clusters.len(),
            limit: ORACLE_SCALE_GUARD,
        });
    }
    let ctx = SimilarityContext::new(sources, targets, cfg)?;
    brute_force_oracle_from(&ctx, &set, cfg, force)
}

/// Oracle over an existing context/cluster set (shares SI memoization).
pub fn brute_force_oracle_from(
    ctx: &SimilarityContext,
    set: &ClusterSet,
    cfg: &PipelineConfig,
    force: bool,
) -> Result<Vec<(GeomId, f64)>, PipelineError> {
    let count = set.clusters.len();
    if count > ORACLE_SCALE_GUARD && !force {
        return Err(PipelineError::ScaleGuard {
            count,
            limit: ORACLE_SCALE_GUARD,
        });
    }
    let mut out = Vec::with_capacity(count);
    for cluster in &set.clusters {
        if cfg.si_members == SiMembers::SourcesOnly && cluster.size() == 1 {
            continue; // singletons are excluded from top-p ranking
        }
        let si = ctx.cluster_si(cluster)?;
        out.push((cluster.target, si.value));
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

/// First ceil(p * n) entries of the sorted oracle list.
pub fn oracle_top_set(oracle: &[(GeomId, f64)], p: f64) -> Vec<GeomId> {
    let k = ceil_with_slack(p * oracle.len() as f64).min(oracle.len());
    oracle[..k].iter().map(|&(id, _)| id).collect()
}

/// Share of the oracle top-p set present in the result list.
pub fn measured_recall(l_r: &[(GeomId, f64)], oracle: &[(GeomId, f64)], p: f64) -> Option<f64> {
    let top = oracle_top_set(oracle, p);
    if top.is_empty() {
        return None;
    }
    let found: std::collections::HashSet<GeomId> = l_r.iter().map(|&(id, _)| id).collect();
    let hit = top.iter().filter(|id| found.contains(id)).count();
    Some(hit as f64 / top.len() as f64)
}

/// Loads both WKT datasets.
pub fn ingest(source_path: &Path, target_path: &Path) -> Result<(Vec<Polygon>, Vec<Polygon>), PipelineError> {
    let sources = read_wkt_file(source_path)?;
    let targets = read_wkt_file(target_path)?;
    Ok((sources, targets))
}
