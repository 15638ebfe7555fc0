//! Cluster labeling, the probabilistic classifier, recall simulation with
//! the verification budget, and budgeted priority-queue verification.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::features::{ClusterFeatureVector, CLUSTER_FEATURE_COUNT};
use crate::geometry::GeomId;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set contains a single class")]
    SingleClass,
    #[error("training set is empty")]
    Empty,
}

/// A labeled training example: cluster id, feature vector, class, true SI.
#[derive(Debug, Clone)]
pub struct LabeledCluster {
    pub cluster: GeomId,
    pub features: ClusterFeatureVector,
    pub label: bool,
    pub true_si: f64,
}

/// Result of labeling a shuffled sample against the similarity threshold.
#[derive(Debug, Clone)]
pub struct LabelOutcome {
    pub positives: Vec<GeomId>,
    pub negatives: Vec<GeomId>,
    /// The sample ran out before both classes reached the requested size.
    pub exhausted: bool,
}

/// Walks the (already shuffled) sample computing each cluster's SI, assigns
/// by `si >= threshold`, and stops as soon as both classes hold at least
/// `class_size` clusters. Exhausting the sample first is reported, not fatal.
pub fn label_sample(
    sample: &[GeomId],
    mut si_of: impl FnMut(GeomId) -> f64,
    threshold: f64,
    class_size: usize,
) -> LabelOutcome {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for &id in sample {
        if si_of(id) >= threshold {
            positives.push(id);
        } else {
            negatives.push(id);
        }
        if positives.len() >= class_size && negatives.len() >= class_size {
            break;
        }
    }
    let exhausted = positives.len() < class_size || negatives.len() < class_size;
    LabelOutcome {
        positives,
        negatives,
        exhausted,
    }
}

const LEARNING_RATE: f64 = 0.1;
const L2_STRENGTH: f64 = 1e-4;
const MAX_ITERATIONS: usize = 500;
const GRADIENT_TOLERANCE: f64 = 1e-6;
/// Logit clamp keeping scores strictly inside (0, 1) in f64.
const LOGIT_CLAMP: f64 = 36.0;

/// Regularized logistic model over standardized features. Deterministic:
/// zero initialization, full-batch gradient descent, fixed iteration cap.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    coefficients: [f64; CLUSTER_FEATURE_COUNT],
    intercept: f64,
    mean: [f64; CLUSTER_FEATURE_COUNT],
    std: [f64; CLUSTER_FEATURE_COUNT],
    pub iterations: usize,
    pub final_loss: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn train(labeled: &[LabeledCluster]) -> Result<Classifier, TrainError> {
    if labeled.is_empty() {
        return Err(TrainError::Empty);
    }
    let n = labeled.len();
    let pos = labeled.iter().filter(|l| l.label).count();
    if pos == 0 || pos == n {
        return Err(TrainError::SingleClass);
    }

    let mut mean = [0.0; CLUSTER_FEATURE_COUNT];
    let mut std = [0.0; CLUSTER_FEATURE_COUNT];
    for l in labeled {
        for (j, v) in l.features.0.iter().enumerate() {
            mean[j] += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    for l in labeled {
        for (j, v) in l.features.0.iter().enumerate() {
            let d = v - mean[j];
            std[j] += d * d;
        }
    }
    for s in &mut std {
        *s = (*s / n as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0; // constant feature carries no signal; avoid blow-up
        }
    }

    let rows: Vec<[f64; CLUSTER_FEATURE_COUNT]> = labeled
        .iter()
        .map(|l| {
            let mut r = [0.0; CLUSTER_FEATURE_COUNT];
            for j in 0..CLUSTER_FEATURE_COUNT {
                r[j] = (l.features.0[j] - mean[j]) / std[j];
            }
            r
        })
        .collect();
    let targets: Vec<f64> = labeled.iter().map(|l| f64::from(l.label)).collect();

    let mut coef = [0.0; CLUSTER_FEATURE_COUNT];
    let mut intercept = 0.0;
    let mut iterations = 0;
    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        let mut grad = [0.0; CLUSTER_FEATURE_COUNT];
        let mut grad_b = 0.0;
        for (row, &y) in rows.iter().zip(&targets) {
            let mut z = intercept;
            for j in 0..CLUSTER_FEATURE_COUNT {
                z += coef[j] * row[j];
            }
            let err = sigmoid(z) - y;
            for j in 0..CLUSTER_FEATURE_COUNT {
                grad[j] += err * row[j];
            }
            grad_b += err;
        }
        let inv_n = 1.0 / n as f64;
        let mut norm2 = 0.0;
        for j in 0..CLUSTER_FEATURE_COUNT {
            grad[j] = grad[j] * inv_n + L2_STRENGTH * coef[j];
            norm2 += grad[j] * grad[j];
        }
        grad_b *= inv_n;
        norm2 += grad_b * grad_b;

        for j in 0..CLUSTER_FEATURE_COUNT {
            coef[j] -= LEARNING_RATE * grad[j];
        }
        intercept -= LEARNING_RATE * grad_b;

        if norm2.sqrt() < GRADIENT_TOLERANCE {
            break;
        }
    }

    let mut loss = 0.0;
    for (row, &y) in rows.iter().zip(&targets) {
        let mut z = intercept;
        for j in 0..CLUSTER_FEATURE_COUNT {
            z += coef[j] * row[j];
        }
        let p = sigmoid(z).clamp(1e-15, 1.0 - 1e-15);
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    loss /= n as f64;
    let mut reg = 0.0;
    for c in &coef {
        reg += c * c;
    }
    loss += 0.5 * L2_STRENGTH * reg;

    Ok(Classifier {
        coefficients: coef,
        intercept,
        mean,
        std,
        iterations,
        final_loss: loss,
    })
}

impl Classifier {
    /// Builds a model from explicit parameters; used by tests and by
    /// plug-in scorers. `mean`/`std` default to the identity transform.
    pub fn from_parts(coefficients: [f64; CLUSTER_FEATURE_COUNT], intercept: f64) -> Self {
        Classifier {
            coefficients,
            intercept,
            mean: [0.0; CLUSTER_FEATURE_COUNT],
            std: [1.0; CLUSTER_FEATURE_COUNT],
            iterations: 0,
            final_loss: f64::NAN,
        }
    }

    /// Probability of the high-similarity class, strictly inside (0, 1).
    pub fn score(&self, u: &ClusterFeatureVector) -> f64 {
        let mut z = self.intercept;
        for j in 0..CLUSTER_FEATURE_COUNT {
            z += self.coefficients[j] * (u.0[j] - self.mean[j]) / self.std[j];
        }
        sigmoid(z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP))
    }
}

#[derive(Debug, Clone, Copy)]
struct QueueEntry {
    weight: f64,
    id: GeomId,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    // Max-heap on weight; equal weights pop in ascending id order.
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Max-priority queue of (cluster, weight) with deterministic tie-breaks.
#[derive(Debug, Clone, Default)]
pub struct RankedQueue {
    heap: BinaryHeap<QueueEntry>,
}

impl RankedQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_scored(scored: &[(GeomId, f64)]) -> Self {
        let mut q = Self::new();
        for &(id, weight) in scored {
            q.push(id, weight);
        }
        q
    }

    pub fn push(&mut self, id: GeomId, weight: f64) {
        self.heap.push(QueueEntry { weight, id });
    }

    /// Removes and returns the highest-weight entry.
    pub fn pop(&mut self) -> Option<(GeomId, f64)> {
        self.heap.pop().map(|e| (e.id, e.weight))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Keeps only the top `n` entries by pop order.
    pub fn truncate_top(&mut self, n: usize) {
        if self.heap.len() <= n {
            return;
        }
        let mut kept = Vec::with_capacity(n);
        for _ in 0..n {
            kept.push(self.heap.pop().expect("length checked"));
        }
        self.heap.clear();
        self.heap.extend(kept);
    }

    /// Drains the queue into descending pop order.
    pub fn into_sorted(mut self) -> Vec<(GeomId, f64)> {
        let mut out = Vec::with_capacity(self.heap.len());
        while let Some(e) = self.heap.pop() {
            out.push((e.id, e.weight));
        }
        out
    }
}

/// Outcome of the scaled-down verification simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetEstimate {
    pub recall_approx: f64,
    /// Clusters in the truncated queue whose true SI clears the threshold.
    pub high_sim_indices: usize,
    /// Simulation pops actually performed.
    pub pops: usize,
    pub hits: usize,
    /// No queue member cleared the threshold; recall defaults to 1.
    pub degenerate: bool,
}

/// Integer ceiling with a small slack so products like 0.1 * 400 do not get
/// pushed past their mathematical ceiling by floating-point dust.
fn ceil_with_slack(x: f64) -> usize {
    ((x - 1e-9).ceil().max(0.0)) as usize
}

/// Scores the sample into a queue truncated to the top `class_size`, counts
/// the members above the threshold, then replays verification for
/// ceil(top_fraction * class_size) pops and reports hits / members-above.
pub fn simulate_recall(
    scored: &[(GeomId, f64)],
    mut si_of: impl FnMut(GeomId) -> f64,
    threshold: f64,
    top_fraction: f64,
    class_size: usize,
) -> BudgetEstimate {
    let mut queue = RankedQueue::from_scored(scored);
    queue.truncate_top(class_size);
    let ordered = queue.into_sorted();

    let mut high_sim_indices = 0;
    let mut sis = Vec::with_capacity(ordered.len());
    for &(id, _) in &ordered {
        let si = si_of(id);
        if si >= threshold {
            high_sim_indices += 1;
        }
        sis.push(si);
    }

    let budget = ceil_with_slack(top_fraction * class_size as f64);
    let pops = budget.min(ordered.len());
    let hits = sis[..pops].iter().filter(|&&si| si >= threshold).count();

    if high_sim_indices == 0 {
        return BudgetEstimate {
            recall_approx: 1.0,
            high_sim_indices: 0,
            pops,
            hits,
            degenerate: true,
        };
    }
    // A hitless simulation would zero the recall and blow up the budget
    // formula; score it as if one hit occurred, which drives the budget
    // toward the clamp instead of dividing by zero.
    let recall_approx = hits.max(1) as f64 / high_sim_indices as f64;
    BudgetEstimate {
        recall_approx,
        high_sim_indices,
        pops,
        hits,
        degenerate: false,
    }
}

/// Verification budget: ceil(r_d * (1 / recall) * (high / N) * total),
/// clamped into [0, total].
pub fn compute_max_size(
    desired_recall: f64,
    est: &BudgetEstimate,
    class_size: usize,
    total_clusters: usize,
) -> usize {
    let ratio = est.high_sim_indices as f64 / class_size as f64;
    let raw = desired_recall * (1.0 / est.recall_approx) * ratio * total_clusters as f64;
    ceil_with_slack(raw).min(total_clusters)
}

/// Result set and accounting of the budgeted verification phase.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    /// Clusters whose recomputed SI cleared the threshold, in pop order.
    pub results: Vec<(GeomId, f64)>,
    pub checked: usize,
    pub hits: usize,
}

/// Pops clusters in descending weight, recomputes each SI, and keeps those
/// at or above the threshold. Stops after `max_size` pops or when the queue
/// empties.
pub fn verify(
    scored: &[(GeomId, f64)],
    mut si_of: impl FnMut(GeomId) -> f64,
    threshold: f64,
    max_size: usize,
) -> VerifyOutcome {
    let mut queue = RankedQueue::from_scored(scored);
    let mut results = Vec::new();
    let mut checked = 0;
    while checked < max_size {
        let Some((id, _)) = queue.pop() else { break };
        checked += 1;
        let si = si_of(id);
        if si >= threshold {
            results.push((id, si));
        }
    }
    let hits = results.len();
    VerifyOutcome {
        results,
        checked,
        hits,
    }
}
