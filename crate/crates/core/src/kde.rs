//! Gaussian kernel density estimation over similarity indexes on [0, 1] and
//! the upper-tail threshold extraction built on it.
//!
//! Each kernel is renormalized over [0, 1] (truncated Gaussian) so no mass
//! leaks past the domain edges. The bandwidth is picked from a fixed
//! log-spaced grid by 5-fold cross-validated log-likelihood; everything is
//! deterministic given the run seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Below this many samples the KDE is unreliable; callers fall back to the
/// empirical quantile.
pub const MIN_KDE_SAMPLES: usize = 30;

const BANDWIDTH_GRID_LEN: usize = 20;
const BANDWIDTH_MIN: f64 = 0.005;
const BANDWIDTH_MAX: f64 = 0.5;
const CV_FOLDS: usize = 5;
/// Threshold extraction grid resolution over [0, 1].
const THRESHOLD_GRID: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum KdeFitError {
    #[error("need at least {MIN_KDE_SAMPLES} samples for a KDE fit, got {got}")]
    TooFewSamples { got: usize },
    #[error("samples have zero variance")]
    ZeroVariance,
    #[error("sample {index} is outside [0, 1] or not finite")]
    InvalidSample { index: usize },
}

/// Fraction of the upper tail the threshold should isolate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRequest {
    top_fraction: f64,
}

impl ThresholdRequest {
    pub fn new(top_fraction: f64) -> Option<Self> {
        (top_fraction > 0.0 && top_fraction < 1.0).then_some(ThresholdRequest { top_fraction })
    }

    pub fn top_fraction(&self) -> f64 {
        self.top_fraction
    }
}

/// A fitted truncated-Gaussian KDE.
#[derive(Debug, Clone)]
pub struct KdeModel {
    samples: Vec<f64>,
    bandwidth: f64,
    /// Per-sample truncation mass over [0, 1], precomputed.
    kernel_mass: Vec<f64>,
}

impl KdeModel {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Density at `x` in [0, 1].
    pub fn pdf(&self, x: f64) -> f64 {
        density_at(x, &self.samples, &self.kernel_mass, self.bandwidth)
    }
}

fn gaussian(d: f64, h: f64) -> f64 {
    let z = d / h;
    (-0.5 * z * z).exp() / (h * (2.0 * std::f64::consts::PI).sqrt())
}

/// Standard normal CDF via erf.
fn phi(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Abramowitz-Stegun 7.1.26 rational approximation, |err| < 1.5e-7.
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

/// Mass of a Gaussian kernel centered at `c` over [0, 1].
fn truncation_mass(c: f64, h: f64) -> f64 {
    (phi((1.0 - c) / h) - phi((0.0 - c) / h)).max(1e-300)
}

fn density_at(x: f64, samples: &[f64], kernel_mass: &[f64], h: f64) -> f64 {
    let mut acc = 0.0;
    for (s, m) in samples.iter().zip(kernel_mass) {
        acc += gaussian(x - s, h) / m;
    }
    acc / samples.len() as f64
}

fn validate(values: &[f64]) -> Result<(), KdeFitError> {
    for (index, v) in values.iter().enumerate() {
        if !v.is_finite() || *v < 0.0 || *v > 1.0 {
            return Err(KdeFitError::InvalidSample { index });
        }
    }
    if values.len() < MIN_KDE_SAMPLES {
        return Err(KdeFitError::TooFewSamples { got: values.len() });
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max - min < 1e-12 {
        return Err(KdeFitError::ZeroVariance);
    }
    Ok(())
}

/// Fits the KDE whose bandwidth maximizes 5-fold cross-validated average
/// log-likelihood over a log-spaced grid of 20 values in [0.005, 0.5].
/// Ties go to the larger bandwidth. Fold assignment is a seeded shuffle.
pub fn fit_best_model(values: &[f64], seed: u64) -> Result<KdeModel, KdeFitError> {
    validate(values)?;
    let n = values.len();

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let fold_of: Vec<usize> = {
        let mut f = vec![0usize; n];
        for (pos, &idx) in order.iter().enumerate() {
            f[idx] = pos % CV_FOLDS;
        }
        f
    };

    let mut best_h = BANDWIDTH_MIN;
    let mut best_ll = f64::NEG_INFINITY;
    for i in 0..BANDWIDTH_GRID_LEN {
        let h = BANDWIDTH_MIN
            * (BANDWIDTH_MAX / BANDWIDTH_MIN).powf(i as f64 / (BANDWIDTH_GRID_LEN - 1) as f64);
        let mut ll_sum = 0.0;
        let mut held_out = 0usize;
        for fold in 0..CV_FOLDS {
            let train: Vec<f64> = (0..n)
                .filter(|&k| fold_of[k] != fold)
                .map(|k| values[k])
                .collect();
            if train.is_empty() {
                continue;
            }
            let mass: Vec<f64> = train.iter().map(|&c| truncation_mass(c, h)).collect();
            for k in 0..n {
                if fold_of[k] == fold {
                    let d = density_at(values[k], &train, &mass, h).max(1e-300);
                    ll_sum += d.ln();
                    held_out += 1;
                }
            }
        }
        let ll = ll_sum / held_out as f64;
        if ll >= best_ll {
            best_ll = ll;
            best_h = h;
        }
    }

    let kernel_mass = values
        .iter()
        .map(|&c| truncation_mass(c, best_h))
        .collect();
    Ok(KdeModel {
        samples: values.to_vec(),
        bandwidth: best_h,
        kernel_mass,
    })
}

/// Smallest x in [0, 1] whose upper-tail density mass equals the requested
/// fraction: the density is evaluated on a uniform 4096-point grid,
/// renormalized by its trapezoidal integral, tail-integrated from the right,
/// and the crossing is interpolated linearly between grid points.
pub fn estimate_threshold(model: &KdeModel, req: ThresholdRequest) -> f64 {
    let p = req.top_fraction;
    let m = THRESHOLD_GRID;
    let step = 1.0 / (m - 1) as f64;
    let density: Vec<f64> = (0..m).map(|i| model.pdf(i as f64 * step)).collect();

    let mut total = 0.0;
    for i in 0..m - 1 {
        total += 0.5 * (density[i] + density[i + 1]) * step;
    }
    if total <= 0.0 {
        return 0.0;
    }

    // tail[i] = renormalized mass above grid point i.
    let mut tail = vec![0.0; m];
    for i in (0..m - 1).rev() {
        tail[i] = tail[i + 1] + 0.5 * (density[i] + density[i + 1]) * step / total;
    }

    if tail[0] <= p {
        return 0.0;
    }
    for i in 1..m {
        if tail[i] <= p {
            let hi = tail[i - 1];
            let lo = tail[i];
            let t = if hi > lo { (hi - p) / (hi - lo) } else { 0.0 };
            return ((i - 1) as f64 + t) * step;
        }
    }
    1.0
}

/// Nearest-rank empirical quantile: the ceil(q * n)-th smallest value.
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Threshold for the top fraction `p`: KDE when the sample supports it,
/// otherwise the empirical (1 - p) quantile. The boolean reports whether the
/// KDE path was used.
pub fn threshold_from_values(values: &[f64], p: f64, seed: u64) -> (f64, bool) {
    let req = ThresholdRequest::new(p).expect("validated top fraction");
    match fit_best_model(values, seed) {
        Ok(model) => (estimate_threshold(&model, req), true),
        Err(_) => (empirical_quantile(values, 1.0 - p), false),
    }
}
