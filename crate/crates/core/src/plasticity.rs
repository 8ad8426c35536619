//! Replay-driven synaptic updates.
//!
//! Each replayed event adds `η·p·(s⊗s − λ·∇E(W))` to the weights, where
//! `p` is the probability of the replayed block and `∇E` is the balance
//! gradient at the pre-update weights. `λ = 0` is plain Hebbian learning.

use thiserror::Error;

use crate::balance::{Kernel, Penalty};
use crate::io::fmt_f64;
use crate::matrix::{MatrixError, SynapticMatrix};
use crate::ripple::RippleEvent;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlasticityError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("spike vector has {got} entries, weight matrix has {expected} neurons")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlasticityConfig {
    pub eta: f64,
    pub lambda_balance: f64,
    pub kernel: Kernel,
    pub penalty: Penalty,
}

impl PlasticityConfig {
    pub fn hebbian(eta: f64) -> Self {
        Self {
            eta,
            lambda_balance: 0.0,
            kernel: Kernel::Fast,
            penalty: Penalty::Plus,
        }
    }

    pub fn validate(&self) -> Result<(), PlasticityError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(PlasticityError::InvalidParameter(format!(
                "eta must be > 0, got {}",
                self.eta
            )));
        }
        if !(self.lambda_balance >= 0.0 && self.lambda_balance.is_finite()) {
            return Err(PlasticityError::InvalidParameter(format!(
                "lambda_balance must be >= 0, got {}",
                self.lambda_balance
            )));
        }
        Ok(())
    }
}

fn check_probability(p: f64) -> Result<(), PlasticityError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(PlasticityError::InvalidParameter(format!(
            "replay probability {p} outside [0, 1]"
        )))
    }
}

fn check_dims(w: &SynapticMatrix, spikes: &[f64]) -> Result<(), PlasticityError> {
    if spikes.len() != w.n() {
        return Err(PlasticityError::DimensionMismatch {
            expected: w.n(),
            got: spikes.len(),
        });
    }
    Ok(())
}

/// `W + η·p·(s⊗s)` with the diagonal kept at zero.
pub fn hebbian_update(
    w: &SynapticMatrix,
    spikes: &[f64],
    p_k: f64,
    eta: f64,
) -> Result<SynapticMatrix, PlasticityError> {
    check_dims(w, spikes)?;
    check_probability(p_k)?;
    let scale = eta * p_k;
    let mut next = w.as_dense().clone();
    let n = w.n();
    for i in 0..n {
        for j in i + 1..n {
            let v = next.get(i, j) + scale * (spikes[i] * spikes[j]);
            next.set(i, j, v);
            next.set(j, i, v);
        }
    }
    Ok(SynapticMatrix::from_trusted(next)?)
}

/// `W + η·p·(s⊗s − λ·∇E(W))`.
///
/// With `λ = 0` the gradient is not evaluated and the result is exactly
/// [`hebbian_update`].
pub fn balance_regularized_update(
    w: &SynapticMatrix,
    spikes: &[f64],
    p_k: f64,
    cfg: &PlasticityConfig,
) -> Result<SynapticMatrix, PlasticityError> {
    cfg.validate()?;
    if cfg.lambda_balance == 0.0 {
        return hebbian_update(w, spikes, p_k, cfg.eta);
    }
    check_dims(w, spikes)?;
    check_probability(p_k)?;
    let grad = cfg.kernel.gradient(w, cfg.penalty);
    let scale = cfg.eta * p_k;
    let mut next = w.as_dense().clone();
    let n = w.n();
    for i in 0..n {
        for j in i + 1..n {
            let delta = spikes[i] * spikes[j] - cfg.lambda_balance * grad.get(i, j);
            let v = next.get(i, j) + scale * delta;
            next.set(i, j, v);
            next.set(j, i, v);
        }
    }
    Ok(SynapticMatrix::from_trusted(next)?)
}

/// Applies one update per event, in event order, each weighted by the
/// probability of that event's selected block.
pub fn accumulate_batch(
    w: &SynapticMatrix,
    events: &[RippleEvent],
    cfg: &PlasticityConfig,
) -> Result<SynapticMatrix, PlasticityError> {
    cfg.validate()?;
    if let Some(e) = events.iter().find(|e| e.spikes.len() != w.n()) {
        return Err(PlasticityError::DimensionMismatch {
            expected: w.n(),
            got: e.spikes.len(),
        });
    }
    let mut current = w.clone();
    for e in events {
        current = balance_regularized_update(&current, &e.spikes, e.selected_probability(), cfg)?;
    }
    Ok(current)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightStats {
    /// Number of upper-triangle entries summarized.
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population skewness `m₃ / m₂^{3/2}`; zero when the variance is zero.
    pub skewness: f64,
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl WeightStats {
    /// `bin_left,bin_right,count`
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,count\n");
        for (b, c) in self.counts.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{c}\n",
                fmt_f64(self.edges[b]),
                fmt_f64(self.edges[b + 1])
            ));
        }
        out
    }
}

/// Histogram and moments of the off-diagonal upper-triangle weights.
///
/// Bins are equal-width over `[min, max]`, the last bin closed on the
/// right. When every weight is equal the range is widened to
/// `[v − 0.5, v + 0.5]` so the edges stay strictly increasing.
pub fn weight_stats(w: &SynapticMatrix, bins: usize) -> Result<WeightStats, PlasticityError> {
    if bins == 0 {
        return Err(PlasticityError::InvalidParameter("bins must be >= 1".into()));
    }
    let values = w.upper_triangle();
    if values.is_empty() {
        return Ok(WeightStats {
            count: 0,
            min: 0.0,
            max: 0.0,
            mean: 0.0,
            skewness: 0.0,
            edges: (0..=bins).map(|b| b as f64 / bins as f64).collect(),
            counts: vec![0; bins],
        });
    }
    let count = values.len();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / count as f64;
    let (m2, m3) = values.iter().fold((0.0, 0.0), |(m2, m3), v| {
        let d = v - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    let (m2, m3) = (m2 / count as f64, m3 / count as f64);
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };

    let (lo, hi) = if max > min { (min, max) } else { (min - 0.5, min + 0.5) };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|b| if b == bins { hi } else { lo + width * b as f64 })
        .collect();
    let mut counts = vec![0usize; bins];
    for v in &values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(WeightStats {
        count,
        min,
        max,
        mean,
        skewness,
        edges,
        counts,
    })
}
