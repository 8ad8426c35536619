//! Sharp wave-ripple events: manifold trajectories, block selection,
//! spike sampling, decoding and wake/sleep reweighting.
//!
//! An event starts at a block embedding, integrates
//!
//! ```text
//! z ← z + (A·z + v)·dt − α·∇E(z) + √dt·B·η,   η ~ N(0, I₂)
//! ```
//!
//! for `steps` steps, then scores the final state against every block
//! embedding with cosine similarity. A block is sampled from
//! `softmax(β·sim − γ·E)`, spikes are drawn around that block's template,
//! and the block nearest to the final state is reported as the decoded one.
//! With `A = 0` each step is exactly [`population::manifold_step`]; with
//! `v = 0` it is the Euler–Maruyama scheme for `dz = A·z dt + B dW`.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::io::fmt_f64;
use crate::matrix::DenseMatrix;
use crate::population::{self, EnergyField, ManifoldState, Point2, PopulationError, TrialBlockSet};
use crate::seed::{derive_indexed, rng_from_seed};

pub const DEFAULT_SIM_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RippleError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no trial blocks to choose from")]
    Empty,
    #[error("trajectory diverged at step {step}")]
    Diverged { step: usize },
    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("probabilities are all zero")]
    AllZero,
    #[error(transparent)]
    Population(#[from] PopulationError),
}

fn invalid(msg: impl Into<String>) -> RippleError {
    RippleError::InvalidParameter(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RippleConfig {
    /// Inverse temperature of block selection.
    pub beta: f64,
    /// Weight of block balance energy in selection.
    pub gamma_balance: f64,
    /// Integration steps; trajectories hold `steps + 1` points.
    pub steps: usize,
    pub dt: f64,
    /// Linear drift matrix `A`, row-major.
    pub drift_a: [[f64; 2]; 2],
    /// Constant drift velocity `v`.
    pub drift_v: Point2,
    /// Isotropic diffusion scale `B`.
    pub diffusion_b: f64,
    pub spike_noise: f64,
    pub sim_epsilon: f64,
    /// Strength of the pull down the interpolated block-energy field.
    pub alpha_manifold: f64,
    /// Start every trajectory at this block instead of a random one.
    pub initial_block: Option<usize>,
}

impl Default for RippleConfig {
    fn default() -> Self {
        Self {
            beta: 20.0,
            gamma_balance: 0.0,
            steps: 100,
            dt: 0.01,
            drift_a: [[0.0; 2]; 2],
            drift_v: [0.0, 0.0],
            diffusion_b: 0.1,
            spike_noise: 0.1,
            sim_epsilon: DEFAULT_SIM_EPSILON,
            alpha_manifold: 0.0,
            initial_block: None,
        }
    }
}

impl RippleConfig {
    pub fn validate(&self) -> Result<(), RippleError> {
        let finite_nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid(format!("beta must be > 0, got {}", self.beta)));
        }
        finite_nonneg("gamma_balance", self.gamma_balance)?;
        if self.steps == 0 {
            return Err(invalid("steps must be >= 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !self.drift_a.iter().flatten().chain(&self.drift_v).all(|v| v.is_finite()) {
            return Err(invalid("drift parameters must be finite"));
        }
        finite_nonneg("diffusion_b", self.diffusion_b)?;
        finite_nonneg("spike_noise", self.spike_noise)?;
        finite_nonneg("alpha_manifold", self.alpha_manifold)?;
        if !(self.sim_epsilon > 0.0 && self.sim_epsilon.is_finite()) {
            return Err(invalid(format!("sim_epsilon must be > 0, got {}", self.sim_epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RippleEvent {
    pub trajectory: Vec<Point2>,
    pub similarities: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub selected_block: usize,
    pub spikes: Vec<f64>,
    pub decoded_block: usize,
}

impl RippleEvent {
    pub fn final_state(&self) -> Point2 {
        *self.trajectory.last().expect("trajectory is never empty")
    }

    /// `P(k|m)` of the block that was replayed.
    pub fn selected_probability(&self) -> f64 {
        self.probabilities[self.selected_block]
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, RippleError> {
    cosine_similarity_eps(a, b, DEFAULT_SIM_EPSILON)
}

/// `a·b / (‖a‖‖b‖ + eps)`; zero vectors score 0.
pub fn cosine_similarity_eps(a: &[f64], b: &[f64], eps: f64) -> Result<f64, RippleError> {
    if a.len() != b.len() {
        return Err(RippleError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(invalid("cannot compare empty vectors"));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(dot / (na * nb + eps))
}

/// Max-subtracted softmax.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>, RippleError> {
    if scores.is_empty() {
        return Err(RippleError::Empty);
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(invalid(format!("softmax score is not finite: {s}")));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `P(k) ∝ exp(β · sim(query, candidate_k))`.
pub fn replay_probabilities<C: AsRef<[f64]>>(
    query: &[f64],
    candidates: &[C],
    beta: f64,
) -> Result<Vec<f64>, RippleError> {
    if candidates.is_empty() {
        return Err(RippleError::Empty);
    }
    let sims = candidates
        .iter()
        .map(|c| cosine_similarity(query, c.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    scores_to_probabilities(&sims, beta)
}

fn scores_to_probabilities(sims: &[f64], beta: f64) -> Result<Vec<f64>, RippleError> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(invalid(format!("beta must be finite and >= 0, got {beta}")));
    }
    let scores: Vec<f64> = sims.iter().map(|s| beta * s).collect();
    softmax(&scores)
}

/// `P(k) ∝ exp(β·sim_k − γ·E_k)`.
pub fn balance_weighted_replay(
    sims: &[f64],
    block_energies: &[f64],
    beta: f64,
    gamma_balance: f64,
) -> Result<Vec<f64>, RippleError> {
    if sims.len() != block_energies.len() {
        return Err(RippleError::LengthMismatch {
            left: sims.len(),
            right: block_energies.len(),
        });
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(invalid(format!("beta must be finite and >= 0, got {beta}")));
    }
    if !(gamma_balance >= 0.0 && gamma_balance.is_finite()) {
        return Err(invalid(format!("gamma_balance must be finite and >= 0, got {gamma_balance}")));
    }
    let scores: Vec<f64> = sims
        .iter()
        .zip(block_energies)
        .map(|(s, e)| beta * s - gamma_balance * e)
        .collect();
    softmax(&scores)
}

/// Draws an index with probability proportional to `probs`.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Template plus i.i.d. Gaussian noise.
pub fn sample_spikes<R: Rng + ?Sized>(template: &[f64], spike_noise: f64, rng: &mut R) -> Vec<f64> {
    template
        .iter()
        .map(|r| {
            let e: f64 = rng.sample(StandardNormal);
            r + spike_noise * e
        })
        .collect()
}

/// Nearest embedding by Euclidean distance; ties go to the lowest index.
pub fn decode_block(state: Point2, embeddings: &[Point2]) -> Result<usize, RippleError> {
    let mut best: Option<(usize, f64)> = None;
    for (k, e) in embeddings.iter().enumerate() {
        let d = (state[0] - e[0]).powi(2) + (state[1] - e[1]).powi(2);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((k, d));
        }
    }
    best.map(|(k, _)| k).ok_or(RippleError::Empty)
}

fn integrate<R: Rng + ?Sized>(
    z0: Point2,
    cfg: &RippleConfig,
    field: Option<&EnergyField>,
    rng: &mut R,
) -> Result<Vec<Point2>, RippleError> {
    let mut trajectory = Vec::with_capacity(cfg.steps + 1);
    trajectory.push(z0);
    let a = cfg.drift_a;
    let noise_cov_scale = cfg.diffusion_b * cfg.diffusion_b * cfg.dt;
    let mut z = z0;
    for step in 1..=cfg.steps {
        let state = ManifoldState {
            z,
            drift_v: [
                a[0][0] * z[0] + a[0][1] * z[1] + cfg.drift_v[0],
                a[1][0] * z[0] + a[1][1] * z[1] + cfg.drift_v[1],
            ],
            dt: cfg.dt,
            noise_cov_scale,
        };
        z = match field {
            Some(f) if cfg.alpha_manifold > 0.0 => {
                population::balanced_manifold_step(&state, f.gradient(z), cfg.alpha_manifold, rng)
            }
            _ => population::manifold_step(&state, rng),
        };
        if !(z[0].is_finite() && z[1].is_finite()) {
            return Err(RippleError::Diverged { step });
        }
        trajectory.push(z);
    }
    Ok(trajectory)
}

/// Euler–Maruyama path of `dz = (A·z + v) dt + B dW` starting at `z0`.
pub fn diffuse_trajectory<R: Rng + ?Sized>(
    z0: Point2,
    cfg: &RippleConfig,
    rng: &mut R,
) -> Result<Vec<Point2>, RippleError> {
    cfg.validate()?;
    integrate(z0, cfg, None, rng)
}

/// Gaussian log-likelihood covariance.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// `σ²·I`
    Isotropic(f64),
    Full(DenseMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodParams {
    pub cov: Covariance,
    /// Additive constant; it cancels whenever likelihoods are compared.
    pub norm_c: f64,
}

impl LikelihoodParams {
    pub fn isotropic(variance: f64) -> Self {
        Self {
            cov: Covariance::Isotropic(variance),
            norm_c: 0.0,
        }
    }
}

/// Lower-triangular Cholesky factor, or `None` when `m` is not symmetric
/// positive definite.
fn cholesky(m: &DenseMatrix) -> Option<DenseMatrix> {
    let n = m.n();
    let mut l = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            if m.get(i, j) != m.get(j, i) {
                return None;
            }
            let s: f64 = (0..j).map(|k| l.get(i, k) * l.get(j, k)).sum();
            if i == j {
                let d = m.get(i, i) - s;
                if !(d > 0.0 && d.is_finite()) {
                    return None;
                }
                l.set(i, i, d.sqrt());
            } else {
                l.set(i, j, (m.get(i, j) - s) / l.get(j, j));
            }
        }
    }
    Some(l)
}

/// `−½ (s − r)ᵀ Σ⁻¹ (s − r) + C`.
pub fn spwr_log_likelihood(
    spikes: &[f64],
    template: &[f64],
    params: &LikelihoodParams,
) -> Result<f64, RippleError> {
    if spikes.len() != template.len() {
        return Err(RippleError::LengthMismatch {
            left: spikes.len(),
            right: template.len(),
        });
    }
    let diff: Vec<f64> = spikes.iter().zip(template).map(|(s, r)| s - r).collect();
    let quad = match &params.cov {
        Covariance::Isotropic(var) => {
            if !(*var > 0.0 && var.is_finite()) {
                return Err(RippleError::NotPositiveDefinite);
            }
            diff.iter().map(|d| d * d).sum::<f64>() / var
        }
        Covariance::Full(cov) => {
            if cov.n() != diff.len() {
                return Err(RippleError::LengthMismatch {
                    left: cov.n(),
                    right: diff.len(),
                });
            }
            let l = cholesky(cov).ok_or(RippleError::NotPositiveDefinite)?;
            // Solve L y = d; then dᵀ Σ⁻¹ d = ‖y‖².
            let mut y = vec![0.0; diff.len()];
            for i in 0..diff.len() {
                let s: f64 = (0..i).map(|k| l.get(i, k) * y[k]).sum();
                y[i] = (diff[i] - s) / l.get(i, i);
            }
            y.iter().map(|v| v * v).sum()
        }
    };
    Ok(-0.5 * quad + params.norm_c)
}

/// [`spwr_log_likelihood`] minus `γ·E_k`.
pub fn balanced_log_likelihood(
    spikes: &[f64],
    template: &[f64],
    params: &LikelihoodParams,
    block_energy: f64,
    gamma_balance: f64,
) -> Result<f64, RippleError> {
    Ok(spwr_log_likelihood(spikes, template, params)? - gamma_balance * block_energy)
}

/// `p^γ / Σ p^γ`.
pub fn sleep_bias(p_wake: &[f64], gamma: f64) -> Result<Vec<f64>, RippleError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid(format!("sleep gamma must be > 0, got {gamma}")));
    }
    if let Some(p) = p_wake.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(invalid(format!("probability {p} is negative or not finite")));
    }
    let powered: Vec<f64> = p_wake.iter().map(|p| p.powf(gamma)).collect();
    let total: f64 = powered.iter().sum();
    if total <= 0.0 {
        return Err(RippleError::AllZero);
    }
    Ok(powered.into_iter().map(|p| p / total).collect())
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

/// Seed of event `m` in a batch rooted at `seed`.
pub fn event_seed(seed: u64, m: usize) -> u64 {
    derive_indexed(seed, "ripple-event", m as u64)
}

/// Simulates one event. `block_energies` are the `E_k` used by the balance
/// penalty and the manifold energy field.
pub fn generate_event<R: Rng + ?Sized>(
    blocks: &TrialBlockSet,
    cfg: &RippleConfig,
    block_energies: &[f64],
    rng: &mut R,
) -> Result<RippleEvent, RippleError> {
    cfg.validate()?;
    let k_blocks = blocks.k_blocks();
    if k_blocks == 0 {
        return Err(RippleError::Empty);
    }
    if block_energies.len() != k_blocks {
        return Err(RippleError::LengthMismatch {
            left: block_energies.len(),
            right: k_blocks,
        });
    }
    let start = match cfg.initial_block {
        Some(k) if k >= k_blocks => {
            return Err(PopulationError::BlockOutOfRange { k, k_blocks }.into())
        }
        Some(k) => k,
        None => rng.random_range(0..k_blocks),
    };
    let field = if cfg.alpha_manifold > 0.0 {
        Some(EnergyField::new(blocks.embeddings.clone(), block_energies.to_vec())?)
    } else {
        None
    };
    let trajectory = integrate(blocks.embeddings[start], cfg, field.as_ref(), rng)?;
    let last = *trajectory.last().expect("at least z0");
    let similarities = blocks
        .embeddings
        .iter()
        .map(|e| cosine_similarity_eps(&last, e, cfg.sim_epsilon))
        .collect::<Result<Vec<_>, _>>()?;
    let probabilities = balance_weighted_replay(&similarities, block_energies, cfg.beta, cfg.gamma_balance)?;
    let selected_block = sample_categorical(&probabilities, rng);
    let spikes = sample_spikes(&blocks.templates[selected_block], cfg.spike_noise, rng);
    let decoded_block = decode_block(last, &blocks.embeddings)?;
    Ok(RippleEvent {
        trajectory,
        similarities,
        probabilities,
        selected_block,
        spikes,
        decoded_block,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RippleBatch {
    pub events: Vec<RippleEvent>,
    /// Empirical block-selection frequencies, `P(k | wake)`.
    pub wake_histogram: Vec<f64>,
}

impl RippleBatch {
    pub fn from_events(events: Vec<RippleEvent>, k_blocks: usize) -> Self {
        let wake_histogram = selection_histogram(&events, k_blocks);
        Self {
            events,
            wake_histogram,
        }
    }

    /// Fraction of events whose decoded block equals the selected one.
    pub fn agreement_rate(&self) -> f64 {
        if self.events.is_empty() {
            return 0.0;
        }
        let hits = self
            .events
            .iter()
            .filter(|e| e.selected_block == e.decoded_block)
            .count();
        hits as f64 / self.events.len() as f64
    }
}

pub fn selection_histogram(events: &[RippleEvent], k_blocks: usize) -> Vec<f64> {
    let mut counts = vec![0usize; k_blocks];
    for e in events {
        counts[e.selected_block] += 1;
    }
    let m = events.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / m).collect()
}

/// `m_events` independent events, event `m` seeded with
/// [`event_seed`]`(seed, m)`. `block_energies` defaults to all zeros.
pub fn run_ripple_batch(
    blocks: &TrialBlockSet,
    cfg: &RippleConfig,
    m_events: usize,
    seed: u64,
    block_energies: Option<&[f64]>,
) -> Result<RippleBatch, RippleError> {
    if m_events == 0 {
        return Err(invalid("m_events must be >= 1"));
    }
    let zeros = vec![0.0; blocks.k_blocks()];
    let energies = block_energies.unwrap_or(&zeros);
    let events = (0..m_events)
        .map(|m| generate_event(blocks, cfg, energies, &mut rng_from_seed(event_seed(seed, m))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RippleBatch::from_events(events, blocks.k_blocks()))
}

/// `event,selected,decoded,max_prob`
pub fn events_csv(events: &[RippleEvent]) -> String {
    let mut out = String::from("event,selected,decoded,max_prob\n");
    for (m, e) in events.iter().enumerate() {
        let max_prob = e.probabilities.iter().copied().fold(0.0, f64::max);
        out.push_str(&format!(
            "{m},{},{},{}\n",
            e.selected_block,
            e.decoded_block,
            fmt_f64(max_prob)
        ));
    }
    out
}

fn per_block_csv(events: &[RippleEvent], values: impl Fn(&RippleEvent) -> &[f64]) -> String {
    let k = events.first().map_or(0, |e| values(e).len());
    let mut out = String::from("event");
    for b in 0..k {
        out.push_str(&format!(",block_{b}"));
    }
    out.push('\n');
    for (m, e) in events.iter().enumerate() {
        out.push_str(&m.to_string());
        for v in values(e) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Event × block cosine similarities.
pub fn similarity_csv(events: &[RippleEvent]) -> String {
    per_block_csv(events, |e| &e.similarities)
}

/// Event × block selection probabilities.
pub fn probabilities_csv(events: &[RippleEvent]) -> String {
    per_block_csv(events, |e| &e.probabilities)
}

/// `event,step,z1,z2`
pub fn trajectories_csv(events: &[RippleEvent]) -> String {
    let mut out = String::from("event,step,z1,z2\n");
    for (m, e) in events.iter().enumerate() {
        for (t, z) in e.trajectory.iter().enumerate() {
            out.push_str(&format!("{m},{t},{},{}\n", fmt_f64(z[0]), fmt_f64(z[1])));
        }
    }
    out
}

/// `block,p_wake,p_sleep`
pub fn wake_sleep_csv(p_wake: &[f64], p_sleep: &[f64]) -> String {
    let mut out = String::from("block,p_wake,p_sleep\n");
    for (k, (w, s)) in p_wake.iter().zip(p_sleep).enumerate() {
        out.push_str(&format!("{k},{},{}\n", fmt_f64(*w), fmt_f64(*s)));
    }
    out
}
