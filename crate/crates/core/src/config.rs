//! Flat `key = value` experiment configuration.
//!
//! Blank lines and text after `#` are ignored. Every key is optional; an
//! empty file describes the default ripple simulation. Unknown and repeated
//! keys are rejected with the offending line number.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `seed` | 42 | root seed for every random stream |
//! | `experiment` | simulate | `simulate`, `interpret`, `bench` or `energy` |
//! | `kernel` | fast | balance kernel: `fast` or `naive` |
//! | `penalty_sign` | plus | triad penalty `(T+1)^2` (`plus`) or `(T-1)^2` (`minus`) |
//! | `n_neurons` | 1000 | place-field population size |
//! | `sigma_pf` | 0.1 | place-field width |
//! | `noise_sigma` | 0.1 | rate noise of the population |
//! | `k_blocks` | 8 | trial blocks |
//! | `pos_lo`, `pos_hi` | 0.2, 0.8 | track range covered by the blocks |
//! | `m_events` | 200 | ripple events |
//! | `beta` | 20 | selection inverse temperature |
//! | `gamma` | 2.0 | sleep sharpening exponent |
//! | `gamma_balance` | 0 | block balance energy weight in selection |
//! | `alpha_manifold` | 0 | pull down the block energy field |
//! | `block_energy_top` | 16 | most active neurons per block used for its energy |
//! | `steps`, `dt` | 100, 0.01 | trajectory integration |
//! | `drift_a11` .. `drift_a22` | 0 | linear drift matrix |
//! | `drift_v1`, `drift_v2` | 0 | constant drift |
//! | `diffusion_b` | 0.1 | diffusion scale |
//! | `spike_noise` | 0.1 | replayed spike noise |
//! | `sim_epsilon` | 1e-10 | cosine similarity guard |
//! | `initial_block` | random | start block, or `random` |
//! | `eta` | 0.01 | Hebbian learning rate |
//! | `lambda` | 0 | balance regularizer of the plasticity rule |
//! | `hist_bins` | 40 | weight histogram bins |
//! | `interpret_neurons` | 50 | neuron embeddings |
//! | `clusters` | 3 | k-means groups (and knowledge classes) |
//! | `kmeans_iters` | 100 | Lloyd iteration cap |
//! | `n_train`, `n_test` | 30, 20 | knowledge items |
//! | `blob_spread` | 0.05 | knowledge blob standard deviation |
//! | `hidden_dim` | 16 | classifier hidden units |
//! | `epochs` | 100 | training epochs |
//! | `alpha_lr` | 0.01 | Adam step size |
//! | `lambda_balance` | 0.01 | classifier balance penalty weight |
//! | `descent_iters`, `descent_eta` | 200, 0.001 | adjacency relaxation |
//! | `percentile` | 95 | edge threshold percentile |
//! | `grid_resolution` | 41 | prediction grid points per axis |
//! | `sizes` | 50,100,200 | benchmark matrix sizes |
//! | `bench_runs` | 5 | timed runs per kernel and size |

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::balance::{DescentConfig, Kernel, Penalty};
use crate::interpret::TrainConfig;
use crate::plasticity::PlasticityConfig;
use crate::ripple::RippleConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Interpret,
    Bench,
    Energy,
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simulate" => Ok(Self::Simulate),
            "interpret" => Ok(Self::Interpret),
            "bench" => Ok(Self::Bench),
            "energy" => Ok(Self::Energy),
            other => Err(format!("unknown experiment '{other}'")),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Simulate => "simulate",
            Self::Interpret => "interpret",
            Self::Bench => "bench",
            Self::Energy => "energy",
        })
    }
}

fn parse_kernel(s: &str) -> Result<Kernel, String> {
    match s {
        "fast" => Ok(Kernel::Fast),
        "naive" => Ok(Kernel::Naive),
        other => Err(format!("unknown kernel '{other}' (expected fast or naive)")),
    }
}

/// Comma-separated list of matrix sizes, e.g. `50,100,200`.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>, String> {
    let sizes = s
        .split(',')
        .map(|f| {
            let f = f.trim();
            match f.parse::<usize>() {
                Ok(0) => Err("sizes must be >= 1".to_string()),
                Ok(n) => Ok(n),
                Err(_) => Err(format!("'{f}' is not a size")),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(sizes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub experiment: Experiment,
    pub kernel: Kernel,
    pub penalty: Penalty,

    pub n_neurons: usize,
    pub sigma_pf: f64,
    pub noise_sigma: f64,
    pub k_blocks: usize,
    pub pos_lo: f64,
    pub pos_hi: f64,
    pub m_events: usize,
    pub ripple: RippleConfig,
    pub gamma: f64,
    pub block_energy_top: usize,
    pub eta: f64,
    pub lambda: f64,
    pub hist_bins: usize,

    pub interpret_neurons: usize,
    pub clusters: usize,
    pub kmeans_iters: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub blob_spread: f64,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub alpha_lr: f64,
    pub lambda_balance: f64,
    pub descent_iters: usize,
    pub descent_eta: f64,
    pub percentile: f64,
    pub grid_resolution: usize,

    pub sizes: Vec<usize>,
    pub bench_runs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            experiment: Experiment::Simulate,
            kernel: Kernel::Fast,
            penalty: Penalty::Plus,
            n_neurons: 1000,
            sigma_pf: 0.1,
            noise_sigma: 0.1,
            k_blocks: 8,
            pos_lo: 0.2,
            pos_hi: 0.8,
            m_events: 200,
            ripple: RippleConfig::default(),
            gamma: 2.0,
            block_energy_top: 16,
            eta: 0.01,
            lambda: 0.0,
            hist_bins: 40,
            interpret_neurons: 50,
            clusters: 3,
            kmeans_iters: 100,
            n_train: 30,
            n_test: 20,
            blob_spread: 0.05,
            hidden_dim: 16,
            epochs: 100,
            alpha_lr: 0.01,
            lambda_balance: 0.01,
            descent_iters: 200,
            descent_eta: 0.001,
            percentile: 95.0,
            grid_resolution: 41,
            sizes: vec![50, 100, 200],
            bench_runs: 5,
        }
    }
}

fn num<T: FromStr>(value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("'{value}' is not a valid {}", short_type::<T>()))
}

fn short_type<T>() -> &'static str {
    let name = std::any::type_name::<T>();
    if name == "f64" {
        "number"
    } else {
        "non-negative integer"
    }
}

impl ExperimentConfig {
    /// Parses a config file. Values are checked for syntax here; call
    /// [`validate`](Self::validate) once any overrides have been applied.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Parse { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', found '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("key '{key}' is set more than once")));
            }
            cfg.set(key, value).map_err(|m| err(format!("{key}: {m}")))?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let r = &mut self.ripple;
        match key {
            "seed" => self.seed = num(value)?,
            "experiment" => self.experiment = value.parse()?,
            "kernel" => self.kernel = parse_kernel(value)?,
            "penalty_sign" => self.penalty = value.parse().map_err(|e: String| e)?,
            "n_neurons" => self.n_neurons = num(value)?,
            "sigma_pf" => self.sigma_pf = num(value)?,
            "noise_sigma" => self.noise_sigma = num(value)?,
            "k_blocks" => self.k_blocks = num(value)?,
            "pos_lo" => self.pos_lo = num(value)?,
            "pos_hi" => self.pos_hi = num(value)?,
            "m_events" => self.m_events = num(value)?,
            "beta" => r.beta = num(value)?,
            "gamma" => self.gamma = num(value)?,
            "gamma_balance" => r.gamma_balance = num(value)?,
            "alpha_manifold" => r.alpha_manifold = num(value)?,
            "block_energy_top" => self.block_energy_top = num(value)?,
            "steps" => r.steps = num(value)?,
            "dt" => r.dt = num(value)?,
            "drift_a11" => r.drift_a[0][0] = num(value)?,
            "drift_a12" => r.drift_a[0][1] = num(value)?,
            "drift_a21" => r.drift_a[1][0] = num(value)?,
            "drift_a22" => r.drift_a[1][1] = num(value)?,
            "drift_v1" => r.drift_v[0] = num(value)?,
            "drift_v2" => r.drift_v[1] = num(value)?,
            "diffusion_b" => r.diffusion_b = num(value)?,
            "spike_noise" => r.spike_noise = num(value)?,
            "sim_epsilon" => r.sim_epsilon = num(value)?,
            "initial_block" => {
                r.initial_block = if value == "random" { None } else { Some(num(value)?) }
            }
            "eta" => self.eta = num(value)?,
            "lambda" => self.lambda = num(value)?,
            "hist_bins" => self.hist_bins = num(value)?,
            "interpret_neurons" => self.interpret_neurons = num(value)?,
            "clusters" => self.clusters = num(value)?,
            "kmeans_iters" => self.kmeans_iters = num(value)?,
            "n_train" => self.n_train = num(value)?,
            "n_test" => self.n_test = num(value)?,
            "blob_spread" => self.blob_spread = num(value)?,
            "hidden_dim" => self.hidden_dim = num(value)?,
            "epochs" => self.epochs = num(value)?,
            "alpha_lr" => self.alpha_lr = num(value)?,
            "lambda_balance" => self.lambda_balance = num(value)?,
            "descent_iters" => self.descent_iters = num(value)?,
            "descent_eta" => self.descent_eta = num(value)?,
            "percentile" => self.percentile = num(value)?,
            "grid_resolution" => self.grid_resolution = num(value)?,
            "sizes" => self.sizes = parse_sizes(value)?,
            "bench_runs" => self.bench_runs = num(value)?,
            _ => return Err("unknown key".to_string()),
        }
        Ok(())
    }

    pub fn plasticity(&self) -> PlasticityConfig {
        PlasticityConfig {
            eta: self.eta,
            lambda_balance: self.lambda,
            kernel: self.kernel,
            penalty: self.penalty,
        }
    }

    pub fn training(&self) -> TrainConfig {
        TrainConfig {
            hidden_dim: self.hidden_dim,
            epochs: self.epochs,
            alpha_lr: self.alpha_lr,
            lambda_balance: self.lambda_balance,
            kernel: self.kernel,
            penalty: self.penalty,
        }
    }

    pub fn descent(&self) -> DescentConfig {
        DescentConfig {
            eta: self.descent_eta,
            iterations: self.descent_iters,
            kernel: self.kernel,
            penalty: self.penalty,
        }
    }

    /// Checks every field against the invariants of the module that owns it.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let prob = |name: &str, v: f64| -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                bad(format!("{name} must be > 0, got {v}"))
            }
        };
        match self.experiment {
            Experiment::Simulate => {
                if self.n_neurons < 2 {
                    return bad(format!("n_neurons must be >= 2, got {}", self.n_neurons));
                }
                prob("sigma_pf", self.sigma_pf)?;
                if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
                    return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
                }
                if self.k_blocks == 0 {
                    return bad("k_blocks must be >= 1".into());
                }
                if !(0.0 <= self.pos_lo && self.pos_lo <= self.pos_hi && self.pos_hi <= 1.0) {
                    return bad(format!(
                        "position range [{}, {}] must satisfy 0 <= pos_lo <= pos_hi <= 1",
                        self.pos_lo, self.pos_hi
                    ));
                }
                if self.m_events == 0 {
                    return bad("m_events must be >= 1".into());
                }
                self.ripple.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                if let Some(k) = self.ripple.initial_block {
                    if k >= self.k_blocks {
                        return bad(format!("initial_block {k} out of range for {} blocks", self.k_blocks));
                    }
                }
                if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
                    return bad(format!("gamma must be >= 0, got {}", self.gamma));
                }
                if self.block_energy_top == 0 {
                    return bad("block_energy_top must be >= 1".into());
                }
                self.plasticity()
                    .validate()
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                if self.hist_bins == 0 {
                    return bad("hist_bins must be >= 1".into());
                }
            }
            Experiment::Interpret => {
                if self.interpret_neurons < 2 {
                    return bad("interpret_neurons must be >= 2".into());
                }
                if self.clusters == 0 || self.clusters > self.interpret_neurons {
                    return bad(format!(
                        "clusters must be between 1 and interpret_neurons ({})",
                        self.interpret_neurons
                    ));
                }
                if self.kmeans_iters == 0 {
                    return bad("kmeans_iters must be >= 1".into());
                }
                if self.n_train == 0 {
                    return bad("n_train must be >= 1".into());
                }
                if !(self.blob_spread >= 0.0 && self.blob_spread.is_finite()) {
                    return bad(format!("blob_spread must be >= 0, got {}", self.blob_spread));
                }
                self.training()
                    .validate()
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                self.descent()
                    .validate()
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                if !(0.0..=100.0).contains(&self.percentile) {
                    return bad(format!("percentile must be in [0, 100], got {}", self.percentile));
                }
                if self.grid_resolution < 2 {
                    return bad("grid_resolution must be >= 2".into());
                }
            }
            Experiment::Bench => {
                if self.sizes.is_empty() {
                    return bad("sizes must not be empty".into());
                }
                if self.bench_runs < 5 {
                    return bad(format!("bench_runs must be >= 5, got {}", self.bench_runs));
                }
            }
            Experiment::Energy => {}
        }
        Ok(())
    }
}
