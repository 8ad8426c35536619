//! Knowledge-to-neuron interpretation pipeline.
//!
//! Fixed neuron embeddings are grouped with k-means, knowledge items are
//! mapped to their nearest neuron, a random adjacency over the neurons is
//! relaxed toward low balance energy, and a small recurrent classifier is
//! trained on the knowledge items with a balance penalty on its recurrent
//! weights. The strongest adjacency edges form the reported graph.

mod classifier;
mod kmeans;

pub use classifier::{
    evaluate_classifier, train_classifier, ClassifierModel, TrainConfig, TrainingRun, RECURRENT_STEPS,
};
pub use kmeans::{kmeans_fit, ClusterModel};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::balance::{descend_balance, BalanceError, DescentConfig, Kernel};
use crate::io::fmt_f64;
use crate::matrix::SynapticMatrix;

/// Learning rate of the adjacency relaxation.
pub const ADJACENCY_ETA: f64 = 0.001;
/// Iterations of the adjacency relaxation.
pub const ADJACENCY_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpretError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding set has no labels")]
    Unlabeled,
    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Balance(#[from] BalanceError),
}

pub(crate) fn invalid(msg: impl Into<String>) -> InterpretError {
    InterpretError::InvalidParameter(msg.into())
}

/// Points in `R^d`, optionally labeled with class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    vectors: Vec<Vec<f64>>,
    labels: Option<Vec<usize>>,
}

impl EmbeddingSet {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self, InterpretError> {
        let dim = vectors.first().map_or(0, Vec::len);
        for v in &vectors {
            if v.len() != dim {
                return Err(InterpretError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid("embedding vectors must be finite"));
            }
        }
        Ok(Self {
            dim,
            vectors,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self, InterpretError> {
        if labels.len() != self.vectors.len() {
            return Err(InterpretError::DimensionMismatch {
                expected: self.vectors.len(),
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// `1 + max label`, or 0 when unlabeled or empty.
    pub fn num_classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |m| m + 1)
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest point in `candidates`; ties go to the lowest index.
pub(crate) fn nearest(point: &[f64], candidates: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in candidates.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Nearest neuron (Euclidean) for each knowledge item.
pub fn map_knowledge_to_neurons(
    knowledge: &EmbeddingSet,
    neurons: &EmbeddingSet,
) -> Result<Vec<usize>, InterpretError> {
    if neurons.is_empty() {
        return Err(invalid("no neurons to map onto"));
    }
    if !knowledge.is_empty() && knowledge.dim() != neurons.dim() {
        return Err(InterpretError::DimensionMismatch {
            expected: neurons.dim(),
            got: knowledge.dim(),
        });
    }
    Ok(knowledge
        .vectors()
        .iter()
        .map(|k| nearest(k, neurons.vectors()).0)
        .collect())
}

/// Uniform `[-1, 1]` adjacency over the neurons, symmetrized with a zero
/// diagonal.
pub fn init_adjacency<R: Rng + ?Sized>(
    neurons: &EmbeddingSet,
    rng: &mut R,
) -> Result<SynapticMatrix, InterpretError> {
    if neurons.len() < 2 {
        return Err(invalid("adjacency needs at least two neurons"));
    }
    Ok(SynapticMatrix::random_uniform(neurons.len(), rng))
}

/// 200 steps of balance descent with `η = 0.001`.
pub fn optimize_adjacency(
    w: &SynapticMatrix,
    kernel: Kernel,
) -> Result<(SynapticMatrix, Vec<f64>), InterpretError> {
    let cfg = DescentConfig {
        kernel,
        ..DescentConfig::new(ADJACENCY_ETA, ADJACENCY_ITERATIONS)
    };
    Ok(descend_balance(w, &cfg)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Edges whose `|weight|` is at least the given percentile of all
/// off-diagonal `|weight|`s, strongest first.
pub fn threshold_graph(w: &SynapticMatrix, pct: f64) -> Result<Vec<Edge>, InterpretError> {
    if !(0.0..=100.0).contains(&pct) {
        return Err(invalid(format!("percentile {pct} outside [0, 100]")));
    }
    let n = w.n();
    let magnitudes: Vec<f64> = w.upper_triangle().iter().map(|v| v.abs()).collect();
    let Some(threshold) = percentile(&magnitudes, pct) else {
        return Ok(Vec::new());
    };
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let weight = w.get(i, j);
            if weight.abs() >= threshold {
                edges.push(Edge { i, j, weight });
            }
        }
    }
    edges.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()).then((a.i, a.j).cmp(&(b.i, b.j))));
    Ok(edges)
}

/// `i,j,weight`
pub fn edges_csv(edges: &[Edge]) -> String {
    let mut out = String::from("i,j,weight\n");
    for e in edges {
        out.push_str(&format!("{},{},{}\n", e.i, e.j, fmt_f64(e.weight)));
    }
    out
}

/// `count` points uniform on `[0, 1]^dim`.
pub fn uniform_embeddings<R: Rng + ?Sized>(count: usize, dim: usize, rng: &mut R) -> EmbeddingSet {
    let vectors = (0..count)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..=1.0)).collect())
        .collect();
    EmbeddingSet::new(vectors).expect("uniform draws are finite")
}

/// `count` labeled points, item `i` drawn from an isotropic Gaussian with
/// standard deviation `spread` around `centers[i % centers.len()]`, and
/// labeled with that center's index.
pub fn blob_embeddings<R: Rng + ?Sized>(
    centers: &[Vec<f64>],
    count: usize,
    spread: f64,
    rng: &mut R,
) -> Result<EmbeddingSet, InterpretError> {
    if centers.is_empty() {
        return Err(invalid("need at least one blob center"));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(invalid(format!("blob spread must be >= 0, got {spread}")));
    }
    let mut vectors = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let label = i % centers.len();
        let v = centers[label]
            .iter()
            .map(|c| {
                let e: f64 = rng.sample(StandardNormal);
                c + spread * e
            })
            .collect();
        vectors.push(v);
        labels.push(label);
    }
    EmbeddingSet::new(vectors)?.with_labels(labels)
}
