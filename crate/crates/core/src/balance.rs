//! Structural-balance energy of a signed weight matrix.
//!
//! The energy sums a squared penalty over every triad `i < j < k`:
//!
//! ```text
//! E(W) = Σ_{i<j<k} (W_ij · W_jk · W_ki + 1)²
//! ```
//!
//! Two routes compute it. The naive kernels enumerate triads directly. The
//! fast kernels use the trace identities that hold for a symmetric matrix
//! with zero diagonal, where `A = W ∘ W`:
//!
//! ```text
//! E(W)  = C(n, 3) + tr(W³) / 3 + tr(A³) / 6
//! ∇E(W) = 2 · (W² + A² ∘ W)          (off-diagonal)
//! ```
//!
//! Both routes are kept so either can be checked against the other.
//! Gradients are taken with respect to the shared parameter of each
//! symmetric pair, so `G[i][j] == G[j][i]` and the diagonal is zero.

use crate::matrix::{DenseMatrix, MatrixError, SynapticMatrix};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BalanceError {
    #[error("invalid descent configuration: {0}")]
    InvalidConfig(String),
    #[error("balance descent diverged at iteration {iteration} (energy = {energy})")]
    Diverged { iteration: usize, energy: f64 },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Offset added to each triad product before squaring.
///
/// `Plus` is `(T + 1)²`, minimized at `T = -1`. `Minus` is `(T - 1)²`,
/// minimized at `T = +1`, i.e. at triads that are balanced under the
/// positive-product convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Penalty {
    #[default]
    Plus,
    Minus,
}

impl Penalty {
    #[inline]
    fn offset(self) -> f64 {
        match self {
            Penalty::Plus => 1.0,
            Penalty::Minus => -1.0,
        }
    }
}

impl std::str::FromStr for Penalty {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plus" => Ok(Penalty::Plus),
            "minus" => Ok(Penalty::Minus),
            other => Err(format!("unknown penalty sign '{other}' (expected plus|minus)")),
        }
    }
}

/// Which implementation evaluates energy and gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    Naive,
    #[default]
    Fast,
}

impl Kernel {
    pub fn energy(self, w: &SynapticMatrix, penalty: Penalty) -> f64 {
        match self {
            Kernel::Naive => balance_energy_naive_with(w, penalty),
            Kernel::Fast => balance_energy_fast_with(w, penalty),
        }
    }

    pub fn gradient(self, w: &SynapticMatrix, penalty: Penalty) -> DenseMatrix {
        match self {
            Kernel::Naive => balance_gradient_naive_with(w, penalty),
            Kernel::Fast => balance_gradient_fast_with(w, penalty),
        }
    }
}

/// One triad `i < j < k` and its edge product `W_ij · W_jk · W_ki`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriadReport {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub product: f64,
    /// Strictly positive product. A zero product is not balanced.
    pub balanced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentConfig {
    pub eta: f64,
    pub iterations: usize,
    pub kernel: Kernel,
    pub penalty: Penalty,
}

impl DescentConfig {
    pub fn new(eta: f64, iterations: usize) -> Self {
        Self {
            eta,
            iterations,
            kernel: Kernel::Fast,
            penalty: Penalty::Plus,
        }
    }

    pub fn validate(&self) -> Result<(), BalanceError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(BalanceError::InvalidConfig(format!(
                "eta must be a finite value > 0, got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Number of triads on `n` nodes.
pub fn triad_count(n: usize) -> f64 {
    if n < 3 {
        return 0.0;
    }
    let n = n as u128;
    (n * (n - 1) * (n - 2) / 6) as f64
}

pub fn balance_energy_naive(w: &SynapticMatrix) -> f64 {
    balance_energy_naive_with(w, Penalty::Plus)
}

/// Energy by explicit triad enumeration.
pub fn balance_energy_naive_with(w: &SynapticMatrix, penalty: Penalty) -> f64 {
    let n = w.n();
    let c = penalty.offset();
    let mut energy = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let term = w.get(i, j) * w.get(j, k) * w.get(k, i) + c;
                energy += term * term;
            }
        }
    }
    energy
}

pub fn balance_energy_fast(w: &SynapticMatrix) -> f64 {
    balance_energy_fast_with(w, Penalty::Plus)
}

/// Energy from `tr(W³)` and `tr((W∘W)³)`.
///
/// For symmetric `W` with zero diagonal, `tr(W³) = Σ_ij W_ij (W²)_ij
/// = 2 Σ_{i<j} W_ij ⟨W_i, W_j⟩`, so only the upper triangle of each
/// matrix square is formed.
pub fn balance_energy_fast_with(w: &SynapticMatrix, penalty: Penalty) -> f64 {
    let n = w.n();
    let dense = w.as_dense();
    let mut tr_w3 = 0.0;
    let mut tr_a3 = 0.0;
    for i in 0..n {
        let wi = dense.row(i);
        for j in i + 1..n {
            let wij = wi[j];
            if wij == 0.0 {
                continue;
            }
            let (w2, a2) = paired_dots(wi, dense.row(j));
            tr_w3 += wij * w2;
            tr_a3 += wij * wij * a2;
        }
    }
    tr_w3 *= 2.0;
    tr_a3 *= 2.0;
    triad_count(n) + penalty.offset() * tr_w3 / 3.0 + tr_a3 / 6.0
}

pub fn balance_gradient_naive(w: &SynapticMatrix) -> DenseMatrix {
    balance_gradient_naive_with(w, Penalty::Plus)
}

/// Gradient by triad enumeration; each triad adds to all six entries it
/// touches.
pub fn balance_gradient_naive_with(w: &SynapticMatrix, penalty: Penalty) -> DenseMatrix {
    let n = w.n();
    let c = penalty.offset();
    let mut grad = DenseMatrix::zeros(n);
    let g = grad.as_mut_slice();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (wij, wjk, wki) = (w.get(i, j), w.get(j, k), w.get(k, i));
                let factor = 2.0 * (wij * wjk * wki + c);
                let d_ij = factor * (wjk * wki);
                let d_jk = factor * (wij * wki);
                let d_ki = factor * (wij * wjk);
                g[i * n + j] += d_ij;
                g[j * n + i] += d_ij;
                g[j * n + k] += d_jk;
                g[k * n + j] += d_jk;
                g[k * n + i] += d_ki;
                g[i * n + k] += d_ki;
            }
        }
    }
    grad
}

pub fn balance_gradient_fast(w: &SynapticMatrix) -> DenseMatrix {
    balance_gradient_fast_with(w, Penalty::Plus)
}

/// `2 · (±W² + (W∘W)² ∘ W)` with the diagonal set to zero.
///
/// `(W²)_ii = Σ_k W_ik²` is generally nonzero, but diagonal entries are
/// not parameters of the energy, so they are dropped.
pub fn balance_gradient_fast_with(w: &SynapticMatrix, penalty: Penalty) -> DenseMatrix {
    let n = w.n();
    let dense = w.as_dense();
    let c = penalty.offset();
    let mut grad = DenseMatrix::zeros(n);
    for i in 0..n {
        let wi = dense.row(i);
        for j in i + 1..n {
            let (w2, a2) = paired_dots(wi, dense.row(j));
            let v = 2.0 * (c * w2 + a2 * wi[j]);
            grad.set(i, j, v);
            grad.set(j, i, v);
        }
    }
    grad
}

/// All `C(n, 3)` triads in lexicographic `(i, j, k)` order.
pub fn enumerate_triads(w: &SynapticMatrix) -> Vec<TriadReport> {
    let n = w.n();
    let mut out = Vec::with_capacity(triad_count(n) as usize);
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let product = w.get(i, j) * w.get(j, k) * w.get(k, i);
                out.push(TriadReport {
                    i,
                    j,
                    k,
                    product,
                    balanced: product > 0.0,
                });
            }
        }
    }
    out
}

/// Forward-Euler gradient descent `W ← W − η ∇E(W)`.
///
/// Returns the final matrix and the energy before the first step and after
/// every step (`iterations + 1` values).
pub fn descend_balance(
    w: &SynapticMatrix,
    cfg: &DescentConfig,
) -> Result<(SynapticMatrix, Vec<f64>), BalanceError> {
    cfg.validate()?;
    let mut current = w.clone();
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let e0 = cfg.kernel.energy(&current, cfg.penalty);
    if !e0.is_finite() {
        return Err(BalanceError::Diverged {
            iteration: 0,
            energy: e0,
        });
    }
    trace.push(e0);
    for iteration in 1..=cfg.iterations {
        let grad = cfg.kernel.gradient(&current, cfg.penalty);
        let mut next = current.into_dense();
        for (x, g) in next.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *x -= cfg.eta * g;
        }
        for i in 0..next.n() {
            next.set(i, i, 0.0);
        }
        current = SynapticMatrix::from_trusted(next).map_err(|_| BalanceError::Diverged {
            iteration,
            energy: f64::NAN,
        })?;
        let energy = cfg.kernel.energy(&current, cfg.penalty);
        if !energy.is_finite() {
            return Err(BalanceError::Diverged { iteration, energy });
        }
        trace.push(energy);
    }
    Ok((current, trace))
}

/// `|a − b| / max(|a|, |b|, 1)`: relative for magnitudes above one and
/// absolute below, so entries that cancel to nearly zero do not blow up.
pub fn relative_deviation(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Largest [`relative_deviation`] over matching entries.
pub fn max_relative_deviation(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!(a.n(), b.n(), "matrix dimension mismatch");
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| relative_deviation(x, y))
        .fold(0.0, f64::max)
}

#[inline]
/// `(Σ a_k b_k, Σ (a_k b_k)²)`: one row pair of `W²` and of `(W∘W)²`.
fn paired_dots(a: &[f64], b: &[f64]) -> (f64, f64) {
    const LANES: usize = 8;
    let mut s1 = [0.0f64; LANES];
    let mut s2 = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            let p = x[l] * y[l];
            s1[l] += p;
            s2[l] += p * p;
        }
    }
    let mut t1: f64 = s1.iter().sum();
    let mut t2: f64 = s2.iter().sum();
    for (x, y) in ra.iter().zip(rb) {
        let p = x * y;
        t1 += p;
        t2 += p * p;
    }
    (t1, t2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_ones(n: usize) -> SynapticMatrix {
        SynapticMatrix::from_upper(n, |_, _| 1.0)
    }

    fn seeded(n: usize, seed: u64) -> SynapticMatrix {
        SynapticMatrix::random_uniform(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn energy_small_cases() {
        assert_eq!(balance_energy_naive(&all_ones(3)), 4.0);
        assert_eq!(balance_energy_fast(&all_ones(3)), 4.0);
        let one_negative =
            SynapticMatrix::from_upper(3, |i, j| if (i, j) == (0, 1) { -1.0 } else { 1.0 });
        assert_eq!(balance_energy_naive(&one_negative), 0.0);
        assert_eq!(balance_energy_fast(&one_negative), 0.0);
        assert_eq!(balance_energy_naive(&SynapticMatrix::zeros(5)), 10.0);
        assert_eq!(balance_energy_fast(&SynapticMatrix::zeros(5)), 10.0);
    }

    #[test]
    fn tiny_matrices_have_no_triads() {
        for n in 0..3 {
            let w = SynapticMatrix::zeros(n);
            assert_eq!(balance_energy_naive(&w), 0.0);
            assert_eq!(balance_energy_fast(&w), 0.0);
            assert!(enumerate_triads(&w).is_empty());
        }
    }

    #[test]
    fn minus_penalty_prefers_positive_triads() {
        let w = all_ones(3);
        assert_eq!(balance_energy_naive_with(&w, Penalty::Minus), 0.0);
        assert_eq!(balance_energy_fast_with(&w, Penalty::Minus), 0.0);
        let w = seeded(15, 4);
        let naive = balance_energy_naive_with(&w, Penalty::Minus);
        let fast = balance_energy_fast_with(&w, Penalty::Minus);
        assert!(relative_deviation(naive, fast) < 1e-9);
        let gn = balance_gradient_naive_with(&w, Penalty::Minus);
        let gf = balance_gradient_fast_with(&w, Penalty::Minus);
        assert!(max_relative_deviation(&gn, &gf) < 1e-9);
    }

    #[test]
    fn gradient_all_ones() {
        let w = all_ones(3);
        for g in [balance_gradient_naive(&w), balance_gradient_fast(&w)] {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(g.get(i, j), if i == j { 0.0 } else { 4.0 });
                }
            }
        }
    }

    #[test]
    fn gradient_of_zero_is_zero() {
        let w = SynapticMatrix::zeros(6);
        assert_eq!(balance_gradient_naive(&w), DenseMatrix::zeros(6));
        assert_eq!(balance_gradient_fast(&w), DenseMatrix::zeros(6));
    }

    #[test]
    fn triads_are_lexicographic() {
        let w = seeded(5, 11);
        let triads = enumerate_triads(&w);
        assert_eq!(triads.len(), 10);
        let order: Vec<_> = triads.iter().map(|t| (t.i, t.j, t.k)).collect();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(order, sorted);
        for t in &triads {
            assert_eq!(t.product, w.get(t.i, t.j) * w.get(t.j, t.k) * w.get(t.k, t.i));
            assert_eq!(t.balanced, t.product > 0.0);
        }
    }

    #[test]
    fn zero_product_is_not_balanced() {
        let w = SynapticMatrix::from_upper(3, |i, j| if (i, j) == (1, 2) { 0.0 } else { 1.0 });
        let t = enumerate_triads(&w)[0];
        assert_eq!(t.product, 0.0);
        assert!(!t.balanced);
    }

    #[test]
    fn single_descent_step() {
        let cfg = DescentConfig::new(0.01, 1);
        let (w, trace) = descend_balance(&all_ones(3), &cfg).unwrap();
        assert_eq!(trace.len(), 2);
        assert!((w.get(0, 1) - 0.96).abs() < 1e-15);
        assert_eq!(w.get(0, 0), 0.0);
    }

    #[test]
    fn zero_iterations_is_identity() {
        let w = seeded(7, 1);
        let (out, trace) = descend_balance(&w, &DescentConfig::new(0.1, 0)).unwrap();
        assert_eq!(out, w);
        assert_eq!(trace, vec![balance_energy_fast(&w)]);
    }

    #[test]
    fn descent_rejects_bad_eta() {
        let w = SynapticMatrix::zeros(3);
        for eta in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                descend_balance(&w, &DescentConfig::new(eta, 1)),
                Err(BalanceError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn huge_step_reports_divergence() {
        let w = SynapticMatrix::from_upper(8, |_, _| 10.0);
        let err = descend_balance(&w, &DescentConfig::new(1e6, 50)).unwrap_err();
        match err {
            BalanceError::Diverged { iteration, .. } => assert!(iteration >= 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn penalty_parses() {
        assert_eq!("plus".parse::<Penalty>(), Ok(Penalty::Plus));
        assert_eq!("minus".parse::<Penalty>(), Ok(Penalty::Minus));
        assert!("both".parse::<Penalty>().is_err());
    }
}
