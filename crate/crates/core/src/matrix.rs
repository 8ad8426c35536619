//! Dense square matrices and the signed synaptic weight matrix.
//!
//! [`DenseMatrix`] is a plain row-major `n × n` buffer with no invariants.
//! [`SynapticMatrix`] wraps one and guarantees the properties the balance
//! kernels depend on: symmetry, a zero diagonal and finite entries. The
//! trace identities used by the fast kernels are only valid with a zero
//! diagonal, so inputs that violate it are rejected rather than repaired.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("matrix must have at least one row")]
    Empty,
    #[error("expected {expected} entries for a {n}x{n} matrix, got {got}")]
    Shape { n: usize, expected: usize, got: usize },
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("entry ({i}, {j}) is not finite: {value}")]
    NonFinite { i: usize, j: usize, value: f64 },
    #[error("matrix is not symmetric at ({i}, {j}): {a} != {b}")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("diagonal entry ({i}, {i}) is {value}, expected 0")]
    NonzeroDiagonal { i: usize, value: f64 },
}

/// Row-major square matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if data.len() != n * n {
            return Err(MatrixError::Shape {
                n,
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (row, values) in rows.iter().enumerate() {
            if values.len() != n {
                return Err(MatrixError::RaggedRow {
                    row,
                    expected: n,
                    got: values.len(),
                });
            }
            data.extend_from_slice(values);
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n.max(1))
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "matrix dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Symmetric, zero-diagonal, finite `n × n` signed weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SynapticMatrix {
    inner: DenseMatrix,
}

impl SynapticMatrix {
    /// All-zero matrix on `n` neurons.
    pub fn zeros(n: usize) -> Self {
        Self {
            inner: DenseMatrix::zeros(n),
        }
    }

    /// Validates `m` against the synaptic invariants.
    pub fn new(m: DenseMatrix) -> Result<Self, MatrixError> {
        validate(&m)?;
        Ok(Self { inner: m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        Self::new(DenseMatrix::from_rows(rows)?)
    }

    /// Builds a matrix from its strict upper triangle, mirrored below the
    /// diagonal. `f(i, j)` is called once per pair with `i < j`.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        Self { inner: m }
    }

    /// Entries drawn i.i.d. uniform on `[-1, 1]`, symmetrized as
    /// `(M + Mᵀ) / 2` with the diagonal zeroed.
    pub fn random_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let raw: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self::from_upper(n, |i, j| 0.5 * (raw[i * n + j] + raw[j * n + i]))
    }

    /// Wraps a matrix the caller has built symmetric with zero diagonal.
    /// Finiteness is checked; symmetry is only checked in debug builds.
    pub(crate) fn from_trusted(m: DenseMatrix) -> Result<Self, MatrixError> {
        debug_assert!(is_symmetric_zero_diag(&m));
        if let Some((idx, &value)) = m.data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(MatrixError::NonFinite {
                i: idx / m.n,
                j: idx % m.n,
                value,
            });
        }
        Ok(Self { inner: m })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn as_dense(&self) -> &DenseMatrix {
        &self.inner
    }

    pub fn into_dense(self) -> DenseMatrix {
        self.inner
    }

    /// Off-diagonal upper-triangle entries in row-major order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.inner.row(i)[i + 1..]);
        }
        out
    }

    /// Relabels nodes: entry `(p[i], p[j])` of the result is entry `(i, j)`
    /// of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        assert_eq!(perm.len(), n, "permutation length mismatch");
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(perm[i], perm[j], self.get(i, j));
            }
        }
        Self { inner: m }
    }
}

fn validate(m: &DenseMatrix) -> Result<(), MatrixError> {
    let n = m.n;
    for i in 0..n {
        for j in 0..n {
            let v = m.get(i, j);
            if !v.is_finite() {
                return Err(MatrixError::NonFinite { i, j, value: v });
            }
        }
    }
    for i in 0..n {
        let d = m.get(i, i);
        if d != 0.0 {
            return Err(MatrixError::NonzeroDiagonal { i, value: d });
        }
        for j in i + 1..n {
            let (a, b) = (m.get(i, j), m.get(j, i));
            if a != b {
                return Err(MatrixError::Asymmetric { i, j, a, b });
            }
        }
    }
    Ok(())
}

fn is_symmetric_zero_diag(m: &DenseMatrix) -> bool {
    (0..m.n).all(|i| m.get(i, i) == 0.0 && (i + 1..m.n).all(|j| m.get(i, j) == m.get(j, i)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_asymmetric() {
        let err = SynapticMatrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.0]]).unwrap_err();
        assert!(matches!(err, MatrixError::Asymmetric { i: 0, j: 1, .. }));
    }

    #[test]
    fn rejects_nonzero_diagonal() {
        let err = SynapticMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 2.0]]).unwrap_err();
        assert_eq!(err, MatrixError::NonzeroDiagonal { i: 1, value: 2.0 });
    }

    #[test]
    fn rejects_nan_and_ragged() {
        let err = SynapticMatrix::from_rows(&[vec![0.0, f64::NAN], vec![f64::NAN, 0.0]]);
        assert!(matches!(err, Err(MatrixError::NonFinite { .. })));
        let err = SynapticMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0]]);
        assert!(matches!(err, Err(MatrixError::RaggedRow { row: 1, .. })));
    }

    #[test]
    fn random_uniform_is_valid_and_seeded() {
        let a = SynapticMatrix::random_uniform(12, &mut ChaCha8Rng::seed_from_u64(3));
        let b = SynapticMatrix::random_uniform(12, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert!(SynapticMatrix::new(a.as_dense().clone()).is_ok());
        assert!(a.upper_triangle().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn permutation_roundtrip() {
        let w = SynapticMatrix::random_uniform(5, &mut ChaCha8Rng::seed_from_u64(9));
        let perm = [3, 0, 4, 1, 2];
        let mut inv = [0; 5];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        assert_eq!(w.permuted(&perm).permuted(&inv), w);
    }
}
