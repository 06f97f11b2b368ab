//! Dense symmetric matrices and their spectral norms.
//!
//! The norm is computed per connected component of the nonzero pattern (the
//! norm of a block-diagonal matrix is the largest block norm). Components up
//! to a size cutoff go through a dense symmetric eigensolve; larger ones use
//! power iteration from the all-ones vector.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CertifyError, Result};

/// Components up to this dimension use the dense eigensolver.
pub const DEFAULT_DENSE_CUTOFF: usize = 512;
pub const POWER_TOLERANCE: f64 = 1e-12;
pub const POWER_MAX_ITERATIONS: usize = 100_000;

/// Square real matrix stored row-major. Symmetry is checked by the norm
/// routines, not enforced on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// All-ones matrix `J`.
    pub fn ones(dim: usize) -> Self {
        Self {
            dim,
            data: vec![1.0; dim * dim],
        }
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(CertifyError::InvalidGamma(format!(
                "row {bad} has {} entries, expected {dim}",
                rows[bad].len()
            )));
        }
        Ok(Self {
            dim,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Entrywise product with the 0/1 mask `keep(i, j)`; the mask itself is
    /// never stored.
    pub fn masked(&self, keep: impl Fn(usize, usize) -> bool) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                if !keep(i, j) {
                    out.data[i * self.dim + j] = 0.0;
                }
            }
        }
        out
    }

    pub fn hadamard(&self, other: &SymMatrix) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    /// `self ⊗ other`, with `self` indexing the most significant block.
    pub fn kron(&self, other: &SymMatrix) -> Self {
        let (p, q) = (self.dim, other.dim);
        let mut out = Self::zeros(p * q);
        for a in 0..p {
            for b in 0..p {
                let s = self.get(a, b);
                if s == 0.0 {
                    continue;
                }
                for c in 0..q {
                    let row = (a * q + c) * p * q + b * q;
                    for e in 0..q {
                        out.data[row + e] = s * other.get(c, e);
                    }
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Largest absolute difference between two matrices of equal size.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> Result<f64> {
        self.same_dim(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn check_symmetric(&self) -> Result<()> {
        for i in 0..self.dim {
            for j in i..self.dim {
                let (a, b) = (self.get(i, j), self.get(j, i));
                if !a.is_finite() || !b.is_finite() {
                    return Err(CertifyError::InvalidGamma(format!("non-finite entry at ({i}, {j})")));
                }
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(CertifyError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    fn same_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(CertifyError::InvalidArgument(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    /// Vertex sets of the connected components of the nonzero pattern.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.dim];
        let mut out = Vec::new();
        for start in 0..self.dim {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut head = 0;
            while head < comp.len() {
                let v = comp[head];
                head += 1;
                let row = &self.data[v * self.dim..(v + 1) * self.dim];
                for (u, &a) in row.iter().enumerate() {
                    if a != 0.0 && !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm(m: &SymMatrix) -> Result<f64> {
    spectral_norm_with(m, DEFAULT_DENSE_CUTOFF)
}

pub fn spectral_norm_with(m: &SymMatrix, dense_cutoff: usize) -> Result<f64> {
    m.check_symmetric()?;
    let mut best = 0.0f64;
    for comp in m.components() {
        let norm = match comp.len() {
            1 => m.get(comp[0], comp[0]).abs(),
            len if len <= dense_cutoff => dense_norm(&m.submatrix(&comp)),
            _ => {
                let report = power_iteration(&m.submatrix(&comp), POWER_TOLERANCE, POWER_MAX_ITERATIONS);
                report.value
            }
        };
        best = best.max(norm);
    }
    Ok(best)
}

/// Largest absolute eigenvalue via a dense symmetric eigensolve.
pub fn dense_norm(m: &SymMatrix) -> f64 {
    if m.dim() == 0 {
        return 0.0;
    }
    let mat = DMatrix::from_row_slice(m.dim(), m.dim(), m.entries());
    mat.symmetric_eigenvalues().iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerReport {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct SparseRows {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    fn new(m: &SymMatrix) -> Self {
        let rows = (0..m.dim())
            .map(|i| {
                (0..m.dim())
                    .filter_map(|j| {
                        let v = m.get(i, j);
                        (v != 0.0).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    fn apply(&self, v: &[f64], shift: f64, out: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            out[i] = shift * v[i] + row.iter().map(|&(j, a)| a * v[j]).sum::<f64>();
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Power iteration for the largest absolute eigenvalue.
///
/// Entrywise nonnegative matrices are iterated with a positive diagonal shift
/// (which makes the dominant eigenvalue unique even for bipartite patterns)
/// and stop once the Collatz–Wielandt bracket `[min_i (Av)_i / v_i,
/// max_i (Av)_i / v_i]` is narrower than `tol` relative; it always contains
/// the spectral radius. Other matrices are iterated with `A²` and stop when
/// the estimate is stable and the `A²` eigen-residual of the iterate is small.
pub fn power_iteration(m: &SymMatrix, tol: f64, max_iter: usize) -> PowerReport {
    let dim = m.dim();
    if dim == 0 {
        return PowerReport {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let sparse = SparseRows::new(m);
    let nonnegative = m.entries().iter().all(|&v| v >= 0.0);
    let mut v = vec![1.0; dim];
    let mut w = vec![0.0; dim];
    sparse.apply(&v, 0.0, &mut w);
    if !nonnegative || w.iter().all(|&x| x == 0.0) {
        // all-ones may be an eigenvector of a non-dominant eigenvalue (or in
        // the kernel); use a fixed irrational-stride start instead
        for (i, x) in v.iter_mut().enumerate() {
            *x = 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract();
        }
    }
    normalize(&mut v);

    if nonnegative {
        let max_row = sparse
            .rows
            .iter()
            .map(|r| r.iter().map(|e| e.1).sum::<f64>())
            .fold(0.0, f64::max);
        let shift = 0.5 * max_row;
        let mut estimate = 0.0;
        for it in 1..=max_iter {
            sparse.apply(&v, shift, &mut w);
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            let mut positive = true;
            for (a, b) in w.iter().zip(&v) {
                if *b <= 0.0 {
                    positive = false;
                    break;
                }
                let r = a / b;
                lo = lo.min(r);
                hi = hi.max(r);
            }
            let rayleigh: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
            estimate = rayleigh - shift;
            if positive && hi - lo <= tol * hi.max(1.0) {
                return PowerReport {
                    value: (0.5 * (hi + lo) - shift).max(0.0),
                    iterations: it,
                    converged: true,
                };
            }
            std::mem::swap(&mut v, &mut w);
            if normalize(&mut v) == 0.0 {
                break;
            }
        }
        return PowerReport {
            value: estimate.abs(),
            iterations: max_iter,
            converged: false,
        };
    }

    let mut prev = f64::NAN;
    let mut u = vec![0.0; dim];
    for it in 1..=max_iter {
        sparse.apply(&v, 0.0, &mut w);
        let est = normalize(&mut w);
        if est == 0.0 {
            return PowerReport {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        if (est - prev).abs() <= tol * est {
            // residual of A² on v, relative to est²
            sparse.apply(&w, 0.0, &mut u);
            let resid = u
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - est * b).powi(2))
                .sum::<f64>()
                .sqrt();
            if resid <= 1e-6 * est {
                return PowerReport {
                    value: est,
                    iterations: it,
                    converged: true,
                };
            }
        }
        prev = est;
        // advance by A (the estimate ‖Av‖ converges under A² dynamics)
        std::mem::swap(&mut v, &mut w);
    }
    PowerReport {
        value: prev,
        iterations: max_iter,
        converged: false,
    }
}
