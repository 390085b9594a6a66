use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use rand::Rng;

use super::vector::{full_ranks, validate_chain};
use super::{check_cap, checked_product, Core3, Core4, TtVector};
use crate::{Result, TtError};

/// Operator in tensor-train format mapping `m_1⋯m_d` to `n_1⋯n_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct TtMatrix {
    cores: Vec<Core4>,
}

impl TtMatrix {
    pub fn new(cores: Vec<Core4>) -> Result<Self> {
        validate_chain(cores.iter().map(|c| (c.left_rank(), c.right_rank())))?;
        Ok(TtMatrix { cores })
    }

    pub fn identity(sizes: &[usize]) -> Result<Self> {
        let cores = sizes
            .iter()
            .map(|&n| {
                let mut c = Core4::zeros(1, n, n, 1);
                for i in 0..n {
                    c.set(0, i, i, 0, 1.0);
                }
                c
            })
            .collect();
        TtMatrix::new(cores)
    }

    /// Kronecker product `M_1 ⊗ ⋯ ⊗ M_d` (mode 1 fastest).
    pub fn rank_one(factors: &[DMatrix<f64>]) -> Result<Self> {
        let cores = factors.iter().map(|m| Core4::from_blocks(&[vec![Some(m.clone())]], m.nrows(), m.ncols())).collect();
        TtMatrix::new(cores)
    }

    /// Kronecker sum `Σ_k I ⊗ ⋯ ⊗ L_k ⊗ ⋯ ⊗ I` with TT ranks 2.
    pub fn kronecker_sum(terms: &[DMatrix<f64>]) -> Result<Self> {
        let d = terms.len();
        if d == 0 {
            return Err(TtError::InvalidArgument("empty Kronecker sum".into()));
        }
        for t in terms {
            if t.nrows() != t.ncols() {
                return Err(TtError::SizeMismatch("Kronecker sum terms must be square".into()));
            }
        }
        if d == 1 {
            return TtMatrix::rank_one(&terms[..1]);
        }
        let eye = |n: usize| Some(DMatrix::<f64>::identity(n, n));
        let mut cores = Vec::with_capacity(d);
        for (k, l) in terms.iter().enumerate() {
            let n = l.nrows();
            // state 0: identity so far, state 1: term already placed
            let blocks = if k == 0 {
                vec![vec![Some(l.clone()), eye(n)]]
            } else if k == d - 1 {
                vec![vec![eye(n)], vec![Some(l.clone())]]
            } else {
                vec![vec![eye(n), None], vec![Some(l.clone()), eye(n)]]
            };
            cores.push(Core4::from_blocks(&blocks, n, n));
        }
        TtMatrix::new(cores)
    }

    pub fn random<R: Rng + ?Sized>(rows: &[usize], cols: &[usize], ranks: &[usize], rng: &mut R) -> Result<Self> {
        if rows.len() != cols.len() || ranks.len() + 1 != rows.len() {
            return Err(TtError::InvalidRanks("inconsistent operator dimensions".into()));
        }
        let full = full_ranks(ranks);
        let cores = (0..rows.len()).map(|k| Core4::random(full[k], rows[k], cols[k], full[k + 1], rng)).collect();
        TtMatrix::new(cores)
    }

    pub fn dim(&self) -> usize {
        self.cores.len()
    }
    pub fn row_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(Core4::row_size).collect()
    }
    pub fn col_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(Core4::col_size).collect()
    }
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(Core4::right_rank));
        r
    }
    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }
    pub fn core(&self, k: usize) -> &Core4 {
        &self.cores[k]
    }
    pub fn cores(&self) -> &[Core4] {
        &self.cores
    }
    pub fn into_cores(self) -> Vec<Core4> {
        self.cores
    }

    pub fn is_square(&self) -> bool {
        self.cores.iter().all(|c| c.row_size() == c.col_size())
    }

    /// Entry `A(i, j)` at zero-based row and column multi-indices.
    pub fn eval_entry(&self, rows: &[usize], cols: &[usize]) -> Result<f64> {
        if rows.len() != self.dim() || cols.len() != self.dim() {
            return Err(TtError::SizeMismatch("multi-index length differs from operator dimension".into()));
        }
        let mut row = vec![1.0];
        for (k, core) in self.cores.iter().enumerate() {
            let (i, j) = (rows[k], cols[k]);
            if i >= core.row_size() || j >= core.col_size() {
                return Err(TtError::OutOfBounds { what: "operator mode", index: i.max(j), bound: core.row_size() });
            }
            let mut next = vec![0.0; core.right_rank()];
            for (b, nb) in next.iter_mut().enumerate() {
                *nb = row.iter().enumerate().map(|(a, &ra)| ra * core.get(a, i, j, b)).sum();
            }
            row = next;
        }
        Ok(row[0])
    }

    /// Dense matrix with little-endian row and column ordering.
    pub fn to_dense_capped(&self, cap: usize) -> Result<DMatrix<f64>> {
        let n = checked_product(self.row_sizes());
        let m = checked_product(self.col_sizes());
        check_cap(n.saturating_mul(m), cap)?;
        let (n, m) = (n as usize, m as usize);
        // contract as a vector with fused (row, col) modes, then unscramble
        let fused = self.as_tt_vector().to_dense_capped(usize::MAX)?;
        let rows = self.row_sizes();
        let cols = self.col_sizes();
        let mut out = DMatrix::zeros(n, m);
        let d = self.dim();
        let mut ri = vec![0usize; d];
        let mut ci = vec![0usize; d];
        for (f, v) in fused.iter().enumerate() {
            let mut rest = f;
            for k in 0..d {
                let fk = rest % (rows[k] * cols[k]);
                rest /= rows[k] * cols[k];
                ri[k] = fk % rows[k];
                ci[k] = fk / rows[k];
            }
            let mut r = 0;
            let mut c = 0;
            for k in (0..d).rev() {
                r = r * rows[k] + ri[k];
                c = c * cols[k] + ci[k];
            }
            out[(r, c)] = *v;
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        self.to_dense_capped(crate::DEFAULT_DENSE_CAP)
    }

    /// The operator seen as a vector with fused `(row, col)` modes.
    pub fn as_tt_vector(&self) -> TtVector {
        let cores: Vec<Core3> = self.cores.iter().map(Core4::as_core3).collect();
        TtVector::new(cores).expect("operator rank chain is valid")
    }

    pub fn from_tt_vector(v: TtVector, rows: &[usize], cols: &[usize]) -> Result<Self> {
        let cores = v.into_cores().into_iter().enumerate().map(|(k, c)| Core4::from_core3(c, rows[k], cols[k])).collect::<Result<Vec<_>>>()?;
        TtMatrix::new(cores)
    }

    /// SVD rounding of the operator in the Frobenius norm.
    pub fn round(&self, tol: f64, max_rank: Option<usize>) -> TtMatrix {
        let v = self.as_tt_vector().round(tol, max_rank);
        TtMatrix::from_tt_vector(v, &self.row_sizes(), &self.col_sizes()).expect("shapes preserved")
    }

    pub fn transpose(&self) -> TtMatrix {
        TtMatrix { cores: self.cores.iter().map(Core4::transpose).collect() }
    }

    pub fn scaled(&self, s: f64) -> TtMatrix {
        let mut out = self.clone();
        for v in out.cores[0].data_mut() {
            *v *= s;
        }
        out
    }

    /// `αA + βB` with block-diagonal core concatenation.
    pub fn add(&self, other: &TtMatrix, alpha: f64, beta: f64) -> Result<TtMatrix> {
        if self.row_sizes() != other.row_sizes() || self.col_sizes() != other.col_sizes() {
            return Err(TtError::SizeMismatch("operator sum with different mode sizes".into()));
        }
        let sum = super::tt_add(&self.as_tt_vector(), &other.as_tt_vector(), alpha, beta)?;
        TtMatrix::from_tt_vector(sum, &self.row_sizes(), &self.col_sizes())
    }

    /// Operator product `A·B` (ranks multiply).
    pub fn matmul(&self, other: &TtMatrix) -> Result<TtMatrix> {
        if self.col_sizes() != other.row_sizes() {
            return Err(TtError::SizeMismatch(format!(
                "cannot multiply operator with columns {:?} by rows {:?}",
                self.col_sizes(),
                other.row_sizes()
            )));
        }
        let cores = self
            .cores
            .iter()
            .zip(&other.cores)
            .map(|(a, b)| {
                let (ra0, n, m, ra1) = a.shape();
                let (rb0, _, p, rb1) = b.shape();
                let mut c = Core4::zeros(ra0 * rb0, n, p, ra1 * rb1);
                for a1 in 0..ra1 {
                    for b1 in 0..rb1 {
                        for j in 0..p {
                            for i in 0..n {
                                for a0 in 0..ra0 {
                                    for b0 in 0..rb0 {
                                        let mut s = 0.0;
                                        for l in 0..m {
                                            s += a.get(a0, i, l, a1) * b.get(b0, l, j, b1);
                                        }
                                        c.set(a0 + ra0 * b0, i, j, a1 + ra1 * b1, s);
                                    }
                                }
                            }
                        }
                    }
                }
                c
            })
            .collect();
        TtMatrix::new(cores)
    }

    /// Kronecker product with one more trailing mode: `T ⊗ self` in the
    /// little-endian convention, i.e. `other` becomes mode `d+1`.
    pub fn append_mode(&self, other: &TtMatrix) -> Result<TtMatrix> {
        let mut cores = self.cores.clone();
        cores.extend(other.cores.iter().cloned());
        TtMatrix::new(cores)
    }
}
