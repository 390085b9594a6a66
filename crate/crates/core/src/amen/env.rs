//! Reduced environments and the matrix-free local operator.
//!
//! An operator environment has shape `test × op × trial` (test index
//! fastest). Left environments contract cores `< k`, right environments
//! cores `> k`; both are stored in the same layout so that the local
//! product reduces to three matrix multiplications.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};

use crate::tt::{Core3, Core4, TtMatrix, TtVector};
use crate::{Result, TtError};

/// Operator environment of shape `test × op × trial`.
#[derive(Clone, Debug, PartialEq)]
pub struct OpEnv {
    pub test: usize,
    pub op: usize,
    pub trial: usize,
    pub data: Vec<f64>,
}

impl OpEnv {
    pub fn unit() -> Self {
        OpEnv { test: 1, op: 1, trial: 1, data: vec![1.0] }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[a + self.test * (b + self.op * c)]
    }

    /// `(test·op) × trial` view.
    fn as_left(&self) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.data, self.test * self.op, self.trial)
    }

    /// `test × (op·trial)` view.
    fn as_right(&self) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.data, self.test, self.op * self.trial)
    }
}

/// Operator core reshaped as `(β j) × (i β')`.
pub(crate) fn op_matrix(a: &Core4) -> DMatrix<f64> {
    let (r0, n, m, r1) = a.shape();
    DMatrix::from_fn(r0 * m, n * r1, |row, col| a.get(row % r0, col % n, row / r0, col / n))
}

/// First two stages of the local product: `Φ`, then the operator core.
/// Returns `W[α, i, β', γ']` as a `(test0·n) × (R1·trial1)` matrix.
pub(crate) fn apply_left_and_core(phi: &OpEnv, a: &Core4, amat: &DMatrix<f64>, u: &Core3) -> DMatrix<f64> {
    let (r0, n, m, r1) = a.shape();
    let (tr0, mu, tr1) = u.shape();
    debug_assert_eq!(phi.op, r0);
    debug_assert_eq!(phi.trial, tr0);
    debug_assert_eq!(mu, m);
    let t0 = phi.test;
    let ur = DMatrixView::from_slice(u.data(), tr0, m * tr1);
    let v1 = phi.as_left() * ur; // (t0 R0) × (m tr1)
    let mut w = vec![0.0; t0 * n * r1 * tr1];
    let blk_in = t0 * r0 * m;
    let blk_out = t0 * n * r1;
    for g in 0..tr1 {
        let src = DMatrixView::from_slice(&v1.as_slice()[g * blk_in..(g + 1) * blk_in], t0, r0 * m);
        let mut dst = DMatrixViewMut::from_slice(&mut w[g * blk_out..(g + 1) * blk_out], t0, n * r1);
        dst.gemm(1.0, &src, amat, 0.0);
    }
    DMatrix::from_vec(t0 * n, r1 * tr1, w)
}

/// Local product `Φ · A_k · Ψ` applied to a core `u`.
pub(crate) fn apply_local(phi: &OpEnv, a: &Core4, amat: &DMatrix<f64>, psi: &OpEnv, u: &Core3) -> Core3 {
    let w = apply_left_and_core(phi, a, amat, u);
    let out = w * psi.as_right().transpose();
    Core3::from_left_unfolding(&out, a.row_size())
}

/// Left environment of cores `≤ k` from the one of cores `< k`.
pub(crate) fn advance_left(phi: &OpEnv, test: &Core3, a: &Core4, trial: &Core3) -> OpEnv {
    let amat = op_matrix(a);
    let w = apply_left_and_core(phi, a, &amat, trial);
    let out = test.left_unfolding().transpose() * w;
    OpEnv { test: test.right_rank(), op: a.right_rank(), trial: trial.right_rank(), data: out.as_slice().to_vec() }
}

/// Right environment of cores `≥ k` from the one of cores `> k`.
pub(crate) fn advance_right(psi: &OpEnv, test: &Core3, a: &Core4, trial: &Core3) -> OpEnv {
    let (r0, n, m, r1) = a.shape();
    let (t0, _, t1) = test.shape();
    let (tr0, _, tr1) = trial.shape();
    debug_assert_eq!(psi.test, t1);
    let amat2 = op_matrix(a).transpose(); // (i β') × (β j)
    let q1 = DMatrixView::from_slice(test.data(), t0 * n, t1) * psi.as_right(); // layout γ,i,β',c'
    let mut q2 = vec![0.0; t0 * r0 * m * tr1];
    let blk_in = t0 * n * r1;
    let blk_out = t0 * r0 * m;
    for c in 0..tr1 {
        let src = DMatrixView::from_slice(&q1.as_slice()[c * blk_in..(c + 1) * blk_in], t0, n * r1);
        let mut dst = DMatrixViewMut::from_slice(&mut q2[c * blk_out..(c + 1) * blk_out], t0, r0 * m);
        dst.gemm(1.0, &src, &amat2, 0.0);
    }
    let q2 = DMatrixView::from_slice(&q2, t0 * r0, m * tr1);
    let out = q2 * DMatrixView::from_slice(trial.data(), tr0, m * tr1).transpose();
    OpEnv { test: t0, op: r0, trial: tr0, data: out.as_slice().to_vec() }
}

/// `(Φ_y · Y_k)` as a `(test0·n) × s_k` matrix.
pub(crate) fn rhs_left_part(phi_y: &DMatrix<f64>, y: &Core3) -> DMatrix<f64> {
    let prod = phi_y * y.right_unfolding();
    DMatrix::from_column_slice(phi_y.nrows() * y.mode_size(), y.right_rank(), prod.as_slice())
}

pub(crate) fn advance_left_rhs(phi_y: &DMatrix<f64>, test: &Core3, y: &Core3) -> DMatrix<f64> {
    test.left_unfolding().transpose() * rhs_left_part(phi_y, y)
}

pub(crate) fn advance_right_rhs(psi_y: &DMatrix<f64>, test: &Core3, y: &Core3) -> DMatrix<f64> {
    let m = y.left_unfolding() * psi_y.transpose(); // (s0 n) × t1
    let m = DMatrix::from_column_slice(y.left_rank(), y.mode_size() * test.right_rank(), m.as_slice());
    test.right_unfolding() * m.transpose()
}

/// Left/right environments of one sweep.
///
/// `left_op[k]` contracts cores `< k`, `right_op[k]` cores `> k`, with the
/// same indexing for the right-hand side environments.
#[derive(Clone, Debug)]
pub struct SweepState {
    pub left_op: Vec<OpEnv>,
    pub right_op: Vec<OpEnv>,
    pub left_rhs: Vec<DMatrix<f64>>,
    pub right_rhs: Vec<DMatrix<f64>>,
    pub position: usize,
}

pub(crate) fn check_system(a: &TtMatrix, y: &TtVector, x: &TtVector) -> Result<()> {
    if a.row_sizes() != y.mode_sizes() || a.col_sizes() != x.mode_sizes() || !a.is_square() {
        return Err(TtError::SizeMismatch(format!(
            "operator {:?}x{:?}, rhs {:?}, solution {:?}",
            a.row_sizes(),
            a.col_sizes(),
            y.mode_sizes(),
            x.mode_sizes()
        )));
    }
    Ok(())
}

/// Populates all right environments of `x` and the first left one.
pub fn build_environments(a: &TtMatrix, y: &TtVector, x: &TtVector) -> Result<SweepState> {
    check_system(a, y, x)?;
    let d = x.dim();
    let mut right_op = vec![OpEnv::unit(); d];
    let mut right_rhs = vec![DMatrix::from_element(1, 1, 1.0); d];
    for k in (1..d).rev() {
        right_op[k - 1] = advance_right(&right_op[k], x.core(k), a.core(k), x.core(k));
        right_rhs[k - 1] = advance_right_rhs(&right_rhs[k], x.core(k), y.core(k));
    }
    Ok(SweepState { left_op: vec![OpEnv::unit(); d], right_op, left_rhs: vec![DMatrix::from_element(1, 1, 1.0); d], right_rhs, position: 0 })
}

impl SweepState {
    /// Moves the left environments past core `k` of `x`.
    pub fn advance(&mut self, a: &TtMatrix, y: &TtVector, x: &TtVector, k: usize) {
        if k + 1 < self.left_op.len() {
            self.left_op[k + 1] = advance_left(&self.left_op[k], x.core(k), a.core(k), x.core(k));
            self.left_rhs[k + 1] = advance_left_rhs(&self.left_rhs[k], x.core(k), y.core(k));
        }
        self.position = k + 1;
    }

    /// Local right-hand side `X_{≠k}ᵀ y` as a core of the shape of `x`'s core `k`.
    pub fn local_rhs(&self, y: &TtVector, k: usize) -> Core3 {
        let part = rhs_left_part(&self.left_rhs[k], y.core(k));
        let b = part * self.right_rhs[k].transpose();
        Core3::from_left_unfolding(&b, y.core(k).mode_size())
    }

    pub fn local_operator<'a>(&'a self, a: &'a TtMatrix, k: usize) -> LocalOperator<'a> {
        LocalOperator::new(&self.left_op[k], a.core(k), &self.right_op[k])
    }
}

/// Matrix-free local operator `B_k = X_{≠k}ᵀ A X_{≠k}`.
pub struct LocalOperator<'a> {
    pub phi: &'a OpEnv,
    pub core: &'a Core4,
    pub psi: &'a OpEnv,
    amat: DMatrix<f64>,
}

impl<'a> LocalOperator<'a> {
    pub fn new(phi: &'a OpEnv, core: &'a Core4, psi: &'a OpEnv) -> Self {
        LocalOperator { phi, core, psi, amat: op_matrix(core) }
    }

    /// Shape `(left, mode, right)` of the cores this operator acts on.
    pub fn core_shape(&self) -> (usize, usize, usize) {
        (self.phi.trial, self.core.col_size(), self.psi.trial)
    }

    pub fn size(&self) -> usize {
        let (a, b, c) = self.core_shape();
        a * b * c
    }

    pub fn apply(&self, u: &Core3) -> Core3 {
        apply_local(self.phi, self.core, &self.amat, self.psi, u)
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let (l, n, r) = self.core_shape();
        let u = Core3::from_vec(l, n, r, v.as_slice().to_vec()).expect("local vector size");
        DVector::from_vec(self.apply(&u).into_data())
    }

    /// `W = Φ·A_k·u` before the right environment, `(left·n) × (R_k·r_k)`.
    pub fn left_and_core(&self, u: &Core3) -> DMatrix<f64> {
        apply_left_and_core(self.phi, self.core, &self.amat, u)
    }

    /// Dense `B_k`; rows and columns follow the core layout.
    pub fn assemble(&self) -> DMatrix<f64> {
        let (r0, n, m, r1) = self.core.shape();
        let (t0, tr0) = (self.phi.test, self.phi.trial);
        let (t1, tr1) = (self.psi.test, self.psi.trial);
        let (rows_in, cols_in) = (t0 * n, tr0 * m);
        let mut b = DMatrix::zeros(rows_in * t1, cols_in * tr1);
        for bp in 0..r1 {
            // M_{β'} = Σ_β A_{ββ'} ⊗ Φ_β
            let mut mb = DMatrix::<f64>::zeros(rows_in, cols_in);
            let mut any = false;
            for bb in 0..r0 {
                for j in 0..m {
                    for i in 0..n {
                        let v = self.core.get(bb, i, j, bp);
                        if v == 0.0 {
                            continue;
                        }
                        any = true;
                        for a2 in 0..tr0 {
                            for a1 in 0..t0 {
                                mb[(a1 + t0 * i, a2 + tr0 * j)] += v * self.phi.get(a1, bb, a2);
                            }
                        }
                    }
                }
            }
            if !any {
                continue;
            }
            for g2 in 0..tr1 {
                for g1 in 0..t1 {
                    let p = self.psi.get(g1, bp, g2);
                    if p == 0.0 {
                        continue;
                    }
                    let mut blk = b.view_mut((g1 * rows_in, g2 * cols_in), (rows_in, cols_in));
                    blk.zip_apply(&mb, |o, m| *o += p * m);
                }
            }
        }
        b
    }
}

/// Dense local matrix and right-hand side at core `k`.
pub fn assemble_local(state: &SweepState, a: &TtMatrix, y: &TtVector, k: usize, cap: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let op = state.local_operator(a, k);
    let n = op.size();
    if n > cap {
        return Err(TtError::DenseCapExceeded { entries: (n as u128) * (n as u128), cap: cap * cap });
    }
    let b = DVector::from_vec(state.local_rhs(y, k).into_data());
    Ok((op.assemble(), b))
}
