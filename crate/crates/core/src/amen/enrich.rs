//! Residual approximation and basis expansion.
//!
//! The reduced residual `z_k = y_k − A_k u_k` is a tensor train whose first
//! core `Ẑ_k = [Y_k | −(A_k ⊗ U)]` depends on the step, while the tail
//! blocks `Ẑ^{(p)} = diag(Y_p, A_p ⊗ T_p)` only depend on the iterate at
//! the start of the sweep.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use super::env::{advance_left, advance_left_rhs, advance_right, advance_right_rhs, apply_local, op_matrix, rhs_left_part, OpEnv};
use crate::linalg::{lq_thin, qr_thin};
use crate::tt::{Core3, Core4, OrthoTag, TtMatrix, TtVector};
use crate::Result;

/// Core of `A ⊗ T` with fused ranks `β + R·γ`.
pub(crate) fn matvec_core(a: &Core4, t: &Core3) -> Core3 {
    let (ra0, n, m, ra1) = a.shape();
    let (rx0, _, rx1) = t.shape();
    let mut out = Core3::zeros(ra0 * rx0, n, ra1 * rx1);
    for g1 in 0..rx1 {
        for b1 in 0..ra1 {
            for j in 0..m {
                for g0 in 0..rx0 {
                    let tv = t.get(g0, j, g1);
                    if tv == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        for b0 in 0..ra0 {
                            let av = a.get(b0, i, j, b1);
                            if av != 0.0 {
                                let (l, r) = (b0 + ra0 * g0, b1 + ra1 * g1);
                                let cur = out.get(l, i, r);
                                out.set(l, i, r, cur + av * tv);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Tail blocks `Ẑ^{(p)}` for `p = 1..d`; entry 0 is an empty placeholder.
pub fn residual_tail(a: &TtMatrix, y: &TtVector, x: &TtVector) -> Vec<Core3> {
    let d = x.dim();
    let mut out = vec![Core3::zeros(0, 0, 0)];
    for p in 1..d {
        let yc = y.core(p);
        let at = matvec_core(a.core(p), x.core(p));
        let n = yc.mode_size();
        let (s0, s1) = (yc.left_rank(), yc.right_rank());
        let (l0, l1) = (at.left_rank(), at.right_rank());
        let core = if p == d - 1 {
            Core3::from_fn(s0 + l0, n, 1, |a, i, _| if a < s0 { yc.get(a, i, 0) } else { at.get(a - s0, i, 0) })
        } else {
            Core3::from_fn(s0 + l0, n, s1 + l1, |a, i, b| match (a < s0, b < s1) {
                (true, true) => yc.get(a, i, b),
                (false, false) => at.get(a - s0, i, b - s1),
                _ => 0.0,
            })
        };
        out.push(core);
    }
    out
}

/// First residual block `Ẑ_k = [Φ_y·Y_k | −W]` where `W = Φ·A_k·u`.
pub fn residual_first_block(phi_y: &DMatrix<f64>, y: &Core3, w: &DMatrix<f64>) -> DMatrix<f64> {
    let yp = rhs_left_part(phi_y, y);
    let rows = yp.nrows();
    let mut f = DMatrix::zeros(rows, yp.ncols() + w.ncols());
    f.columns_mut(0, yp.ncols()).copy_from(&yp);
    f.columns_mut(yp.ncols(), w.ncols()).copy_from(&(-w));
    f
}

/// Right LQ chain of the tail: `C[p]` with `Ẑ^{(p)}⋯Ẑ^{(d)} = C[p] · Q`,
/// `Q` with orthonormal rows. `C[d]` is the 1×1 identity.
pub fn svd_chain(tail: &[Core3]) -> Vec<DMatrix<f64>> {
    let d = tail.len();
    let mut c = vec![DMatrix::from_element(1, 1, 1.0); d + 1];
    for p in (1..d).rev() {
        let m = tail[p].right_multiply(&c[p + 1]);
        let (l, _) = lq_thin(&m.right_unfolding());
        c[p] = l;
    }
    c
}

/// Gram chain: `M[p] = Σ_i Ẑ^{(p)}(i) M[p+1] Ẑ^{(p)}(i)ᵀ`, `M[d] = 1`.
pub fn gram_chain(tail: &[Core3]) -> Vec<DMatrix<f64>> {
    let d = tail.len();
    let mut g = vec![DMatrix::from_element(1, 1, 1.0); d + 1];
    for p in (1..d).rev() {
        let w = tail[p].right_multiply(&g[p + 1]);
        let m = w.right_unfolding() * tail[p].right_unfolding().transpose();
        g[p] = (&m + m.transpose()) * 0.5;
    }
    g
}

/// An enrichment block and the relative part of the residual it misses.
#[derive(Clone, Debug)]
pub struct Enrichment {
    /// `(r_{k-1}·n_k) × width`.
    pub z: DMatrix<f64>,
    /// `‖z_k − Π z_k‖ / ‖z_k‖` for the captured subspace, when known.
    pub defect: Option<f64>,
    /// `‖z_k‖`, when known.
    pub residual_norm: Option<f64>,
}

impl Enrichment {
    pub fn width(&self) -> usize {
        self.z.ncols()
    }
}

/// Dominant left singular vectors of `Ẑ_k · C_{k+1}`.
pub fn enrich_svd(first: &DMatrix<f64>, chain: &DMatrix<f64>, rho: usize, rel_tol: f64) -> Enrichment {
    let m = first * chain;
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return Enrichment { z: DMatrix::zeros(rows, 0), defect: Some(0.0), residual_norm: Some(0.0) };
    }
    let svd = m.svd(true, false);
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let total = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    if total == 0.0 {
        return Enrichment { z: DMatrix::zeros(rows, 0), defect: Some(0.0), residual_norm: Some(0.0) };
    }
    let floor = s[0] * 1e-14 + rel_tol * total;
    let w = s.iter().take(rho).take_while(|v| **v > floor).count();
    let tail = s[w..].iter().map(|v| v * v).sum::<f64>().sqrt();
    let z = svd.u.expect("u requested").columns(0, w).into_owned();
    Enrichment { z, defect: Some(tail / total), residual_norm: Some(total) }
}

/// Pivoted Cholesky factor of a positive semidefinite `g`, at most `rho`
/// columns. Pivots pick the largest remaining diagonal (lowest index on
/// ties); stops at numerical rank or on a negative pivot below
/// `−1e-10·trace`.
pub fn pivoted_cholesky(g: &DMatrix<f64>, rho: usize) -> DMatrix<f64> {
    let n = g.nrows();
    let trace: f64 = (0..n).map(|i| g[(i, i)]).sum();
    let mut diag: Vec<f64> = (0..n).map(|i| g[(i, i)]).collect();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if trace <= 0.0 {
        return DMatrix::zeros(n, 0);
    }
    while cols.len() < rho.min(n) {
        let mut p = 0;
        for i in 1..n {
            if diag[i] > diag[p] {
                p = i;
            }
        }
        let dp = diag[p];
        if dp < -1e-10 * trace || dp <= 1e-12 * trace {
            break;
        }
        let sq = dp.sqrt();
        let mut l: Vec<f64> = (0..n).map(|i| g[(i, p)]).collect();
        for c in &cols {
            let cp = c[p];
            for i in 0..n {
                l[i] -= c[i] * cp;
            }
        }
        for v in l.iter_mut() {
            *v /= sq;
        }
        for i in 0..n {
            diag[i] -= l[i] * l[i];
        }
        diag[p] = 0.0;
        cols.push(l);
    }
    let w = cols.len();
    DMatrix::from_fn(n, w, |i, j| cols[j][i])
}

/// Enrichment from the Gram matrix `G_k = Ẑ_k M_{k+1} Ẑ_kᵀ`.
pub fn enrich_chol(first: &DMatrix<f64>, gram: &DMatrix<f64>, rho: usize) -> Enrichment {
    let g = first * gram * first.transpose();
    let g = (&g + g.transpose()) * 0.5;
    let trace = g.trace().max(0.0);
    let l = pivoted_cholesky(&g, rho);
    if l.ncols() == 0 {
        return Enrichment { z: DMatrix::zeros(g.nrows(), 0), defect: Some(0.0), residual_norm: Some(trace.sqrt()) };
    }
    let (q, _) = qr_thin(l);
    let captured = (q.transpose() * &g * &q).trace();
    let defect = ((trace - captured).max(0.0) / trace).sqrt();
    Enrichment { z: q, defect: Some(defect), residual_norm: Some(trace.sqrt()) }
}

/// Persistent rank-`ρ` residual approximant for the ALS enrichment.
#[derive(Clone, Debug)]
pub struct AlsResidual {
    pub z: TtVector,
    zy_left: Vec<DMatrix<f64>>,
    zy_right: Vec<DMatrix<f64>>,
    zax_left: Vec<OpEnv>,
    zax_right: Vec<OpEnv>,
    /// Number of cores reinitialized because they vanished.
    pub reinitialized: usize,
}

impl AlsResidual {
    /// Random rank-`ρ` start with right-orthogonal cores.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rho: usize, rng: &mut R) -> Result<Self> {
        let d = sizes.len();
        let mut ranks = Vec::with_capacity(d.saturating_sub(1));
        for k in 1..d {
            let left: usize = sizes[..k].iter().fold(1usize, |a, b| a.saturating_mul(*b));
            let right: usize = sizes[k..].iter().fold(1usize, |a, b| a.saturating_mul(*b));
            ranks.push(rho.min(left).min(right));
        }
        let mut z = TtVector::random(sizes, &ranks, rng)?;
        z.right_orthogonalize(0);
        Ok(AlsResidual { z, zy_left: Vec::new(), zy_right: Vec::new(), zax_left: Vec::new(), zax_right: Vec::new(), reinitialized: 0 })
    }

    /// Right environments of `z̃` against `y` and `A x` for a new sweep.
    pub fn prepare(&mut self, a: &TtMatrix, y: &TtVector, x: &TtVector) {
        let d = x.dim();
        self.zy_right = vec![DMatrix::from_element(1, 1, 1.0); d];
        self.zax_right = vec![OpEnv::unit(); d];
        for k in (1..d).rev() {
            self.zy_right[k - 1] = advance_right_rhs(&self.zy_right[k], self.z.core(k), y.core(k));
            self.zax_right[k - 1] = advance_right(&self.zax_right[k], self.z.core(k), a.core(k), x.core(k));
        }
        self.zy_left = vec![DMatrix::from_element(1, 1, 1.0); d];
        self.zax_left = vec![OpEnv::unit(); d];
    }

    /// Projection of the reduced residual onto the trailing cores of `z̃`.
    pub fn project(&self, k: usize, phi_y: &DMatrix<f64>, y: &Core3, w: &DMatrix<f64>) -> Enrichment {
        let yp = rhs_left_part(phi_y, y) * self.zy_right[k].transpose();
        let psi = &self.zax_right[k];
        let ap = w * DMatrix::from_column_slice(psi.test, psi.op * psi.trial, &psi.data).transpose();
        Enrichment { z: yp - ap, defect: None, residual_norm: None }
    }

    /// One alternating update of core `k`: `z^{(k)} = Z_{≠k}ᵀ (y − A u)` where
    /// `u` has core `u_core` at position `k`. Keeps cores `≤ k` left-orthogonal.
    pub fn update<R: Rng + ?Sized>(&mut self, k: usize, a: &TtMatrix, y: &TtVector, u_core: &Core3, rng: &mut R) {
        let d = self.z.dim();
        let ycore = y.core(k);
        let yl = rhs_left_part(&self.zy_left[k], ycore);
        let ypart = yl * self.zy_right[k].transpose();
        let ac = a.core(k);
        let au = apply_local(&self.zax_left[k], ac, &op_matrix(ac), &self.zax_right[k], u_core);
        let n = ycore.mode_size();
        let mut zk = Core3::from_left_unfolding(&(ypart - au.left_unfolding()), n);
        if zk.frobenius_norm() == 0.0 || !zk.frobenius_norm().is_finite() {
            let (l, _, r) = zk.shape();
            zk = Core3::random(l, n, r, rng);
            self.reinitialized += 1;
        }
        let cores = self.z.cores_mut();
        if k + 1 < d {
            let (q, r) = qr_thin(zk.left_unfolding());
            let width = q.ncols();
            cores[k] = Core3::from_left_unfolding(&q, n);
            cores[k + 1] = cores[k + 1].left_multiply(&r);
            debug_assert_eq!(width, cores[k + 1].left_rank());
        } else {
            cores[k] = zk;
        }
        self.z.set_ortho(OrthoTag { left: k.min(d - 1), right: d });
        if k + 1 < d {
            self.z.set_ortho(OrthoTag { left: k + 1, right: d });
        }
    }

    /// Left environments past core `k`, against the final solution core.
    pub fn advance(&mut self, k: usize, a: &TtMatrix, y: &TtVector, x: &TtVector) {
        if k + 1 < self.zy_left.len() {
            self.zy_left[k + 1] = advance_left_rhs(&self.zy_left[k], self.z.core(k), y.core(k));
            self.zax_left[k + 1] = advance_left(&self.zax_left[k], self.z.core(k), a.core(k), x.core(k));
        }
    }

    /// Restores right orthogonality for the next sweep.
    pub fn finish_sweep(&mut self) {
        let d = self.z.dim();
        self.z.set_ortho(OrthoTag::none(d));
        self.z.right_orthogonalize(0);
    }
}

/// Widens core `k` of `x` by `z` (`(r_{k-1}n_k) × w`) and zero-pads core
/// `k+1`, then restores left orthogonality of core `k` by QR. The
/// represented vector does not change. Returns the new rank `r_k`.
pub fn expand_and_orthogonalize(x: &mut TtVector, k: usize, z: &DMatrix<f64>, max_rank: Option<usize>) -> usize {
    let d = x.dim();
    assert!(k + 1 < d, "the last core is never expanded");
    let cores = x.cores_mut();
    let n = cores[k].mode_size();
    let u = cores[k].left_unfolding();
    let (rows, ru) = u.shape();
    let cap = max_rank.unwrap_or(usize::MAX);
    let w = z.ncols().min(rows.saturating_sub(ru)).min(cap.saturating_sub(ru));
    let mut m = DMatrix::zeros(rows, ru + w);
    m.columns_mut(0, ru).copy_from(&u);
    if w > 0 {
        m.columns_mut(ru, w).copy_from(&z.columns(0, w));
    }
    let (q, r) = qr_thin(m);
    let rnew = q.ncols();
    cores[k] = Core3::from_left_unfolding(&q, n);
    let ruu = r.columns(0, ru).into_owned();
    cores[k + 1] = cores[k + 1].left_multiply(&ruu);
    let tag = x.ortho();
    x.set_ortho(OrthoTag { left: k + 1, right: tag.right.max(k + 2) });
    rnew
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amen::env::{build_environments, LocalOperator};
    use crate::tt::{tt_add, tt_matvec, Side};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn principal_sines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let (qa, _) = qr_thin(a.clone());
        let (qb, _) = qr_thin(b.clone());
        let p = &qb - &qa * (qa.transpose() * &qb);
        p.norm()
    }

    /// Dense `z_k = X_{<k}ᵀ (y − A u)` as an `(r_{k-1} n_k) × rest` matrix.
    fn dense_reduced_residual(a: &TtMatrix, y: &TtVector, u: &TtVector, k: usize) -> DMatrix<f64> {
        let r = tt_add(y, &tt_matvec(a, u).unwrap(), 1.0, -1.0).unwrap();
        let rd = DVector::from_vec(r.to_dense().unwrap());
        let sizes = u.mode_sizes();
        let left: usize = sizes[..k].iter().product();
        let rest: usize = sizes[k..].iter().product();
        let rm = DMatrix::from_column_slice(left, rest, rd.as_slice());
        let xl = if k == 0 { DMatrix::identity(1, 1) } else { u.interface_matrix(k, Side::Leq, 1 << 20).unwrap() };
        let red = xl.transpose() * rm; // r_{k-1} × (n_k ⋯)
        let nk = sizes[k];
        DMatrix::from_column_slice(red.nrows() * nk, rest / nk, red.as_slice())
    }

    struct Setup {
        a: TtMatrix,
        y: TtVector,
        x: TtVector,
    }

    fn setup(seed: u64) -> Setup {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = TtMatrix::random(&[2, 3, 2, 2], &[2, 3, 2, 2], &[2, 2, 2], &mut rng).unwrap();
        let y = TtVector::random(&[2, 3, 2, 2], &[2, 2, 1], &mut rng).unwrap();
        let mut x = TtVector::random(&[2, 3, 2, 2], &[2, 2, 2], &mut rng).unwrap();
        x.right_orthogonalize(0);
        Setup { a, y, x }
    }

    #[test]
    fn residual_blocks_reproduce_reduced_residual() {
        let Setup { a, y, mut x } = setup(21);
        let mut state = build_environments(&a, &y, &x).unwrap();
        let tail = residual_tail(&a, &y, &x);
        assert_eq!(tail[2].left_rank(), y.core(2).left_rank() + a.core(2).left_rank() * x.core(2).left_rank());
        for k in 0..3 {
            let op = LocalOperator::new(&state.left_op[k], a.core(k), &state.right_op[k]);
            let w = op.left_and_core(x.core(k));
            let first = residual_first_block(&state.left_rhs[k], y.core(k), &w);
            // contract the tail densely
            let mut m = first.clone();
            for p in k + 1..4 {
                let c = &tail[p];
                let prod = m * c.right_unfolding();
                m = DMatrix::from_column_slice(prod.nrows() * c.mode_size(), c.right_rank(), prod.as_slice());
            }
            let rows = first.nrows();
            let got = DMatrix::from_column_slice(rows, m.len() / rows, m.as_slice());
            let expect = dense_reduced_residual(&a, &y, &x, k);
            assert!((&got - &expect).norm() <= 1e-11 * expect.norm());
            x.left_orthogonalize(k + 1);
            state.advance(&a, &y, &x, k);
        }
    }

    #[test]
    fn svd_and_chol_span_exact_low_rank_residual() {
        let Setup { a, y, x } = setup(22);
        let state = build_environments(&a, &y, &x).unwrap();
        let tail = residual_tail(&a, &y, &x);
        let op = LocalOperator::new(&state.left_op[0], a.core(0), &state.right_op[0]);
        let w = op.left_and_core(x.core(0));
        let first = residual_first_block(&state.left_rhs[0], y.core(0), &w);
        let dense = dense_reduced_residual(&a, &y, &x, 0);
        // first unfolding has 2 rows, so rank 2 is exact
        let chain = svd_chain(&tail);
        let e = enrich_svd(&first, &chain[1], 2, 0.0);
        let s = dense.clone().svd(true, false);
        let u2 = s.u.unwrap().columns(0, 2).into_owned();
        assert!(principal_sines(&e.z, &u2) < 1e-8);
        let gram = gram_chain(&tail);
        let c = enrich_chol(&first, &gram[1], 2);
        assert!(principal_sines(&c.z, &e.z) < 1e-6);
        assert!((e.residual_norm.unwrap() - dense.norm()).abs() < 1e-10 * dense.norm());
    }

    #[test]
    fn zero_residual_gives_empty_enrichment() {
        let first = DMatrix::zeros(6, 3);
        let e = enrich_svd(&first, &DMatrix::identity(3, 3), 4, 0.0);
        assert_eq!(e.width(), 0);
        let c = enrich_chol(&first, &DMatrix::identity(3, 3), 4);
        assert_eq!(c.width(), 0);
    }

    #[test]
    fn chol_on_identity_and_rank_one() {
        let l = pivoted_cholesky(&DMatrix::identity(5, 5), 3);
        assert_eq!(l.ncols(), 3);
        assert!((l.transpose() * &l - DMatrix::<f64>::identity(3, 3)).norm() < 1e-14);
        let v = DVector::from_vec(vec![1.0, 2.0, 0.5, -1.0]);
        let g = &v * v.transpose();
        let l = pivoted_cholesky(&g, 3);
        assert_eq!(l.ncols(), 1);
        // tie on the diagonal picks the lowest index
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 2.0]));
        let l = pivoted_cholesky(&g, 1);
        assert!(l[(1, 0)] > 0.0 && l[(2, 0)] == 0.0);
    }

    #[test]
    fn rank_one_svd_enrichment_is_normalized_factor() {
        let u = DVector::from_vec(vec![3.0, 4.0, 0.0]);
        let v = DVector::from_vec(vec![1.0, -1.0]);
        let first = &u * v.transpose();
        let e = enrich_svd(&first, &DMatrix::identity(2, 2), 1, 0.0);
        let expect = u / 5.0;
        assert!((e.z.column(0).abs() - expect.abs()).norm() < 1e-14);
    }

    #[test]
    fn expansion_preserves_vector_and_orthogonality() {
        let Setup { x, .. } = setup(23);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut y = x.clone();
        let before = y.to_dense().unwrap();
        let z = DMatrix::from_fn(2, 3, |_, _| rng.random_range(-1.0..1.0));
        // core 0 has only 2 rows, so width is capped by the row count
        let r = expand_and_orthogonalize(&mut y, 0, &z, None);
        assert_eq!(r, 2);
        y.left_orthogonalize(1);
        let zz = DMatrix::from_fn(y.core(1).left_rank() * 3, 2, |_, _| rng.random_range(-1.0..1.0));
        let r1 = y.ranks()[2];
        let r = expand_and_orthogonalize(&mut y, 1, &zz, None);
        assert_eq!(r, r1 + 2);
        assert!(y.core(1).left_orthogonality_defect() < 1e-13);
        let after = y.to_dense().unwrap();
        let err: f64 = before.iter().zip(&after).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let nrm: f64 = before.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err <= 1e-12 * nrm);
        for _ in 0..10 {
            let mi: Vec<usize> = [2, 3, 2, 2].iter().map(|&n| rng.random_range(0..n)).collect();
            let f = crate::tt::flat_index(&crate::tt::MultiIndex::new(mi.clone()), &[2, 3, 2, 2]).unwrap();
            assert!((y.eval_entry(&mi).unwrap() - before[f]).abs() <= 1e-12 * nrm);
        }
    }

    #[test]
    fn als_projection_is_lossless_when_basis_contains_residual() {
        let Setup { a, y, x } = setup(24);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let state = build_environments(&a, &y, &x).unwrap();
        let op = LocalOperator::new(&state.left_op[0], a.core(0), &state.right_op[0]);
        let w = op.left_and_core(x.core(0));
        let first = residual_first_block(&state.left_rhs[0], y.core(0), &w);
        // z̃ = exact residual (full rank), right-orthogonalized
        let mut exact = tt_add(&y, &tt_matvec(&a, &x).unwrap(), 1.0, -1.0).unwrap();
        exact.right_orthogonalize(0);
        let mut als = AlsResidual::new(&x.mode_sizes(), 4, &mut rng).unwrap();
        als.z = exact;
        als.prepare(&a, &y, &x);
        let e = als.project(0, &state.left_rhs[0], y.core(0), &w);
        let dense = dense_reduced_residual(&a, &y, &x, 0);
        // projected block carries the whole residual norm
        assert!((e.z.norm() - dense.norm()).abs() <= 1e-10 * dense.norm());
        let chain = svd_chain(&residual_tail(&a, &y, &x));
        let s = enrich_svd(&first, &chain[1], 2, 0.0);
        assert!(principal_sines(&e.z, &s.z) < 1e-8);
    }

    #[test]
    fn als_update_does_not_increase_approximation_error() {
        let Setup { a, y, x } = setup(25);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut als = AlsResidual::new(&x.mode_sizes(), 2, &mut rng).unwrap();
        als.prepare(&a, &y, &x);
        let exact = tt_add(&y, &tt_matvec(&a, &x).unwrap(), 1.0, -1.0).unwrap();
        let ed = DVector::from_vec(exact.to_dense().unwrap());
        let err = |z: &TtVector| (DVector::from_vec(z.to_dense().unwrap()) - &ed).norm();
        let mut x = x;
        let mut state = build_environments(&a, &y, &x).unwrap();
        let mut prev = err(&als.z);
        for k in 0..4 {
            als.update(k, &a, &y, &x.core(k).clone(), &mut rng);
            let now = err(&als.z);
            assert!(now <= prev * (1.0 + 1e-10), "core {k}: {now} > {prev}");
            prev = now;
            if k < 3 {
                x.left_orthogonalize(k + 1);
                state.advance(&a, &y, &x, k);
                als.advance(k, &a, &y, &x);
            }
        }
    }
}
