use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use super::{check_cap, checked_product, flat_index, Core3, MultiIndex};
use crate::linalg::{lq_thin, qr_thin, svd_truncated};
use crate::{Result, TtError};

/// Which cores of a [`TtVector`] are known to be orthogonal.
///
/// Cores `0..left` have left unfoldings with orthonormal columns, cores
/// `right..d` have right unfoldings with orthonormal rows. `left = 0,
/// right = d` means nothing is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrthoTag {
    pub left: usize,
    pub right: usize,
}

impl OrthoTag {
    pub fn none(d: usize) -> Self {
        OrthoTag { left: 0, right: d }
    }
    /// True if cores `0..p` are left-orthogonal.
    pub fn left_upto(&self, p: usize) -> bool {
        self.left >= p
    }
    /// True if cores `p..d` are right-orthogonal.
    pub fn right_from(&self, p: usize) -> bool {
        self.right <= p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

/// Side of an interface matrix split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Leading cores `X^{≤k}`.
    Leq,
    /// Trailing cores `X^{>k}`.
    Gt,
}

/// Vector of length `n_1⋯n_d` in tensor-train format.
#[derive(Clone, Debug, PartialEq)]
pub struct TtVector {
    cores: Vec<Core3>,
    ortho: OrthoTag,
}

impl TtVector {
    /// Builds a tensor train from cores, checking the rank chain.
    pub fn new(cores: Vec<Core3>) -> Result<Self> {
        validate_chain(cores.iter().map(|c| (c.left_rank(), c.right_rank())))?;
        let d = cores.len();
        Ok(TtVector { cores, ortho: OrthoTag::none(d) })
    }

    /// Random cores with entries uniform in `[-1, 1)`; `ranks` are the `d−1` interior ranks.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], ranks: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.is_empty() || ranks.len() + 1 != sizes.len() {
            return Err(TtError::InvalidRanks(format!(
                "{} modes need {} interior ranks, got {}",
                sizes.len(),
                sizes.len().saturating_sub(1),
                ranks.len()
            )));
        }
        let full = full_ranks(ranks);
        let cores = sizes.iter().enumerate().map(|(k, &n)| Core3::random(full[k], n, full[k + 1], rng)).collect();
        TtVector::new(cores)
    }

    /// Rank-one tensor `v_1 ⊗ ⋯ ⊗ v_d`.
    pub fn rank_one(factors: &[Vec<f64>]) -> Result<Self> {
        if factors.is_empty() {
            return Err(TtError::InvalidArgument("rank-one tensor needs at least one factor".into()));
        }
        let cores = factors.iter().map(|v| Core3::from_vec(1, v.len(), 1, v.clone())).collect::<Result<Vec<_>>>()?;
        TtVector::new(cores)
    }

    pub fn ones(sizes: &[usize]) -> Result<Self> {
        let f: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![1.0; n]).collect();
        TtVector::rank_one(&f)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        let f: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
        TtVector::rank_one(&f)
    }

    pub fn dim(&self) -> usize {
        self.cores.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(Core3::mode_size).collect()
    }

    /// `r_0, …, r_d` with `r_0 = r_d = 1`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = Vec::with_capacity(self.cores.len() + 1);
        r.push(1);
        r.extend(self.cores.iter().map(Core3::right_rank));
        r
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// Number of stored parameters.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(|c| c.data().len()).sum()
    }

    pub fn ortho(&self) -> OrthoTag {
        self.ortho
    }

    pub fn core(&self, k: usize) -> &Core3 {
        &self.cores[k]
    }

    pub fn cores(&self) -> &[Core3] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<Core3> {
        self.cores
    }

    /// Replaces core `k` with one of identical shape; the orthogonality tag
    /// is narrowed accordingly.
    pub fn set_core(&mut self, k: usize, core: Core3) -> Result<()> {
        if k >= self.cores.len() {
            return Err(TtError::OutOfBounds { what: "core", index: k, bound: self.cores.len() });
        }
        if core.shape() != self.cores[k].shape() {
            return Err(TtError::SizeMismatch(format!("core {k} has shape {:?}, replacement {:?}", self.cores[k].shape(), core.shape())));
        }
        self.cores[k] = core;
        self.invalidate(k);
        Ok(())
    }

    pub(crate) fn cores_mut(&mut self) -> &mut Vec<Core3> {
        &mut self.cores
    }

    pub(crate) fn set_ortho(&mut self, tag: OrthoTag) {
        self.ortho = tag;
    }

    pub(crate) fn invalidate(&mut self, k: usize) {
        self.ortho.left = self.ortho.left.min(k);
        self.ortho.right = self.ortho.right.max(k + 1);
    }

    pub fn scaled(mut self, s: f64) -> Self {
        if let Some(c) = self.cores.last_mut() {
            c.scale(s);
        }
        let d = self.dim();
        self.invalidate(d - 1);
        self
    }

    pub fn total_size(&self) -> u128 {
        checked_product(self.cores.iter().map(Core3::mode_size))
    }

    /// Entry at a zero-based multi-index.
    pub fn eval_entry(&self, mi: &[usize]) -> Result<f64> {
        if mi.len() != self.dim() {
            return Err(TtError::SizeMismatch(format!("multi-index has {} components, tensor has {} modes", mi.len(), self.dim())));
        }
        let mut row = vec![1.0];
        for (core, &i) in self.cores.iter().zip(mi) {
            if i >= core.mode_size() {
                return Err(TtError::OutOfBounds { what: "mode", index: i, bound: core.mode_size() });
            }
            let mut next = vec![0.0; core.right_rank()];
            for (b, nb) in next.iter_mut().enumerate() {
                *nb = row.iter().enumerate().map(|(a, &ra)| ra * core.get(a, i, b)).sum();
            }
            row = next;
        }
        Ok(row[0])
    }

    pub fn eval(&self, mi: &MultiIndex) -> Result<f64> {
        let sizes = self.mode_sizes();
        flat_index(mi, &sizes)?;
        match mi.endian {
            super::Endian::Little => self.eval_entry(&mi.indices),
            super::Endian::Big => self.eval_entry(&mi.indices),
        }
    }

    /// Full vector in little-endian order, refusing more than `cap` entries.
    pub fn to_dense_capped(&self, cap: usize) -> Result<Vec<f64>> {
        check_cap(self.total_size(), cap)?;
        Ok(self.interface_unchecked(self.dim(), Side::Leq).as_slice().to_vec())
    }

    pub fn to_dense(&self) -> Result<Vec<f64>> {
        self.to_dense_capped(crate::DEFAULT_DENSE_CAP)
    }

    /// Interface matrix `X^{≤k}` (`n_1⋯n_k × r_k`) or `X^{>k}` (`r_k × n_{k+1}⋯n_d`)
    /// for `k` leading cores, `0 ≤ k ≤ d`.
    pub fn interface_matrix(&self, k: usize, side: Side, cap: usize) -> Result<DMatrix<f64>> {
        if k > self.dim() {
            return Err(TtError::OutOfBounds { what: "interface", index: k, bound: self.dim() + 1 });
        }
        let ranks = self.ranks();
        let sizes = match side {
            Side::Leq => checked_product(self.cores[..k].iter().map(Core3::mode_size)),
            Side::Gt => checked_product(self.cores[k..].iter().map(Core3::mode_size)),
        };
        check_cap(sizes.saturating_mul(ranks[k] as u128), cap)?;
        Ok(self.interface_unchecked(k, side))
    }

    fn interface_unchecked(&self, k: usize, side: Side) -> DMatrix<f64> {
        match side {
            Side::Leq => {
                let mut m = DMatrix::from_element(1, 1, 1.0);
                for core in &self.cores[..k] {
                    let prod = &m * core.right_unfolding();
                    let rows = m.nrows() * core.mode_size();
                    m = DMatrix::from_column_slice(rows, core.right_rank(), prod.as_slice());
                }
                m
            }
            Side::Gt => {
                let mut m = DMatrix::from_element(1, 1, 1.0);
                for core in self.cores[k..].iter().rev() {
                    let prod = core.left_unfolding() * &m;
                    let cols = core.mode_size() * m.ncols();
                    m = DMatrix::from_column_slice(core.left_rank(), cols, prod.as_slice());
                }
                m
            }
        }
    }

    /// Makes cores `0..pivot` left-orthogonal by successive QR; the
    /// non-orthogonal factor ends up in core `pivot`.
    pub fn left_orthogonalize(&mut self, pivot: usize) {
        let d = self.dim();
        let pivot = pivot.min(d - 1);
        for k in self.ortho.left.min(pivot)..pivot {
            let n = self.cores[k].mode_size();
            let (q, r) = qr_thin(self.cores[k].left_unfolding());
            self.cores[k] = Core3::from_left_unfolding(&q, n);
            self.cores[k + 1] = self.cores[k + 1].left_multiply(&r);
        }
        self.ortho.left = self.ortho.left.max(pivot);
        self.ortho.right = self.ortho.right.max(pivot + 1);
    }

    /// Makes cores `pivot+1..d` right-orthogonal by successive LQ; the
    /// non-orthogonal factor ends up in core `pivot`.
    pub fn right_orthogonalize(&mut self, pivot: usize) {
        let d = self.dim();
        let pivot = pivot.min(d - 1);
        let start = self.ortho.right.max(pivot + 1);
        for k in (pivot + 1..start).rev() {
            let n = self.cores[k].mode_size();
            let (l, q) = lq_thin(&self.cores[k].right_unfolding());
            self.cores[k] = Core3::from_right_unfolding(&q, n);
            self.cores[k - 1] = self.cores[k - 1].right_multiply(&l);
        }
        self.ortho.right = self.ortho.right.min(pivot + 1);
        self.ortho.left = self.ortho.left.min(pivot);
    }

    /// Value-returning form of the two orthogonalization sweeps.
    pub fn orthogonalize(&self, direction: Direction, pivot: usize) -> TtVector {
        let mut x = self.clone();
        match direction {
            Direction::Left => x.left_orthogonalize(pivot),
            Direction::Right => x.right_orthogonalize(pivot),
        }
        x
    }

    /// SVD rounding with relative Frobenius accuracy `tol` and an optional rank cap.
    ///
    /// The tolerance is split as `tol/√(d−1)` over the `d−1` truncations.
    /// The result is right-orthogonal from core 1 on.
    pub fn round(&self, tol: f64, max_rank: Option<usize>) -> TtVector {
        let d = self.dim();
        // largest pivot seen while orthogonalizing: a final norm far below
        // it means the represented vector cancelled out
        let mut x = self.clone();
        let mut scale = x.cores[0].frobenius_norm();
        for k in 0..d - 1 {
            let n = x.cores[k].mode_size();
            let (q, r) = qr_thin(x.cores[k].left_unfolding());
            x.cores[k] = Core3::from_left_unfolding(&q, n);
            x.cores[k + 1] = x.cores[k + 1].left_multiply(&r);
            scale = scale.max(x.cores[k + 1].frobenius_norm());
        }
        let norm = x.cores[d - 1].frobenius_norm();
        if d == 1 {
            x.ortho = OrthoTag { left: 0, right: 1 };
            return x;
        }
        if norm <= 1e-14 * scale || norm == 0.0 {
            // exact cancellation: the zero vector in rank-one form
            let sizes = self.mode_sizes();
            let mut z = TtVector::zeros(&sizes).expect("valid sizes");
            z.ortho = OrthoTag { left: 0, right: d };
            return z;
        }
        let budget = tol.max(0.0) * norm / ((d - 1) as f64).sqrt();
        for k in (1..d).rev() {
            let n = x.cores[k].mode_size();
            let t = svd_truncated(x.cores[k].right_unfolding(), budget, max_rank);
            x.cores[k] = Core3::from_right_unfolding(&t.vt, n);
            let mut us = t.u;
            for (j, s) in t.s.iter().enumerate() {
                us.column_mut(j).scale_mut(*s);
            }
            x.cores[k - 1] = x.cores[k - 1].right_multiply(&us);
        }
        x.ortho = OrthoTag { left: 0, right: 1 };
        x
    }

    /// Checks the stored orthogonality tag against the cores, returning the
    /// largest defect found.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.ortho.left.min(self.dim()) {
            worst = worst.max(self.cores[k].left_orthogonality_defect());
        }
        for k in self.ortho.right..self.dim() {
            worst = worst.max(self.cores[k].right_orthogonality_defect());
        }
        worst
    }
}

pub(crate) fn full_ranks(interior: &[usize]) -> Vec<usize> {
    let mut r = Vec::with_capacity(interior.len() + 2);
    r.push(1);
    r.extend_from_slice(interior);
    r.push(1);
    r
}

pub(crate) fn validate_chain(shapes: impl Iterator<Item = (usize, usize)>) -> Result<()> {
    let mut prev_right = 1;
    let mut count = 0;
    for (k, (l, r)) in shapes.enumerate() {
        if l != prev_right {
            return Err(TtError::InvalidRanks(format!("core {k} has left rank {l} but core {} has right rank {prev_right}", k.wrapping_sub(1))));
        }
        if l == 0 || r == 0 {
            return Err(TtError::InvalidRanks(format!("core {k} has a zero rank")));
        }
        prev_right = r;
        count += 1;
    }
    if count == 0 {
        return Err(TtError::InvalidRanks("a tensor train needs at least one core".into()));
    }
    if prev_right != 1 {
        return Err(TtError::InvalidRanks(format!("last rank is {prev_right}, expected 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::{multi_index, Endian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den.max(1e-300)).sqrt()
    }

    /// Brute-force contraction over all rank indices.
    fn brute_entry(x: &TtVector, mi: &[usize]) -> f64 {
        let r = x.ranks();
        let d = x.dim();
        let mut total = 0.0;
        let combos: usize = r[1..d].iter().product();
        for mut c in 0..combos {
            let mut alpha = vec![0usize; d + 1];
            for k in 1..d {
                alpha[k] = c % r[k];
                c /= r[k];
            }
            let mut p = 1.0;
            for k in 0..d {
                p *= x.core(k).get(alpha[k], mi[k], alpha[k + 1]);
            }
            total += p;
        }
        total
    }

    #[test]
    fn single_core_entry_is_the_core_element() {
        let x = TtVector::rank_one(&[vec![3.0, -1.0, 2.5]]).unwrap();
        assert_eq!(x.eval_entry(&[2]).unwrap(), 2.5);
        assert_eq!(x.to_dense().unwrap(), vec![3.0, -1.0, 2.5]);
    }

    #[test]
    fn all_ones_tensor() {
        let x = TtVector::ones(&[2, 3, 2]).unwrap();
        for f in 0..12 {
            let mi = multi_index(f, &[2, 3, 2], Endian::Little).unwrap();
            assert_eq!(x.eval_entry(&mi.indices).unwrap(), 1.0);
        }
    }

    #[test]
    fn entries_match_brute_force_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = TtVector::random(&[2, 2, 2], &[2, 2], &mut rng).unwrap();
        let dense = x.to_dense().unwrap();
        for (f, &v) in dense.iter().enumerate() {
            let mi = multi_index(f, &[2, 2, 2], Endian::Little).unwrap();
            let b = brute_entry(&x, &mi.indices);
            assert!((x.eval_entry(&mi.indices).unwrap() - b).abs() < 1e-14);
            assert!((v - b).abs() < 1e-14);
        }
    }

    #[test]
    fn two_mode_rank_one_is_outer_product() {
        let x = TtVector::rank_one(&[vec![1.0, 2.0], vec![3.0, 5.0, 7.0]]).unwrap();
        let d = x.to_dense().unwrap();
        assert_eq!(d, vec![3.0, 6.0, 5.0, 10.0, 7.0, 14.0]);
    }

    #[test]
    fn dense_cap_is_enforced() {
        let x = TtVector::ones(&[16, 16, 16]).unwrap();
        assert!(matches!(x.to_dense_capped(100), Err(TtError::DenseCapExceeded { .. })));
    }

    #[test]
    fn interface_product_is_the_unfolding() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = TtVector::random(&[2, 3, 2], &[2, 3], &mut rng).unwrap();
        let dense = x.to_dense().unwrap();
        let l = x.interface_matrix(2, Side::Leq, 1 << 20).unwrap();
        let g = x.interface_matrix(2, Side::Gt, 1 << 20).unwrap();
        assert_eq!(l.shape(), (6, 3));
        assert_eq!(g.shape(), (3, 2));
        let unf = DMatrix::from_column_slice(6, 2, &dense);
        assert!((l * g - unf).norm() < 1e-13);
        let full = x.interface_matrix(3, Side::Leq, 1 << 20).unwrap();
        assert_eq!(full.as_slice(), dense.as_slice());
    }

    #[test]
    fn left_orthogonal_interface_has_orthonormal_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = TtVector::random(&[3, 3, 3, 2], &[2, 3, 2], &mut rng).unwrap();
        let y = x.orthogonalize(Direction::Left, 3);
        let l = y.interface_matrix(3, Side::Leq, 1 << 20).unwrap();
        let g = l.transpose() * &l;
        assert!((g - DMatrix::identity(l.ncols(), l.ncols())).amax() < 1e-12);
    }

    #[test]
    fn orthogonalization_preserves_the_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = TtVector::random(&[3, 2, 4], &[3, 2], &mut rng).unwrap();
        let before = x.to_dense().unwrap();
        for dir in [Direction::Left, Direction::Right] {
            for p in 0..3 {
                let y = x.orthogonalize(dir, p);
                assert!(rel_diff(&y.to_dense().unwrap(), &before) < 1e-12);
                assert!(y.orthogonality_defect() < 1e-12);
            }
        }
    }

    #[test]
    fn norm_telescopes_into_last_core() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = TtVector::random(&[2, 3, 2, 3], &[2, 3, 2], &mut rng).unwrap();
        let dense = x.to_dense().unwrap();
        let norm = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y = x.orthogonalize(Direction::Left, 3);
        assert!((y.core(3).frobenius_norm() - norm).abs() < 1e-12 * norm);
    }

    #[test]
    fn reorthogonalizing_keeps_vector_and_tag() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = TtVector::random(&[2, 2, 2], &[2, 2], &mut rng).unwrap().orthogonalize(Direction::Left, 2);
        let y = x.orthogonalize(Direction::Left, 2);
        assert_eq!(x, y);
        assert!(y.ortho().left_upto(2));
    }

    #[test]
    fn zero_core_orthogonalizes_cleanly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut x = TtVector::random(&[2, 3, 2], &[2, 2], &mut rng).unwrap();
        x.set_core(0, Core3::zeros(1, 2, 2)).unwrap();
        let y = x.orthogonalize(Direction::Left, 2);
        assert!(y.core(0).left_orthogonality_defect() < 1e-14);
        assert!(y.to_dense().unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn round_with_zero_tolerance_keeps_the_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = TtVector::random(&[3, 3, 3], &[2, 3], &mut rng).unwrap();
        let y = x.round(0.0, None);
        for (a, b) in y.ranks().iter().zip(x.ranks()) {
            assert!(*a <= b);
        }
        assert!(rel_diff(&y.to_dense().unwrap(), &x.to_dense().unwrap()) < 1e-13);
        assert!(y.ortho().right_from(1));
        assert!(y.orthogonality_defect() < 1e-12);
    }

    #[test]
    fn round_respects_tolerance_and_rank_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = TtVector::random(&[4, 4, 4, 4], &[4, 4, 4], &mut rng).unwrap();
        let dense = x.to_dense().unwrap();
        let y = x.round(0.5, None);
        assert!(rel_diff(&y.to_dense().unwrap(), &dense) <= 0.5);
        let z = x.round(0.0, Some(2));
        assert!(z.max_rank() <= 2);
    }

    #[test]
    fn chain_validation() {
        assert!(TtVector::new(vec![Core3::zeros(1, 2, 2), Core3::zeros(3, 2, 1)]).is_err());
        assert!(TtVector::new(vec![Core3::zeros(1, 2, 2)]).is_err());
        assert!(TtVector::new(vec![]).is_err());
    }
}
