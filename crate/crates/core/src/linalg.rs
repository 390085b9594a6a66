//! Small dense kernels shared by the tensor-train code: thin QR/LQ,
//! truncated SVD, direct and Krylov solves.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

/// Thin QR factorization `m = q r`, `q` with `min(rows, cols)` orthonormal columns.
pub fn qr_thin(m: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.qr();
    (qr.q(), qr.r())
}

/// Thin LQ factorization `m = l q`, `q` with orthonormal rows.
pub fn lq_thin(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (q, r) = qr_thin(m.transpose());
    (r.transpose(), q.transpose())
}

/// Singular value decomposition truncated to the smallest rank whose
/// discarded tail has Frobenius norm at most `abs_tol`.
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub vt: DMatrix<f64>,
    /// Frobenius norm of the discarded singular values.
    pub discarded: f64,
}

/// Number of leading singular values to keep so that the tail norm stays
/// within `abs_tol`. Always at least one, at most `max_rank`.
pub fn truncation_rank(s: &[f64], abs_tol: f64, max_rank: Option<usize>) -> usize {
    let mut tail = 0.0;
    let mut r = s.len();
    while r > 1 {
        let next = tail + s[r - 1] * s[r - 1];
        if next.sqrt() > abs_tol {
            break;
        }
        tail = next;
        r -= 1;
    }
    if let Some(cap) = max_rank {
        r = r.min(cap.max(1));
    }
    r.max(1).min(s.len().max(1))
}

pub fn svd_truncated(m: DMatrix<f64>, abs_tol: f64, max_rank: Option<usize>) -> TruncatedSvd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return TruncatedSvd { u: DMatrix::zeros(rows, 0), s: Vec::new(), vt: DMatrix::zeros(0, cols), discarded: 0.0 };
    }
    let svd = m.svd(true, true);
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let r = truncation_rank(&s, abs_tol, max_rank);
    let discarded = s[r..].iter().map(|v| v * v).sum::<f64>().sqrt();
    let u = svd.u.expect("u requested").columns(0, r).into_owned();
    let vt = svd.v_t.expect("v_t requested").rows(0, r).into_owned();
    TruncatedSvd { u, s: s[..r].to_vec(), vt, discarded }
}

/// Orthonormal basis of the column span of `m` (thin QR, rank not revealed).
pub fn orthonormalize_columns(m: DMatrix<f64>) -> DMatrix<f64> {
    qr_thin(m).0
}

/// Outcome of a dense direct solve.
pub struct DirectSolve {
    pub x: DVector<f64>,
    /// True when LU failed and the minimum-norm least-squares solution was returned.
    pub fallback: bool,
}

/// Solves `b x = rhs` by LU with partial pivoting, falling back to an SVD
/// least-squares solution when the factorization is singular or the result
/// is not finite.
pub fn solve_dense(b: &DMatrix<f64>, rhs: &DVector<f64>) -> DirectSolve {
    let n = b.nrows();
    if n == 0 {
        return DirectSolve { x: DVector::zeros(0), fallback: false };
    }
    if let Some(x) = lu_solve(b, rhs) {
        return DirectSolve { x, fallback: false };
    }
    let svd = b.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-14;
    let x = svd.solve(rhs, eps).unwrap_or_else(|_| DVector::zeros(n));
    DirectSolve { x, fallback: true }
}

// pivots below 1e-15·max are treated as singular
fn pivots_ok(diag: impl Iterator<Item = f64> + Clone) -> bool {
    let dmax = diag.clone().map(f64::abs).fold(0.0, f64::max);
    let dmin = diag.map(f64::abs).fold(f64::INFINITY, f64::min);
    dmax > 0.0 && dmin > dmax * 1e-15
}

#[cfg(feature = "std")]
fn lu_solve(b: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    use faer::linalg::solvers::Solve;
    let n = b.nrows();
    let m = faer::MatRef::from_column_major_slice(b.as_slice(), n, n);
    let lu = m.partial_piv_lu();
    let u = lu.U();
    if !pivots_ok((0..n).map(|i| u[(i, i)])) {
        return None;
    }
    let x = lu.solve(faer::MatRef::from_column_major_slice(rhs.as_slice(), n, 1));
    let x = DVector::from_fn(n, |i, _| x[(i, 0)]);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(not(feature = "std"))]
fn lu_solve(b: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let n = b.nrows();
    let lu = b.clone().lu();
    let u = lu.u();
    if !pivots_ok((0..n).map(|i| u[(i, i)])) {
        return None;
    }
    lu.solve(rhs).filter(|x| x.iter().all(|v| v.is_finite()))
}

/// Result of a GMRES run.
pub struct KrylovSolve {
    pub x: DVector<f64>,
    /// Final residual norm relative to `‖rhs‖`.
    pub rel_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Restarted GMRES for `op(x) = rhs`, stopping once `‖rhs − op(x)‖ ≤ rtol‖rhs‖`.
pub fn gmres<F>(mut op: F, rhs: &DVector<f64>, x0: DVector<f64>, rtol: f64, max_iter: usize, restart: usize) -> KrylovSolve
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let n = rhs.len();
    let bnorm = rhs.norm();
    if bnorm == 0.0 {
        return KrylovSolve { x: DVector::zeros(n), rel_residual: 0.0, iterations: 0, converged: true };
    }
    let restart = restart.max(1).min(n.max(1));
    let mut x = x0;
    let mut iterations = 0;
    let mut r = rhs - op(&x);
    let mut beta = r.norm();
    while iterations < max_iter {
        if beta <= rtol * bnorm {
            break;
        }
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(restart + 1);
        basis.push(&r / beta);
        // Hessenberg columns after Givens rotations
        let mut h = DMatrix::<f64>::zeros(restart + 1, restart);
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut j = 0;
        while j < restart && iterations < max_iter {
            let mut w = op(&basis[j]);
            // modified Gram-Schmidt, two passes
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = v.dot(&w);
                    h[(i, j)] += hij;
                    w.axpy(-hij, v, 1.0);
                }
            }
            let hn = w.norm();
            h[(j + 1, j)] = hn;
            for i in 0..j {
                let t = cs[i] * h[(i, j)] + sn[i] * h[(i + 1, j)];
                h[(i + 1, j)] = -sn[i] * h[(i, j)] + cs[i] * h[(i + 1, j)];
                h[(i, j)] = t;
            }
            let (a, b) = (h[(j, j)], h[(j + 1, j)]);
            let den = (a * a + b * b).sqrt();
            if den == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = a / den;
                sn[j] = b / den;
            }
            h[(j, j)] = den;
            h[(j + 1, j)] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            iterations += 1;
            j += 1;
            if g[j].abs() <= rtol * bnorm || hn <= 1e-300 {
                break;
            }
            basis.push(w / hn);
        }
        // back substitution on the j×j triangle
        let mut y = vec![0.0; j];
        for i in (0..j).rev() {
            let mut s = g[i];
            for l in i + 1..j {
                s -= h[(i, l)] * y[l];
            }
            y[i] = if h[(i, i)] != 0.0 { s / h[(i, i)] } else { 0.0 };
        }
        for (i, yi) in y.iter().enumerate() {
            x.axpy(*yi, &basis[i], 1.0);
        }
        r = rhs - op(&x);
        let new_beta = r.norm();
        if new_beta >= beta * (1.0 - 1e-12) && j < restart {
            // breakdown without progress
            beta = new_beta;
            break;
        }
        beta = new_beta;
    }
    let rel = beta / bnorm;
    KrylovSolve { x, rel_residual: rel, iterations, converged: rel <= rtol }
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn truncation_rank_respects_budget() {
        let s = [4.0, 2.0, 1.0, 0.5];
        assert_eq!(truncation_rank(&s, 0.0, None), 4);
        assert_eq!(truncation_rank(&s, 0.5, None), 3);
        assert_eq!(truncation_rank(&s, 1.2, None), 2);
        assert_eq!(truncation_rank(&s, 100.0, None), 1);
        assert_eq!(truncation_rank(&s, 0.0, Some(2)), 2);
    }

    #[test]
    fn qr_of_zero_matrix_is_orthonormal() {
        let (q, r) = qr_thin(DMatrix::zeros(6, 3));
        let qtq = q.transpose() * &q;
        assert!((qtq - DMatrix::identity(3, 3)).norm() < 1e-14);
        assert!(r.norm() == 0.0);
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let a = DMatrix::identity(n, n) * 3.0 + random(n, n, &mut rng) * 0.2;
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let sol = gmres(|v| &a * v, &b, DVector::zeros(n), 1e-12, 500, 15);
        assert!(sol.converged);
        assert!((&a * &sol.x - &b).norm() <= 1e-11 * b.norm());
    }

    #[test]
    fn singular_system_falls_back_to_least_squares() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let s = solve_dense(&a, &b);
        assert!(s.fallback);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }
}
