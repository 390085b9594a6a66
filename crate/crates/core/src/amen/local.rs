use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use super::config::{LocalSolver, SolverConfig};
use super::env::LocalOperator;
use crate::linalg::{gmres, solve_dense};
use crate::tt::Core3;

/// Outcome of one local solve.
#[derive(Clone, Debug)]
pub struct LocalSolution {
    pub core: Core3,
    /// `‖b − B u‖ / ‖b‖` after the solve (absolute when `b = 0`).
    pub residual: f64,
    /// Least-squares fallback was used.
    pub fallback: bool,
    /// Krylov iterations (0 for direct solves).
    pub iterations: usize,
}

pub(crate) fn rel(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Relative local residual of `u`.
pub fn local_residual(op: &LocalOperator<'_>, rhs: &Core3, u: &Core3) -> f64 {
    let bu = op.apply(u);
    let diff: f64 = rhs.data().iter().zip(bu.data()).map(|(b, v)| (b - v) * (b - v)).sum::<f64>().sqrt();
    rel(diff, rhs.frobenius_norm())
}

/// Dense solve of an assembled local system.
pub fn solve_local_dense(b: &DMatrix<f64>, rhs: &DVector<f64>) -> (DVector<f64>, bool) {
    let s = solve_dense(b, rhs);
    (s.x, s.fallback)
}

/// Solves `B_k u = b_k`, directly when the system is small enough and
/// with GMRES (warm-started from `guess`) otherwise.
pub fn solve_local(op: &LocalOperator<'_>, rhs: &Core3, guess: &Core3, cfg: &SolverConfig) -> LocalSolution {
    let (l, n, r) = op.core_shape();
    let size = l * n * r;
    let bnorm = rhs.frobenius_norm();
    if bnorm == 0.0 {
        return LocalSolution { core: Core3::zeros(l, n, r), residual: 0.0, fallback: false, iterations: 0 };
    }
    let direct = match cfg.local_solver {
        LocalSolver::Auto { dense_limit } => size <= dense_limit,
        LocalSolver::Direct => true,
        LocalSolver::Iterative { .. } => false,
    };
    let rhs_v = DVector::from_column_slice(rhs.data());
    if direct {
        let b = op.assemble();
        let (x, fallback) = solve_local_dense(&b, &rhs_v);
        let core = Core3::from_vec(l, n, r, x.as_slice().to_vec()).expect("local size");
        let residual = rel((&rhs_v - &b * &x).norm(), bnorm);
        return LocalSolution { core, residual, fallback, iterations: 0 };
    }
    let (max_iter, rtol, restart) = match cfg.local_solver {
        LocalSolver::Iterative { max_iter, rtol, restart } => (max_iter, rtol.unwrap_or(cfg.tol / 10.0), restart),
        _ => (cfg.gmres_max_iter, cfg.tol / 10.0, cfg.gmres_restart),
    };
    let x0 = DVector::from_column_slice(guess.data());
    let sol = gmres(|v| op.apply_vec(v), &rhs_v, x0, rtol, max_iter, restart);
    let core = Core3::from_vec(l, n, r, sol.x.as_slice().to_vec()).expect("local size");
    LocalSolution { core, residual: sol.rel_residual, fallback: false, iterations: sol.iterations }
}

/// A local solution split as `u = Q · W` with orthonormal `Q`.
pub struct SplitSolution {
    /// `(left·n) × r` with orthonormal columns.
    pub q: DMatrix<f64>,
    /// `r × right_rank` factor to be pushed into the next core.
    pub w: DMatrix<f64>,
    /// Local residual of the truncated product.
    pub residual: f64,
}

/// Truncates the local solution by SVD. The rank starts at the Frobenius
/// rank for `eps·‖u‖` and grows until the local residual of the truncated
/// core is at most `max(eps, 2·solved)`.
pub fn truncate_local(
    op: &LocalOperator<'_>,
    rhs: &Core3,
    sol: &LocalSolution,
    eps: f64,
    max_rank: Option<usize>,
    residual_check: bool,
) -> SplitSolution {
    let u = sol.core.left_unfolding();
    let n = sol.core.mode_size();
    let svd = u.clone().svd(true, true);
    let s: alloc::vec::Vec<f64> = svd.singular_values.iter().copied().collect();
    let uu = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let full = s.len().max(1);
    let cap = max_rank.unwrap_or(usize::MAX).max(1).min(full);
    let unorm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut r = crate::linalg::truncation_rank(&s, eps * unorm, None).min(cap);
    let build = |r: usize| {
        let q = uu.columns(0, r).into_owned();
        let mut w = vt.rows(0, r).into_owned();
        for j in 0..r {
            w.row_mut(j).scale_mut(s[j]);
        }
        (q, w)
    };
    let target = eps.max(2.0 * sol.residual);
    loop {
        let (q, w) = build(r);
        if !residual_check {
            let residual = if r < full { local_residual(op, rhs, &Core3::from_left_unfolding(&(&q * &w), n)) } else { sol.residual };
            return SplitSolution { q, w, residual };
        }
        let res = local_residual(op, rhs, &Core3::from_left_unfolding(&(&q * &w), n));
        if res <= target || r >= cap {
            return SplitSolution { q, w, residual: res };
        }
        r += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amen::env::OpEnv;
    use crate::tt::Core4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_system_returns_rhs() {
        let core = Core4::from_blocks(&[alloc::vec![Some(DMatrix::identity(5, 5))]], 5, 5);
        let (phi, psi) = (OpEnv::unit(), OpEnv::unit());
        let op = LocalOperator::new(&phi, &core, &psi);
        let rhs = Core3::from_vec(1, 5, 1, alloc::vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let sol = solve_local(&op, &rhs, &Core3::zeros(1, 5, 1), &SolverConfig::default());
        assert_eq!(sol.core, rhs);
        assert!(!sol.fallback);
    }

    #[test]
    fn random_spd_direct_solve_is_accurate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = DMatrix::from_fn(50, 50, |_, _| rng.random_range(-1.0..1.0));
        let a = &g * g.transpose() + DMatrix::identity(50, 50);
        let b = DVector::from_fn(50, |_, _| rng.random_range(-1.0..1.0));
        let (x, fallback) = solve_local_dense(&a, &b);
        assert!(!fallback);
        assert!((&a * x - &b).norm() <= 1e-12 * b.norm());
    }

    #[test]
    fn iterative_path_reaches_requested_tolerance() {
        let n = 30;
        let lap = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 3.0,
            1 => -1.0,
            _ => 0.0,
        });
        let core = Core4::from_blocks(&[alloc::vec![Some(lap)]], n, n);
        let (phi, psi) = (OpEnv::unit(), OpEnv::unit());
        let op = LocalOperator::new(&phi, &core, &psi);
        let rhs = Core3::from_fn(1, n, 1, |_, i, _| 1.0 + i as f64);
        let cfg = SolverConfig { local_solver: LocalSolver::Iterative { max_iter: 200, rtol: Some(1e-10), restart: 30 }, ..SolverConfig::default() };
        let sol = solve_local(&op, &rhs, &Core3::zeros(1, n, 1), &cfg);
        assert!(sol.residual <= 1e-10);
        assert!(local_residual(&op, &rhs, &sol.core) <= 1e-9);
    }
}
