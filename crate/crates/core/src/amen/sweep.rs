use alloc::format;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{EnrichmentMethod, SolutionTruncation, SolverConfig};
use super::enrich::{
    enrich_chol, enrich_svd, expand_and_orthogonalize, gram_chain, residual_first_block, residual_tail, svd_chain, AlsResidual, Enrichment,
};
use super::env::{apply_left_and_core, build_environments, check_system, op_matrix, rhs_left_part, LocalOperator, OpEnv, SweepState};
use super::local::{local_residual, rel, solve_local, truncate_local, LocalSolution};
use super::{ConvergenceLog, CoreStats, Monitor, Status, SweepRecord};
use crate::linalg::svd_truncated;
use crate::tt::{tt_matvec, Core3, Core4, Direction, TtMatrix, TtVector};
use crate::{Result, TtError};

/// Residual norm `‖y − A x‖` of a right-orthogonal `x`, together with the
/// tail blocks and LQ chain it was computed from (reused by the next sweep).
fn residual_with_chain(a: &TtMatrix, y: &TtVector, x: &TtVector) -> (f64, Vec<Core3>, Vec<DMatrix<f64>>) {
    let tail = residual_tail(a, y, x);
    let chain = svd_chain(&tail);
    let a0 = a.core(0);
    let w = apply_left_and_core(&OpEnv::unit(), a0, &op_matrix(a0), x.core(0));
    let first = residual_first_block(&DMatrix::from_element(1, 1, 1.0), y.core(0), &w);
    let norm = if x.dim() == 1 {
        // no tail: the two blocks are summed directly
        (first.column(0) + first.column(1)).norm()
    } else {
        (first * &chain[1]).norm()
    };
    (norm, tail, chain)
}

/// `‖y − A x‖`, computed through an orthogonalized representation of the
/// residual so that it stays accurate far below `√ε·‖y‖`.
pub fn residual_norm(a: &TtMatrix, x: &TtVector, y: &TtVector) -> Result<f64> {
    check_system(a, y, x)?;
    let mut xr = x.clone();
    xr.right_orthogonalize(0);
    Ok(residual_with_chain(a, y, &xr).0)
}

fn stable_norm(y: &TtVector) -> f64 {
    let d = y.dim();
    y.orthogonalize(Direction::Left, d - 1).core(d - 1).frobenius_norm()
}

/// Per-sweep data of the enrichment and truncation policy.
pub struct SweepContext {
    pub method: Option<EnrichmentMethod>,
    pub truncation: SolutionTruncation,
    pub als: Option<AlsResidual>,
    tail: Vec<Core3>,
    chain: Vec<DMatrix<f64>>,
    gram: Vec<DMatrix<f64>>,
    rng: ChaCha8Rng,
}

impl SweepContext {
    pub fn new(method: Option<EnrichmentMethod>, truncation: SolutionTruncation, sizes: &[usize], cfg: &SolverConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_a15e);
        let als = match method {
            Some(EnrichmentMethod::Als) => Some(AlsResidual::new(sizes, cfg.enrichment.kickrank, &mut rng)?),
            _ => None,
        };
        Ok(SweepContext { method, truncation, als, tail: Vec::new(), chain: Vec::new(), gram: Vec::new(), rng })
    }

    /// Precomputes the residual tail data for a sweep starting from `x`
    /// (right-orthogonal from core 1). `cached` holds tail and chain of the
    /// same `x` when available.
    pub fn prepare(&mut self, a: &TtMatrix, y: &TtVector, x: &TtVector, cached: Option<(Vec<Core3>, Vec<DMatrix<f64>>)>) {
        match self.method {
            Some(EnrichmentMethod::Svd) => {
                let (tail, chain) = cached.unwrap_or_else(|| {
                    let t = residual_tail(a, y, x);
                    let c = svd_chain(&t);
                    (t, c)
                });
                self.tail = tail;
                self.chain = chain;
            }
            Some(EnrichmentMethod::Chol) => {
                self.tail = cached.map(|c| c.0).unwrap_or_else(|| residual_tail(a, y, x));
                self.gram = gram_chain(&self.tail);
            }
            Some(EnrichmentMethod::Als) => {
                if let Some(als) = self.als.as_mut() {
                    als.prepare(a, y, x);
                }
            }
            None => {}
        }
    }
}

fn split_solution(
    op: &LocalOperator<'_>,
    rhs: &Core3,
    sol: &LocalSolution,
    truncation: SolutionTruncation,
    eps: f64,
    max_rank: Option<usize>,
) -> (DMatrix<f64>, Option<DMatrix<f64>>, f64) {
    match truncation {
        SolutionTruncation::None => (sol.core.left_unfolding(), None, sol.residual),
        SolutionTruncation::Frobenius | SolutionTruncation::Residual => {
            let s = truncate_local(op, rhs, sol, eps, max_rank, truncation == SolutionTruncation::Residual);
            (s.q, Some(s.w), s.residual)
        }
    }
}

/// One left-to-right AMEn pass over all cores.
///
/// `x` must be right-orthogonal from core 1 and `state` built for it.
/// On return `x` is left-orthogonal up to the last core.
pub fn amen_sweep<M: Monitor + ?Sized>(
    x: &mut TtVector,
    a: &TtMatrix,
    y: &TtVector,
    state: &mut SweepState,
    ctx: &mut SweepContext,
    cfg: &SolverConfig,
    monitor: &mut M,
    warnings: &mut Vec<alloc::string::String>,
) -> Result<Vec<CoreStats>> {
    let d = x.dim();
    let eps = cfg.tol / (d as f64).sqrt();
    let mut stats = Vec::with_capacity(d);
    for k in 0..d {
        monitor.before_update(k, x);
        let rhs = state.local_rhs(y, k);
        let (pre, sol, split) = {
            let op = state.local_operator(a, k);
            let pre = local_residual(&op, &rhs, x.core(k));
            let sol = solve_local(&op, &rhs, x.core(k), cfg);
            let split = if k + 1 < d { Some(split_solution(&op, &rhs, &sol, ctx.truncation, eps, cfg.max_rank)) } else { None };
            (pre, sol, split)
        };
        if sol.fallback {
            warnings.push(format!("local solve at core {k} fell back to least squares"));
        }
        let n = x.core(k).mode_size();
        let mut stat = CoreStats {
            core: k,
            rank: 0,
            local_residual_before: pre,
            local_residual_after: sol.residual,
            mu: rel(sol.residual, pre),
            omega: None,
            enrichment_width: 0,
            fallback: sol.fallback,
            iterations: sol.iterations,
        };
        match split {
            None => {
                let u = sol.core.clone();
                x.cores_mut()[k] = u.clone();
                x.invalidate(k);
                monitor.after_update(k, x);
                if let Some(als) = ctx.als.as_mut() {
                    als.update(k, a, y, &u, &mut ctx.rng);
                }
                stat.rank = x.core(k).left_rank();
            }
            Some((q, w, post)) => {
                stat.local_residual_after = post;
                stat.mu = rel(post, pre);
                let u_mat = match &w {
                    Some(w) => &q * w,
                    None => q.clone(),
                };
                let u_core = Core3::from_left_unfolding(&u_mat, n);
                {
                    let cores = x.cores_mut();
                    cores[k] = Core3::from_left_unfolding(&q, n);
                    if let Some(w) = &w {
                        cores[k + 1] = cores[k + 1].left_multiply(w);
                    }
                }
                x.invalidate(k);
                monitor.after_update(k, x);
                let enrichment = if ctx.method.is_some() {
                    let op = state.local_operator(a, k);
                    let wmat = op.left_and_core(&u_core);
                    let e = match ctx.method {
                        Some(EnrichmentMethod::Svd) => {
                            let first = residual_first_block(&state.left_rhs[k], y.core(k), &wmat);
                            enrich_svd(&first, &ctx.chain[k + 1], cfg.enrichment.kickrank, cfg.enrichment.residual_tol)
                        }
                        Some(EnrichmentMethod::Chol) => {
                            let first = residual_first_block(&state.left_rhs[k], y.core(k), &wmat);
                            enrich_chol(&first, &ctx.gram[k + 1], cfg.enrichment.kickrank)
                        }
                        Some(EnrichmentMethod::Als) => {
                            let als = ctx.als.as_mut().expect("als state");
                            let e = als.project(k, &state.left_rhs[k], y.core(k), &wmat);
                            let before = als.reinitialized;
                            als.update(k, a, y, &u_core, &mut ctx.rng);
                            if als.reinitialized > before {
                                warnings.push(format!("notice: residual approximant core {k} vanished and was reinitialized"));
                            }
                            e
                        }
                        None => unreachable!(),
                    };
                    monitor.enrichment(k, &e.z);
                    e
                } else {
                    Enrichment { z: DMatrix::zeros(q.nrows(), 0), defect: None, residual_norm: None }
                };
                stat.omega = enrichment.defect;
                let r_before = x.core(k).right_rank();
                let r_new = expand_and_orthogonalize(x, k, &enrichment.z, cfg.max_rank);
                stat.enrichment_width = r_new.saturating_sub(r_before);
                stat.rank = r_new;
                state.advance(a, y, x, k);
                if let Some(als) = ctx.als.as_mut() {
                    als.advance(k, a, y, x);
                }
            }
        }
        stats.push(stat);
    }
    Ok(stats)
}

fn initial_guess(a: &TtMatrix, x0: Option<&TtVector>, seed: u64) -> Result<TtVector> {
    match x0 {
        Some(x) => Ok(x.clone()),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sizes = a.col_sizes();
            TtVector::random(&sizes, &alloc::vec![1; sizes.len() - 1], &mut rng)
        }
    }
}

/// Shared outer loop of AMEn and ALS.
fn run_one_site<M: Monitor + ?Sized>(
    a: &TtMatrix,
    y: &TtVector,
    x0: Option<&TtVector>,
    cfg: &SolverConfig,
    method: Option<EnrichmentMethod>,
    truncation: SolutionTruncation,
    monitor: &mut M,
) -> Result<(TtVector, ConvergenceLog)> {
    cfg.validate()?;
    let mut x = initial_guess(a, x0, cfg.seed)?;
    check_system(a, y, &x)?;
    let ynorm = stable_norm(y);
    let mut log = ConvergenceLog::new();
    let mut ctx = SweepContext::new(method, truncation, &x.mode_sizes(), cfg)?;
    x.right_orthogonalize(0);
    let mut cached = None;
    for sweep in 1..=cfg.max_sweeps {
        let mut state = build_environments(a, y, &x)?;
        ctx.prepare(a, y, &x, cached.take());
        let mut warnings = Vec::new();
        let cores = amen_sweep(&mut x, a, y, &mut state, &mut ctx, cfg, monitor, &mut warnings)?;
        if let Some(als) = ctx.als.as_mut() {
            als.finish_sweep();
        }
        for w in warnings {
            if w.starts_with("notice") {
                log.notices.push(format!("sweep {sweep}: {w}"));
            } else {
                log.warnings.push(format!("sweep {sweep}: {w}"));
            }
        }
        x.right_orthogonalize(0);
        let (res, tail, chain) = residual_with_chain(a, y, &x);
        cached = Some((tail, chain));
        let rel_residual = rel(res, ynorm);
        let max_local = cores.iter().map(|c| c.local_residual_before).fold(0.0, f64::max);
        let local_converged = max_local <= cfg.tol;
        let a_norm_error = monitor.error(&x);
        monitor.sweep_end(sweep, &x);
        log.records.push(SweepRecord {
            sweep,
            wall_time: monitor.elapsed(),
            rel_residual,
            a_norm_error,
            max_rank: x.max_rank(),
            local_converged,
            max_local_residual: max_local,
            cores,
        });
        if rel_residual <= cfg.tol {
            log.status = Status::Converged;
            break;
        }
        if local_converged && cfg.local_stop && method.is_some() {
            log.status = Status::LocalConverged;
            break;
        }
    }
    Ok((x, log))
}

/// Solves `A x = y` with AMEn. Starts from `x0` or a random rank-one
/// tensor; returns the last iterate even when not converged.
pub fn amen_solve<M: Monitor + ?Sized>(
    a: &TtMatrix,
    y: &TtVector,
    x0: Option<&TtVector>,
    cfg: &SolverConfig,
    monitor: &mut M,
) -> Result<(TtVector, ConvergenceLog)> {
    if cfg.symmetrize {
        let (ata, aty) = symmetrize(a, y, None, None)?;
        let inner = SolverConfig { symmetrize: false, ..*cfg };
        return run_one_site(&ata, &aty, x0, &inner, Some(cfg.enrichment.method), cfg.truncation, monitor);
    }
    run_one_site(a, y, x0, cfg, Some(cfg.enrichment.method), cfg.truncation, monitor)
}

/// Fixed-rank one-site alternating solver; ranks of `x0` never change.
pub fn als_solve<M: Monitor + ?Sized>(
    a: &TtMatrix,
    y: &TtVector,
    x0: Option<&TtVector>,
    cfg: &SolverConfig,
    monitor: &mut M,
) -> Result<(TtVector, ConvergenceLog)> {
    run_one_site(a, y, x0, cfg, None, SolutionTruncation::None, monitor)
}

fn merge_cores(x: &Core3, y: &Core3) -> Core3 {
    let m = x.left_unfolding() * y.right_unfolding();
    Core3::from_vec(x.left_rank(), x.mode_size() * y.mode_size(), y.right_rank(), m.as_slice().to_vec()).expect("merged shape")
}

fn merge_op_cores(a: &Core4, b: &Core4) -> Core4 {
    let (r0, n0, m0, r1) = a.shape();
    let (_, n1, m1, r2) = b.shape();
    let mut c = Core4::zeros(r0, n0 * n1, m0 * m1, r2);
    for b2 in 0..r2 {
        for j1 in 0..m1 {
            for i1 in 0..n1 {
                for b1 in 0..r1 {
                    let bv = b.get(b1, i1, j1, b2);
                    if bv == 0.0 {
                        continue;
                    }
                    for j0 in 0..m0 {
                        for i0 in 0..n0 {
                            for b0 in 0..r0 {
                                let av = a.get(b0, i0, j0, b1);
                                if av != 0.0 {
                                    let (i, j) = (i0 + n0 * i1, j0 + m0 * j1);
                                    let cur = c.get(b0, i, j, b2);
                                    c.set(b0, i, j, b2, cur + av * bv);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    c
}

/// Two-site alternating solver with SVD rank adaptation at `tol/√d`.
pub fn dmrg_solve<M: Monitor + ?Sized>(
    a: &TtMatrix,
    y: &TtVector,
    x0: Option<&TtVector>,
    cfg: &SolverConfig,
    monitor: &mut M,
) -> Result<(TtVector, ConvergenceLog)> {
    cfg.validate()?;
    let mut x = initial_guess(a, x0, cfg.seed)?;
    check_system(a, y, &x)?;
    let d = x.dim();
    let ynorm = stable_norm(y);
    let mut log = ConvergenceLog::new();
    let eps = if cfg.truncation == SolutionTruncation::None { 0.0 } else { cfg.tol / (d as f64).sqrt() };
    x.right_orthogonalize(0);
    for sweep in 1..=cfg.max_sweeps {
        let mut state = build_environments(a, y, &x)?;
        let mut cores = Vec::with_capacity(d);
        if d == 1 {
            monitor.before_update(0, &x);
            let rhs = state.local_rhs(y, 0);
            let op = state.local_operator(a, 0);
            let pre = local_residual(&op, &rhs, x.core(0));
            let sol = solve_local(&op, &rhs, x.core(0), cfg);
            x.cores_mut()[0] = sol.core.clone();
            x.invalidate(0);
            monitor.after_update(0, &x);
            cores.push(CoreStats {
                core: 0,
                rank: 1,
                local_residual_before: pre,
                local_residual_after: sol.residual,
                mu: rel(sol.residual, pre),
                omega: None,
                enrichment_width: 0,
                fallback: sol.fallback,
                iterations: sol.iterations,
            });
        }
        for k in 0..d.saturating_sub(1) {
            monitor.before_update(k, &x);
            let merged = merge_cores(x.core(k), x.core(k + 1));
            let mop = merge_op_cores(a.core(k), a.core(k + 1));
            let my = merge_cores(y.core(k), y.core(k + 1));
            let rhs_part = rhs_left_part(&state.left_rhs[k], &my) * state.right_rhs[k + 1].transpose();
            let rhs = Core3::from_left_unfolding(&rhs_part, my.mode_size());
            let op = LocalOperator::new(&state.left_op[k], &mop, &state.right_op[k + 1]);
            let pre = local_residual(&op, &rhs, &merged);
            let sol = solve_local(&op, &rhs, &merged, cfg);
            if sol.fallback {
                log.warnings.push(format!("sweep {sweep}: local solve at cores {k},{} fell back to least squares", k + 1));
            }
            let (n0, n1) = (x.core(k).mode_size(), x.core(k + 1).mode_size());
            let (r0, r2) = (merged.left_rank(), merged.right_rank());
            let mat = DMatrix::from_column_slice(r0 * n0, n1 * r2, sol.core.data());
            let t = svd_truncated(mat, eps * sol.core.frobenius_norm(), cfg.max_rank);
            let mut sv = t.vt;
            for (j, s) in t.s.iter().enumerate() {
                sv.row_mut(j).scale_mut(*s);
            }
            let prod = &t.u * &sv;
            let split = Core3::from_vec(r0, n0 * n1, r2, prod.as_slice().to_vec()).expect("merged shape");
            let post = local_residual(&op, &rhs, &split);
            {
                let c = x.cores_mut();
                c[k] = Core3::from_left_unfolding(&t.u, n0);
                c[k + 1] = Core3::from_right_unfolding(&sv, n1);
            }
            x.invalidate(k);
            x.invalidate(k + 1);
            monitor.after_update(k, &x);
            cores.push(CoreStats {
                core: k,
                rank: t.s.len(),
                local_residual_before: pre,
                local_residual_after: post,
                mu: rel(post, pre),
                omega: None,
                enrichment_width: 0,
                fallback: sol.fallback,
                iterations: sol.iterations,
            });
            state.advance(a, y, &x, k);
        }
        x.right_orthogonalize(0);
        let (res, _, _) = residual_with_chain(a, y, &x);
        let rel_residual = rel(res, ynorm);
        let max_local = cores.iter().map(|c| c.local_residual_before).fold(0.0, f64::max);
        let local_converged = max_local <= cfg.tol;
        let a_norm_error = monitor.error(&x);
        monitor.sweep_end(sweep, &x);
        log.records.push(SweepRecord {
            sweep,
            wall_time: monitor.elapsed(),
            rel_residual,
            a_norm_error,
            max_rank: x.max_rank(),
            local_converged,
            max_local_residual: max_local,
            cores,
        });
        if rel_residual <= cfg.tol {
            log.status = Status::Converged;
            break;
        }
        if local_converged && cfg.local_stop {
            log.status = Status::LocalConverged;
            break;
        }
    }
    Ok((x, log))
}

/// Normal equations `(AᵀA, Aᵀy)`. Operator ranks square; fails with
/// [`TtError::RankBlowup`] beyond `rank_cap` unless rounded first.
pub fn symmetrize(a: &TtMatrix, y: &TtVector, round_tol: Option<f64>, rank_cap: Option<usize>) -> Result<(TtMatrix, TtVector)> {
    let cap = rank_cap.unwrap_or(4096);
    let worst = a.max_rank() * a.max_rank();
    if worst > cap && round_tol.is_none() {
        return Err(TtError::RankBlowup { rank: worst, cap });
    }
    let at = a.transpose();
    let mut ata = at.matmul(a)?;
    let mut aty = tt_matvec(&at, y)?;
    if let Some(tol) = round_tol {
        ata = ata.round(tol, None);
        aty = aty.round(tol, None);
        if ata.max_rank() > cap {
            return Err(TtError::RankBlowup { rank: ata.max_rank(), cap });
        }
    }
    Ok((ata, aty))
}

#[cfg(test)]
mod tests {
    use super::super::Silent;
    use super::*;
    use crate::tt::{tt_add, tt_norm};
    use nalgebra::DVector;
    use rand::Rng;

    fn spd_problem(seed: u64, sizes: &[usize]) -> (TtMatrix, TtVector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms: Vec<DMatrix<f64>> = sizes
            .iter()
            .map(|&n| {
                let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                &g * g.transpose() + DMatrix::identity(n, n) * (n as f64 * 0.5)
            })
            .collect();
        let a = TtMatrix::kronecker_sum(&terms).unwrap();
        let y = TtVector::random(sizes, &alloc::vec![2; sizes.len() - 1], &mut rng).unwrap();
        (a, y)
    }

    fn dense_solution(a: &TtMatrix, y: &TtVector) -> DVector<f64> {
        let ad = a.to_dense().unwrap();
        ad.lu().solve(&DVector::from_vec(y.to_dense().unwrap())).unwrap()
    }

    fn a_norm_rel_error(a: &TtMatrix, x: &TtVector, xs: &DVector<f64>) -> f64 {
        let ad = a.to_dense().unwrap();
        let e = DVector::from_vec(x.to_dense().unwrap()) - xs;
        ((e.transpose() * &ad * &e)[(0, 0)] / (xs.transpose() * &ad * xs)[(0, 0)]).sqrt()
    }

    #[test]
    fn identity_problem_solved_in_one_sweep() {
        let a = TtMatrix::identity(&[3, 4, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = TtVector::random(&[3, 4, 2], &[2, 2], &mut rng).unwrap();
        for method in [EnrichmentMethod::Svd, EnrichmentMethod::Chol, EnrichmentMethod::Als] {
            let cfg = SolverConfig::default().with_method(method);
            let (x, log) = amen_solve(&a, &y, None, &cfg, &mut Silent).unwrap();
            assert_eq!(log.sweeps(), 1, "{method:?}");
            assert!(log.final_residual().unwrap() < 1e-12);
            let diff = tt_add(&x, &y, 1.0, -1.0).unwrap();
            assert!(tt_norm(&diff.round(0.0, None)) < 1e-10 * tt_norm(&y));
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let (a, _) = spd_problem(2, &[3, 3, 3]);
        let y = TtVector::zeros(&[3, 3, 3]).unwrap();
        let (x, log) = amen_solve(&a, &y, None, &SolverConfig::default(), &mut Silent).unwrap();
        assert_eq!(log.sweeps(), 1);
        assert_eq!(log.final_residual(), Some(0.0));
        assert!(x.to_dense().unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn amen_matches_dense_solution_for_each_enrichment() {
        let (a, y) = spd_problem(3, &[4, 4, 4]);
        let xs = dense_solution(&a, &y);
        for method in [EnrichmentMethod::Svd, EnrichmentMethod::Chol, EnrichmentMethod::Als] {
            let cfg = SolverConfig { tol: 1e-6, ..SolverConfig::default() }.with_method(method);
            let (x, log) = amen_solve(&a, &y, None, &cfg, &mut Silent).unwrap();
            assert!(log.converged(), "{method:?}: {:?}", log.records.last());
            assert!(a_norm_rel_error(&a, &x, &xs) <= 1e-5, "{method:?}");
        }
    }

    #[test]
    fn one_dimensional_problem_is_one_local_solve() {
        let (a, y) = spd_problem(4, &[7]);
        let xs = dense_solution(&a, &y);
        let (x, log) = amen_solve(&a, &y, None, &SolverConfig::default(), &mut Silent).unwrap();
        assert_eq!(log.sweeps(), 1);
        assert!((DVector::from_vec(x.to_dense().unwrap()) - xs).norm() < 1e-12);
    }

    #[test]
    fn residual_norm_matches_dense() {
        let (a, y) = spd_problem(5, &[3, 4, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = TtVector::random(&[3, 4, 2], &[2, 3], &mut rng).unwrap();
        let r = DVector::from_vec(y.to_dense().unwrap()) - a.to_dense().unwrap() * DVector::from_vec(x.to_dense().unwrap());
        let got = residual_norm(&a, &x, &y).unwrap();
        assert!((got - r.norm()).abs() < 1e-12 * r.norm());
    }

    #[test]
    fn als_keeps_ranks_and_stagnates_from_rank_one() {
        let (a, y) = spd_problem(6, &[4, 4, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x0 = TtVector::random(&[4, 4, 4], &[1, 1], &mut rng).unwrap();
        let cfg = SolverConfig { tol: 1e-8, max_sweeps: 8, ..SolverConfig::default() };
        let (x, log) = als_solve(&a, &y, Some(&x0), &cfg, &mut Silent).unwrap();
        assert_eq!(x.ranks(), alloc::vec![1, 1, 1, 1]);
        assert!(!log.converged());
        assert!(log.final_residual().unwrap() > 1e-3);
    }

    #[test]
    fn als_with_sufficient_rank_converges() {
        // exact solution of a Kronecker-sum system with rank-one rhs has low rank;
        // start from full ranks so the fixed-rank iteration can represent it
        let (a, _) = spd_problem(7, &[3, 3, 3]);
        let y = TtVector::ones(&[3, 3, 3]).unwrap();
        let xs = dense_solution(&a, &y);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x0 = TtVector::random(&[3, 3, 3], &[3, 3], &mut rng).unwrap();
        let cfg = SolverConfig { tol: 1e-10, max_sweeps: 10, ..SolverConfig::default() };
        let (x, _) = als_solve(&a, &y, Some(&x0), &cfg, &mut Silent).unwrap();
        assert!(a_norm_rel_error(&a, &x, &xs) < 1e-9);
    }

    #[test]
    fn dmrg_two_cores_is_exact() {
        let (a, y) = spd_problem(8, &[4, 5]);
        let xs = dense_solution(&a, &y);
        let cfg = SolverConfig { tol: 1e-12, ..SolverConfig::default() };
        let (x, log) = dmrg_solve(&a, &y, None, &cfg, &mut Silent).unwrap();
        assert_eq!(log.sweeps(), 1);
        assert!((DVector::from_vec(x.to_dense().unwrap()) - &xs).norm() < 1e-9 * xs.norm());
    }

    #[test]
    fn symmetrize_squares_ranks_and_keeps_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let terms: Vec<DMatrix<f64>> =
            (0..2).map(|_| DMatrix::identity(3, 3) * 2.0 + DMatrix::from_fn(3, 3, |_, _| rng.random_range(-0.5..0.5))).collect();
        let a = TtMatrix::kronecker_sum(&terms).unwrap();
        let y = TtVector::random(&[3, 3], &[2], &mut rng).unwrap();
        let (ata, aty) = symmetrize(&a, &y, None, None).unwrap();
        assert_eq!(ata.ranks(), alloc::vec![1, 4, 1]);
        let xs = dense_solution(&a, &y);
        let xn = dense_solution(&ata, &aty);
        assert!((xs - xn).norm() < 1e-10);
        // orthogonal operator
        let q = nalgebra::DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        let o = TtMatrix::rank_one(&[q.clone(), q]).unwrap();
        let (oto, _) = symmetrize(&o, &TtVector::ones(&[2, 2]).unwrap(), None, None).unwrap();
        assert!((oto.to_dense().unwrap() - DMatrix::<f64>::identity(4, 4)).norm() < 1e-14);
        assert!(matches!(symmetrize(&a, &y, None, Some(3)), Err(TtError::RankBlowup { .. })));
    }
}
