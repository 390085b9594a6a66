//! Numerical counterparts of the convergence theory: steepest-descent and
//! Kantorovich bounds, the sweep rate `φ_d`, Galerkin projection angles,
//! dense reference solves and an instrumented monitor that measures the
//! per-core factors `μ_k`, `ω_k` of a running AMEn sweep.
//!
//! Everything here works on dense matrices and is meant for small instances.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::amen::{amen_solve, EnrichmentMethod, LocalSolver, Monitor, SolutionTruncation, SolverConfig};
use crate::linalg::{qr_thin, spectral_norm};
use crate::tt::{tt_matvec, tt_norm, Side, TtMatrix, TtVector};
use crate::{Result, TtError};

const SYMMETRY_TOL: f64 = 1e-12;

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(TtError::NotSpd("matrix is not square".into()));
    }
    let asym = (a - a.transpose()).norm();
    if asym > SYMMETRY_TOL * a.norm() {
        return Err(TtError::NotSpd(alloc::format!("asymmetry {asym:.3e}")));
    }
    Ok(())
}

/// `(λ_min, λ_max)` of a symmetric positive definite matrix.
pub fn extreme_eigenvalues(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_symmetric(a)?;
    let ev = a.clone().symmetric_eigenvalues();
    let (lmin, lmax) = (ev.min(), ev.max());
    if !(lmin > 0.0) {
        return Err(TtError::NotSpd(alloc::format!("smallest eigenvalue {lmin:.3e}")));
    }
    Ok((lmin, lmax))
}

/// `Ω = (λ_max − λ_min)/(λ_max + λ_min)` from known extreme eigenvalues.
pub fn kantorovich_from_spectrum(lmin: f64, lmax: f64) -> Result<f64> {
    if !(lmin > 0.0) || lmax < lmin {
        return Err(TtError::NotSpd(alloc::format!("invalid spectrum [{lmin}, {lmax}]")));
    }
    Ok((lmax - lmin) / (lmax + lmin))
}

/// Worst-case steepest-descent contraction `Ω(A)` of a dense SPD matrix.
pub fn kantorovich_bound(a: &DMatrix<f64>) -> Result<f64> {
    let (lmin, lmax) = extreme_eigenvalues(a)?;
    kantorovich_from_spectrum(lmin, lmax)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumEstimate {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

fn power_rayleigh(a: &TtMatrix, start: &TtVector, iterations: usize, round_tol: f64) -> Result<f64> {
    let mut v = start.clone().scaled(1.0 / tt_norm(start));
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let w = tt_matvec(a, &v)?.round(round_tol, None);
        lambda = crate::tt::tt_dot(&v, &w)?;
        let nw = tt_norm(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        v = w.scaled(1.0 / nw);
    }
    Ok(lambda)
}

/// Extreme eigenvalues of a TT operator by power iteration on `A` and on
/// the shifted `λ_max I − A`, rounding every iterate at `round_tol`.
pub fn tt_spectrum_estimate(a: &TtMatrix, iterations: usize, round_tol: f64, seed: u64) -> Result<SpectrumEstimate> {
    if !a.is_square() {
        return Err(TtError::NotSpd("operator is not square".into()));
    }
    let asym = tt_norm(&crate::tt::tt_add(&a.as_tt_vector(), &a.transpose().as_tt_vector(), 1.0, -1.0)?.round(0.0, None));
    if asym > SYMMETRY_TOL * tt_norm(&a.as_tt_vector()) {
        return Err(TtError::NotSpd(alloc::format!("asymmetry {asym:.3e}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = a.col_sizes();
    let start = TtVector::random(&sizes, &vec![2; sizes.len() - 1], &mut rng)?;
    let lmax = power_rayleigh(a, &start, iterations, round_tol)?;
    let shifted = TtMatrix::identity(&sizes)?.add(a, lmax, -1.0)?;
    let gap = power_rayleigh(&shifted, &start, iterations, round_tol)?;
    let lmin = lmax - gap;
    if !(lmin > 0.0) {
        return Err(TtError::NotSpd(alloc::format!("estimated smallest eigenvalue {lmin:.3e}")));
    }
    Ok(SpectrumEstimate { lambda_min: lmin, lambda_max: lmax })
}

/// One exact steepest-descent step `x + h z`, `z = y − Ax`, `h = (z,z)/(z,Az)`.
pub fn sd_step(a: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let z = y - a * x;
    let az = a * &z;
    let den = z.dot(&az);
    if den == 0.0 {
        return x.clone();
    }
    x + z.scale(z.dot(&z) / den)
}

/// `‖v‖_A` for symmetric positive semidefinite `A`.
pub fn a_norm(a: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(a * v)).max(0.0).sqrt()
}

/// Direct solve `A x = y` with a relative residual check of `1e-12`.
pub fn dense_oracle_solve(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if !a.is_square() || a.nrows() != y.len() {
        return Err(TtError::SizeMismatch("oracle system is not square".into()));
    }
    let x = a.clone().lu().solve(y).ok_or(TtError::Singular)?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(TtError::Singular);
    }
    let mut x = x;
    // one step of iterative refinement keeps the residual at roundoff level
    let r = y - a * &x;
    if let Some(dx) = a.clone().lu().solve(&r) {
        x += dx;
    }
    let ynorm = y.norm();
    if ynorm > 0.0 && (y - a * &x).norm() > 1e-12 * ynorm * (1.0 + a.norm() * x.norm() / ynorm) {
        return Err(TtError::Singular);
    }
    Ok(x)
}

/// Dense reference solution of a TT system.
pub fn dense_oracle_solve_tt(a: &TtMatrix, y: &TtVector) -> Result<DVector<f64>> {
    let ad = a.to_dense()?;
    let yd = DVector::from_vec(y.to_dense()?);
    dense_oracle_solve(&ad, &yd)
}

fn check_unit(name: &str, v: &[f64], allow_one: bool) -> Result<Vec<f64>> {
    v.iter()
        .map(|&x| {
            let hi = if allow_one { 1.0 } else { 1.0 - f64::EPSILON };
            if !(x >= -1e-12) || !(x <= hi + 1e-12) || (!allow_one && x >= 1.0) {
                Err(TtError::InvalidArgument(alloc::format!("{name} entry {x} outside the admissible range")))
            } else {
                Ok(x.clamp(0.0, 1.0))
            }
        })
        .collect()
}

/// Sweep rate `φ_d` with `φ_d² = Σ_k ω_k² Π_{j<k}(1−ω_j²) Π_{j≤k} μ_j²`
/// for per-core factors `μ_1..μ_{d−1}` and `ω_1..ω_{d−1}` in `[0, 1]`.
pub fn phi_d(mu: &[f64], omega: &[f64]) -> Result<f64> {
    if mu.len() != omega.len() {
        return Err(TtError::SizeMismatch("mu and omega must have equal length".into()));
    }
    let mu = check_unit("mu", mu, true)?;
    let omega = check_unit("omega", omega, true)?;
    Ok(phi_squared(&mu, &omega).sqrt())
}

fn phi_squared(mu: &[f64], omega: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 1.0;
    for (m, w) in mu.iter().zip(omega) {
        carry *= m * m;
        sum += w * w * carry;
        carry *= 1.0 - w * w;
    }
    sum
}

/// Residual bound `Σ_k ω_k μ_k Π_{m<k} μ_m/√(1−ω_m²)` of a nonsymmetric sweep.
pub fn fom_chain_bound(mu: &[f64], omega: &[f64]) -> Result<f64> {
    if mu.len() != omega.len() {
        return Err(TtError::SizeMismatch("mu and omega must have equal length".into()));
    }
    if let Some(w) = omega.iter().find(|w| !(**w < 1.0) || **w < 0.0) {
        return Err(TtError::InvalidArgument(alloc::format!("omega entry {w} must lie in [0, 1)")));
    }
    let mut sum = 0.0;
    let mut carry = 1.0;
    for (m, w) in mu.iter().zip(omega) {
        sum += w * m * carry;
        carry *= m / (1.0 - w * w).sqrt();
    }
    Ok(sum)
}

/// Quantities of one oblique (Galerkin) projection step on `span(V)`
/// applied to the residual `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleReport {
    /// `‖z − VVᵀz‖/‖z‖`.
    pub epsilon: f64,
    /// `λ_min((VᵀAV + VᵀAᵀV)/2)`.
    pub mu: f64,
    /// `ω_V` with `√(1−ω_V²) = μ/‖AV‖`; `None` when `μ ≤ 0`.
    pub omega_v: Option<f64>,
    /// `‖z − AV(VᵀAV)⁻¹Vᵀz‖/‖z‖`.
    pub realized: f64,
    /// `ε + ω_V/√(1−ω_V²)·√(1−ε²)`; `None` when `μ ≤ 0`.
    pub bound: Option<f64>,
}

impl AngleReport {
    pub fn applicable(&self) -> bool {
        self.bound.is_some()
    }
}

/// Projection angles for `A`, column-orthonormal `V` and residual `z`.
pub fn angle_quantities(a: &DMatrix<f64>, v: &DMatrix<f64>, z: &DVector<f64>) -> Result<AngleReport> {
    let (n, m) = v.shape();
    if a.nrows() != n || a.ncols() != n || z.len() != n {
        return Err(TtError::SizeMismatch("angle quantities need A n×n, V n×m and z of length n".into()));
    }
    let defect = (v.transpose() * v - DMatrix::<f64>::identity(m, m)).norm();
    if defect > 1e-10 {
        return Err(TtError::InvalidArgument(alloc::format!("V is not column-orthonormal (defect {defect:.2e})")));
    }
    let znorm = z.norm();
    if znorm == 0.0 {
        return Err(TtError::InvalidArgument("zero residual".into()));
    }
    let vz = v.transpose() * z;
    let epsilon = ((z - v * &vz).norm() / znorm).min(1.0);
    let av = a * v;
    let vav = v.transpose() * &av;
    let sym = (&vav + vav.transpose()) * 0.5;
    let mu = sym.symmetric_eigenvalues().min();
    let realized = match vav.clone().lu().solve(&vz) {
        Some(w) => (z - &av * w).norm() / znorm,
        None => f64::INFINITY,
    };
    let (omega_v, bound) = if mu > 0.0 {
        let avn = spectral_norm(&av);
        let c = (mu / avn).min(1.0);
        let w = (1.0 - c * c).max(0.0).sqrt();
        (Some(w), Some(epsilon + w / c * (1.0 - epsilon * epsilon).max(0.0).sqrt()))
    } else {
        (None, None)
    };
    Ok(AngleReport { epsilon, mu, omega_v, realized, bound })
}

fn random_orthonormal<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> DMatrix<f64> {
    qr_thin(DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))).0
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `I + 0.5 N` with `‖N‖₂ = 1`: nonsymmetric with positive definite
/// symmetric part.
pub fn well_conditioned_nonsymmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let nm = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let s = spectral_norm(&nm);
    DMatrix::identity(n, n) + nm * (0.5 / s)
}

/// Random SPD matrix with spectrum spread over `[1, kappa]`.
pub fn random_spd<R: Rng + ?Sized>(n: usize, kappa: f64, rng: &mut R) -> DMatrix<f64> {
    let q = random_orthonormal(n, n, rng);
    let lam = DVector::from_fn(n, |i, _| {
        if i == 0 {
            1.0
        } else if i == 1 {
            kappa
        } else {
            rng.random_range(1.0..kappa)
        }
    });
    &q * DMatrix::from_diagonal(&lam) * q.transpose()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FomSummary {
    pub trials: usize,
    /// Trials with `μ ≤ 0`, where the bound does not apply.
    pub inapplicable: usize,
    /// Applicable trials whose realized ratio exceeded the bound.
    pub violations: usize,
    /// Largest `realized − bound` over applicable trials.
    pub worst_margin: f64,
    /// Same check restricted to `z ∈ span(V)` against `ω_V/√(1−ω_V²)`.
    pub in_span_violations: usize,
}

/// Random checks of the single-step projection bound. Sizes, subspace
/// dimensions and the out-of-span part of `z` vary per trial; each trial
/// draws from its own stream of the seeded generator.
pub fn fom_trials(trials: usize, seed: u64) -> FomSummary {
    let mut s = FomSummary { trials, worst_margin: f64::NEG_INFINITY, ..FomSummary::default() };
    for t in 0..trials {
        let mut rng = trial_rng(seed, t as u64);
        let n = rng.random_range(4..=30);
        let m = rng.random_range(1..n);
        let a = well_conditioned_nonsymmetric(n, &mut rng);
        let v = random_orthonormal(n, m, &mut rng);
        let inside = &v * DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let outside = {
            let g = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            &g - &v * (v.transpose() * &g)
        };
        let frac: f64 = rng.random_range(0.0..1.0);
        let z = &inside + outside * (frac * inside.norm() / (1e-300 + outside_norm(&v, n)));
        let rep = angle_quantities(&a, &v, &z).expect("valid trial");
        match rep.bound {
            None => s.inapplicable += 1,
            Some(b) => {
                s.worst_margin = s.worst_margin.max(rep.realized - b);
                if rep.realized > b + 1e-12 {
                    s.violations += 1;
                }
            }
        }
        let span = angle_quantities(&a, &v, &inside).expect("valid trial");
        if let Some(w) = span.omega_v {
            if span.realized > w / (1.0 - w * w).sqrt() + 1e-12 {
                s.in_span_violations += 1;
            }
        }
    }
    s
}

// norm of a generic out-of-span direction is data dependent; the scaling
// above only needs a positive normalizer
fn outside_norm(v: &DMatrix<f64>, n: usize) -> f64 {
    if v.ncols() >= n {
        1.0
    } else {
        (n as f64).sqrt()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KantorovichSummary {
    pub systems: usize,
    pub steps: usize,
    pub violations: usize,
    /// Largest `ratio − Ω(A)` over all steps.
    pub worst_margin: f64,
}

/// Exact steepest descent on random SPD systems; every step's A-norm error
/// ratio is compared with `Ω(A)`. Steps stop once the relative error falls
/// below `1e-4`, where the ratio itself is no longer resolved to `1e-12`.
pub fn kantorovich_trials(systems: usize, n: usize, steps: usize, seed: u64) -> Result<KantorovichSummary> {
    let mut s = KantorovichSummary { systems, worst_margin: f64::NEG_INFINITY, ..KantorovichSummary::default() };
    for t in 0..systems {
        let mut rng = trial_rng(seed, t as u64);
        let kappa = 10f64.powf(rng.random_range(0.3..3.0));
        let a = random_spd(n, kappa, &mut rng);
        let omega = kantorovich_bound(&a)?;
        let xs = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let y = &a * &xs;
        let mut x = DVector::zeros(n);
        let e0 = a_norm(&a, &xs);
        for _ in 0..steps {
            let before = a_norm(&a, &(&xs - &x));
            if before < 1e-4 * e0 {
                break;
            }
            x = sd_step(&a, &y, &x);
            let ratio = a_norm(&a, &(&xs - &x)) / before;
            s.steps += 1;
            s.worst_margin = s.worst_margin.max(ratio - omega);
            if ratio > omega + 1e-12 {
                s.violations += 1;
            }
        }
    }
    Ok(s)
}

/// Extreme eigenvalues of the reduced matrices `A_k = X_{<k}ᵀ A X_{<k}` for
/// a left-orthogonal `x`, `k = 1..d` (`A_1 = A`).
pub fn reduced_spectra(a: &TtMatrix, x: &TtVector) -> Result<Vec<(f64, f64)>> {
    let ad = a.to_dense()?;
    let d = x.dim();
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let p = left_frame(x, k)?;
        out.push(extreme_eigenvalues(&(p.transpose() * &ad * &p))?);
    }
    Ok(out)
}

/// `X_{<k} ⊗ I` as a dense `N × (r_{k−1} n_k⋯n_d)` matrix.
fn left_frame(x: &TtVector, k: usize) -> Result<DMatrix<f64>> {
    let sizes = x.mode_sizes();
    let rest: usize = sizes[k..].iter().product();
    if k == 0 {
        return Ok(DMatrix::identity(rest, rest));
    }
    let left = x.interface_matrix(k, Side::Leq, crate::DEFAULT_DENSE_CAP)?;
    Ok(DMatrix::<f64>::identity(rest, rest).kronecker(&left))
}

/// Per-core factors of one instrumented sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRate {
    pub sweep: usize,
    /// `‖x⋆−u‖_{A_k}/‖x⋆−t‖_{A_k}` on the reduced problems, `k = 1..d−1`.
    pub mu: Vec<f64>,
    /// A-orthogonal projection defect of `x⋆−u` on the final core's frame.
    pub omega: Vec<f64>,
    /// Same defect for the one-dimensional space spanned by the projected
    /// residual `z̃_k` (a perturbed steepest-descent step).
    pub omega_ztilde: Vec<f64>,
    /// Same for the exact reduced residual `z_k`.
    pub omega_z: Vec<f64>,
    /// `Ω(A_k)` of the reduced matrices.
    pub omega_reduced: Vec<f64>,
    /// `(λ_min, λ_max)` of `A_k`, `k = 1..d−1`.
    pub reduced_spectra: Vec<(f64, f64)>,
    /// `J(x)/J(t)` with `J(v) = ‖x⋆−v‖²_A`.
    pub j_ratio: f64,
    /// `φ_d²` assembled from `mu` and `omega`.
    pub phi_squared: f64,
    /// `J` before and after every local update.
    pub j_trace: Vec<(f64, f64)>,
    /// Relative A-norm error at the start of the sweep.
    pub start_error: f64,
    /// Residual-norm factors and bound of the nonsymmetric analysis.
    pub residual_ratio: f64,
    pub residual_bound: Option<f64>,
}

impl SweepRate {
    /// Largest increase of `J` over a single local update, relative to `J(t)`.
    pub fn worst_increase(&self) -> f64 {
        let j0 = self.j_trace.first().map_or(0.0, |p| p.0);
        self.j_trace.iter().map(|(b, a)| (a - b) / j0.max(f64::MIN_POSITIVE)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn rate_identity_error(&self) -> f64 {
        (self.j_ratio - self.phi_squared).abs() / self.j_ratio.abs().max(f64::MIN_POSITIVE)
    }

    pub fn nesting_holds(&self, slack: f64) -> bool {
        self.reduced_spectra.windows(2).all(|w| w[1].0 >= w[0].0 * (1.0 - slack) && w[1].1 <= w[0].1 * (1.0 + slack))
    }
}

/// Monitor recording dense snapshots of every local update and evaluating
/// the exact rate factors at the end of each sweep. Only for small systems.
pub struct RateMonitor {
    a: DMatrix<f64>,
    y: DVector<f64>,
    xs: DVector<f64>,
    spd: bool,
    t: Vec<DVector<f64>>,
    u: Vec<DVector<f64>>,
    z: Vec<Option<DMatrix<f64>>>,
    j_trace: Vec<(f64, f64)>,
    final_x: Option<TtVector>,
    pub sweeps: Vec<SweepRate>,
}

impl RateMonitor {
    pub fn new(a: &TtMatrix, y: &TtVector) -> Result<Self> {
        let ad = a.to_dense()?;
        let yd = DVector::from_vec(y.to_dense()?);
        let xs = dense_oracle_solve(&ad, &yd)?;
        let spd = extreme_eigenvalues(&ad).is_ok();
        Ok(RateMonitor { a: ad, y: yd, xs, spd, t: Vec::new(), u: Vec::new(), z: Vec::new(), j_trace: Vec::new(), final_x: None, sweeps: Vec::new() })
    }

    pub fn solution(&self) -> &DVector<f64> {
        &self.xs
    }

    fn energy(&self, v: &DVector<f64>) -> f64 {
        let e = &self.xs - v;
        e.dot(&(&self.a * &e))
    }

    fn evaluate(&self, sweep: usize, x: &TtVector) -> Result<SweepRate> {
        let d = x.dim();
        let sizes = x.mode_sizes();
        let xf = DVector::from_vec(x.to_dense()?);
        let mut rate = SweepRate {
            sweep,
            mu: Vec::new(),
            omega: Vec::new(),
            omega_ztilde: Vec::new(),
            omega_z: Vec::new(),
            omega_reduced: Vec::new(),
            reduced_spectra: Vec::new(),
            j_ratio: 0.0,
            phi_squared: 0.0,
            j_trace: self.j_trace.clone(),
            start_error: 0.0,
            residual_ratio: 0.0,
            residual_bound: None,
        };
        let mut res_mu = Vec::new();
        let mut res_omega = Vec::new();
        for k in 0..d.saturating_sub(1) {
            let p = left_frame(x, k)?;
            let ak = p.transpose() * &self.a * &p;
            let yk = p.transpose() * &self.y;
            let tk = p.transpose() * &self.t[k];
            let uk = p.transpose() * &self.u[k];
            let core = x.core(k).left_unfolding();
            let rest: usize = sizes[k + 1..].iter().product();
            let f = DMatrix::<f64>::identity(rest, rest).kronecker(&core);
            let fa = f.transpose() * &ak;
            let galerkin = (&fa * &f).lu().solve(&(f.transpose() * &yk)).ok_or(TtError::Singular)?;
            let xg = &f * galerkin;
            // residual-norm factors of the nonsymmetric analysis
            let rt = (&yk - &ak * &tk).norm();
            let ru = (&yk - &ak * &uk).norm();
            let rg = (&yk - &ak * &xg).norm();
            let mu_r = if rt > 0.0 { ru / rt } else { 0.0 };
            let mut om_r = if ru > 0.0 { rg / ru } else { 0.0 };
            let zk = &yk - &ak * &uk;
            if zk.norm() > 0.0 {
                let q = qr_thin(f.clone()).0;
                if let Ok(rep) = angle_quantities(&ak, &q, &zk) {
                    om_r = om_r.max(rep.omega_v.unwrap_or(1.0));
                }
            }
            res_mu.push(mu_r);
            res_omega.push(om_r);
            if !self.spd {
                continue;
            }
            let (lmin, lmax) = extreme_eigenvalues(&ak)?;
            rate.reduced_spectra.push((lmin, lmax));
            rate.omega_reduced.push(kantorovich_from_spectrum(lmin, lmax)?);
            let xsk = dense_oracle_solve(&ak, &yk)?;
            let c = &xsk - &uk;
            let en = |v: &DVector<f64>| v.dot(&(&ak * v));
            let (ec, et) = (en(&c), en(&(&xsk - &tk)));
            rate.mu.push(if et > 0.0 { (ec / et).sqrt() } else { 0.0 });
            // A_k-orthogonal projection of c onto span(F)
            let w = (&fa * &f).lu().solve(&(&fa * &c)).ok_or(TtError::Singular)?;
            let def = &c - &f * w;
            rate.omega.push(if ec > 0.0 { (en(&def) / ec).sqrt().min(1.0) } else { 0.0 });
            let line = |dir: &DVector<f64>| {
                let ad = &ak * dir;
                let dd = dir.dot(&ad);
                if ec == 0.0 {
                    0.0
                } else if dd == 0.0 {
                    1.0
                } else {
                    (1.0 - c.dot(&ad).powi(2) / (ec * dd)).max(0.0).sqrt()
                }
            };
            rate.omega_z.push(line(&zk));
            let zt = match &self.z[k] {
                Some(zb) if zb.ncols() > 0 => {
                    let q = qr_thin(zb.clone()).0;
                    let rest = zk.len() / q.nrows();
                    DMatrix::<f64>::identity(rest, rest).kronecker(&(&q * q.transpose())) * &zk
                }
                _ => DVector::zeros(zk.len()),
            };
            rate.omega_ztilde.push(line(&zt));
        }
        let rt0 = (&self.y - &self.a * &self.t[0]).norm();
        rate.residual_ratio = if rt0 > 0.0 { (&self.y - &self.a * &xf).norm() / rt0 } else { 0.0 };
        rate.residual_bound = fom_chain_bound(&res_mu, &res_omega).ok().filter(|_| res_mu.iter().all(|m| *m <= 1.0));
        if self.spd {
            let j0 = self.energy(&self.t[0]);
            rate.j_ratio = if j0 > 0.0 { self.energy(&xf) / j0 } else { 0.0 };
            rate.phi_squared = phi_squared(&rate.mu, &rate.omega);
            rate.start_error = (j0 / self.xs.dot(&(&self.a * &self.xs))).sqrt();
        }
        Ok(rate)
    }
}

impl Monitor for RateMonitor {
    fn error(&mut self, x: &TtVector) -> Option<f64> {
        let xd = DVector::from_vec(x.to_dense().ok()?);
        let e = a_norm(&self.a, &(&self.xs - xd));
        Some(e / a_norm(&self.a, &self.xs))
    }

    fn before_update(&mut self, k: usize, x: &TtVector) {
        if k == 0 {
            let d = x.dim();
            self.t = vec![DVector::zeros(0); d];
            self.u = vec![DVector::zeros(0); d];
            self.z = vec![None; d];
            self.j_trace.clear();
            self.final_x = None;
        }
        self.t[k] = DVector::from_vec(x.to_dense().expect("instrumented runs are small"));
    }

    fn after_update(&mut self, k: usize, x: &TtVector) {
        let v = DVector::from_vec(x.to_dense().expect("instrumented runs are small"));
        self.j_trace.push((self.energy(&self.t[k]), self.energy(&v)));
        self.u[k] = v;
        if k + 1 == x.dim() {
            self.final_x = Some(x.clone());
        }
    }

    fn enrichment(&mut self, k: usize, z: &DMatrix<f64>) {
        self.z[k] = Some(z.clone());
    }

    fn sweep_end(&mut self, sweep: usize, _x: &TtVector) {
        if let Some(x) = self.final_x.take() {
            if let Ok(rate) = self.evaluate(sweep, &x) {
                self.sweeps.push(rate);
            }
        }
    }
}

/// Summary of an instrumented solver run.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `Ω(A)`.
    pub omega_a: f64,
    /// A-norm error ratios of exact steepest descent from the same start.
    pub sd_ratios: Vec<f64>,
    pub sweeps: Vec<SweepRate>,
}

/// Runs AMEn on a small SPD system with the [`RateMonitor`] attached and
/// steepest descent from the same start for comparison.
pub fn instrumented_rate_run(a: &TtMatrix, y: &TtVector, x0: &TtVector, cfg: &SolverConfig, sd_steps: usize) -> Result<RateReport> {
    let mut mon = RateMonitor::new(a, y)?;
    let (lambda_min, lambda_max) = extreme_eigenvalues(&mon.a)?;
    let omega_a = kantorovich_from_spectrum(lambda_min, lambda_max)?;
    let mut x = DVector::from_vec(x0.to_dense()?);
    let mut sd_ratios = Vec::with_capacity(sd_steps);
    for _ in 0..sd_steps {
        let before = a_norm(&mon.a, &(&mon.xs - &x));
        if before == 0.0 {
            break;
        }
        x = sd_step(&mon.a, &mon.y, &x);
        sd_ratios.push(a_norm(&mon.a, &(&mon.xs - &x)) / before);
    }
    amen_solve(a, y, Some(x0), cfg, &mut mon)?;
    Ok(RateReport { lambda_min, lambda_max, omega_a, sd_ratios, sweeps: mon.sweeps })
}

/// Small SPD system for instrumented runs: a Kronecker sum of 1D
/// Laplacians plus random SPD perturbations, a random rank-2 right-hand side
/// and a random rank-1 start.
pub fn instrumented_spd_system(d: usize, n: usize, seed: u64) -> Result<(TtMatrix, TtVector, TtVector)> {
    if d < 2 || n < 2 {
        return Err(TtError::InvalidArgument("instrumented systems need d >= 2 and n >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<DMatrix<f64>> = (0..d).map(|_| crate::problems::laplacian_1d(n) + random_spd(n, 3.0, &mut rng) * 0.5).collect();
    let a = TtMatrix::kronecker_sum(&terms)?;
    let sizes = vec![n; d];
    let y = TtVector::random(&sizes, &vec![2; d - 1], &mut rng)?;
    let x0 = TtVector::random(&sizes, &vec![1; d - 1], &mut rng)?;
    Ok((a, y, x0))
}

/// Direct local solves, no solution truncation and `kickrank` enrichment
/// vectors; with a large `kickrank` the enrichment has the exact residual rank.
pub fn exact_sweep_config(method: EnrichmentMethod, kickrank: usize, max_sweeps: usize) -> SolverConfig {
    let mut cfg = SolverConfig {
        tol: 1e-14,
        max_sweeps,
        local_solver: LocalSolver::Direct,
        truncation: SolutionTruncation::None,
        local_stop: false,
        ..SolverConfig::default()
    }
    .with_method(method);
    cfg.enrichment.kickrank = kickrank;
    cfg
}

/// Verdict of the rate checks over the sweeps of a [`RateReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct RateCheck {
    /// Sweeps whose starting error was resolved well enough to compare.
    pub sweeps_checked: usize,
    /// Local updates that increased `J` by more than `1e-12·J(t)`.
    pub monotonicity_violations: usize,
    /// Largest relative gap between `J(x)/J(t)` and `φ_d²`.
    pub identity_error: f64,
    pub nesting_violations: usize,
    /// Cores with `ω_k > ω_{z̃_k}` or `ω_{z_k} > Ω(A_k)` beyond `1e-10`.
    pub ordering_violations: usize,
    pub sd_violations: usize,
}

impl RateCheck {
    pub fn passed(&self, identity_tol: f64) -> bool {
        self.sweeps_checked > 0
            && self.monotonicity_violations == 0
            && self.identity_error <= identity_tol
            && self.nesting_violations == 0
            && self.ordering_violations == 0
            && self.sd_violations == 0
    }
}

/// Checks every sweep whose relative A-norm errors before and after are both
/// at least `resolution`; below that the measured ratios are dominated by
/// roundoff in `x⋆ − x`.
pub fn check_rate_report(rep: &RateReport, resolution: f64) -> RateCheck {
    let mut c = RateCheck {
        sweeps_checked: 0,
        monotonicity_violations: 0,
        identity_error: 0.0,
        nesting_violations: 0,
        ordering_violations: 0,
        sd_violations: rep.sd_ratios.iter().filter(|r| **r > rep.omega_a + 1e-12).count(),
    };
    for s in rep.sweeps.iter().filter(|s| s.start_error >= resolution && s.start_error * s.j_ratio.sqrt() >= resolution) {
        c.sweeps_checked += 1;
        let j0 = s.j_trace.first().map_or(0.0, |p| p.0);
        c.monotonicity_violations += s.j_trace.iter().filter(|(b, a)| a - b > 1e-12 * j0).count();
        c.identity_error = c.identity_error.max(s.rate_identity_error());
        if !s.nesting_holds(1e-12) {
            c.nesting_violations += 1;
        }
        c.ordering_violations += s.omega.iter().zip(&s.omega_ztilde).filter(|(w, wz)| **w > **wz + 1e-10).count();
        c.ordering_violations += s.omega_z.iter().zip(&s.omega_reduced).filter(|(w, om)| **w > **om + 1e-10).count();
    }
    c
}
