//! Benchmark systems: the finite-difference Poisson equation, the cascade
//! chemical master equation and all-at-once time-stepping systems built on
//! top of any generator, optionally quantized into binary modes.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::tt::{qtt_quantize_matrix, qtt_quantize_vector, tt_add, tt_matvec, Core3, Core4, TtMatrix, TtVector};
use crate::{Result, TtError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonSpec {
    pub d: usize,
    pub n: usize,
}

impl Default for PoissonSpec {
    fn default() -> Self {
        PoissonSpec { d: 16, n: 64 }
    }
}

/// `tridiag(−1, 2, −1)` of size `n`, without the `1/h²` factor.
pub fn laplacian_1d(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 2.0,
        1 => -1.0,
        _ => 0.0,
    })
}

/// Discrete `−Δ` with homogeneous Dirichlet boundary and the all-ones
/// right-hand side.
pub fn build_poisson(spec: &PoissonSpec) -> Result<(TtMatrix, TtVector)> {
    if spec.d == 0 || spec.n < 2 {
        return Err(TtError::InvalidArgument("poisson needs d >= 1 and n >= 2".into()));
    }
    let a = TtMatrix::kronecker_sum(&vec![laplacian_1d(spec.n); spec.d])?;
    let y = TtVector::ones(&vec![spec.n; spec.d])?;
    Ok((a, y))
}

/// Cascade gene regulatory network: species 1 is produced at constant rate
/// `alpha0`, species `k ≥ 2` at rate `β i_{k−1}/(β i_{k−1} + γ)`, and all
/// degrade at rate `δ i_k`. Copy numbers run over `0..n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CascadeCmeSpec {
    pub d: usize,
    pub n: usize,
    pub alpha0: f64,
    pub delta: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for CascadeCmeSpec {
    fn default() -> Self {
        CascadeCmeSpec { d: 20, n: 64, alpha0: 0.7, delta: 0.07, beta: 1.0, gamma: 5.0 }
    }
}

impl CascadeCmeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n < 2 {
            return Err(TtError::InvalidArgument("cme needs d >= 1 and n >= 2".into()));
        }
        let rates = [self.alpha0, self.delta, self.beta, self.gamma];
        if rates.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(TtError::InvalidArgument("cme rates must be positive".into()));
        }
        Ok(())
    }

    /// Production propensity of species `k` given `i_{k−1}` upstream copies.
    pub fn coupling(&self, upstream: usize) -> f64 {
        let b = self.beta * upstream as f64;
        b / (b + self.gamma)
    }
}

/// Unit-rate production generator on one species: `i → i+1`. The outflow
/// at the top state is kept, the inflow from beyond it is dropped.
fn production(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -1.0
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// Degradation generator `i → i−1` with propensity `δ i`.
fn degradation(n: usize, delta: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -delta * i as f64
        } else if j == i + 1 {
            delta * j as f64
        } else {
            0.0
        }
    })
}

/// CME generator `A = A_1 + ⋯ + A_d` in TT format with ranks 3.
pub fn build_cme_operator(spec: &CascadeCmeSpec) -> Result<TtMatrix> {
    spec.validate()?;
    let (d, n) = (spec.d, spec.n);
    let g = production(n);
    let dg = degradation(n, spec.delta);
    let c = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| spec.coupling(i)));
    let own = &dg + &g * spec.alpha0;
    if d == 1 {
        return TtMatrix::rank_one(&[own]);
    }
    let eye = Some(DMatrix::<f64>::identity(n, n));
    // states: 0 nothing placed, 1 coupling placed on the previous mode, 2 done
    let mut cores = Vec::with_capacity(d);
    cores.push(Core4::from_blocks(&[vec![eye.clone(), Some(c.clone()), Some(own)]], n, n));
    for _ in 1..d - 1 {
        cores.push(Core4::from_blocks(
            &[vec![eye.clone(), Some(c.clone()), Some(dg.clone())], vec![None, None, Some(g.clone())], vec![None, None, eye.clone()]],
            n,
            n,
        ));
    }
    cores.push(Core4::from_blocks(&[vec![Some(dg)], vec![Some(g)], vec![eye]], n, n));
    TtMatrix::new(cores)
}

/// `⊗ e_1`: all probability in the state with zero copies of every species.
pub fn build_initial_state(sizes: &[usize]) -> Result<TtVector> {
    let factors: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&n| {
            let mut v = vec![0.0; n];
            if n > 0 {
                v[0] = 1.0;
            }
            v
        })
        .collect();
    TtVector::rank_one(&factors)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeScheme {
    CrankNicolson,
    ImplicitEuler,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeSystemSpec {
    pub tau: f64,
    pub steps: usize,
    pub scheme: TimeScheme,
}

impl TimeSystemSpec {
    /// `steps` uniform steps over `[0, horizon]`.
    pub fn over(horizon: f64, steps: usize, scheme: TimeScheme) -> Self {
        TimeSystemSpec { tau: horizon / steps as f64, steps, scheme }
    }
}

impl Default for TimeSystemSpec {
    fn default() -> Self {
        TimeSystemSpec::over(10.0, 1 << 12, TimeScheme::CrankNicolson)
    }
}

/// Operator with a trailing time mode for `dψ/dt = Aψ`: row `m` of the time
/// block reads `L ψ_{m} − R ψ_{m−1}`, with `L = I − τ/2 A`, `R = I + τ/2 A`
/// for Crank–Nicolson and `L = I − τA`, `R = I` for implicit Euler. The
/// right-hand side is `R ψ0` in the first time slot, so the solution stacks
/// `ψ(t_1), …, ψ(t_N)`.
pub fn build_time_system(a: &TtMatrix, psi0: &TtVector, spec: &TimeSystemSpec) -> Result<(TtMatrix, TtVector)> {
    if !(spec.tau > 0.0) || spec.steps == 0 {
        return Err(TtError::InvalidArgument("time system needs tau > 0 and at least one step".into()));
    }
    if !a.is_square() || a.col_sizes() != psi0.mode_sizes() {
        return Err(TtError::SizeMismatch("generator and initial state do not match".into()));
    }
    let nt = spec.steps;
    let eye_t = DMatrix::<f64>::identity(nt, nt);
    let shift = DMatrix::from_fn(nt, nt, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
    let eye_x = TtMatrix::identity(&a.row_sizes())?;
    let tmode = |m: DMatrix<f64>| TtMatrix::rank_one(&[m]);
    let (m, rhs0) = match spec.scheme {
        TimeScheme::CrankNicolson => {
            let h = spec.tau / 2.0;
            let m = eye_x.append_mode(&tmode(&eye_t - &shift)?)?.add(&a.append_mode(&tmode(&eye_t + &shift)?)?, 1.0, -h)?;
            let rhs0 = tt_add(psi0, &tt_matvec(a, psi0)?, 1.0, h)?;
            (m, rhs0)
        }
        TimeScheme::ImplicitEuler => {
            let m = eye_x.append_mode(&tmode(&eye_t - &shift)?)?.add(&a.append_mode(&tmode(eye_t)?)?, 1.0, -spec.tau)?;
            (m, psi0.clone())
        }
    };
    let mut cores = rhs0.round(0.0, None).into_cores();
    let mut e1 = Core3::zeros(1, nt, 1);
    e1.set(0, 0, 0, 1.0);
    cores.push(e1);
    Ok((m, TtVector::new(cores)?))
}

/// Quantizes a system into binary modes and rounds the operator and the
/// right-hand side at `rel_tol`.
pub fn quantize_system(a: &TtMatrix, y: &TtVector, rel_tol: f64) -> Result<(TtMatrix, TtVector)> {
    let qa = qtt_quantize_matrix(a, 2, 0.0)?.round(rel_tol, None);
    let qy = qtt_quantize_vector(y, 2, 0.0)?.round(rel_tol, None);
    Ok((qa, qy))
}

/// Everything needed to run the time-dependent cascade benchmark.
pub struct CmeTimeProblem {
    pub operator: TtMatrix,
    pub rhs: TtVector,
    /// Mode sizes before quantization (species modes then time).
    pub physical_sizes: Vec<usize>,
}

/// Cascade CME propagated by an all-at-once time system, quantized into
/// binary modes when `qtt_tol` is given.
pub fn build_cme_time_problem(cme: &CascadeCmeSpec, time: &TimeSystemSpec, qtt_tol: Option<f64>) -> Result<CmeTimeProblem> {
    let a = build_cme_operator(cme)?;
    let psi0 = build_initial_state(&vec![cme.n; cme.d])?;
    let (m, b) = build_time_system(&a, &psi0, time)?;
    let physical_sizes = m.col_sizes();
    let (operator, rhs) = match qtt_tol {
        Some(tol) => quantize_system(&m, &b, tol)?,
        None => (m, b),
    };
    Ok(CmeTimeProblem { operator, rhs, physical_sizes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::{flat_index, multi_index, Endian, MultiIndex};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn poisson_one_dimensional_stencil() {
        let (a, y) = build_poisson(&PoissonSpec { d: 1, n: 3 }).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        assert_eq!(a.to_dense().unwrap(), expect);
        assert_eq!(y.to_dense().unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn poisson_eigenvalues_match_closed_form() {
        let n = 9;
        let (a, _) = build_poisson(&PoissonSpec { d: 1, n }).unwrap();
        let mut ev: Vec<f64> = a.to_dense().unwrap().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (k, v) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * (((k + 1) as f64) * core::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_operator_is_spd_with_rank_two() {
        let (a, _) = build_poisson(&PoissonSpec { d: 3, n: 4 }).unwrap();
        assert_eq!(a.ranks(), vec![1, 2, 2, 1]);
        let ad = a.to_dense().unwrap();
        assert!((&ad - ad.transpose()).norm() < 1e-14);
        assert!(ad.symmetric_eigenvalues().min() > 0.0);
    }

    /// Dense generator assembled state by state from the reaction list.
    fn dense_cme(spec: &CascadeCmeSpec) -> DMatrix<f64> {
        let sizes = vec![spec.n; spec.d];
        let total: usize = sizes.iter().product();
        let mut g = DMatrix::zeros(total, total);
        for col in 0..total {
            let s = multi_index(col, &sizes, Endian::Little).unwrap().indices;
            for k in 0..spec.d {
                let prod = if k == 0 { spec.alpha0 } else { spec.coupling(s[k - 1]) };
                g[(col, col)] -= prod;
                if s[k] + 1 < spec.n {
                    let mut t = s.clone();
                    t[k] += 1;
                    g[(flat_index(&MultiIndex::new(t), &sizes).unwrap(), col)] += prod;
                }
                let deg = spec.delta * s[k] as f64;
                g[(col, col)] -= deg;
                if s[k] > 0 {
                    let mut t = s.clone();
                    t[k] -= 1;
                    g[(flat_index(&MultiIndex::new(t), &sizes).unwrap(), col)] += deg;
                }
            }
        }
        g
    }

    #[test]
    fn cme_matches_reaction_list() {
        for d in 1..=3 {
            let spec = CascadeCmeSpec { d, n: 4, ..CascadeCmeSpec::default() };
            let a = build_cme_operator(&spec).unwrap();
            assert!(a.max_rank() <= 3);
            assert!((a.to_dense().unwrap() - dense_cme(&spec)).norm() < 1e-13, "d = {d}");
        }
    }

    #[test]
    fn cme_interior_columns_conserve_probability() {
        let spec = CascadeCmeSpec { d: 3, n: 5, ..CascadeCmeSpec::default() };
        let a = build_cme_operator(&spec).unwrap().to_dense().unwrap();
        let sizes = [5, 5, 5];
        for col in 0..125 {
            let s = multi_index(col, &sizes, Endian::Little).unwrap().indices;
            if s.iter().all(|&i| (1..=3).contains(&i)) {
                assert!(a.column(col).sum().abs() < 1e-12);
            }
        }
        assert_eq!(spec.coupling(0), 0.0);
    }

    #[test]
    fn initial_state_is_first_unit_vector() {
        let x = build_initial_state(&[3, 4, 2]).unwrap();
        let dense = x.to_dense().unwrap();
        assert_eq!(dense[0], 1.0);
        assert!(dense[1..].iter().all(|v| *v == 0.0));
        assert_eq!(crate::tt::tt_norm(&x), 1.0);
    }

    #[test]
    fn single_crank_nicolson_step_matches_dense() {
        let spec = CascadeCmeSpec { d: 2, n: 3, ..CascadeCmeSpec::default() };
        let a = build_cme_operator(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi0 = TtVector::random(&[3, 3], &[2], &mut rng).unwrap();
        let tau = 0.3;
        let (m, b) = build_time_system(&a, &psi0, &TimeSystemSpec { tau, steps: 1, scheme: TimeScheme::CrankNicolson }).unwrap();
        let ad = a.to_dense().unwrap();
        let eye = DMatrix::<f64>::identity(9, 9);
        let p0 = DVector::from_vec(psi0.to_dense().unwrap());
        let step = (&eye - &ad * (tau / 2.0)).lu().solve(&((&eye + &ad * (tau / 2.0)) * p0)).unwrap();
        let x = m.to_dense().unwrap().lu().solve(&DVector::from_vec(b.to_dense().unwrap())).unwrap();
        assert!((x - step).norm() < 1e-13);
    }

    #[test]
    fn zero_generator_keeps_initial_state() {
        let zero = TtMatrix::rank_one(&[DMatrix::zeros(3, 3), DMatrix::zeros(2, 2)]).unwrap();
        let psi0 = build_initial_state(&[3, 2]).unwrap();
        for scheme in [TimeScheme::CrankNicolson, TimeScheme::ImplicitEuler] {
            let (m, b) = build_time_system(&zero, &psi0, &TimeSystemSpec { tau: 0.1, steps: 4, scheme }).unwrap();
            let x = m.to_dense().unwrap().lu().solve(&DVector::from_vec(b.to_dense().unwrap())).unwrap();
            let p0 = psi0.to_dense().unwrap();
            for t in 0..4 {
                for (i, v) in p0.iter().enumerate() {
                    assert!((x[i + 6 * t] - v).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn implicit_euler_steps_match_dense_recursion() {
        let spec = CascadeCmeSpec { d: 2, n: 2, ..CascadeCmeSpec::default() };
        let a = build_cme_operator(&spec).unwrap();
        let psi0 = build_initial_state(&[2, 2]).unwrap();
        let tau = 0.5;
        let (m, b) = build_time_system(&a, &psi0, &TimeSystemSpec { tau, steps: 3, scheme: TimeScheme::ImplicitEuler }).unwrap();
        let x = m.to_dense().unwrap().lu().solve(&DVector::from_vec(b.to_dense().unwrap())).unwrap();
        let lhs = DMatrix::<f64>::identity(4, 4) - a.to_dense().unwrap() * tau;
        let mut p = DVector::from_vec(psi0.to_dense().unwrap());
        for t in 0..3 {
            p = lhs.clone().lu().solve(&p).unwrap();
            assert!((x.rows(4 * t, 4) - &p).norm() < 1e-13);
        }
    }

    #[test]
    fn quantized_time_system_is_the_same_system() {
        let cme = CascadeCmeSpec { d: 2, n: 4, ..CascadeCmeSpec::default() };
        let time = TimeSystemSpec::over(1.0, 4, TimeScheme::CrankNicolson);
        let plain = build_cme_time_problem(&cme, &time, None).unwrap();
        let q = build_cme_time_problem(&cme, &time, Some(1e-14)).unwrap();
        assert_eq!(q.operator.row_sizes(), vec![2; 6]);
        assert_eq!(q.physical_sizes, vec![4, 4, 4]);
        let (pa, qa) = (plain.operator.to_dense().unwrap(), q.operator.to_dense().unwrap());
        assert!((&pa - qa).norm() < 1e-12 * pa.norm());
        let (pb, qb) = (plain.rhs.to_dense().unwrap(), q.rhs.to_dense().unwrap());
        assert!(pb.iter().zip(&qb).all(|(u, v)| (u - v).abs() < 1e-13));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(build_poisson(&PoissonSpec { d: 0, n: 4 }).is_err());
        assert!(build_cme_operator(&CascadeCmeSpec { delta: 0.0, ..CascadeCmeSpec::default() }).is_err());
        let a = TtMatrix::identity(&[2]).unwrap();
        let psi = build_initial_state(&[3]).unwrap();
        assert!(build_time_system(&a, &psi, &TimeSystemSpec::default()).is_err());
    }
}
