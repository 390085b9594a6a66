use alloc::format;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use super::{Core3, TtMatrix, TtVector};
use crate::{Result, TtError};

fn check_same_sizes(x: &TtVector, y: &TtVector) -> Result<()> {
    if x.mode_sizes() != y.mode_sizes() {
        return Err(TtError::SizeMismatch(format!("mode sizes {:?} and {:?} differ", x.mode_sizes(), y.mode_sizes())));
    }
    Ok(())
}

/// Exact `αx + βy`; ranks add (boundary cores concatenate).
pub fn tt_add(x: &TtVector, y: &TtVector, alpha: f64, beta: f64) -> Result<TtVector> {
    check_same_sizes(x, y)?;
    let d = x.dim();
    if d == 1 {
        let (cx, cy) = (x.core(0), y.core(0));
        let data = cx.data().iter().zip(cy.data()).map(|(a, b)| alpha * a + beta * b).collect();
        return TtVector::new(alloc::vec![Core3::from_vec(1, cx.mode_size(), 1, data)?]);
    }
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let (cx, cy) = (x.core(k), y.core(k));
        let n = cx.mode_size();
        let (lx, rx) = (cx.left_rank(), cx.right_rank());
        let (ly, ry) = (cy.left_rank(), cy.right_rank());
        let (sx, sy) = if k == 0 { (alpha, beta) } else { (1.0, 1.0) };
        let core = if k == 0 {
            Core3::from_fn(1, n, rx + ry, |_, i, b| if b < rx { sx * cx.get(0, i, b) } else { sy * cy.get(0, i, b - rx) })
        } else if k == d - 1 {
            Core3::from_fn(lx + ly, n, 1, |a, i, _| if a < lx { cx.get(a, i, 0) } else { cy.get(a - lx, i, 0) })
        } else {
            Core3::from_fn(lx + ly, n, rx + ry, |a, i, b| match (a < lx, b < rx) {
                (true, true) => cx.get(a, i, b),
                (false, false) => cy.get(a - lx, i, b - rx),
                _ => 0.0,
            })
        };
        cores.push(core);
    }
    TtVector::new(cores)
}

/// Exact `A x`; core `k` of the result has ranks `R_k(A)·r_k(x)`.
pub fn tt_matvec(a: &TtMatrix, x: &TtVector) -> Result<TtVector> {
    if a.col_sizes() != x.mode_sizes() {
        return Err(TtError::SizeMismatch(format!("operator columns {:?} do not match vector modes {:?}", a.col_sizes(), x.mode_sizes())));
    }
    let cores = a
        .cores()
        .iter()
        .zip(x.cores())
        .map(|(ac, xc)| {
            let (ra0, n, m, ra1) = ac.shape();
            let (rx0, _, rx1) = xc.shape();
            // (β0 j) × (i β1) reshaping of the operator core
            let amat = DMatrix::from_fn(ra0 * m, n * ra1, |row, col| {
                let (b0, j) = (row % ra0, row / ra0);
                let (i, b1) = (col % n, col / n);
                ac.get(b0, i, j, b1)
            });
            // x as (α0 α1) × j
            let xmat = DMatrix::from_fn(rx0 * rx1, m, |row, j| {
                let (a0, a1) = (row % rx0, row / rx0);
                xc.get(a0, j, a1)
            });
            let mut out = Core3::zeros(ra0 * rx0, n, ra1 * rx1);
            for b0 in 0..ra0 {
                // slice of amat rows for fixed β0
                let sub = DMatrix::from_fn(m, n * ra1, |j, col| amat[(b0 + ra0 * j, col)]);
                let prod = &xmat * sub; // (α0 α1) × (i β1)
                for col in 0..n * ra1 {
                    let (i, b1) = (col % n, col / n);
                    for row in 0..rx0 * rx1 {
                        let (a0, a1) = (row % rx0, row / rx0);
                        out.set(b0 + ra0 * a0, i, b1 + ra1 * a1, prod[(row, col)]);
                    }
                }
            }
            out
        })
        .collect();
    TtVector::new(cores)
}

/// Exact inner product by left-to-right environment contraction.
pub fn tt_dot(x: &TtVector, y: &TtVector) -> Result<f64> {
    check_same_sizes(x, y)?;
    // env is r_k(x) × r_k(y)
    let mut env = DMatrix::from_element(1, 1, 1.0);
    for (cx, cy) in x.cores().iter().zip(y.cores()) {
        // t = envᵀ-contracted: (r(x) × (n r'(y))) = env · right_unfolding(y)
        let t = &env * cy.right_unfolding();
        let t = DMatrix::from_column_slice(cx.left_rank() * cx.mode_size(), cy.right_rank(), t.as_slice());
        env = cx.left_unfolding().transpose() * t;
    }
    Ok(env[(0, 0)])
}

/// `√(x, x)` with tiny negative round-off clamped to zero.
pub fn tt_norm(x: &TtVector) -> f64 {
    let s = tt_dot(x, x).expect("same tensor");
    s.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::Direction;
    use alloc::vec;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn add_zero_multiple_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = TtVector::random(&[2, 3, 2], &[2, 2], &mut rng).unwrap();
        let y = TtVector::random(&[2, 3, 2], &[3, 2], &mut rng).unwrap();
        let s = tt_add(&x, &y, 1.0, 0.0).unwrap();
        assert_eq!(s.ranks(), vec![1, 5, 4, 1]);
        assert_eq!(s.to_dense().unwrap(), x.to_dense().unwrap());
    }

    #[test]
    fn difference_rounds_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = TtVector::random(&[3, 3, 3], &[2, 3], &mut rng).unwrap();
        let z = tt_add(&x, &x, 1.0, -1.0).unwrap().round(1e-12, None);
        assert_eq!(z.ranks(), vec![1, 1, 1, 1]);
        assert!(z.to_dense().unwrap().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn identity_operator_leaves_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = TtVector::random(&[2, 3, 2], &[2, 2], &mut rng).unwrap();
        let y = tt_matvec(&TtMatrix::identity(&[2, 3, 2]).unwrap(), &x).unwrap();
        assert_eq!(y.to_dense().unwrap(), x.to_dense().unwrap());
    }

    #[test]
    fn matvec_ranks_multiply_and_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l: Vec<DMatrix<f64>> = (0..2).map(|_| DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0))).collect();
        let a = TtMatrix::kronecker_sum(&l).unwrap();
        let x = TtVector::random(&[3, 3], &[2], &mut rng).unwrap();
        let y = tt_matvec(&a, &x).unwrap();
        assert_eq!(y.ranks(), vec![1, 4, 1]);
        let expect = a.to_dense().unwrap() * DVector::from_vec(x.to_dense().unwrap());
        let got = DVector::from_vec(y.to_dense().unwrap());
        assert!((got - &expect).norm() < 1e-13 * expect.norm());
    }

    #[test]
    fn dot_of_left_orthogonal_is_last_core_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = TtVector::random(&[2, 3, 4], &[2, 3], &mut rng).unwrap().orthogonalize(Direction::Left, 2);
        let g = x.core(2).frobenius_norm();
        assert!((tt_dot(&x, &x).unwrap() - g * g).abs() < 1e-12 * g * g);
    }

    #[test]
    fn orthogonal_rank_one_tensors() {
        let x = TtVector::rank_one(&[vec![1.0, 0.0], vec![1.0, 2.0]]).unwrap();
        let y = TtVector::rank_one(&[vec![0.0, 3.0], vec![5.0, 1.0]]).unwrap();
        assert!(tt_dot(&x, &y).unwrap().abs() < 1e-14);
    }

    #[test]
    fn size_mismatch_is_reported() {
        let x = TtVector::ones(&[2, 2]).unwrap();
        let y = TtVector::ones(&[2, 3]).unwrap();
        assert!(tt_dot(&x, &y).is_err());
        assert!(tt_add(&x, &y, 1.0, 1.0).is_err());
        assert!(tt_matvec(&TtMatrix::identity(&[2, 3]).unwrap(), &x).is_err());
    }
}
