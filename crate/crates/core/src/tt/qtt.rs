use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use super::{Core3, Core4, TtMatrix, TtVector};
use crate::linalg::svd_truncated;
use crate::{Result, TtError};

/// Exponent `L` with `base^L = n`.
fn level(n: usize, base: usize) -> Result<usize> {
    if base < 2 || n == 0 {
        return Err(TtError::NotPowerOf { size: n, base });
    }
    let mut l = 0;
    let mut m = 1usize;
    while m < n {
        m = m.checked_mul(base).ok_or(TtError::NotPowerOf { size: n, base })?;
        l += 1;
    }
    if m != n {
        return Err(TtError::NotPowerOf { size: n, base });
    }
    Ok(l)
}

/// Mode sizes after quantization (modes of size 1 are kept as is).
pub fn quantized_sizes(sizes: &[usize], base: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for &n in sizes {
        let l = level(n, base)?;
        if l <= 1 {
            out.push(n);
        } else {
            out.extend(core::iter::repeat_n(base, l));
        }
    }
    Ok(out)
}

/// Splits a core whose mode is a product of `parts` (first part fastest)
/// into one core per part by successive truncated SVDs.
fn split_core(core: &Core3, parts: &[usize], rel_tol: f64) -> Vec<Core3> {
    if parts.len() <= 1 {
        return vec![core.clone()];
    }
    let norm = core.frobenius_norm();
    let budget = rel_tol * norm / ((parts.len() - 1) as f64).sqrt();
    let mut out = Vec::with_capacity(parts.len());
    let mut left = core.left_rank();
    let mut rest = core.data().to_vec();
    let mut rest_mode: usize = parts.iter().product();
    let right = core.right_rank();
    for &p in &parts[..parts.len() - 1] {
        rest_mode /= p;
        let m = DMatrix::from_column_slice(left * p, rest_mode * right, &rest);
        let t = svd_truncated(m, budget, None);
        let r = t.s.len();
        out.push(Core3::from_left_unfolding(&t.u, p));
        let mut svt = t.vt;
        for (j, s) in t.s.iter().enumerate() {
            svt.row_mut(j).scale_mut(*s);
        }
        rest = svt.as_slice().to_vec();
        left = r;
    }
    out.push(Core3::from_vec(left, *parts.last().expect("nonempty"), right, rest).expect("consistent split"));
    out
}

/// Quantizes every mode of size `base^L` into `L` modes of size `base`
/// (least significant digit first). Splits are exact up to `rel_tol`
/// relative Frobenius truncation per core; pass 0 for an exact split.
pub fn qtt_quantize_vector(x: &TtVector, base: usize, rel_tol: f64) -> Result<TtVector> {
    let mut cores = Vec::new();
    for core in x.cores() {
        let l = level(core.mode_size(), base)?;
        let parts = vec![base; l.max(1)];
        if l <= 1 {
            cores.push(core.clone());
        } else {
            cores.extend(split_core(core, &parts, rel_tol));
        }
    }
    TtVector::new(cores)
}

/// Operator counterpart of [`qtt_quantize_vector`]; row and column digits
/// are paired per binary mode.
pub fn qtt_quantize_matrix(a: &TtMatrix, base: usize, rel_tol: f64) -> Result<TtMatrix> {
    let mut cores = Vec::new();
    for core in a.cores() {
        let (r0, n, m, r1) = core.shape();
        let ln = level(n, base)?;
        let lm = level(m, base)?;
        if ln != lm {
            return Err(TtError::SizeMismatch(format!("operator core {n}x{m} is not square in digits")));
        }
        if ln <= 1 {
            cores.push(core.clone());
            continue;
        }
        // regroup as (β0, i_0, j_0, i_1, j_1, …, β1)
        let bb = base * base;
        let mut fused = Core3::zeros(r0, n * m, r1);
        for b1 in 0..r1 {
            for j in 0..m {
                for i in 0..n {
                    let (mut ii, mut jj, mut f, mut w) = (i, j, 0usize, 1usize);
                    for _ in 0..ln {
                        f += w * ((ii % base) + base * (jj % base));
                        ii /= base;
                        jj /= base;
                        w *= bb;
                    }
                    for b0 in 0..r0 {
                        fused.set(b0, f, b1, core.get(b0, i, j, b1));
                    }
                }
            }
        }
        let parts = vec![bb; ln];
        for c in split_core(&fused, &parts, rel_tol) {
            cores.push(Core4::from_core3(c, base, base)?);
        }
    }
    TtMatrix::new(cores)
}

/// Dense vector of a quantized tensor; since digits are little-endian the
/// flat ordering coincides with the unquantized one.
pub fn dequantize_dense(x: &TtVector) -> Result<Vec<f64>> {
    x.to_dense()
}
