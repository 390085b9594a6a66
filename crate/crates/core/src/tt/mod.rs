//! Tensor-train vectors and matrices and the multilinear algebra on them.

mod algebra;
mod cores;
mod index;
mod matrix;
mod qtt;
mod vector;

pub use algebra::{tt_add, tt_dot, tt_matvec, tt_norm};
pub use cores::{Core3, Core4};
pub use index::{flat_index, multi_index, Endian, MultiIndex};
pub use matrix::TtMatrix;
pub use qtt::{dequantize_dense, qtt_quantize_matrix, qtt_quantize_vector, quantized_sizes};
pub use vector::{Direction, OrthoTag, Side, TtVector};

pub(crate) fn checked_product(sizes: impl IntoIterator<Item = usize>) -> u128 {
    sizes.into_iter().fold(1u128, |acc, n| acc.saturating_mul(n as u128))
}

pub(crate) fn check_cap(entries: u128, cap: usize) -> crate::Result<usize> {
    if entries > cap as u128 {
        Err(crate::TtError::DenseCapExceeded { entries, cap })
    } else {
        Ok(entries as usize)
    }
}
