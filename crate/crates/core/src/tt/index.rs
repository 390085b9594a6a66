use alloc::vec::Vec;

use crate::{Result, TtError};

/// Ordering used to flatten a multi-index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Endian {
    /// First index runs fastest: `f = i_1 + i_2 n_1 + … + i_d n_1⋯n_{d−1}`.
    #[default]
    Little,
    /// Last index runs fastest.
    Big,
}

/// Zero-based multi-index `(i_1, …, i_d)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiIndex {
    pub indices: Vec<usize>,
    pub endian: Endian,
}

impl MultiIndex {
    pub fn new(indices: Vec<usize>) -> Self {
        MultiIndex { indices, endian: Endian::Little }
    }

    pub fn big_endian(indices: Vec<usize>) -> Self {
        MultiIndex { indices, endian: Endian::Big }
    }
}

fn check_bounds(mi: &MultiIndex, sizes: &[usize]) -> Result<()> {
    if mi.indices.len() != sizes.len() {
        return Err(TtError::SizeMismatch(alloc::format!("multi-index has {} components, tensor has {} modes", mi.indices.len(), sizes.len())));
    }
    for (&i, &n) in mi.indices.iter().zip(sizes) {
        if i >= n {
            return Err(TtError::OutOfBounds { what: "mode", index: i, bound: n });
        }
    }
    Ok(())
}

/// Flattens a multi-index according to its endianness.
pub fn flat_index(mi: &MultiIndex, sizes: &[usize]) -> Result<usize> {
    check_bounds(mi, sizes)?;
    let mut f = 0usize;
    match mi.endian {
        Endian::Little => {
            for (&i, &n) in mi.indices.iter().zip(sizes).rev() {
                f = f * n + i;
            }
        }
        Endian::Big => {
            for (&i, &n) in mi.indices.iter().zip(sizes) {
                f = f * n + i;
            }
        }
    }
    Ok(f)
}

/// Inverse of [`flat_index`].
pub fn multi_index(f: usize, sizes: &[usize], endian: Endian) -> Result<MultiIndex> {
    let total = super::checked_product(sizes.iter().copied());
    if f as u128 >= total {
        return Err(TtError::OutOfBounds { what: "flat", index: f, bound: total.min(usize::MAX as u128) as usize });
    }
    let mut indices = alloc::vec![0; sizes.len()];
    let mut rest = f;
    match endian {
        Endian::Little => {
            for (slot, &n) in indices.iter_mut().zip(sizes) {
                *slot = rest % n;
                rest /= n;
            }
        }
        Endian::Big => {
            for (slot, &n) in indices.iter_mut().zip(sizes).rev() {
                *slot = rest % n;
                rest /= n;
            }
        }
    }
    Ok(MultiIndex { indices, endian })
}
