use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::{Result, TtError};

/// Order-3 tensor-train core of shape `left × mode × right`.
///
/// Entries are stored with the left rank index fastest, then the mode
/// index, then the right rank index. Both unfoldings are therefore plain
/// column-major reshapes of the same buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Core3 {
    left: usize,
    mode: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core3 {
    pub fn zeros(left: usize, mode: usize, right: usize) -> Self {
        Core3 { left, mode, right, data: vec![0.0; left * mode * right] }
    }

    pub fn from_vec(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != left * mode * right {
            return Err(TtError::SizeMismatch(format!("core {left}x{mode}x{right} needs {} entries, got {}", left * mode * right, data.len())));
        }
        Ok(Core3 { left, mode, right, data })
    }

    pub fn from_fn(left: usize, mode: usize, right: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut c = Core3::zeros(left, mode, right);
        for b in 0..right {
            for i in 0..mode {
                for a in 0..left {
                    c.data[a + left * (i + mode * b)] = f(a, i, b);
                }
            }
        }
        c
    }

    pub fn random<R: Rng + ?Sized>(left: usize, mode: usize, right: usize, rng: &mut R) -> Self {
        let data = (0..left * mode * right).map(|_| rng.random_range(-1.0..1.0)).collect();
        Core3 { left, mode, right, data }
    }

    #[inline]
    pub fn left_rank(&self) -> usize {
        self.left
    }
    #[inline]
    pub fn mode_size(&self) -> usize {
        self.mode
    }
    #[inline]
    pub fn right_rank(&self) -> usize {
        self.right
    }
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.left, self.mode, self.right)
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[a + self.left * (i + self.mode * b)]
    }
    #[inline]
    pub fn set(&mut self, a: usize, i: usize, b: usize, v: f64) {
        self.data[a + self.left * (i + self.mode * b)] = v;
    }

    /// `(left·mode) × right` unfolding.
    pub fn left_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.left * self.mode, self.right, &self.data)
    }

    /// `left × (mode·right)` unfolding.
    pub fn right_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.left, self.mode * self.right, &self.data)
    }

    pub fn from_left_unfolding(m: &DMatrix<f64>, mode: usize) -> Self {
        debug_assert_eq!(m.nrows() % mode.max(1), 0);
        Core3 { left: m.nrows() / mode, mode, right: m.ncols(), data: m.as_slice().to_vec() }
    }

    pub fn from_right_unfolding(m: &DMatrix<f64>, mode: usize) -> Self {
        debug_assert_eq!(m.ncols() % mode.max(1), 0);
        Core3 { left: m.nrows(), mode, right: m.ncols() / mode, data: m.as_slice().to_vec() }
    }

    /// Matrix slice `X(i)` of shape `left × right`.
    pub fn slice(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.left, self.right, |a, b| self.get(a, i, b))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Multiplies the left rank index by `m` (`m` is `new_left × left`).
    pub fn left_multiply(&self, m: &DMatrix<f64>) -> Core3 {
        let prod = m * self.right_unfolding();
        Core3::from_right_unfolding(&prod, self.mode)
    }

    /// Multiplies the right rank index by `m` (`m` is `right × new_right`).
    pub fn right_multiply(&self, m: &DMatrix<f64>) -> Core3 {
        let prod = self.left_unfolding() * m;
        Core3::from_left_unfolding(&prod, self.mode)
    }

    /// Largest deviation of the left unfolding from orthonormal columns.
    pub fn left_orthogonality_defect(&self) -> f64 {
        let u = self.left_unfolding();
        let g = u.transpose() * &u;
        (g - DMatrix::identity(self.right, self.right)).amax()
    }

    /// Largest deviation of the right unfolding from orthonormal rows.
    pub fn right_orthogonality_defect(&self) -> f64 {
        let v = self.right_unfolding();
        let g = &v * v.transpose();
        (g - DMatrix::identity(self.left, self.left)).amax()
    }
}

/// Order-4 tensor-train operator core of shape `left × rows × cols × right`,
/// stored with the left rank fastest, then row, column and right rank.
#[derive(Clone, Debug, PartialEq)]
pub struct Core4 {
    left: usize,
    rows: usize,
    cols: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core4 {
    pub fn zeros(left: usize, rows: usize, cols: usize, right: usize) -> Self {
        Core4 { left, rows, cols, right, data: vec![0.0; left * rows * cols * right] }
    }

    pub fn from_vec(left: usize, rows: usize, cols: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != left * rows * cols * right {
            return Err(TtError::SizeMismatch(format!(
                "operator core {left}x{rows}x{cols}x{right} needs {} entries, got {}",
                left * rows * cols * right,
                data.len()
            )));
        }
        Ok(Core4 { left, rows, cols, right, data })
    }

    /// Core holding one dense block per (left, right) rank pair:
    /// `blocks[a][b]` is `rows × cols` or `None` for a zero block.
    pub fn from_blocks(blocks: &[Vec<Option<DMatrix<f64>>>], rows: usize, cols: usize) -> Self {
        let left = blocks.len();
        let right = blocks.first().map_or(0, |r| r.len());
        let mut c = Core4::zeros(left, rows, cols, right);
        for (a, row) in blocks.iter().enumerate() {
            for (b, blk) in row.iter().enumerate() {
                if let Some(m) = blk {
                    for j in 0..cols {
                        for i in 0..rows {
                            c.set(a, i, j, b, m[(i, j)]);
                        }
                    }
                }
            }
        }
        c
    }

    pub fn random<R: Rng + ?Sized>(left: usize, rows: usize, cols: usize, right: usize, rng: &mut R) -> Self {
        let data = (0..left * rows * cols * right).map(|_| rng.random_range(-1.0..1.0)).collect();
        Core4 { left, rows, cols, right, data }
    }

    #[inline]
    pub fn left_rank(&self) -> usize {
        self.left
    }
    #[inline]
    pub fn row_size(&self) -> usize {
        self.rows
    }
    #[inline]
    pub fn col_size(&self) -> usize {
        self.cols
    }
    #[inline]
    pub fn right_rank(&self) -> usize {
        self.right
    }
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.left, self.rows, self.cols, self.right)
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, j: usize, b: usize) -> f64 {
        self.data[a + self.left * (i + self.rows * (j + self.cols * b))]
    }
    #[inline]
    pub fn set(&mut self, a: usize, i: usize, j: usize, b: usize, v: f64) {
        self.data[a + self.left * (i + self.rows * (j + self.cols * b))] = v;
    }

    /// Dense `rows × cols` block for the rank pair `(a, b)`.
    pub fn block(&self, a: usize, b: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(a, i, j, b))
    }

    /// The same buffer seen as a vector core with fused mode `(row, col)`.
    pub fn as_core3(&self) -> Core3 {
        Core3 { left: self.left, mode: self.rows * self.cols, right: self.right, data: self.data.clone() }
    }

    pub fn from_core3(c: Core3, rows: usize, cols: usize) -> Result<Self> {
        if c.mode != rows * cols {
            return Err(TtError::SizeMismatch(format!("fused mode {} does not split into {rows}x{cols}", c.mode)));
        }
        Ok(Core4 { left: c.left, rows, cols, right: c.right, data: c.data })
    }

    /// Swaps row and column indices.
    pub fn transpose(&self) -> Core4 {
        let mut t = Core4::zeros(self.left, self.cols, self.rows, self.right);
        for b in 0..self.right {
            for j in 0..self.cols {
                for i in 0..self.rows {
                    for a in 0..self.left {
                        t.set(a, j, i, b, self.get(a, i, j, b));
                    }
                }
            }
        }
        t
    }
}
