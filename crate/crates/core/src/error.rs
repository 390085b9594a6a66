use alloc::string::String;
use core::fmt;

/// Errors raised by tensor-train construction, algebra and the solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum TtError {
    /// A multi-index component or core position is out of range.
    OutOfBounds { what: &'static str, index: usize, bound: usize },
    /// Mode sizes or ranks of two operands do not agree.
    SizeMismatch(String),
    /// A core list violates the rank chain (`r_0 = r_d = 1`, neighbours agree).
    InvalidRanks(String),
    /// A dense expansion would exceed the configured entry cap.
    DenseCapExceeded { entries: u128, cap: usize },
    /// A mode size is not a power of the quantization base.
    NotPowerOf { size: usize, base: usize },
    /// An argument is outside its admissible range.
    InvalidArgument(String),
    /// The matrix is not symmetric positive definite.
    NotSpd(String),
    /// A dense system is numerically singular.
    Singular,
    /// An operator product exceeds the configured rank cap.
    RankBlowup { rank: usize, cap: usize },
}

impl fmt::Display for TtError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TtError::OutOfBounds { what, index, bound } => {
                write!(f, "{what} index {index} out of bounds (limit {bound})")
            }
            TtError::SizeMismatch(s) => write!(f, "size mismatch: {s}"),
            TtError::InvalidRanks(s) => write!(f, "invalid ranks: {s}"),
            TtError::DenseCapExceeded { entries, cap } => {
                write!(f, "refusing dense expansion of {entries} entries (cap is {cap}); raise the cap explicitly")
            }
            TtError::NotPowerOf { size, base } => {
                write!(f, "mode size {size} is not a power of {base}")
            }
            TtError::InvalidArgument(s) => write!(f, "invalid argument: {s}"),
            TtError::NotSpd(s) => write!(f, "matrix is not symmetric positive definite: {s}"),
            TtError::Singular => write!(f, "matrix is numerically singular"),
            TtError::RankBlowup { rank, cap } => write!(f, "operator rank {rank} exceeds cap {cap}; round the product or raise the cap"),
        }
    }
}

#[cfg(feature = "std")]
extern crate std;
#[cfg(feature = "std")]
impl std::error::Error for TtError {}

pub type Result<T> = core::result::Result<T, TtError>;
