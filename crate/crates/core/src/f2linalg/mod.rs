//! Bit-packed linear algebra over F2.

mod bitmatrix;
mod bitvec;

pub use bitmatrix::{sample_span, BitMatrix, RowEchelon};
pub use bitvec::BitVec;
