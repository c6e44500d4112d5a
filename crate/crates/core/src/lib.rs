//! Dense stereo disparity from scanline-wise entropic optimal transport.
//!
//! Every row of a rectified stereo pair is treated as a pair of discrete
//! measures over pixel columns. A Sinkhorn solver couples the two rows, the
//! barycentric shift of each source column gives its disparity, and a
//! mass-comparison pass recovers regions hidden from the right camera.

// Negated comparisons below are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod disparity;
pub mod error;
pub mod exact;
pub mod image;
pub mod io;
pub mod matrix;
pub mod measures;
pub mod scene;
pub mod sinkhorn;

pub use error::{Error, Result};
