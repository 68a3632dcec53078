//! Dense kernels, a Modified Faddeeva engine built on them, a Kalman filter
//! expressed as Faddeeva calls, and a cycle model of a CGRA processing
//! element and tile array that executes those workloads.

// Index loops mirror the textbook kernels; `!(x <= tol)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cgra;
pub mod dense;
pub mod error;
pub mod faddeeva;
pub mod gen;
pub mod kalman;
pub mod matrix;

pub use error::{Error, Result};
pub use matrix::Matrix;
