//! Reference dense kernels: GEMM, Householder QR and LU, unblocked and
//! blocked, plus triangular solves. These are the functional oracle for the
//! Faddeeva engine and the cycle model.

mod gemm;
mod lu;
mod qr;
mod trsm;

pub use gemm::{gemm, gemm_blocked, matmul};
pub use lu::{getrf, getrf2, lu_solve, LuFactors, PIVOT_THRESHOLD};
pub use qr::{geqr2, geqrf, QrFactors};
pub use trsm::trsm_upper;
