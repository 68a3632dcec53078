//! The Modified Faddeeva Algorithm on the compound matrix
//!
//! ```text
//!     M = [  A   B ]
//!         [ −C   D ]
//! ```
//!
//! Step 1 triangularizes `A` with Householder reflectors, applying the same
//! reflectors to `B`, which leaves `[R | QᵀB]` on top. Step 2 eliminates the
//! bottom-left block row by row against the diagonal of `R` (Gaussian
//! elimination, no pivoting since `R` is triangular), applying the same row
//! operations to `D`. What remains in the `D` position is the Schur
//! complement `D + C·A⁻¹·B`.
//!
//! The menu operations ([`op_multiply`], [`op_add`], [`op_solve`],
//! [`op_schur`]) choose the four blocks so that the Schur complement is the
//! wanted result. Identity and zero blocks are materialized, never
//! special-cased, on this reference path.

mod program;

pub use program::{
    execute, Blocks, Buffers, CallRecord, MenuCall, MenuOp, MfaCall, Operand, Source,
};

use crate::dense::geqrf;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Panel width used for the QR of the `A` block. Blocks up to this size are
/// factored by a single unblocked panel.
pub const QR_BLOCK: usize = 32;

/// `|R_ii| <= NEAR_SINGULAR_REL·‖A‖_max` aborts the elimination.
pub const NEAR_SINGULAR_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CompoundMatrix {
    a: Matrix,
    b: Matrix,
    neg_c: Matrix,
    d: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchurResult {
    pub value: Matrix,
    /// Smallest `|R_ii|` met while triangularizing `A`.
    pub r_diag_min_abs: f64,
}

/// Assembles `[[A, B], [−C, D]]`. `c` is passed un-negated.
pub fn build_compound(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Result<CompoundMatrix> {
    CompoundMatrix::from_neg_c(a.clone(), b.clone(), c.neg(), d.clone())
}

impl CompoundMatrix {
    /// Assembles the compound matrix from an already negated `−C` block.
    pub fn from_neg_c(a: Matrix, b: Matrix, neg_c: Matrix, d: Matrix) -> Result<Self> {
        let shape = |m: &Matrix| format!("{}x{}", m.rows(), m.cols());
        if !a.is_square() {
            return Err(Error::dims(format!("A must be square, got {}", shape(&a))));
        }
        if b.rows() != a.rows() {
            return Err(Error::dims(format!(
                "B has {} rows but A is {}",
                b.rows(),
                shape(&a)
            )));
        }
        if neg_c.cols() != a.cols() {
            return Err(Error::dims(format!(
                "C has {} columns but A is {}",
                neg_c.cols(),
                shape(&a)
            )));
        }
        if d.rows() != neg_c.rows() || d.cols() != b.cols() {
            return Err(Error::dims(format!(
                "D is {} but C is {} and B is {}",
                shape(&d),
                shape(&neg_c),
                shape(&b)
            )));
        }
        Ok(Self { a, b, neg_c, d })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// The stored `−C` block.
    pub fn neg_c(&self) -> &Matrix {
        &self.neg_c
    }

    pub fn d(&self) -> &Matrix {
        &self.d
    }

    /// `(m, n, k, p)`: `A` is `m×n` (square), `B` is `n×p`, `C` is `k×n`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (
            self.a.rows(),
            self.a.cols(),
            self.neg_c.rows(),
            self.b.cols(),
        )
    }
}

/// Runs both MFA steps and returns `D + C·A⁻¹·B`.
pub fn mfa(m: &CompoundMatrix) -> Result<SchurResult> {
    let (_, n, k, p) = m.dims();

    // Step 1: QR of A, reflectors applied jointly to B.
    let qr = geqrf(&m.a, QR_BLOCK)?;
    let threshold = NEAR_SINGULAR_REL * m.a.max_abs();
    let diag: Vec<f64> = (0..n).map(|i| qr.packed.get(i, i)).collect();
    let r_diag_min_abs = diag.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if let Some(index) = diag.iter().position(|v| v.abs() <= threshold) {
        return Err(Error::NearSingular {
            index,
            r_diag_min_abs,
            threshold,
        });
    }
    let top = qr.apply_qt(&m.b)?;

    // Step 2: annihilate −C against diag(R), carrying D along.
    let mut bottom = m.neg_c.clone();
    let mut d = m.d.clone();
    for j in 0..n {
        let recip = 1.0 / qr.packed.get(j, j);
        for i in 0..k {
            let l = bottom.get(i, j) * recip;
            for c in (j + 1)..n {
                let v = bottom.get(i, c) - l * qr.packed.get(j, c);
                bottom.set(i, c, v);
            }
            for c in 0..p {
                let v = d.get(i, c) - l * top.get(j, c);
                d.set(i, c, v);
            }
        }
    }
    Ok(SchurResult {
        value: d,
        r_diag_min_abs,
    })
}

/// `c·b` via `A = I`, `D = 0`.
pub fn op_multiply(c: &Matrix, b: &Matrix) -> Result<Matrix> {
    if c.cols() != b.rows() {
        return Err(Error::dims(format!(
            "multiply: c.cols ({}) != b.rows ({})",
            c.cols(),
            b.rows()
        )));
    }
    let n = c.cols();
    op_schur(
        &Matrix::identity(n),
        b,
        c,
        &Matrix::zeros(c.rows(), b.cols()),
    )
}

/// `d + b` via `A = I`, `C = I`.
pub fn op_add(b: &Matrix, d: &Matrix) -> Result<Matrix> {
    if b.shape() != d.shape() {
        return Err(Error::dims(format!(
            "add: b is {}x{} but d is {}x{}",
            b.rows(),
            b.cols(),
            d.rows(),
            d.cols()
        )));
    }
    let n = b.rows();
    op_schur(&Matrix::identity(n), b, &Matrix::identity(n), d)
}

/// `a⁻¹·b` via `C = I`, `D = 0`; the inverse is applied through the QR of `a`.
pub fn op_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() || a.rows() != b.rows() {
        return Err(Error::dims(format!(
            "solve: a is {}x{}, b is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let n = a.rows();
    op_schur(a, b, &Matrix::identity(n), &Matrix::zeros(n, b.cols()))
}

/// `d + c·a⁻¹·b`.
pub fn op_schur(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Result<Matrix> {
    Ok(mfa(&build_compound(a, b, c, d)?)?.value)
}
