//! LU factorization with optional partial pivoting.
//!
//! Packing follows LAPACK: `U` on and above the diagonal, the unit-lower `L`
//! strictly below it. Without pivoting a pivot with `|u_kk| <= 1e-300` is an
//! error; with pivoting only an entirely zero pivot column is.

use crate::dense::gemm::gemm;
use crate::dense::trsm::trsm_upper;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const PIVOT_THRESHOLD: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct LuFactors {
    pub packed: Matrix,
    /// `perm[i]` is the original row that ended up in row `i`.
    pub perm: Option<Vec<usize>>,
}

fn check_square(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::dims(format!(
            "LU requires a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    Ok(())
}

fn swap_rows(a: &mut Matrix, r1: usize, r2: usize) {
    if r1 == r2 {
        return;
    }
    for j in 0..a.cols() {
        let t = a.get(r1, j);
        a.set(r1, j, a.get(r2, j));
        a.set(r2, j, t);
    }
}

/// Eliminates columns `c0..c1`, updating only columns `< c1`. Row swaps are
/// applied across the full width.
fn factor_panel(a: &mut Matrix, c0: usize, c1: usize, perm: Option<&mut Vec<usize>>) -> Result<()> {
    let n = a.rows();
    let mut perm = perm;
    for j in c0..c1 {
        if let Some(p) = perm.as_deref_mut() {
            let mut best = j;
            for i in (j + 1)..n {
                if a.get(i, j).abs() > a.get(best, j).abs() {
                    best = i;
                }
            }
            if a.get(best, j) == 0.0 {
                return Err(Error::Singular { index: j });
            }
            swap_rows(a, j, best);
            p.swap(j, best);
        } else if a.get(j, j).abs() <= PIVOT_THRESHOLD {
            return Err(Error::SingularPivot {
                index: j,
                value: a.get(j, j).abs(),
            });
        }
        let recip = 1.0 / a.get(j, j);
        for i in (j + 1)..n {
            a.set(i, j, a.get(i, j) * recip);
        }
        for c in (j + 1)..c1 {
            let ujc = a.get(j, c);
            for i in (j + 1)..n {
                let v = a.get(i, c) - a.get(i, j) * ujc;
                a.set(i, c, v);
            }
        }
    }
    Ok(())
}

/// Unblocked right-looking LU.
pub fn getrf2(a: &Matrix, pivot: bool) -> Result<LuFactors> {
    check_square(a)?;
    let n = a.rows();
    let mut packed = a.clone();
    let mut perm = pivot.then(|| (0..n).collect::<Vec<_>>());
    factor_panel(&mut packed, 0, n, perm.as_mut())?;
    Ok(LuFactors { packed, perm })
}

/// Blocked right-looking LU: panel factorization, `U12 = L11⁻¹·A12`, then the
/// trailing update `A22 ← A22 − L21·U12` through `gemm`.
pub fn getrf(a: &Matrix, pivot: bool, block: usize) -> Result<LuFactors> {
    check_square(a)?;
    if block == 0 {
        return Err(Error::Invalid("getrf: block must be >= 1".into()));
    }
    let n = a.rows();
    let mut packed = a.clone();
    let mut perm = pivot.then(|| (0..n).collect::<Vec<_>>());
    for j0 in (0..n).step_by(block) {
        let j1 = (j0 + block).min(n);
        factor_panel(&mut packed, j0, j1, perm.as_mut())?;
        if j1 == n {
            break;
        }
        // U12: forward substitution with the unit-lower diagonal block.
        for c in j1..n {
            for r in j0..j1 {
                let mut v = packed.get(r, c);
                for k in j0..r {
                    v -= packed.get(r, k) * packed.get(k, c);
                }
                packed.set(r, c, v);
            }
        }
        let l21 = packed.submatrix(j1, j0, n - j1, j1 - j0);
        let u12 = packed.submatrix(j0, j1, j1 - j0, n - j1);
        let a22 = packed.submatrix(j1, j1, n - j1, n - j1);
        let a22 = gemm(-1.0, &l21, &u12, 1.0, &a22)?;
        packed.set_submatrix(j1, j1, &a22);
    }
    Ok(LuFactors { packed, perm })
}

impl LuFactors {
    pub fn n(&self) -> usize {
        self.packed.rows()
    }

    pub fn l(&self) -> Matrix {
        let n = self.n();
        Matrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.packed.get(i, j),
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => 0.0,
        })
    }

    pub fn u(&self) -> Matrix {
        let n = self.n();
        Matrix::from_fn(
            n,
            n,
            |i, j| if i <= j { self.packed.get(i, j) } else { 0.0 },
        )
    }

    /// Applies the row permutation: returns `P·b`.
    pub fn permute(&self, b: &Matrix) -> Matrix {
        match &self.perm {
            None => b.clone(),
            Some(p) => Matrix::from_fn(b.rows(), b.cols(), |i, j| b.get(p[i], j)),
        }
    }

    /// Solves `A·X = b` using the factors.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.n();
        if b.rows() != n {
            return Err(Error::dims(format!(
                "lu solve: b has {} rows, factors are {n}x{n}",
                b.rows()
            )));
        }
        let mut y = self.permute(b);
        for c in 0..y.cols() {
            for i in 0..n {
                let mut v = y.get(i, c);
                for k in 0..i {
                    v -= self.packed.get(i, k) * y.get(k, c);
                }
                y.set(i, c, v);
            }
        }
        trsm_upper(&self.u(), &y)
    }
}

/// `A⁻¹·b` through partially pivoted LU; the reference solver used as an
/// oracle elsewhere.
pub fn lu_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    getrf2(a, true)?.solve(b)
}
