//! Householder QR in LAPACK packing.
//!
//! Reflector `j` is `H_j = I − tau_j·v·vᵀ` with `v[0] = 1` implicit and the
//! rest of `v` stored below the diagonal of column `j`. The diagonal of `R`
//! takes the sign opposite to the leading entry of its column subproblem:
//! `R_jj = −sign(x_0)·‖x‖` (with `sign(0) = +1`). A column whose entries
//! below the diagonal are already zero is left alone (`tau_j = 0`), so the
//! factorization of the identity is the identity.

use crate::dense::gemm::gemm;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors {
    pub packed: Matrix,
    pub tau: Vec<f64>,
}

/// Outcome of generating one reflector for a column `x`.
pub(crate) struct Reflector {
    /// New leading entry (`beta`, or `x_0` when no reflection happens).
    pub head: f64,
    pub tau: f64,
    /// Scale applied to the tail of `x` to obtain `v`.
    pub scale: f64,
}

/// Reflector for a column with leading entry `alpha` and tail squared norm
/// `tail_ss`. The operation order here is mirrored by the cycle-model
/// lowering; keep the two in step.
pub(crate) fn make_reflector(alpha: f64, tail_ss: f64) -> Reflector {
    if tail_ss == 0.0 {
        return Reflector {
            head: alpha,
            tau: 0.0,
            scale: 0.0,
        };
    }
    let norm = (alpha * alpha + tail_ss).sqrt();
    let beta = if alpha >= 0.0 { -norm } else { norm };
    Reflector {
        head: beta,
        tau: (beta - alpha) / beta,
        scale: 1.0 / (alpha - beta),
    }
}

/// Applies `H = I − tau·v·vᵀ` (with `v[0] = 1`) to the column `y` in place.
#[inline]
pub(crate) fn apply_reflector(v_tail: &[f64], tau: f64, y: &mut [f64]) {
    debug_assert_eq!(v_tail.len() + 1, y.len());
    let mut w = y[0];
    for (vi, yi) in v_tail.iter().zip(&y[1..]) {
        w += vi * yi;
    }
    let t = tau * w;
    y[0] -= t;
    for (vi, yi) in v_tail.iter().zip(&mut y[1..]) {
        *yi -= t * vi;
    }
}

/// Factors columns `c0..c1` of `a` (rows `c0..`) in place and applies each
/// reflector to the remaining panel columns only.
fn factor_panel(a: &mut Matrix, c0: usize, c1: usize, tau: &mut [f64]) {
    let m = a.rows();
    for j in c0..c1 {
        if j + 1 >= m {
            tau[j] = 0.0;
            continue;
        }
        let col = &a.col(j)[j..];
        let mut ss = 0.0;
        for x in &col[1..] {
            ss += x * x;
        }
        let refl = make_reflector(col[0], ss);
        tau[j] = refl.tau;
        if refl.tau == 0.0 {
            continue;
        }
        let rows = a.rows();
        {
            let data = a.data_mut();
            data[j + j * rows] = refl.head;
            for x in &mut data[j * rows + j + 1..(j + 1) * rows] {
                *x *= refl.scale;
            }
        }
        let v_tail: Vec<f64> = a.col(j)[j + 1..].to_vec();
        for c in (j + 1)..c1 {
            let data = a.data_mut();
            apply_reflector(&v_tail, refl.tau, &mut data[c * rows + j..(c + 1) * rows]);
        }
    }
}

fn check_shape(a: &Matrix) -> Result<()> {
    if a.rows() < a.cols() {
        return Err(Error::dims(format!(
            "QR requires rows >= cols, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    Ok(())
}

/// Unblocked Householder QR: one reflector per column, each applied to the
/// trailing columns as a matrix-vector update.
pub fn geqr2(a: &Matrix) -> Result<QrFactors> {
    check_shape(a)?;
    let mut packed = a.clone();
    let mut tau = vec![0.0; a.cols()];
    factor_panel(&mut packed, 0, a.cols(), &mut tau);
    Ok(QrFactors { packed, tau })
}

/// Blocked Householder QR. Panels of `block` columns are factored with the
/// unblocked kernel; the trailing matrix is then updated reflector by
/// reflector with `gemm`: `W = vᵀ·C`, `C ← C − tau·v·W`.
pub fn geqrf(a: &Matrix, block: usize) -> Result<QrFactors> {
    check_shape(a)?;
    if block == 0 {
        return Err(Error::Invalid("geqrf: block must be >= 1".into()));
    }
    let (m, n) = a.shape();
    let mut packed = a.clone();
    let mut tau = vec![0.0; n];
    for j0 in (0..n).step_by(block) {
        let j1 = (j0 + block).min(n);
        factor_panel(&mut packed, j0, j1, &mut tau);
        if j1 == n {
            break;
        }
        for j in j0..j1 {
            if tau[j] == 0.0 {
                continue;
            }
            let len = m - j;
            let mut v = Matrix::zeros(len, 1);
            v.set(0, 0, 1.0);
            for i in 1..len {
                v.set(i, 0, packed.get(j + i, j));
            }
            let trailing = packed.submatrix(j, j1, len, n - j1);
            let w = gemm(
                1.0,
                &v.transpose(),
                &trailing,
                0.0,
                &Matrix::zeros(1, n - j1),
            )?;
            let updated = gemm(-tau[j], &v, &w, 1.0, &trailing)?;
            packed.set_submatrix(j, j1, &updated);
        }
    }
    Ok(QrFactors { packed, tau })
}

impl QrFactors {
    pub fn rows(&self) -> usize {
        self.packed.rows()
    }

    pub fn cols(&self) -> usize {
        self.packed.cols()
    }

    /// The `rows × cols` upper-trapezoidal factor.
    pub fn r(&self) -> Matrix {
        Matrix::from_fn(self.rows(), self.cols(), |i, j| {
            if i <= j {
                self.packed.get(i, j)
            } else {
                0.0
            }
        })
    }

    /// Overwrites `b` with `Qᵀ·b = H_{n−1}···H_0·b`.
    pub fn apply_qt_in_place(&self, b: &mut Matrix) -> Result<()> {
        if b.rows() != self.rows() {
            return Err(Error::dims(format!(
                "apply_qt: b has {} rows, factors have {}",
                b.rows(),
                self.rows()
            )));
        }
        for j in 0..self.cols() {
            self.apply_one(j, b);
        }
        Ok(())
    }

    pub fn apply_qt(&self, b: &Matrix) -> Result<Matrix> {
        let mut out = b.clone();
        self.apply_qt_in_place(&mut out)?;
        Ok(out)
    }

    fn apply_one(&self, j: usize, b: &mut Matrix) {
        let tau = self.tau[j];
        if tau == 0.0 {
            return;
        }
        let m = self.rows();
        let v_tail = &self.packed.col(j)[j + 1..];
        let rows = b.rows();
        let data = b.data_mut();
        for c in 0..data.len() / rows {
            apply_reflector(v_tail, tau, &mut data[c * rows + j..c * rows + m]);
        }
    }

    /// Explicit `rows × rows` orthogonal factor `Q = H_0·H_1···H_{n−1}`.
    pub fn q(&self) -> Matrix {
        let mut q = Matrix::identity(self.rows());
        for j in (0..self.cols()).rev() {
            self.apply_one(j, &mut q);
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::matmul;
    use crate::gen;

    fn check_reconstruction(a: &Matrix, f: &QrFactors) {
        let q = f.q();
        let r = f.r();
        let n = a.rows() as f64;
        let qtq = matmul(&q.transpose(), &q).unwrap();
        assert!(qtq.max_abs_diff(&Matrix::identity(a.rows())) <= 1e-13 * n);
        let qr = matmul(&q, &r).unwrap();
        assert!(qr.max_abs_diff(a) <= 1e-12 * a.max_abs());
        for j in 0..r.cols() {
            for i in (j + 1)..r.rows() {
                assert_eq!(r.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn identity_is_left_alone() {
        let f = geqr2(&Matrix::identity(3)).unwrap();
        assert_eq!(f.packed, Matrix::identity(3));
        assert_eq!(f.tau, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn three_four_column() {
        let a = Matrix::from_rows(&[[3.0], [4.0]]).unwrap();
        let f = geqr2(&a).unwrap();
        assert_eq!(f.r().get(0, 0), -5.0);
        check_reconstruction(&a, &f);
    }

    #[test]
    fn negative_leading_entry_gives_positive_diagonal() {
        let a = Matrix::from_rows(&[[-3.0], [4.0]]).unwrap();
        assert_eq!(geqr2(&a).unwrap().r().get(0, 0), 5.0);
    }

    #[test]
    fn random_square_bounds() {
        let a = gen::uniform(4, 4, &mut gen::rng(5));
        check_reconstruction(&a, &geqr2(&a).unwrap());
    }

    #[test]
    fn blocked_matches_unblocked() {
        let a = gen::uniform(8, 8, &mut gen::rng(9));
        let base = geqr2(&a).unwrap();
        for block in [1, 3, 4, 8] {
            let f = geqrf(&a, block).unwrap();
            check_reconstruction(&a, &f);
            assert!(
                f.r().max_abs_diff(&base.r()) <= 1e-11 * a.max_abs(),
                "block {block}"
            );
        }
    }

    #[test]
    fn wide_input_is_rejected() {
        assert!(matches!(
            geqr2(&Matrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            geqrf(&Matrix::zeros(2, 3), 2),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn apply_qt_triangularizes() {
        let a = gen::uniform(5, 3, &mut gen::rng(2));
        let f = geqr2(&a).unwrap();
        let qta = f.apply_qt(&a).unwrap();
        assert!(qta.max_abs_diff(&f.r()) <= 1e-14 * 5.0);
    }
}
