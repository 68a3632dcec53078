use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn check_dims(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<()> {
    if a.cols() != b.rows() {
        return Err(Error::dims(format!(
            "gemm: a.cols ({}) != b.rows ({})",
            a.cols(),
            b.rows()
        )));
    }
    if c.rows() != a.rows() || c.cols() != b.cols() {
        return Err(Error::dims(format!(
            "gemm: c is {}x{} but a·b is {}x{}",
            c.rows(),
            c.cols(),
            a.rows(),
            b.cols()
        )));
    }
    Ok(())
}

#[inline]
fn combine(alpha: f64, s: f64, beta: f64, c: f64) -> f64 {
    if beta == 0.0 {
        alpha * s
    } else {
        alpha * s + beta * c
    }
}

/// `alpha·a·b + beta·c`.
///
/// Every output element is a single inner product accumulated with `k`
/// ascending, so the result does not depend on anything but the inputs.
/// When `beta == 0`, `c` only supplies the shape.
pub fn gemm(alpha: f64, a: &Matrix, b: &Matrix, beta: f64, c: &Matrix) -> Result<Matrix> {
    check_dims(a, b, c)?;
    let (m, n, kk) = (a.rows(), b.cols(), a.cols());
    let mut out = Matrix::zeros(m, n);
    for j in 0..n {
        let bj = b.col(j);
        for i in 0..m {
            let mut s = 0.0;
            for (k, &bkj) in bj.iter().enumerate().take(kk) {
                s += a.get(i, k) * bkj;
            }
            out.set(i, j, combine(alpha, s, beta, c.get(i, j)));
        }
    }
    Ok(out)
}

/// Tiled variant of [`gemm`]: the inner dimension is cut into panels of
/// `block` and partial sums are added panel by panel.
///
/// With a single panel the arithmetic is identical to [`gemm`].
pub fn gemm_blocked(
    alpha: f64,
    a: &Matrix,
    b: &Matrix,
    beta: f64,
    c: &Matrix,
    block: usize,
) -> Result<Matrix> {
    if block == 0 {
        return Err(Error::Invalid("gemm_blocked: block must be >= 1".into()));
    }
    check_dims(a, b, c)?;
    let (m, n, kk) = (a.rows(), b.cols(), a.cols());
    let mut acc = vec![0.0; m * n];
    for k0 in (0..kk).step_by(block) {
        let k1 = (k0 + block).min(kk);
        for j0 in (0..n).step_by(block) {
            for i0 in (0..m).step_by(block) {
                for j in j0..(j0 + block).min(n) {
                    for i in i0..(i0 + block).min(m) {
                        let mut s = 0.0;
                        for k in k0..k1 {
                            s += a.get(i, k) * b.get(k, j);
                        }
                        acc[i + j * m] += s;
                    }
                }
            }
        }
    }
    let mut out = Matrix::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            out.set(i, j, combine(alpha, acc[i + j * m], beta, c.get(i, j)));
        }
    }
    Ok(out)
}

/// `a·b` without an accumulator operand.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.rows() {
        return Err(Error::dims(format!(
            "matmul: a.cols ({}) != b.rows ({})",
            a.cols(),
            b.rows()
        )));
    }
    gemm(1.0, a, b, 0.0, &Matrix::zeros(a.rows(), b.cols()))
}
