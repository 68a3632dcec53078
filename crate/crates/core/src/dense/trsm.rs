use crate::dense::lu::PIVOT_THRESHOLD;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Solves `r·X = b` by back substitution. Only the upper triangle of `r` is
/// read.
pub fn trsm_upper(r: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !r.is_square() {
        return Err(Error::dims(format!(
            "trsm_upper: r must be square, got {}x{}",
            r.rows(),
            r.cols()
        )));
    }
    let n = r.rows();
    if b.rows() != n {
        return Err(Error::dims(format!(
            "trsm_upper: r is {n}x{n} but b has {} rows",
            b.rows()
        )));
    }
    if let Some(k) = (0..n).find(|&k| r.get(k, k).abs() <= PIVOT_THRESHOLD) {
        return Err(Error::SingularPivot {
            index: k,
            value: r.get(k, k).abs(),
        });
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in (0..n).rev() {
            let mut v = x.get(i, c);
            for k in (i + 1)..n {
                v -= r.get(i, k) * x.get(k, c);
            }
            x.set(i, c, v / r.get(i, i));
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::matmul;
    use crate::gen;

    #[test]
    fn identity_returns_rhs() {
        let b = gen::uniform(3, 2, &mut gen::rng(1));
        assert_eq!(trsm_upper(&Matrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn diagonal_solve() {
        let r = Matrix::from_rows(&[[2.0, 0.0], [0.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[2.0], [8.0]]).unwrap();
        assert_eq!(
            trsm_upper(&r, &b).unwrap().to_rows(),
            vec![vec![1.0], vec![2.0]]
        );
    }

    #[test]
    fn random_well_conditioned() {
        let mut rng = gen::rng(12);
        let mut r = gen::uniform(6, 6, &mut rng);
        for j in 0..6 {
            for i in (j + 1)..6 {
                r.set(i, j, 0.0);
            }
            r.set(j, j, 3.0 + r.get(j, j).abs());
        }
        let b = gen::uniform(6, 3, &mut rng);
        let x = trsm_upper(&r, &b).unwrap();
        assert!(matmul(&r, &x).unwrap().max_abs_diff(&b) <= 1e-12 * b.max_abs());
    }

    #[test]
    fn zero_diagonal_names_index() {
        let r = Matrix::from_rows(&[[1.0, 2.0], [0.0, 0.0]]).unwrap();
        let b = Matrix::zeros(2, 1);
        assert_eq!(
            trsm_upper(&r, &b).unwrap_err(),
            Error::SingularPivot {
                index: 1,
                value: 0.0
            }
        );
    }
}
