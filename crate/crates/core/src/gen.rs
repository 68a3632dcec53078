//! Seeded random matrix generators shared by workloads, fixtures and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::gemm;
use crate::matrix::Matrix;

pub type DetRng = ChaCha8Rng;

/// Default seed used whenever a caller does not pick one.
pub const DEFAULT_SEED: u64 = 0x4d46_415f_4b46;

pub fn rng(seed: u64) -> DetRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-1, 1]`.
pub fn uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

/// Uniform entries with the diagonal pushed to `n + 1` in magnitude, so the
/// matrix is strictly row and column diagonally dominant.
pub fn diag_dominant(n: usize, rng: &mut impl Rng) -> Matrix {
    let mut a = uniform(n, n, rng);
    for i in 0..n {
        let s = if a.get(i, i) < 0.0 { -1.0 } else { 1.0 };
        a.set(i, i, s * (n as f64 + 1.0 + a.get(i, i).abs()));
    }
    a
}

/// Symmetric positive definite: `B·Bᵀ + shift·I`.
pub fn spd(n: usize, shift: f64, rng: &mut impl Rng) -> Matrix {
    let b = uniform(n, n, rng);
    let mut p = gemm(1.0, &b, &b.transpose(), 0.0, &Matrix::zeros(n, n)).expect("square product");
    for i in 0..n {
        p.set(i, i, p.get(i, i) + shift);
    }
    p.symmetrized()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let a = uniform(3, 4, &mut rng(7));
        let b = uniform(3, 4, &mut rng(7));
        assert_eq!(a, b);
        assert!(a.max_abs() <= 1.0);
    }

    #[test]
    fn diag_dominance_holds() {
        let a = diag_dominant(6, &mut rng(1));
        for i in 0..6 {
            let off: f64 = (0..6).filter(|&j| j != i).map(|j| a.get(i, j).abs()).sum();
            assert!(a.get(i, i).abs() > off);
        }
    }
}
