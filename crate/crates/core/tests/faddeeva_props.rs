use mfa_core::dense::{gemm, lu_solve, matmul};
use mfa_core::faddeeva::{build_compound, mfa, op_add, op_multiply, op_schur, op_solve};
use mfa_core::{gen, Error, Matrix};
use proptest::prelude::*;

/// `D + C·A⁻¹·B` through a partially pivoted LU solve.
fn oracle(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Matrix {
    d.add(&matmul(c, &lu_solve(a, b).unwrap()).unwrap())
        .unwrap()
}

fn rel_err(got: &Matrix, want: &Matrix) -> f64 {
    got.max_abs_diff(want) / want.max_abs().max(1.0)
}

fn instance(seed: u64, n: usize, k: usize, p: usize) -> [Matrix; 4] {
    let mut r = gen::rng(seed);
    [
        gen::diag_dominant(n, &mut r),
        gen::uniform(n, p, &mut r),
        gen::uniform(k, n, &mut r),
        gen::uniform(k, p, &mut r),
    ]
}

#[test]
fn two_hundred_instances_match_the_lu_oracle() {
    let mut worst = 0.0f64;
    for s in 0..200u64 {
        let (n, k, p) = (
            1 + (s % 16) as usize,
            1 + (s * 7 % 16) as usize,
            1 + (s * 11 % 16) as usize,
        );
        let [a, b, c, d] = instance(s, n, k, p);
        let got = mfa(&build_compound(&a, &b, &c, &d).unwrap()).unwrap();
        worst = worst.max(rel_err(&got.value, &oracle(&a, &b, &c, &d)));
        assert!(got.r_diag_min_abs > 0.0);
    }
    assert!(worst <= 1e-9, "worst relative error {worst:e}");
}

#[test]
fn worked_examples() {
    let i2 = Matrix::identity(2);
    let b = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
    assert_eq!(op_schur(&i2, &b, &i2, &Matrix::zeros(2, 2)).unwrap(), b);
    let s = op_schur(
        &i2,
        &Matrix::from_rows(&[[1.0], [1.0]]).unwrap(),
        &Matrix::from_rows(&[[1.0, 1.0]]).unwrap(),
        &Matrix::zeros(1, 1),
    )
    .unwrap();
    assert!((s.get(0, 0) - 2.0).abs() <= 1e-15);
    let x = op_solve(
        &Matrix::from_rows(&[[2.0, 0.0], [0.0, 4.0]]).unwrap(),
        &Matrix::from_rows(&[[2.0], [8.0]]).unwrap(),
    )
    .unwrap();
    assert!(x.max_abs_diff(&Matrix::from_rows(&[[1.0], [2.0]]).unwrap()) <= 1e-15);
    let sum = op_add(
        &Matrix::from_rows(&[[1.0, 2.0]]).unwrap(),
        &Matrix::from_rows(&[[3.0, 4.0]]).unwrap(),
    );
    assert_eq!(sum.unwrap(), Matrix::from_rows(&[[4.0, 6.0]]).unwrap());
}

#[test]
fn singular_a_is_reported() {
    let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
    let e = op_solve(&a, &Matrix::identity(2)).unwrap_err();
    assert!(matches!(e, Error::NearSingular { index: 1, .. }), "{e:?}");
}

fn ulp_close(x: f64, y: f64) -> bool {
    x == y || (x - y).abs() <= f64::EPSILON * x.abs().max(y.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn multiply_matches_gemm(m in 1usize..=12, k in 1usize..=12, n in 1usize..=12, seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let c = gen::uniform(m, k, &mut r);
        let b = gen::uniform(k, n, &mut r);
        let want = gemm(1.0, &c, &b, 0.0, &Matrix::zeros(m, n)).unwrap();
        prop_assert!(rel_err(&op_multiply(&c, &b).unwrap(), &want) <= 1e-10);
    }

    #[test]
    fn add_is_elementwise(m in 1usize..=12, n in 1usize..=12, seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let b = gen::uniform(m, n, &mut r);
        let d = gen::uniform(m, n, &mut r);
        let s = op_add(&b, &d).unwrap();
        for i in 0..m {
            for j in 0..n {
                prop_assert!(ulp_close(s.get(i, j), b.get(i, j) + d.get(i, j)));
            }
        }
        prop_assert!(matches!(op_add(&b, &Matrix::zeros(m + 1, n)), Err(Error::Dimension(_))));
    }

    #[test]
    fn solve_residual(n in 1usize..=16, p in 1usize..=4, seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let a = gen::diag_dominant(n, &mut r);
        let b = gen::uniform(n, p, &mut r);
        let x = op_solve(&a, &b).unwrap();
        prop_assert!(matmul(&a, &x).unwrap().max_abs_diff(&b) <= 1e-9 * b.max_abs());
    }

    #[test]
    fn zero_c_keeps_d_and_inputs_are_untouched(n in 1usize..=10, k in 1usize..=6, p in 1usize..=6, seed in any::<u64>()) {
        let [a, b, _, d] = instance(seed, n, k, p);
        let cm = build_compound(&a, &b, &Matrix::zeros(k, n), &d).unwrap();
        let before = cm.clone();
        let s = mfa(&cm).unwrap();
        prop_assert_eq!(&cm, &before);
        prop_assert_eq!(s.value.data(), d.data());
    }

    #[test]
    fn schur_matches_oracle(n in 1usize..=16, k in 1usize..=16, p in 1usize..=16, seed in any::<u64>()) {
        let [a, b, c, d] = instance(seed, n, k, p);
        prop_assert!(rel_err(&op_schur(&a, &b, &c, &d).unwrap(), &oracle(&a, &b, &c, &d)) <= 1e-9);
    }
}
