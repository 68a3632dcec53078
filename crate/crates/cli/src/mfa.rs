use std::path::{Path, PathBuf};

use mfa_core::dense::{lu_solve, matmul};
use mfa_core::faddeeva::{build_compound, mfa};
use mfa_core::Matrix;

use crate::fail::Failure;

/// Residual bound for `--check`.
pub const CHECK_TOL: f64 = 1e-9;

pub fn run(inputs: &[PathBuf; 4], out: &Path, check: bool) -> Result<(), Failure> {
    let mut ms = Vec::with_capacity(4);
    for p in inputs {
        ms.push(Matrix::read_file(p)?);
    }
    let (a, b, c, d) = (&ms[0], &ms[1], &ms[2], &ms[3]);
    let res = mfa(&build_compound(a, b, c, d)?)?;
    res.value.write_file(out)?;
    if check {
        // Oracle: D + C·(A⁻¹B) with a partially pivoted LU.
        let want = d.add(&matmul(c, &lu_solve(a, b)?)?)?;
        let residual = res.value.max_abs_diff(&want) / want.max_abs().max(1.0);
        println!("r_diag_min_abs = {:e}", res.r_diag_min_abs);
        println!("residual = {residual:e}");
        if residual.is_nan() || residual > CHECK_TOL {
            return Err(Failure::numerical(format!(
                "residual {residual:e} exceeds {CHECK_TOL:e}"
            )));
        }
    }
    Ok(())
}
