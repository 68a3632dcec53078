//! Kernel invocation lists with concrete operands, their reference results
//! and closed-form flop counts.

use serde::{Deserialize, Serialize};

use crate::dense::{gemm, geqr2, getrf2};
use crate::error::{Error, Result};
use crate::faddeeva::{execute, Buffers, MfaCall, Operand, Source};
use crate::gen;
use crate::kalman::{predict_program, update_program};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelCall {
    Mfa(MfaCall),
    Gemm {
        alpha: f64,
        a: Operand,
        b: Operand,
        beta: f64,
        c: Operand,
        out: String,
    },
    /// Unblocked QR; `out` receives the packed factors.
    Geqr2 {
        a: Operand,
        out: String,
    },
    /// Unblocked LU; `out` receives the packed factors.
    Getrf2 {
        a: Operand,
        pivot: bool,
        out: String,
    },
}

impl KernelCall {
    pub fn out(&self) -> &str {
        match self {
            KernelCall::Mfa(c) => &c.out,
            KernelCall::Gemm { out, .. }
            | KernelCall::Geqr2 { out, .. }
            | KernelCall::Getrf2 { out, .. } => out,
        }
    }

    pub fn label(&self) -> String {
        match self {
            KernelCall::Mfa(c) => c.to_string(),
            KernelCall::Gemm { a, b, c, out, .. } => format!("{out} = gemm({a}, {b}, {c})"),
            KernelCall::Geqr2 { a, out } => format!("{out} = geqr2({a})"),
            KernelCall::Getrf2 { a, out, .. } => format!("{out} = getrf2({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub name: String,
    pub buffers: Buffers,
    pub calls: Vec<KernelCall>,
}

impl Workload {
    pub fn new(name: impl Into<String>, buffers: Buffers, calls: Vec<KernelCall>) -> Self {
        Self {
            name: name.into(),
            buffers,
            calls,
        }
    }

    pub fn empty() -> Self {
        Self::new("empty", Buffers::new(), Vec::new())
    }

    /// Runs every call through the dense or Faddeeva reference kernels and
    /// returns the final buffers.
    pub fn reference(&self) -> Result<Buffers> {
        let mut bufs = self.buffers.clone();
        let mut log = Vec::new();
        for call in &self.calls {
            match call {
                KernelCall::Mfa(c) => execute(std::slice::from_ref(c), &mut bufs, &mut log)?,
                KernelCall::Gemm {
                    alpha,
                    a,
                    b,
                    beta,
                    c,
                    out,
                } => {
                    let r = gemm(
                        *alpha,
                        &a.resolve(&bufs)?,
                        &b.resolve(&bufs)?,
                        *beta,
                        &c.resolve(&bufs)?,
                    )?;
                    bufs.insert(out.clone(), r);
                }
                KernelCall::Geqr2 { a, out } => {
                    let r = geqr2(&a.resolve(&bufs)?)?.packed;
                    bufs.insert(out.clone(), r);
                }
                KernelCall::Getrf2 { a, pivot, out } => {
                    let r = getrf2(&a.resolve(&bufs)?, *pivot)?.packed;
                    bufs.insert(out.clone(), r);
                }
            }
        }
        Ok(bufs)
    }

    /// Buffers written by some call.
    pub fn outputs(&self) -> Vec<String> {
        let mut v: Vec<String> = self.calls.iter().map(|c| c.out().to_string()).collect();
        v.sort();
        v.dedup();
        v
    }
}

/// Flops of a Faddeeva call on an `n×n` A block with `k` rows in C and `p`
/// columns in B, as lowered: an identity A block costs only the D update.
pub fn mfa_flops(n: u64, k: u64, p: u64, identity_a: bool) -> u64 {
    if identity_a {
        return 2 * k * n * p;
    }
    let mut qr = 0;
    for j in 0..n.saturating_sub(1) {
        let l = n - j;
        qr += (3 * l + 3) + (n - j - 1 + p) * (4 * l - 2);
    }
    qr + n + k * (n * n + 2 * n * p)
}

/// Flops of `alpha·A·B + beta·C` with `A` `m×k` and `B` `k×n`.
pub fn gemm_flops(m: u64, n: u64, k: u64, alpha: f64, beta: f64) -> u64 {
    let mut f = m * n * (2 * k - 1);
    if alpha != 1.0 {
        f += m * n;
    }
    if beta != 0.0 {
        f += m * n * if beta == 1.0 { 1 } else { 2 };
    }
    f
}

/// Flops of one Kalman predict and update on generic data (state `n`,
/// measurements `m`), covariance symmetrization excluded.
pub fn kf_step_flops(n: u64, m: u64) -> u64 {
    let predict = 4 * n * n * n + 2 * n * n;
    let update =
        2 * n * n * m + 2 * m * m * n + mfa_flops(m, m, n, false) + 4 * m * n + 4 * m * n * n;
    predict + update
}

/// Flops of unblocked no-pivot LU on generic data.
pub fn getrf2_flops(n: u64) -> u64 {
    n + n * n.saturating_sub(1) / 2 + 2 * (n.saturating_sub(1) * n * (2 * n).saturating_sub(1)) / 6
}

/// Measurement dimension used for a state dimension `n`.
pub fn kf_meas_dim(n: usize) -> usize {
    (n / 2).max(1)
}

/// One Kalman predict plus update as a Faddeeva program, on a seeded random
/// model with state dimension `n`.
pub fn kf_workload(n: usize, seed: u64) -> Result<Workload> {
    if n == 0 {
        return Err(Error::Invalid("state dimension must be >= 1".into()));
    }
    let m = kf_meas_dim(n);
    let mut r = gen::rng(seed);
    let mut bufs = Buffers::new();
    let f = Matrix::identity(n).add(&gen::uniform(n, n, &mut r).scale(0.1))?;
    bufs.insert("F".into(), f);
    bufs.insert("H".into(), gen::uniform(m, n, &mut r));
    bufs.insert("Q".into(), gen::spd(n, 0.1, &mut r).scale(0.01));
    bufs.insert("R".into(), gen::spd(m, 1.0, &mut r));
    bufs.insert("x".into(), gen::uniform(n, 1, &mut r));
    bufs.insert("P".into(), gen::spd(n, 1.0, &mut r));
    bufs.insert("z".into(), gen::uniform(m, 1, &mut r));
    // The update consumes the predicted state.
    let mut calls: Vec<KernelCall> = predict_program(n, false)
        .into_iter()
        .map(KernelCall::Mfa)
        .collect();
    for mut c in update_program(n, m) {
        rename_inputs(&mut c, &[("x", "xp"), ("P", "Pp")]);
        calls.push(KernelCall::Mfa(c));
    }
    Ok(Workload::new(format!("kf-n{n}"), bufs, calls))
}

fn rename_inputs(call: &mut MfaCall, map: &[(&str, &str)]) {
    use crate::faddeeva::MenuCall;
    let fix = |op: &mut Operand| {
        if let Source::Buffer(name) = &mut op.source {
            if let Some((_, to)) = map.iter().find(|(from, _)| name == from) {
                *name = (*to).to_string();
            }
        }
    };
    match &mut call.call {
        MenuCall::Multiply { c, b } => {
            fix(c);
            fix(b);
        }
        MenuCall::Add { b, d } => {
            fix(b);
            fix(d);
        }
        MenuCall::Solve { a, b } => {
            fix(a);
            fix(b);
        }
        MenuCall::Schur { a, b, c, d } => {
            fix(a);
            fix(b);
            fix(c);
            fix(d);
        }
    }
}

/// A single general Schur complement: diagonally dominant `A` (`n×n`),
/// `B` `n×p`, `C` `k×n`, `D` `k×p`.
pub fn mfa_workload(n: usize, k: usize, p: usize, seed: u64) -> Result<Workload> {
    if n == 0 || k == 0 || p == 0 {
        return Err(Error::Invalid(
            "MFA workload dimensions must be >= 1".into(),
        ));
    }
    let mut r = gen::rng(seed);
    let mut bufs = Buffers::new();
    bufs.insert("A".into(), gen::diag_dominant(n, &mut r));
    bufs.insert("B".into(), gen::uniform(n, p, &mut r));
    bufs.insert("C".into(), gen::uniform(k, n, &mut r));
    bufs.insert("D".into(), gen::uniform(k, p, &mut r));
    let call = MfaCall::schur(
        Operand::buf("A"),
        Operand::buf("B"),
        Operand::buf("C"),
        Operand::buf("D"),
        "S",
    );
    Ok(Workload::new(
        format!("mfa-n{n}-k{k}-p{p}"),
        bufs,
        vec![KernelCall::Mfa(call)],
    ))
}

/// `C = A·B` for square `n`.
pub fn gemm_workload(n: usize, seed: u64) -> Result<Workload> {
    if n == 0 {
        return Err(Error::Invalid("gemm size must be >= 1".into()));
    }
    let mut r = gen::rng(seed);
    let mut bufs = Buffers::new();
    bufs.insert("A".into(), gen::uniform(n, n, &mut r));
    bufs.insert("B".into(), gen::uniform(n, n, &mut r));
    let call = KernelCall::Gemm {
        alpha: 1.0,
        a: Operand::buf("A"),
        b: Operand::buf("B"),
        beta: 0.0,
        c: Operand::zeros(n, n),
        out: "C".into(),
    };
    Ok(Workload::new(format!("gemm-n{n}"), bufs, vec![call]))
}
