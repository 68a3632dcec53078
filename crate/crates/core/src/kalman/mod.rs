//! Discrete-time Kalman filter.
//!
//! The [`Engine::Mfa`] path runs every product and solve of a step as a
//! Faddeeva menu call; [`Engine::Direct`] uses the textbook recurrences with
//! `gemm` and a pivoted LU solve and serves as the oracle. Both return a
//! covariance that is symmetrized after each step.
//!
//! MFA schedule, predict:
//!
//! ```text
//! xp = multiply(F, x)          [+ add(multiply(G, u), xp)]
//! t  = multiply(P, Fᵀ)
//! Pp = schur(I, t, F, Q)       = Q + F·P·Fᵀ
//! ```
//!
//! update:
//!
//! ```text
//! T  = multiply(P, Hᵀ)
//! S  = schur(I, T, H, R)       = R + H·P·Hᵀ
//! Kᵀ = solve(S, Tᵀ)
//! y  = schur(I, x, −H, z)      = z − H·x
//! x⁺ = schur(I, y, K, x)       = x + K·y
//! W  = multiply(H, P)
//! P⁺ = schur(I, W, −K, P)      = P − K·H·P
//! ```

mod scenario;

pub use scenario::{
    make_constant_velocity, run_scenario, MatrixSpec, ModelSpec, Scenario, ScenarioConfig, Trace,
    TraceRow,
};

use crate::dense::{gemm, lu_solve};
use crate::error::{Error, Result};
use crate::faddeeva::{execute, Buffers, CallRecord, MfaCall, Operand};
use crate::matrix::Matrix;

/// Tolerance for the symmetry of `Q` and `R`.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanModel {
    f: Matrix,
    g: Option<Matrix>,
    h: Matrix,
    q: Matrix,
    r: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub x: Matrix,
    pub p: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    #[default]
    Mfa,
    Direct,
}

/// Which kernels a step went through.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepLog {
    pub mfa_calls: Vec<CallRecord>,
    pub direct_calls: Vec<&'static str>,
}

/// Lower-triangular `L` with `L·Lᵀ = a`, or `None` when `a` is not
/// positive definite.
pub(crate) fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d <= 0.0 {
            return None;
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, v / d);
        }
    }
    Some(l)
}

impl KalmanModel {
    pub fn new(f: Matrix, g: Option<Matrix>, h: Matrix, q: Matrix, r: Matrix) -> Result<Self> {
        let n = f.rows();
        if !f.is_square() {
            return Err(Error::dims(format!(
                "F must be square, got {}x{}",
                n,
                f.cols()
            )));
        }
        if h.cols() != n {
            return Err(Error::dims(format!(
                "H has {} columns, state dimension is {n}",
                h.cols()
            )));
        }
        let m = h.rows();
        if q.shape() != (n, n) {
            return Err(Error::dims(format!(
                "Q is {}x{}, expected {n}x{n}",
                q.rows(),
                q.cols()
            )));
        }
        if r.shape() != (m, m) {
            return Err(Error::dims(format!(
                "R is {}x{}, expected {m}x{m}",
                r.rows(),
                r.cols()
            )));
        }
        if let Some(g) = &g {
            if g.rows() != n {
                return Err(Error::dims(format!(
                    "G has {} rows, state dimension is {n}",
                    g.rows()
                )));
            }
        }
        if !q.is_symmetric(SYMMETRY_TOL) {
            return Err(Error::Invalid("Q is not symmetric".into()));
        }
        if !r.is_symmetric(SYMMETRY_TOL) {
            return Err(Error::Invalid("R is not symmetric".into()));
        }
        if cholesky(&r.symmetrized()).is_none() {
            return Err(Error::Invalid("R is not positive definite".into()));
        }
        Ok(Self { f, g, h, q, r })
    }

    pub fn f(&self) -> &Matrix {
        &self.f
    }

    pub fn g(&self) -> Option<&Matrix> {
        self.g.as_ref()
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn state_dim(&self) -> usize {
        self.f.rows()
    }

    pub fn meas_dim(&self) -> usize {
        self.h.rows()
    }

    /// Binds the model and state to the buffer names the programs use.
    pub fn buffers(&self, s: &KalmanState) -> Buffers {
        let mut b = Buffers::new();
        b.insert("F".into(), self.f.clone());
        b.insert("H".into(), self.h.clone());
        b.insert("Q".into(), self.q.clone());
        b.insert("R".into(), self.r.clone());
        if let Some(g) = &self.g {
            b.insert("G".into(), g.clone());
        }
        b.insert("x".into(), s.x.clone());
        b.insert("P".into(), s.p.clone());
        b
    }

    fn check_state(&self, s: &KalmanState) -> Result<()> {
        let n = self.state_dim();
        if s.x.shape() != (n, 1) {
            return Err(Error::dims(format!(
                "x is {}x{}, expected {n}x1",
                s.x.rows(),
                s.x.cols()
            )));
        }
        if s.p.shape() != (n, n) {
            return Err(Error::dims(format!(
                "P is {}x{}, expected {n}x{n}",
                s.p.rows(),
                s.p.cols()
            )));
        }
        Ok(())
    }
}

impl KalmanState {
    pub fn new(x: Matrix, p: Matrix) -> Self {
        Self { x, p }
    }
}

/// Menu calls of the predict step. Reads `F, x, P, Q` (and `G, u` with
/// control); writes `xp` and `Pp`.
pub fn predict_program(n: usize, control: bool) -> Vec<MfaCall> {
    let mut p = vec![MfaCall::multiply(
        Operand::buf("F"),
        Operand::buf("x"),
        "xp",
    )];
    if control {
        p.push(MfaCall::multiply(
            Operand::buf("G"),
            Operand::buf("u"),
            "Gu",
        ));
        p.push(MfaCall::add(Operand::buf("Gu"), Operand::buf("xp"), "xp"));
    }
    p.push(MfaCall::multiply(
        Operand::buf("P"),
        Operand::buf("F").t(),
        "t",
    ));
    p.push(MfaCall::schur(
        Operand::identity(n),
        Operand::buf("t"),
        Operand::buf("F"),
        Operand::buf("Q"),
        "Pp",
    ));
    p
}

/// Menu calls of the update step. Reads `H, R, x, P, z`; writes `y`, `xu`
/// and `Pu`.
pub fn update_program(n: usize, m: usize) -> Vec<MfaCall> {
    vec![
        MfaCall::multiply(Operand::buf("P"), Operand::buf("H").t(), "T"),
        MfaCall::schur(
            Operand::identity(n),
            Operand::buf("T"),
            Operand::buf("H"),
            Operand::buf("R"),
            "S",
        ),
        MfaCall::solve(Operand::buf("S"), Operand::buf("T").t(), "Kt"),
        MfaCall::schur(
            Operand::identity(n),
            Operand::buf("x"),
            -Operand::buf("H"),
            Operand::buf("z"),
            "y",
        ),
        MfaCall::schur(
            Operand::identity(m),
            Operand::buf("y"),
            Operand::buf("Kt").t(),
            Operand::buf("x"),
            "xu",
        ),
        MfaCall::multiply(Operand::buf("H"), Operand::buf("P"), "W"),
        MfaCall::schur(
            Operand::identity(m),
            Operand::buf("W"),
            -Operand::buf("Kt").t(),
            Operand::buf("P"),
            "Pu",
        ),
    ]
}

fn check_vec(name: &str, v: &Matrix, len: usize) -> Result<()> {
    if v.shape() != (len, 1) {
        return Err(Error::dims(format!(
            "{name} is {}x{}, expected {len}x1",
            v.rows(),
            v.cols()
        )));
    }
    Ok(())
}

fn check_control(mdl: &KalmanModel, u: Option<&Matrix>) -> Result<()> {
    match (mdl.g(), u) {
        (Some(g), Some(u)) => check_vec("u", u, g.cols()),
        (None, Some(_)) => Err(Error::Invalid(
            "control input given but model has no G".into(),
        )),
        _ => Ok(()),
    }
}

/// One time update. `u` is applied only when the model has a `G`.
pub fn predict(s: &KalmanState, mdl: &KalmanModel, u: Option<&Matrix>) -> Result<KalmanState> {
    predict_with(Engine::Mfa, s, mdl, u, &mut StepLog::default())
}

/// One measurement update.
pub fn update(s: &KalmanState, mdl: &KalmanModel, z: &Matrix) -> Result<KalmanState> {
    Ok(update_with(Engine::Mfa, s, mdl, z, &mut StepLog::default())?.0)
}

pub fn direct_predict(
    s: &KalmanState,
    mdl: &KalmanModel,
    u: Option<&Matrix>,
) -> Result<KalmanState> {
    predict_with(Engine::Direct, s, mdl, u, &mut StepLog::default())
}

pub fn direct_update(s: &KalmanState, mdl: &KalmanModel, z: &Matrix) -> Result<KalmanState> {
    Ok(update_with(Engine::Direct, s, mdl, z, &mut StepLog::default())?.0)
}

pub fn predict_with(
    engine: Engine,
    s: &KalmanState,
    mdl: &KalmanModel,
    u: Option<&Matrix>,
    log: &mut StepLog,
) -> Result<KalmanState> {
    mdl.check_state(s)?;
    check_control(mdl, u)?;
    let n = mdl.state_dim();
    let (x, p) = match engine {
        Engine::Mfa => {
            let mut bufs = mdl.buffers(s);
            if let Some(u) = u {
                bufs.insert("u".into(), u.clone());
            }
            execute(
                &predict_program(n, u.is_some()),
                &mut bufs,
                &mut log.mfa_calls,
            )?;
            (bufs.remove("xp").unwrap(), bufs.remove("Pp").unwrap())
        }
        Engine::Direct => {
            let mut x = gemm(1.0, mdl.f(), &s.x, 0.0, &s.x)?;
            log.direct_calls.push("gemm");
            if let (Some(g), Some(u)) = (mdl.g(), u) {
                x = gemm(1.0, g, u, 1.0, &x)?;
                log.direct_calls.push("gemm");
            }
            let fp = gemm(1.0, mdl.f(), &s.p, 0.0, &s.p)?;
            let p = gemm(1.0, &fp, &mdl.f().transpose(), 1.0, mdl.q())?;
            log.direct_calls.extend(["gemm", "gemm"]);
            (x, p)
        }
    };
    Ok(KalmanState {
        x,
        p: p.symmetrized(),
    })
}

/// Measurement update; also returns the innovation `z − H·x`.
pub fn update_with(
    engine: Engine,
    s: &KalmanState,
    mdl: &KalmanModel,
    z: &Matrix,
    log: &mut StepLog,
) -> Result<(KalmanState, Matrix)> {
    mdl.check_state(s)?;
    let (n, m) = (mdl.state_dim(), mdl.meas_dim());
    check_vec("z", z, m)?;
    let (x, p, y) = match engine {
        Engine::Mfa => {
            let mut bufs = mdl.buffers(s);
            bufs.insert("z".into(), z.clone());
            execute(&update_program(n, m), &mut bufs, &mut log.mfa_calls)?;
            (
                bufs.remove("xu").unwrap(),
                bufs.remove("Pu").unwrap(),
                bufs.remove("y").unwrap(),
            )
        }
        Engine::Direct => {
            let h = mdl.h();
            let pht = gemm(1.0, &s.p, &h.transpose(), 0.0, &Matrix::zeros(n, m))?;
            let sm = gemm(1.0, h, &pht, 1.0, mdl.r())?;
            let kt = lu_solve(&sm, &pht.transpose())?;
            let k = kt.transpose();
            let y = gemm(-1.0, h, &s.x, 1.0, z)?;
            let x = gemm(1.0, &k, &y, 1.0, &s.x)?;
            let hp = gemm(1.0, h, &s.p, 0.0, &Matrix::zeros(m, n))?;
            let p = gemm(-1.0, &k, &hp, 1.0, &s.p)?;
            log.direct_calls
                .extend(["gemm", "gemm", "lu_solve", "gemm", "gemm", "gemm", "gemm"]);
            (x, p, y)
        }
    };
    Ok((
        KalmanState {
            x,
            p: p.symmetrized(),
        },
        y,
    ))
}
