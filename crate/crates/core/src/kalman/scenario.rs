use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{cholesky, predict_with, update_with, Engine, KalmanModel, KalmanState, StepLog};
use crate::dense::matmul;
use crate::error::{Error, Result};
use crate::gen;
use crate::matrix::Matrix;

/// A model plus a synthetic truth trajectory and its measurements.
/// `truth[k]` is the true state at the time `measurements[k]` was taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: KalmanModel,
    pub init: KalmanState,
    pub truth: Vec<Matrix>,
    pub measurements: Vec<Matrix>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// 1-based measurement index.
    pub step: usize,
    pub state: KalmanState,
    pub trace_p: f64,
    pub innovation_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub log: StepLog,
}

/// Lower factor `L` with `L·Lᵀ = a` for positive semidefinite `a`; columns
/// with a vanishing pivot are zeroed.
fn psd_factor(a: &Matrix) -> Matrix {
    let n = a.rows();
    let floor = 1e-14 * a.max_abs();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d <= floor {
            continue;
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
    l
}

fn gaussian(l: &Matrix, rng: &mut impl Rng) -> Result<Matrix> {
    let w = Matrix::from_fn(l.cols(), 1, |_, _| rng.sample(StandardNormal));
    matmul(l, &w)
}

impl Scenario {
    /// Propagates `truth0` through the model with process noise drawn from
    /// `Q` and measures each step with noise drawn from `R`.
    pub fn simulate(
        model: KalmanModel,
        truth0: Matrix,
        init: KalmanState,
        steps: usize,
        seed: u64,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Invalid(
                "scenario needs at least one measurement".into(),
            ));
        }
        let n = model.state_dim();
        if truth0.shape() != (n, 1) {
            return Err(Error::dims(format!("truth0 must be {n}x1")));
        }
        let lq = psd_factor(model.q());
        let lr = cholesky(model.r()).expect("validated R");
        let mut rng = gen::rng(seed);
        let mut truth = Vec::with_capacity(steps);
        let mut measurements = Vec::with_capacity(steps);
        let mut x = truth0;
        for _ in 0..steps {
            x = matmul(model.f(), &x)?.add(&gaussian(&lq, &mut rng)?)?;
            let z = matmul(model.h(), &x)?.add(&gaussian(&lr, &mut rng)?)?;
            truth.push(x.clone());
            measurements.push(z);
        }
        Ok(Self {
            model,
            init,
            truth,
            measurements,
            seed,
        })
    }
}

/// Planar constant-velocity model: state `(px, py, vx, vy)`, positions
/// measured. `Q` is the white-acceleration covariance scaled by
/// `q_intensity`; `R = r_diag·I`.
pub fn make_constant_velocity(
    dt: f64,
    q_intensity: f64,
    r_diag: f64,
    seed: u64,
    steps: usize,
) -> Result<Scenario> {
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
    }
    if !(q_intensity >= 0.0) {
        return Err(Error::Invalid(format!(
            "q_intensity must be >= 0, got {q_intensity}"
        )));
    }
    if !(r_diag > 0.0) {
        return Err(Error::Invalid(format!(
            "r_diag must be positive, got {r_diag}"
        )));
    }
    let f = Matrix::from_rows(&[
        [1.0, 0.0, dt, 0.0],
        [0.0, 1.0, 0.0, dt],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])?;
    let h = Matrix::from_rows(&[[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])?;
    let (a, b, c) = (dt * dt * dt / 3.0, dt * dt / 2.0, dt);
    let q = Matrix::from_rows(&[
        [a, 0.0, b, 0.0],
        [0.0, a, 0.0, b],
        [b, 0.0, c, 0.0],
        [0.0, b, 0.0, c],
    ])?
    .scale(q_intensity);
    let r = Matrix::identity(2).scale(r_diag);
    let model = KalmanModel::new(f, None, h, q, r)?;
    let truth0 = Matrix::column(&[0.0, 0.0, 1.0, 0.5])?;
    let init = KalmanState::new(Matrix::zeros(4, 1), Matrix::identity(4));
    Scenario::simulate(model, truth0, init, steps, seed)
}

/// Alternates predict and update over all measurements.
pub fn run_scenario(sc: &Scenario, engine: Engine) -> Result<Trace> {
    let mut s = sc.init.clone();
    let mut trace = Trace::default();
    for (k, z) in sc.measurements.iter().enumerate() {
        let step = k + 1;
        let wrap = |e: Error| Error::Step {
            step,
            source: Box::new(e),
        };
        let pred = predict_with(engine, &s, &sc.model, None, &mut trace.log).map_err(wrap)?;
        let (next, y) = update_with(engine, &pred, &sc.model, z, &mut trace.log).map_err(wrap)?;
        s = next;
        trace.rows.push(TraceRow {
            step,
            state: s.clone(),
            trace_p: s.p.trace(),
            innovation_norm: y.frobenius(),
        });
    }
    Ok(trace)
}

/// A matrix given inline as nested rows or as a path to a matrix text file
/// (relative to the config file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Inline(Matrix),
    Path(String),
}

impl MatrixSpec {
    fn load(&self, base: &Path) -> Result<Matrix> {
        match self {
            MatrixSpec::Inline(m) => Ok(m.clone()),
            MatrixSpec::Path(p) => Matrix::read_file(base.join(p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[allow(clippy::large_enum_variant)]
pub enum ModelSpec {
    ConstantVelocity {
        dt: f64,
        q_intensity: f64,
        r_diag: f64,
    },
    Matrices {
        f: MatrixSpec,
        h: MatrixSpec,
        q: MatrixSpec,
        r: MatrixSpec,
        truth0: Option<MatrixSpec>,
        x0: Option<MatrixSpec>,
        p0: Option<MatrixSpec>,
    },
}

/// JSON scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSpec,
    pub steps: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<(Self, std::path::PathBuf)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        let cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    /// Builds the scenario; `seed` overrides the configured seed.
    pub fn build(&self, base: &Path, seed: Option<u64>) -> Result<Scenario> {
        let seed = seed.or(self.seed).unwrap_or(gen::DEFAULT_SEED);
        match &self.model {
            ModelSpec::ConstantVelocity {
                dt,
                q_intensity,
                r_diag,
            } => make_constant_velocity(*dt, *q_intensity, *r_diag, seed, self.steps),
            ModelSpec::Matrices {
                f,
                h,
                q,
                r,
                truth0,
                x0,
                p0,
            } => {
                let model = KalmanModel::new(
                    f.load(base)?,
                    None,
                    h.load(base)?,
                    q.load(base)?,
                    r.load(base)?,
                )?;
                let n = model.state_dim();
                let opt = |s: &Option<MatrixSpec>, default: Matrix| {
                    s.as_ref().map_or(Ok(default), |s| s.load(base))
                };
                let truth0 = opt(truth0, Matrix::zeros(n, 1))?;
                let init =
                    KalmanState::new(opt(x0, Matrix::zeros(n, 1))?, opt(p0, Matrix::identity(n))?);
                Scenario::simulate(model, truth0, init, self.steps, seed)
            }
        }
    }
}
