//! Straight-line programs of menu operations over named buffers.
//!
//! The Kalman engine runs its steps through [`execute`], and the cycle model
//! lowers the same [`MfaCall`] values, so both see one schedule.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{build_compound, mfa, CompoundMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub type Buffers = BTreeMap<String, Matrix>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Buffer(String),
    Identity(usize),
    Zeros(usize, usize),
}

/// A block operand: a source with optional transpose, then negation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operand {
    pub source: Source,
    pub transpose: bool,
    pub negate: bool,
}

impl Operand {
    pub fn buf(name: impl Into<String>) -> Self {
        Self::from_source(Source::Buffer(name.into()))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_source(Source::Identity(n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_source(Source::Zeros(rows, cols))
    }

    fn from_source(source: Source) -> Self {
        Self {
            source,
            transpose: false,
            negate: false,
        }
    }

    pub fn t(mut self) -> Self {
        self.transpose = !self.transpose;
        self
    }

    /// Shape after transposition.
    pub fn shape(&self, bufs: &Buffers) -> Result<(usize, usize)> {
        let (r, c) = match &self.source {
            Source::Buffer(name) => lookup(bufs, name)?.shape(),
            Source::Identity(n) => (*n, *n),
            Source::Zeros(r, c) => (*r, *c),
        };
        Ok(if self.transpose { (c, r) } else { (r, c) })
    }

    pub fn resolve(&self, bufs: &Buffers) -> Result<Matrix> {
        let m = match &self.source {
            Source::Buffer(name) => lookup(bufs, name)?.clone(),
            Source::Identity(n) => Matrix::identity(*n),
            Source::Zeros(r, c) => Matrix::zeros(*r, *c),
        };
        let m = if self.transpose { m.transpose() } else { m };
        Ok(if self.negate { m.neg() } else { m })
    }
}

impl std::ops::Neg for Operand {
    type Output = Operand;

    fn neg(mut self) -> Operand {
        self.negate = !self.negate;
        self
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negate {
            write!(f, "-")?;
        }
        match &self.source {
            Source::Buffer(name) => write!(f, "{name}")?,
            Source::Identity(n) => write!(f, "I{n}")?,
            Source::Zeros(r, c) => write!(f, "0[{r}x{c}]")?,
        }
        if self.transpose {
            write!(f, "ᵀ")?;
        }
        Ok(())
    }
}

fn lookup<'a>(bufs: &'a Buffers, name: &str) -> Result<&'a Matrix> {
    bufs.get(name)
        .ok_or_else(|| Error::Invalid(format!("unknown buffer '{name}'")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MenuOp {
    Multiply,
    Add,
    Solve,
    Schur,
}

impl fmt::Display for MenuOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MenuOp::Multiply => "multiply",
            MenuOp::Add => "add",
            MenuOp::Solve => "solve",
            MenuOp::Schur => "schur",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MenuCall {
    Multiply {
        c: Operand,
        b: Operand,
    },
    Add {
        b: Operand,
        d: Operand,
    },
    Solve {
        a: Operand,
        b: Operand,
    },
    Schur {
        a: Operand,
        b: Operand,
        c: Operand,
        d: Operand,
    },
}

/// One menu operation writing its result into buffer `out`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MfaCall {
    pub call: MenuCall,
    pub out: String,
}

/// The four compound blocks of a call, `C` un-negated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blocks {
    pub a: Operand,
    pub b: Operand,
    pub c: Operand,
    pub d: Operand,
}

impl MfaCall {
    pub fn multiply(c: Operand, b: Operand, out: impl Into<String>) -> Self {
        Self {
            call: MenuCall::Multiply { c, b },
            out: out.into(),
        }
    }

    pub fn add(b: Operand, d: Operand, out: impl Into<String>) -> Self {
        Self {
            call: MenuCall::Add { b, d },
            out: out.into(),
        }
    }

    pub fn solve(a: Operand, b: Operand, out: impl Into<String>) -> Self {
        Self {
            call: MenuCall::Solve { a, b },
            out: out.into(),
        }
    }

    pub fn schur(a: Operand, b: Operand, c: Operand, d: Operand, out: impl Into<String>) -> Self {
        Self {
            call: MenuCall::Schur { a, b, c, d },
            out: out.into(),
        }
    }

    pub fn op(&self) -> MenuOp {
        match self.call {
            MenuCall::Multiply { .. } => MenuOp::Multiply,
            MenuCall::Add { .. } => MenuOp::Add,
            MenuCall::Solve { .. } => MenuOp::Solve,
            MenuCall::Schur { .. } => MenuOp::Schur,
        }
    }

    /// Expands the menu operation into its compound blocks, sizing the
    /// implied identity and zero blocks from the buffers.
    pub fn blocks(&self, bufs: &Buffers) -> Result<Blocks> {
        Ok(match &self.call {
            MenuCall::Multiply { c, b } => {
                let (cr, cc) = c.shape(bufs)?;
                let (_, bc) = b.shape(bufs)?;
                Blocks {
                    a: Operand::identity(cc),
                    b: b.clone(),
                    c: c.clone(),
                    d: Operand::zeros(cr, bc),
                }
            }
            MenuCall::Add { b, d } => {
                let (br, _) = b.shape(bufs)?;
                Blocks {
                    a: Operand::identity(br),
                    b: b.clone(),
                    c: Operand::identity(br),
                    d: d.clone(),
                }
            }
            MenuCall::Solve { a, b } => {
                let (ar, _) = a.shape(bufs)?;
                let (_, bc) = b.shape(bufs)?;
                Blocks {
                    a: a.clone(),
                    b: b.clone(),
                    c: Operand::identity(ar),
                    d: Operand::zeros(ar, bc),
                }
            }
            MenuCall::Schur { a, b, c, d } => Blocks {
                a: a.clone(),
                b: b.clone(),
                c: c.clone(),
                d: d.clone(),
            },
        })
    }

    pub fn compound(&self, bufs: &Buffers) -> Result<CompoundMatrix> {
        let bl = self.blocks(bufs)?;
        build_compound(
            &bl.a.resolve(bufs)?,
            &bl.b.resolve(bufs)?,
            &bl.c.resolve(bufs)?,
            &bl.d.resolve(bufs)?,
        )
    }
}

impl fmt::Display for MfaCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.call {
            MenuCall::Multiply { c, b } => write!(f, "{} = multiply({c}, {b})", self.out),
            MenuCall::Add { b, d } => write!(f, "{} = add({b}, {d})", self.out),
            MenuCall::Solve { a, b } => write!(f, "{} = solve({a}, {b})", self.out),
            MenuCall::Schur { a, b, c, d } => {
                write!(f, "{} = schur({a}, {b}, {c}, {d})", self.out)
            }
        }
    }
}

/// Log entry for one executed call.
#[derive(Debug, Clone, PartialEq)]
pub struct CallRecord {
    pub op: MenuOp,
    pub out: String,
    /// `(n, k, p)` of the compound matrix.
    pub dims: (usize, usize, usize),
    pub r_diag_min_abs: f64,
}

/// Runs `calls` in order, each through [`mfa`], storing results in `bufs`.
pub fn execute(calls: &[MfaCall], bufs: &mut Buffers, log: &mut Vec<CallRecord>) -> Result<()> {
    for call in calls {
        let cm = call.compound(bufs)?;
        let (_, n, k, p) = cm.dims();
        let res = mfa(&cm)?;
        log.push(CallRecord {
            op: call.op(),
            out: call.out.clone(),
            dims: (n, k, p),
            r_diag_min_abs: res.r_diag_min_abs,
        });
        bufs.insert(call.out.clone(), res.value);
    }
    Ok(())
}
