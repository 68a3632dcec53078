//! Lowering of kernel calls into an instruction DAG.
//!
//! Lowering is tracing: each routine is executed on concrete values while
//! every arithmetic step is recorded as a node, in the same operation order
//! as the reference kernels. Values carry a sign flag so negation costs
//! nothing; an addition of differently signed values becomes a subtraction.
//!
//! Accumulations are emitted output-stationary: `interleave` independent
//! chains advance in lock-step so that consecutive instructions rarely depend
//! on each other. Operand elements are loaded once per call on first use;
//! identity and zero operands are register constants.

use std::collections::{BTreeMap, HashMap};

use super::config::PeConfig;
use super::dag::{InstrDag, NodeId, Op, Routine};
use super::workload::{KernelCall, Workload};
use crate::dense::PIVOT_THRESHOLD;
use crate::error::{Error, Result};
use crate::faddeeva::{Buffers, MfaCall, Operand, Source, NEAR_SINGULAR_REL};
use crate::matrix::Matrix;

/// A traced value: node `id` holds `|v|` when `neg` is set, else `v`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Val {
    pub id: NodeId,
    pub neg: bool,
    pub v: f64,
}

impl Val {
    pub fn negated(self) -> Val {
        Val {
            neg: !self.neg,
            v: -self.v,
            ..self
        }
    }
}

/// `acc ± Σ a_t·b_t`, accumulated in term order.
pub(crate) struct Chain {
    pub acc: Option<Val>,
    pub terms: Vec<(Val, Val)>,
    pub subtract: bool,
}

struct BufMem {
    base: u64,
    stores: Vec<Option<NodeId>>,
}

struct Pending {
    rows: usize,
    base: u64,
    stores: Vec<Option<NodeId>>,
    values: Vec<f64>,
}

/// Where each element of a written buffer ended up.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMap {
    pub rows: usize,
    pub cols: usize,
    /// Column-major store addresses.
    pub addrs: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Lowered {
    pub dag: InstrDag,
    pub outputs: BTreeMap<String, OutputMap>,
    /// Final buffer values as traced.
    pub values: Buffers,
}

pub(crate) struct Tracer {
    pub dag: InstrDag,
    routine: Routine,
    call: u32,
    width: usize,
    cur: Buffers,
    mem: HashMap<String, BufMem>,
    pending: BTreeMap<String, Pending>,
    loads: HashMap<(String, usize), Val>,
    consts: HashMap<u64, NodeId>,
    next_addr: u64,
    written: BTreeMap<String, OutputMap>,
}

impl Tracer {
    pub fn new(bufs: &Buffers, width: usize) -> Self {
        let mut t = Self {
            dag: InstrDag::default(),
            routine: Routine::Gemm,
            call: 0,
            width: width.max(1),
            cur: bufs.clone(),
            mem: HashMap::new(),
            pending: BTreeMap::new(),
            loads: HashMap::new(),
            consts: HashMap::new(),
            next_addr: 0,
            written: BTreeMap::new(),
        };
        for (name, m) in bufs {
            let base = t.alloc(m.rows() * m.cols());
            t.mem.insert(
                name.clone(),
                BufMem {
                    base,
                    stores: vec![None; m.rows() * m.cols()],
                },
            );
        }
        t
    }

    fn alloc(&mut self, words: usize) -> u64 {
        let base = self.next_addr;
        self.next_addr += words as u64;
        base
    }

    pub fn values(&self) -> &Buffers {
        &self.cur
    }

    pub fn set_routine(&mut self, r: Routine) {
        self.routine = r;
    }

    pub fn begin_call(&mut self, call: u32) {
        self.call = call;
        self.loads.clear();
    }

    /// Commits the buffers written by the current call.
    pub fn end_call(&mut self) -> Result<()> {
        for (name, p) in std::mem::take(&mut self.pending) {
            if let Some(i) = p.stores.iter().position(Option::is_none) {
                return Err(Error::Invalid(format!(
                    "lowering left element {i} of '{name}' unwritten"
                )));
            }
            let cols = p.values.len() / p.rows;
            self.cur
                .insert(name.clone(), Matrix::new(p.rows, cols, p.values)?);
            self.written.insert(
                name.clone(),
                OutputMap {
                    rows: p.rows,
                    cols,
                    addrs: (0..(p.rows * cols) as u64).map(|i| p.base + i).collect(),
                },
            );
            self.mem.insert(
                name,
                BufMem {
                    base: p.base,
                    stores: p.stores,
                },
            );
        }
        self.loads.clear();
        Ok(())
    }

    pub fn finish(self) -> Lowered {
        Lowered {
            dag: self.dag,
            outputs: self.written,
            values: self.cur,
        }
    }

    fn push(&mut self, op: Op) -> NodeId {
        self.dag.push(op, self.routine, self.call)
    }

    pub fn constant(&mut self, c: f64) -> Val {
        let id = match self.consts.get(&c.to_bits()) {
            Some(&id) => id,
            None => {
                let id = self.dag.push(Op::Input(c), self.routine, self.call);
                self.consts.insert(c.to_bits(), id);
                id
            }
        };
        Val {
            id,
            neg: false,
            v: c,
        }
    }

    pub fn shape(&self, op: &Operand) -> Result<(usize, usize)> {
        op.shape(&self.cur)
    }

    /// Element `(i, j)` of an operand, loading it on first use in this call.
    pub fn load(&mut self, op: &Operand, i: usize, j: usize) -> Val {
        let (r, c) = if op.transpose { (j, i) } else { (i, j) };
        let v = match &op.source {
            Source::Identity(_) => self.constant(if r == c { 1.0 } else { 0.0 }),
            Source::Zeros(..) => self.constant(0.0),
            Source::Buffer(name) => {
                let m = &self.cur[name];
                let idx = r + c * m.rows();
                match self.loads.get(&(name.clone(), idx)) {
                    Some(v) => *v,
                    None => {
                        let init = m.data()[idx];
                        let mem = &self.mem[name];
                        let op = Op::Load {
                            addr: mem.base + idx as u64,
                            dep: mem.stores[idx],
                            init,
                        };
                        let id = self.push(op);
                        let v = Val {
                            id,
                            neg: false,
                            v: init,
                        };
                        self.loads.insert((name.clone(), idx), v);
                        v
                    }
                }
            }
        };
        if op.negate {
            v.negated()
        } else {
            v
        }
    }

    pub fn begin_output(&mut self, name: &str, rows: usize, cols: usize) {
        let base = self.alloc(rows * cols);
        self.pending.insert(
            name.to_string(),
            Pending {
                rows,
                base,
                stores: vec![None; rows * cols],
                values: vec![0.0; rows * cols],
            },
        );
    }

    pub fn store(&mut self, name: &str, i: usize, j: usize, v: Val) {
        let (addr, idx) = {
            let p = &self.pending[name];
            let idx = i + j * p.rows;
            (p.base + idx as u64, idx)
        };
        let id = self.push(Op::Store {
            src: v.id,
            addr,
            negate: v.neg,
        });
        let p = self.pending.get_mut(name).expect("output begun");
        p.stores[idx] = Some(id);
        p.values[idx] = v.v;
    }

    pub fn mul(&mut self, a: Val, b: Val) -> Val {
        let id = self.push(Op::Mul(a.id, b.id));
        Val {
            id,
            neg: a.neg ^ b.neg,
            v: a.v * b.v,
        }
    }

    pub fn add(&mut self, a: Val, b: Val) -> Val {
        let (op, neg) = match (a.neg, b.neg) {
            (false, false) => (Op::Add(a.id, b.id), false),
            (true, true) => (Op::Add(a.id, b.id), true),
            (false, true) => (Op::Sub(a.id, b.id), false),
            (true, false) => (Op::Sub(b.id, a.id), false),
        };
        let id = self.push(op);
        Val {
            id,
            neg,
            v: a.v + b.v,
        }
    }

    pub fn sub(&mut self, a: Val, b: Val) -> Val {
        self.add(a, b.negated())
    }

    pub fn div(&mut self, a: Val, b: Val) -> Val {
        let id = self.push(Op::Div(a.id, b.id));
        Val {
            id,
            neg: a.neg ^ b.neg,
            v: a.v / b.v,
        }
    }

    pub fn sqrt(&mut self, a: Val) -> Val {
        let id = self.push(Op::Sqrt(a.id));
        Val {
            id,
            neg: false,
            v: a.v.sqrt(),
        }
    }

    /// Emits `count` chains, `interleave` at a time. Chain specs are built
    /// (and their operands loaded) group by group.
    pub fn chains(
        &mut self,
        count: usize,
        mut spec: impl FnMut(&mut Self, usize) -> Chain,
    ) -> Vec<Val> {
        let mut out = Vec::with_capacity(count);
        let mut start = 0;
        while start < count {
            let end = (start + self.width).min(count);
            let group: Vec<Chain> = (start..end).map(|i| spec(self, i)).collect();
            out.extend(self.emit_group(&group));
            start = end;
        }
        out
    }

    /// Advances the chains in lock-step: all products of a step, then all
    /// accumulations.
    pub fn emit_group(&mut self, group: &[Chain]) -> Vec<Val> {
        let mut acc: Vec<Option<Val>> = group.iter().map(|c| c.acc).collect();
        let steps = group.iter().map(|c| c.terms.len()).max().unwrap_or(0);
        for t in 0..steps {
            let prods: Vec<Option<Val>> = group
                .iter()
                .map(|c| c.terms.get(t).map(|&(a, b)| self.mul(a, b)))
                .collect();
            for (ci, p) in prods.into_iter().enumerate() {
                let Some(p) = p else { continue };
                let p = if group[ci].subtract { p.negated() } else { p };
                acc[ci] = Some(match acc[ci] {
                    None => p,
                    Some(a) => self.add(a, p),
                });
            }
        }
        acc.into_iter()
            .map(|a| a.expect("chain has an accumulator or a term"))
            .collect()
    }

    /// Householder reflector for `x` in place (`x[0]` becomes `beta`, the
    /// tail becomes `v`). Returns `tau`, or `None` when no reflection is
    /// needed.
    pub fn reflector(&mut self, x: &mut [Val]) -> Option<Val> {
        if x.len() < 2 {
            return None;
        }
        let chain = Chain {
            acc: None,
            terms: x[1..].iter().map(|&v| (v, v)).collect(),
            subtract: false,
        };
        let ss = self.emit_group(std::slice::from_ref(&chain))[0];
        if ss.v == 0.0 {
            return None;
        }
        let alpha = x[0];
        let aa = self.mul(alpha, alpha);
        let s = self.add(aa, ss);
        let norm = self.sqrt(s);
        let beta = if alpha.v >= 0.0 { norm.negated() } else { norm };
        let num = self.sub(beta, alpha);
        let tau = self.div(num, beta);
        let one = self.constant(1.0);
        let den = self.sub(alpha, beta);
        let scale = self.div(one, den);
        x[0] = beta;
        for xi in &mut x[1..] {
            *xi = self.mul(*xi, scale);
        }
        Some(tau)
    }

    /// Applies `I − tau·v·vᵀ` (`v[0] = 1`, `v_tail` the rest) to each column.
    pub fn apply_reflector(&mut self, v_tail: &[Val], tau: Val, cols: &mut [Vec<Val>]) {
        let width = self.width;
        for group in cols.chunks_mut(width) {
            let chains: Vec<Chain> = group
                .iter()
                .map(|y| Chain {
                    acc: Some(y[0]),
                    terms: v_tail.iter().zip(&y[1..]).map(|(&v, &y)| (v, y)).collect(),
                    subtract: false,
                })
                .collect();
            let w = self.emit_group(&chains);
            let t: Vec<Val> = w.iter().map(|&w| self.mul(tau, w)).collect();
            for (y, &t) in group.iter_mut().zip(&t) {
                y[0] = self.sub(y[0], t);
            }
            for i in 0..v_tail.len() {
                for (y, &t) in group.iter_mut().zip(&t) {
                    let p = self.mul(t, v_tail[i]);
                    y[i + 1] = self.sub(y[i + 1], p);
                }
            }
        }
    }
}

/// Lazily loaded working copy of an operand.
pub(crate) struct Block {
    op: Operand,
    rows: usize,
    vals: Vec<Option<Val>>,
    negate: bool,
}

impl Block {
    pub fn new(t: &Tracer, op: &Operand, negate: bool) -> Result<Self> {
        let (rows, cols) = t.shape(op)?;
        Ok(Self {
            op: op.clone(),
            rows,
            vals: vec![None; rows * cols],
            negate,
        })
    }

    pub fn get(&mut self, t: &mut Tracer, i: usize, j: usize) -> Val {
        let idx = i + j * self.rows;
        if let Some(v) = self.vals[idx] {
            return v;
        }
        let v = t.load(&self.op, i, j);
        let v = if self.negate { v.negated() } else { v };
        self.vals[idx] = Some(v);
        v
    }

    pub fn set(&mut self, i: usize, j: usize, v: Val) {
        self.vals[i + j * self.rows] = Some(v);
    }

    /// Rows `r0..r1` of column `j`.
    pub fn column(&mut self, t: &mut Tracer, j: usize, r0: usize, r1: usize) -> Vec<Val> {
        (r0..r1).map(|i| self.get(t, i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, r0: usize, vals: &[Val]) {
        for (k, &v) in vals.iter().enumerate() {
            self.set(r0 + k, j, v);
        }
    }
}

fn is_identity(op: &Operand) -> bool {
    matches!(op.source, Source::Identity(_)) && !op.negate
}

fn lower_mfa(t: &mut Tracer, call: &MfaCall) -> Result<()> {
    let cm = call.compound(t.values())?;
    let (_, n, k, p) = cm.dims();
    let bl = call.blocks(t.values())?;
    t.begin_output(&call.out, k, p);
    let mut b = Block::new(t, &bl.b, false)?;
    let mut neg_c = Block::new(t, &bl.c, true)?;
    let mut d = Block::new(t, &bl.d, false)?;

    if is_identity(&bl.a) {
        // R = I and Qᵀ·B = B: the multipliers are −C itself.
        t.set_routine(Routine::Gemm);
        let out = t.chains(k * p, |t, idx| {
            let (i, q) = (idx % k, idx / k);
            Chain {
                acc: Some(d.get(t, i, q)),
                terms: (0..n)
                    .map(|j| (neg_c.get(t, i, j), b.get(t, j, q)))
                    .collect(),
                subtract: true,
            }
        });
        for (idx, v) in out.into_iter().enumerate() {
            t.store(&call.out, idx % k, idx / k, v);
        }
        return Ok(());
    }

    let mut a = Block::new(t, &bl.a, false)?;
    let threshold = NEAR_SINGULAR_REL * cm.a().max_abs();
    for j in 0..n {
        t.set_routine(Routine::Geqrf);
        let mut x = a.column(t, j, j, n);
        let Some(tau) = t.reflector(&mut x) else {
            continue;
        };
        a.set_column(j, j, &x);
        let v_tail = x[1..].to_vec();
        let mut cols: Vec<Vec<Val>> = ((j + 1)..n).map(|c| a.column(t, c, j, n)).collect();
        t.apply_reflector(&v_tail, tau, &mut cols);
        for (c, col) in ((j + 1)..n).zip(&cols) {
            a.set_column(c, j, col);
        }
        t.set_routine(Routine::Gemm);
        let mut cols: Vec<Vec<Val>> = (0..p).map(|c| b.column(t, c, j, n)).collect();
        t.apply_reflector(&v_tail, tau, &mut cols);
        for (c, col) in cols.iter().enumerate() {
            b.set_column(c, j, col);
        }
    }
    let diag: Vec<Val> = (0..n).map(|j| a.get(t, j, j)).collect();
    let r_min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.v.abs()));
    if let Some(index) = diag.iter().position(|v| v.v.abs() <= threshold) {
        return Err(Error::NearSingular {
            index,
            r_diag_min_abs: r_min,
            threshold,
        });
    }

    // Step 2, left-looking: each entry of −C sees its row's earlier
    // multipliers in ascending order, exactly as the right-looking sweep.
    t.set_routine(Routine::Getrf);
    let one = t.constant(1.0);
    let recip: Vec<Val> = diag.iter().map(|&r| t.div(one, r)).collect();
    let mut l: Vec<Vec<Val>> = vec![Vec::with_capacity(n); k];
    for c in 0..n {
        let r_col: Vec<Val> = (0..c).map(|j| a.get(t, j, c)).collect();
        let vals = t.chains(k, |t, i| Chain {
            acc: Some(neg_c.get(t, i, c)),
            terms: (0..c).map(|j| (l[i][j], r_col[j])).collect(),
            subtract: true,
        });
        for (i, v) in vals.into_iter().enumerate() {
            let li = t.mul(v, recip[c]);
            l[i].push(li);
        }
    }
    t.set_routine(Routine::Gemm);
    let out = t.chains(k * p, |t, idx| {
        let (i, q) = (idx % k, idx / k);
        Chain {
            acc: Some(d.get(t, i, q)),
            terms: (0..n).map(|j| (l[i][j], b.get(t, j, q))).collect(),
            subtract: true,
        }
    });
    for (idx, v) in out.into_iter().enumerate() {
        t.store(&call.out, idx % k, idx / k, v);
    }
    Ok(())
}

fn lower_gemm(
    t: &mut Tracer,
    alpha: f64,
    a: &Operand,
    b: &Operand,
    beta: f64,
    c: &Operand,
    out: &str,
) -> Result<()> {
    let ((m, ka), (kb, n), cs) = (t.shape(a)?, t.shape(b)?, t.shape(c)?);
    if ka != kb || cs != (m, n) {
        return Err(Error::dims(format!(
            "gemm: a is {m}x{ka}, b is {kb}x{n}, c is {}x{}",
            cs.0, cs.1
        )));
    }
    t.set_routine(Routine::Gemm);
    t.begin_output(out, m, n);
    let sums = t.chains(m * n, |t, idx| {
        let (i, j) = (idx % m, idx / m);
        Chain {
            acc: None,
            terms: (0..ka)
                .map(|k| (t.load(a, i, k), t.load(b, k, j)))
                .collect(),
            subtract: false,
        }
    });
    for (idx, s) in sums.into_iter().enumerate() {
        let (i, j) = (idx % m, idx / m);
        let mut r = if alpha != 1.0 {
            let al = t.constant(alpha);
            t.mul(al, s)
        } else {
            s
        };
        if beta != 0.0 {
            let cv = t.load(c, i, j);
            let bc = if beta != 1.0 {
                let be = t.constant(beta);
                t.mul(be, cv)
            } else {
                cv
            };
            r = t.add(r, bc);
        }
        t.store(out, i, j, r);
    }
    Ok(())
}

fn lower_geqr2(t: &mut Tracer, a_op: &Operand, out: &str) -> Result<()> {
    let (m, n) = t.shape(a_op)?;
    if m < n {
        return Err(Error::dims(format!(
            "QR requires rows >= cols, got {m}x{n}"
        )));
    }
    t.set_routine(Routine::Geqrf);
    t.begin_output(out, m, n);
    let mut a = Block::new(t, a_op, false)?;
    for j in 0..n {
        let mut x = a.column(t, j, j, m);
        let Some(tau) = t.reflector(&mut x) else {
            continue;
        };
        a.set_column(j, j, &x);
        let mut cols: Vec<Vec<Val>> = ((j + 1)..n).map(|c| a.column(t, c, j, m)).collect();
        t.apply_reflector(&x[1..], tau, &mut cols);
        for (c, col) in ((j + 1)..n).zip(&cols) {
            a.set_column(c, j, col);
        }
    }
    for j in 0..n {
        for i in 0..m {
            let v = a.get(t, i, j);
            t.store(out, i, j, v);
        }
    }
    Ok(())
}

fn lower_getrf2(t: &mut Tracer, a_op: &Operand, out: &str) -> Result<()> {
    let (n, nc) = t.shape(a_op)?;
    if n != nc {
        return Err(Error::dims(format!(
            "LU requires a square matrix, got {n}x{nc}"
        )));
    }
    t.set_routine(Routine::Getrf);
    t.begin_output(out, n, n);
    let mut a = Block::new(t, a_op, false)?;
    let one = t.constant(1.0);
    for c in 0..n {
        // U part: row i needs u(j, c) for j < i, so rows go one at a time.
        for i in 0..=c {
            let chain = Chain {
                acc: Some(a.get(t, i, c)),
                terms: (0..i).map(|j| (a.get(t, i, j), a.get(t, j, c))).collect(),
                subtract: true,
            };
            let v = t.emit_group(std::slice::from_ref(&chain))[0];
            a.set(i, c, v);
        }
        let ucol: Vec<Val> = (0..c).map(|j| a.get(t, j, c)).collect();
        let below = t.chains(n - c - 1, |t, r| {
            let i = c + 1 + r;
            Chain {
                acc: Some(a.get(t, i, c)),
                terms: (0..c).map(|j| (a.get(t, i, j), ucol[j])).collect(),
                subtract: true,
            }
        });
        let pivot = a.get(t, c, c);
        if pivot.v.abs() <= PIVOT_THRESHOLD {
            return Err(Error::SingularPivot {
                index: c,
                value: pivot.v.abs(),
            });
        }
        let recip = t.div(one, pivot);
        for (r, v) in below.into_iter().enumerate() {
            let l = t.mul(v, recip);
            a.set(c + 1 + r, c, l);
        }
    }
    for j in 0..n {
        for i in 0..n {
            let v = a.get(t, i, j);
            t.store(out, i, j, v);
        }
    }
    Ok(())
}

/// Lowers every call of `w` with the interleave width of `cfg`.
pub fn lower(w: &Workload, cfg: &PeConfig) -> Result<Lowered> {
    let mut t = Tracer::new(&w.buffers, cfg.interleave as usize);
    for (ci, call) in w.calls.iter().enumerate() {
        t.begin_call(ci as u32);
        match call {
            KernelCall::Mfa(c) => lower_mfa(&mut t, c)?,
            KernelCall::Gemm {
                alpha,
                a,
                b,
                beta,
                c,
                out,
            } => lower_gemm(&mut t, *alpha, a, b, *beta, c, out)?,
            KernelCall::Geqr2 { a, out } => lower_geqr2(&mut t, a, out)?,
            KernelCall::Getrf2 { pivot: true, .. } => {
                return Err(Error::Unsupported(
                    "getrf2 with partial pivoting (data-dependent row swaps)".into(),
                ))
            }
            KernelCall::Getrf2 { a, out, .. } => lower_getrf2(&mut t, a, out)?,
        }
        t.end_call()?;
    }
    Ok(t.finish())
}

/// Final value of every written buffer, read back from a DAG evaluation.
pub fn read_outputs(dag: &InstrDag, outputs: &BTreeMap<String, OutputMap>) -> Result<Buffers> {
    let vals = dag.evaluate();
    let mut by_addr = HashMap::new();
    for (i, n) in dag.nodes.iter().enumerate() {
        if let Op::Store { addr, .. } = n.op {
            by_addr.insert(addr, vals[i]);
        }
    }
    let mut out = Buffers::new();
    for (name, map) in outputs {
        let data =
            map.addrs
                .iter()
                .map(|a| {
                    by_addr.get(a).copied().ok_or_else(|| {
                        Error::Invalid(format!("no store for '{name}' at address {a}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
        out.insert(name.clone(), Matrix::new(map.rows, map.cols, data)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgra::workload::{
        gemm_workload, getrf2_flops, kf_step_flops, kf_workload, mfa_flops, mfa_workload,
    };
    use crate::gen;

    fn cfg(width: u32) -> PeConfig {
        PeConfig {
            interleave: width,
            ..PeConfig::base()
        }
    }

    fn assert_bit_identical(w: &Workload, width: u32) -> Lowered {
        let low = lower(w, &cfg(width)).unwrap();
        let want = w.reference().unwrap();
        let got = read_outputs(&low.dag, &low.outputs).unwrap();
        for (name, m) in &got {
            assert_eq!(m, &want[name], "{name} (width {width})");
            assert_eq!(&low.values[name], m);
        }
        assert!(low.dag.is_topological());
        low
    }

    #[test]
    fn gemm_2x2_counts() {
        let low = assert_bit_identical(&gemm_workload(2, 1).unwrap(), 2);
        assert_eq!(low.dag.count(|o| matches!(o, Op::Mul(..))), 8);
        assert_eq!(low.dag.count(|o| matches!(o, Op::Add(..) | Op::Sub(..))), 4);
        assert_eq!(low.dag.count(|o| matches!(o, Op::Load { .. })), 8);
    }

    #[test]
    fn dot_product_of_length_one() {
        let mut bufs = Buffers::new();
        bufs.insert("a".into(), Matrix::from_rows(&[[3.0]]).unwrap());
        bufs.insert("b".into(), Matrix::from_rows(&[[4.0]]).unwrap());
        let w = Workload::new(
            "dot1",
            bufs,
            vec![KernelCall::Gemm {
                alpha: 1.0,
                a: Operand::buf("a"),
                b: Operand::buf("b"),
                beta: 0.0,
                c: Operand::zeros(1, 1),
                out: "c".into(),
            }],
        );
        let low = assert_bit_identical(&w, 1);
        assert_eq!(low.dag.op_counts(), (1, 0));
    }

    #[test]
    fn geqr2_of_scalar_is_free() {
        let mut bufs = Buffers::new();
        bufs.insert("a".into(), Matrix::from_rows(&[[5.0]]).unwrap());
        let w = Workload::new(
            "qr1",
            bufs,
            vec![KernelCall::Geqr2 {
                a: Operand::buf("a"),
                out: "qr".into(),
            }],
        );
        assert_eq!(assert_bit_identical(&w, 2).dag.flops(), 0);
    }

    #[test]
    fn geqr2_and_getrf2_match_reference() {
        let mut r = gen::rng(5);
        let mut bufs = Buffers::new();
        bufs.insert("a".into(), gen::uniform(6, 4, &mut r));
        bufs.insert("s".into(), gen::diag_dominant(5, &mut r));
        let w = Workload::new(
            "factor",
            bufs,
            vec![
                KernelCall::Geqr2 {
                    a: Operand::buf("a"),
                    out: "qr".into(),
                },
                KernelCall::Getrf2 {
                    a: Operand::buf("s"),
                    pivot: false,
                    out: "lu".into(),
                },
            ],
        );
        for width in [1, 3] {
            let low = assert_bit_identical(&w, width);
            let lu_flops: u64 = low
                .dag
                .nodes
                .iter()
                .filter(|n| n.call == 1)
                .map(|n| n.flops())
                .sum();
            assert_eq!(lu_flops, getrf2_flops(5));
        }
    }

    #[test]
    fn pivoting_lu_is_unsupported() {
        let mut bufs = Buffers::new();
        bufs.insert("s".into(), Matrix::identity(2));
        let w = Workload::new(
            "lu",
            bufs,
            vec![KernelCall::Getrf2 {
                a: Operand::buf("s"),
                pivot: true,
                out: "lu".into(),
            }],
        );
        assert!(matches!(lower(&w, &cfg(1)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn general_mfa_is_bit_identical_and_counted() {
        let w = mfa_workload(5, 3, 4, 2).unwrap();
        for width in [1, 2, 6] {
            let low = assert_bit_identical(&w, width);
            assert_eq!(low.dag.flops(), mfa_flops(5, 3, 4, false));
        }
    }

    #[test]
    fn kf_step_is_bit_identical_and_counted() {
        for n in [2, 4, 6] {
            let w = kf_workload(n, 8).unwrap();
            let low = assert_bit_identical(&w, 4);
            assert_eq!(low.dag.flops(), kf_step_flops(n as u64, (n / 2) as u64));
        }
    }

    #[test]
    fn gemm_with_scaling() {
        let mut r = gen::rng(6);
        let mut bufs = Buffers::new();
        bufs.insert("a".into(), gen::uniform(3, 2, &mut r));
        bufs.insert("b".into(), gen::uniform(2, 4, &mut r));
        bufs.insert("c".into(), gen::uniform(3, 4, &mut r));
        let w = Workload::new(
            "gemm",
            bufs,
            vec![KernelCall::Gemm {
                alpha: -0.5,
                a: Operand::buf("a"),
                b: Operand::buf("b"),
                beta: 2.0,
                c: Operand::buf("c"),
                out: "c".into(),
            }],
        );
        let low = assert_bit_identical(&w, 5);
        assert_eq!(
            low.dag.flops(),
            crate::cgra::workload::gemm_flops(3, 4, 2, -0.5, 2.0)
        );
    }
}
