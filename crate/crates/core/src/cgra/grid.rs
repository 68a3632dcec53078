//! Tile-array simulation.
//!
//! Work is split into phases. In each phase every compute tile runs its
//! share on its own PE model and moves data over the NoC; a transfer costs
//! `words × hops × hop_latency` cycles with no contention. A phase lasts as
//! long as its slowest tile (compute plus transfer) and phases run back to
//! back.
//!
//! Memory placement decides the hop counts: with last-column memory every
//! operand travels between a compute tile and the memory column; with a
//! memory PE per tile, a tile's own data is local and only reads of another
//! tile's global segment cross the NoC.

use super::config::{GridConfig, MemoryPlacement, SimConfig};
use super::dag::Routine;
use super::lower::{Block, Chain, Tracer, Val};
use super::report::{CycleReport, Mode, TileStats};
use super::sim::{profile, run_pe, time_lowered};
use super::workload::{KernelCall, Workload};
use crate::error::{Error, Result};
use crate::faddeeva::{Buffers, Operand, NEAR_SINGULAR_REL};
use crate::gen;
use crate::matrix::Matrix;

/// Side of the square sub-blocks that fit the register file.
fn sub_side(registers: u32) -> usize {
    ((f64::from(registers)).sqrt() as usize).max(1)
}

/// One of the `k×k` blocks of an `n×n` matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockAssignment {
    pub row0: usize,
    pub rows: usize,
    pub col0: usize,
    pub cols: usize,
    /// Index into `GridConfig::compute_tiles`.
    pub tile: usize,
    /// `(row0, rows, col0, cols)` pieces of at most `registers` scalars.
    pub sub_blocks: Vec<(usize, usize, usize, usize)>,
}

/// Sizes of `k` near-equal parts of `n`, larger parts first.
fn split(n: usize, k: usize) -> Vec<(usize, usize)> {
    let (q, r) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut at = 0;
    for i in 0..k {
        let len = q + usize::from(i < r);
        out.push((at, len));
        at += len;
    }
    out
}

fn pieces(start: usize, len: usize, side: usize) -> Vec<(usize, usize)> {
    (0..len.div_ceil(side))
        .map(|i| (start + i * side, side.min(len - i * side)))
        .collect()
}

/// Splits an `n×n` matrix into `k×k` blocks (`k` the grid dimension),
/// assigned round-robin over the compute tiles, each cut into sub-blocks of
/// at most `registers` scalars.
pub fn partition_blocks_with(
    n: usize,
    grid: &GridConfig,
    registers: u32,
) -> Result<Vec<BlockAssignment>> {
    grid.validate()?;
    let k = grid.rows as usize;
    if n < k {
        return Err(Error::Invalid(format!(
            "matrix dimension {n} is smaller than the grid ({k})"
        )));
    }
    let tiles = grid.compute_tiles().len();
    let side = sub_side(registers);
    let parts = split(n, k);
    let mut out = Vec::with_capacity(k * k);
    for &(r0, rows) in &parts {
        for &(c0, cols) in &parts {
            let sub_blocks = pieces(r0, rows, side)
                .into_iter()
                .flat_map(|(sr, nr)| {
                    pieces(c0, cols, side)
                        .into_iter()
                        .map(move |(sc, nc)| (sr, nr, sc, nc))
                })
                .collect();
            out.push(BlockAssignment {
                row0: r0,
                rows,
                col0: c0,
                cols,
                tile: out.len() % tiles,
                sub_blocks,
            });
        }
    }
    Ok(out)
}

/// [`partition_blocks_with`] for the default 256-entry register file.
pub fn partition_blocks(n: usize, grid: &GridConfig) -> Result<Vec<BlockAssignment>> {
    partition_blocks_with(n, grid, 256)
}

/// What to run on the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum GridJob {
    /// Independent workloads, dealt round-robin to the compute tiles.
    Batch(Vec<Workload>),
    /// One general Faddeeva call on random data (`A` `n×n`, `B` `n×p`, `C`
    /// `k×n`), distributed by column strips.
    Mfa {
        n: usize,
        k: usize,
        p: usize,
        seed: u64,
    },
    /// `C = A·B`, square `n`, distributed by output blocks.
    Gemm { n: usize, seed: u64 },
}

impl GridJob {
    pub fn name(&self) -> String {
        match self {
            GridJob::Batch(ws) => match ws.first() {
                Some(w) => format!("batch{}-{}", ws.len(), w.name),
                None => "batch0".into(),
            },
            GridJob::Mfa { n, k, p, .. } => format!("mfa-n{n}-k{k}-p{p}"),
            GridJob::Gemm { n, .. } => format!("gemm-n{n}"),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct TileWork {
    compute: u64,
    transfer: u64,
    flops: u64,
}

struct Ledger<'a> {
    grid: &'a GridConfig,
    tiles: Vec<(u32, u32)>,
    totals: Vec<TileWork>,
    cycles: u64,
    words: u64,
    stalls: u64,
    filled: u64,
    instructions: u64,
}

impl<'a> Ledger<'a> {
    fn new(grid: &'a GridConfig) -> Self {
        let tiles = grid.compute_tiles();
        Self {
            grid,
            totals: vec![TileWork::default(); tiles.len()],
            tiles,
            cycles: 0,
            words: 0,
            stalls: 0,
            filled: 0,
            instructions: 0,
        }
    }

    fn hop_cost(&self, words: u64, hops: u32) -> u64 {
        words * u64::from(hops) * u64::from(self.grid.hop_latency)
    }

    /// Words between a tile and its memory (last-column placement) or its
    /// own memory PE.
    fn memory_transfer(&mut self, phase: &mut [TileWork], tile: usize, words: u64) {
        let hops = self.grid.memory_hops(self.tiles[tile]);
        if hops > 0 {
            self.words += words;
        }
        phase[tile].transfer += self.hop_cost(words, hops);
    }

    /// A read of data produced on `owner` by `reader`.
    fn shared_read(&mut self, phase: &mut [TileWork], owner: usize, reader: usize, words: u64) {
        match self.grid.placement {
            MemoryPlacement::LastColumn => self.memory_transfer(phase, reader, words),
            MemoryPlacement::PerTile => {
                let hops = self.grid.hops(self.tiles[owner], self.tiles[reader]);
                if hops > 0 {
                    self.words += words;
                }
                phase[reader].transfer += self.hop_cost(words, hops);
            }
        }
    }

    fn close_phase(&mut self, phase: Vec<TileWork>) {
        let span = phase
            .iter()
            .map(|t| t.compute + t.transfer)
            .max()
            .unwrap_or(0);
        self.cycles += span;
        for (tot, p) in self.totals.iter_mut().zip(phase) {
            tot.compute += p.compute;
            tot.transfer += p.transfer;
            tot.flops += p.flops;
        }
    }

    fn phase(&self) -> Vec<TileWork> {
        vec![TileWork::default(); self.tiles.len()]
    }

    fn report(self, name: &str, cfg: &SimConfig, mode: Mode) -> CycleReport {
        let pe = profile(cfg, mode);
        let t = self.tiles.len() as u32;
        let flops = self.totals.iter().map(|t| t.flops).sum();
        let mut r = CycleReport::new(
            name,
            mode,
            &self.grid.name(),
            self.cycles,
            flops,
            pe.peak_flops_per_cycle() * f64::from(t),
            pe.clock_hz,
            t,
        );
        r.stall_cycles = self.stalls;
        r.filled_stalls = self.filled;
        r.instructions = self.instructions;
        r.noc_transfers = self.words;
        r.per_tile = self
            .tiles
            .iter()
            .zip(&self.totals)
            .map(|(&tile, w)| TileStats {
                tile,
                compute_cycles: w.compute,
                transfer_cycles: w.transfer,
                flops: w.flops,
            })
            .collect();
        r
    }
}

/// Input words of a workload plus the words of every buffer it writes.
fn workload_words(w: &Workload, outputs: usize) -> u64 {
    let inputs: usize = w.buffers.values().map(|m| m.rows() * m.cols()).sum();
    (inputs + outputs) as u64
}

/// Runs `job` on `grid`, each tile in `mode`.
pub fn simulate_grid(
    job: &GridJob,
    grid: &GridConfig,
    cfg: &SimConfig,
    mode: Mode,
) -> Result<CycleReport> {
    cfg.validate()?;
    grid.validate()?;
    let mut ledger = Ledger::new(grid);
    match job {
        GridJob::Batch(ws) => run_batch(&mut ledger, ws, cfg, mode)?,
        GridJob::Gemm { n, seed } => run_gemm(&mut ledger, *n, *seed, cfg, mode)?,
        GridJob::Mfa { n, k, p, seed } => run_mfa(&mut ledger, *n, *k, *p, *seed, cfg, mode)?,
    }
    Ok(ledger.report(&job.name(), cfg, mode))
}

fn run_batch(ledger: &mut Ledger, ws: &[Workload], cfg: &SimConfig, mode: Mode) -> Result<()> {
    let mut phase = ledger.phase();
    let tiles = phase.len();
    for (i, w) in ws.iter().enumerate() {
        let tile = i % tiles;
        let run = run_pe(w, cfg, mode)?;
        let out_words: usize = run.lowered.outputs.values().map(|o| o.rows * o.cols).sum();
        phase[tile].compute += run.report.cycles;
        phase[tile].flops += run.report.flops;
        ledger.stalls += run.report.stall_cycles;
        ledger.filled += run.report.filled_stalls;
        ledger.instructions += run.report.instructions;
        ledger.memory_transfer(&mut phase, tile, workload_words(w, out_words));
    }
    ledger.close_phase(phase);
    Ok(())
}

fn run_gemm(ledger: &mut Ledger, n: usize, seed: u64, cfg: &SimConfig, mode: Mode) -> Result<()> {
    if n == 0 {
        return Err(Error::Invalid("gemm size must be >= 1".into()));
    }
    let mut r = gen::rng(seed);
    let a = gen::uniform(n, n, &mut r);
    let b = gen::uniform(n, n, &mut r);
    let blocks = partition_blocks_with(n, ledger.grid, profile(cfg, mode).registers)?;
    let mut per_tile: Vec<Workload> = (0..ledger.tiles.len())
        .map(|t| Workload::new(format!("gemm-tile{t}"), Buffers::new(), Vec::new()))
        .collect();
    for blk in &blocks {
        let w = &mut per_tile[blk.tile];
        for &(r0, nr, c0, nc) in &blk.sub_blocks {
            let an = format!("A{r0}_{nr}");
            let bn = format!("B{c0}_{nc}");
            w.buffers
                .entry(an.clone())
                .or_insert_with(|| a.submatrix(r0, 0, nr, n));
            w.buffers
                .entry(bn.clone())
                .or_insert_with(|| b.submatrix(0, c0, n, nc));
            w.calls.push(KernelCall::Gemm {
                alpha: 1.0,
                a: Operand::buf(&an),
                b: Operand::buf(&bn),
                beta: 0.0,
                c: Operand::zeros(nr, nc),
                out: format!("C{r0}_{c0}"),
            });
        }
    }
    let want = crate::dense::matmul(&a, &b)?;
    let mut phase = ledger.phase();
    for (tile, w) in per_tile.iter().enumerate() {
        if w.calls.is_empty() {
            continue;
        }
        let run = run_pe(w, cfg, mode)?;
        for blk in blocks.iter().filter(|b| b.tile == tile) {
            for &(r0, nr, c0, nc) in &blk.sub_blocks {
                let got = &run.lowered.values[&format!("C{r0}_{c0}")];
                let err = got.max_abs_diff(&want.submatrix(r0, c0, nr, nc));
                if !(err <= 1e-9 * want.max_abs().max(1.0)) {
                    return Err(Error::Mismatch(format!(
                        "gemm block ({r0}, {c0}) off by {err:e}"
                    )));
                }
            }
        }
        let out_words: usize = run.lowered.outputs.values().map(|o| o.rows * o.cols).sum();
        phase[tile].compute += run.report.cycles;
        phase[tile].flops += run.report.flops;
        ledger.stalls += run.report.stall_cycles;
        ledger.filled += run.report.filled_stalls;
        ledger.instructions += run.report.instructions;
        ledger.memory_transfer(&mut phase, tile, workload_words(w, out_words));
    }
    ledger.close_phase(phase);
    Ok(())
}

/// A column strip of the compound matrix `[[A, B], [−C, D]]`.
struct Strip {
    col0: usize,
    data: Matrix,
    owner: usize,
}

/// Strip width: columns whose full height fits the register file.
fn strip_width(rows: usize, registers: u32) -> usize {
    (registers as usize / rows).max(1)
}

/// Reflectors and multipliers of one panel, as read by the other tiles.
struct PanelOut {
    /// Columns of the panel that produced a reflection.
    reflected: Vec<bool>,
    values: Buffers,
    words: u64,
}

fn run_mfa(
    ledger: &mut Ledger,
    n: usize,
    k: usize,
    p: usize,
    seed: u64,
    cfg: &SimConfig,
    mode: Mode,
) -> Result<()> {
    let w = crate::cgra::workload::mfa_workload(n, k, p, seed)?;
    let want = w.reference()?;
    let bufs = &w.buffers;
    let (a, b, c, d) = (&bufs["A"], &bufs["B"], &bufs["C"], &bufs["D"]);
    let threshold = NEAR_SINGULAR_REL * a.max_abs();

    let mut full = Matrix::zeros(n + k, n + p);
    full.set_submatrix(0, 0, a);
    full.set_submatrix(0, n, b);
    full.set_submatrix(n, 0, &c.neg());
    full.set_submatrix(n, n, d);
    let pe = profile(cfg, mode);
    let width = strip_width(n + k, pe.registers);
    let tiles = ledger.tiles.len();
    let mut strips: Vec<Strip> = Vec::new();
    for (range_start, range_len) in [(0, n), (n, p)] {
        for (s0, sw) in pieces(range_start, range_len, width) {
            strips.push(Strip {
                col0: s0,
                data: full.submatrix(0, s0, n + k, sw),
                owner: strips.len() % tiles,
            });
        }
    }
    let a_strips = strips.iter().filter(|s| s.col0 < n).count();

    // Initial placement of the strips.
    let mut phase = ledger.phase();
    for s in &strips {
        let words = (s.data.rows() * s.data.cols()) as u64;
        ledger.memory_transfer(&mut phase, s.owner, words);
    }
    ledger.close_phase(phase);

    for si in 0..a_strips {
        let owner = strips[si].owner;
        let mut phase = ledger.phase();
        let panel = run_panel(
            &strips[si],
            n,
            k,
            threshold,
            cfg,
            mode,
            &mut phase[owner],
            ledger,
        )?;
        ledger.memory_transfer(&mut phase, owner, panel.words);
        ledger.close_phase(phase);

        let mut phase = ledger.phase();
        for tile in 0..tiles {
            let mine: Vec<usize> = ((si + 1)..strips.len())
                .filter(|&t| strips[t].owner == tile)
                .collect();
            if mine.is_empty() {
                continue;
            }
            ledger.shared_read(&mut phase, owner, tile, panel.words);
            let col0 = strips[si].col0;
            run_update(
                &mut strips,
                &mine,
                col0,
                n,
                k,
                &panel,
                cfg,
                mode,
                &mut phase[tile],
                ledger,
            )?;
        }
        ledger.close_phase(phase);
    }

    // Results back to memory, then the functional check.
    let mut phase = ledger.phase();
    let mut s_out = Matrix::zeros(k, p);
    for s in &strips[a_strips..] {
        let bottom = s.data.submatrix(n, 0, k, s.data.cols());
        ledger.memory_transfer(&mut phase, s.owner, (k * s.data.cols()) as u64);
        s_out.set_submatrix(0, s.col0 - n, &bottom);
    }
    ledger.close_phase(phase);
    let err = s_out.max_abs_diff(&want["S"]);
    if !(err <= 1e-9 * want["S"].max_abs().max(1.0)) {
        return Err(Error::Mismatch(format!("grid MFA result off by {err:e}")));
    }
    Ok(())
}

fn account(
    work: &mut TileWork,
    ledger: &mut Ledger,
    t: Tracer,
    cfg: &SimConfig,
    mode: Mode,
) -> Result<Buffers> {
    let low = t.finish();
    let (dag, sched) = time_lowered(&low, cfg, mode)?;
    work.compute += sched.cycles;
    work.flops += dag.flops();
    ledger.stalls += sched.stall_cycles;
    ledger.filled += sched.filled_stalls;
    ledger.instructions += dag
        .nodes
        .iter()
        .filter(|n| n.class() != super::dag::Class::Free)
        .count() as u64;
    Ok(low.values)
}

/// QR of the strip's diagonal part and the multipliers of its `C` rows.
#[allow(clippy::too_many_arguments)]
fn run_panel(
    strip: &Strip,
    n: usize,
    k: usize,
    threshold: f64,
    cfg: &SimConfig,
    mode: Mode,
    work: &mut TileWork,
    ledger: &mut Ledger,
) -> Result<PanelOut> {
    let c0 = strip.col0;
    let sw = strip.data.cols();
    let rows = n + k - c0;
    let mut bufs = Buffers::new();
    bufs.insert("W".into(), strip.data.submatrix(c0, 0, rows, sw));
    let mut t = Tracer::new(&bufs, profile(cfg, mode).interleave as usize);
    t.begin_call(0);
    let mut wb = Block::new(&t, &Operand::buf("W"), false)?;
    let top = n - c0;
    let one = t.constant(1.0);
    let mut reflected = vec![false; sw];
    let mut words = 0u64;
    let mut taus: Vec<Val> = Vec::with_capacity(sw);
    t.begin_output("l", k, sw);
    for q in 0..sw {
        let r = q; // local row of the diagonal
        t.set_routine(Routine::Geqrf);
        let mut x = wb.column(&mut t, q, r, top);
        let tau = t.reflector(&mut x);
        match tau {
            Some(tau) => {
                reflected[q] = true;
                wb.set_column(q, r, &x);
                let v_tail = x[1..].to_vec();
                let mut cols: Vec<Vec<Val>> = ((q + 1)..sw)
                    .map(|cc| wb.column(&mut t, cc, r, top))
                    .collect();
                t.apply_reflector(&v_tail, tau, &mut cols);
                for (cc, col) in ((q + 1)..sw).zip(&cols) {
                    wb.set_column(cc, r, col);
                }
                let name = format!("v{q}");
                t.begin_output(&name, v_tail.len(), 1);
                for (i, v) in v_tail.iter().enumerate() {
                    t.store(&name, i, 0, *v);
                }
                words += v_tail.len() as u64 + 1;
                taus.push(tau);
            }
            None => taus.push(t.constant(0.0)),
        }
        let diag = wb.get(&mut t, r, q);
        if diag.v.abs() <= threshold {
            return Err(Error::NearSingular {
                index: c0 + q,
                r_diag_min_abs: diag.v.abs(),
                threshold,
            });
        }
        t.set_routine(Routine::Getrf);
        let recip = t.div(one, diag);
        let mut l = Vec::with_capacity(k);
        for i in 0..k {
            let bv = wb.get(&mut t, top + i, q);
            let li = t.mul(bv, recip);
            t.store("l", i, q, li);
            l.push(li);
        }
        words += k as u64;
        let rest: Vec<usize> = ((q + 1)..sw).collect();
        let r_row: Vec<Val> = rest.iter().map(|&cc| wb.get(&mut t, r, cc)).collect();
        let vals = t.chains(k * rest.len(), |t, idx| {
            let (i, j) = (idx % k, idx / k);
            Chain {
                acc: Some(wb.get(t, top + i, rest[j])),
                terms: vec![(l[i], r_row[j])],
                subtract: true,
            }
        });
        for (idx, v) in vals.into_iter().enumerate() {
            wb.set(top + idx % k, rest[idx / k], v);
        }
    }
    t.begin_output("tau", sw, 1);
    for (q, tau) in taus.into_iter().enumerate() {
        t.store("tau", q, 0, tau);
    }
    t.end_call()?;
    let values = account(work, ledger, t, cfg, mode)?;
    Ok(PanelOut {
        reflected,
        values,
        words,
    })
}

/// Applies a panel's reflectors to the given strips and eliminates their
/// `C`/`D` rows.
#[allow(clippy::too_many_arguments)]
fn run_update(
    strips: &mut [Strip],
    mine: &[usize],
    c0: usize,
    n: usize,
    k: usize,
    panel: &PanelOut,
    cfg: &SimConfig,
    mode: Mode,
    work: &mut TileWork,
    ledger: &mut Ledger,
) -> Result<()> {
    let rows = n + k - c0;
    let top = n - c0;
    let pw = panel.reflected.len();
    let mut bufs = panel.values.clone();
    for &si in mine {
        let s = &strips[si];
        bufs.insert(
            format!("S{si}"),
            s.data.submatrix(c0, 0, rows, s.data.cols()),
        );
    }
    let mut t = Tracer::new(&bufs, profile(cfg, mode).interleave as usize);
    for (call, &si) in mine.iter().enumerate() {
        let is_a = strips[si].col0 < n;
        let sw = strips[si].data.cols();
        let name = format!("S{si}");
        t.begin_call(call as u32);
        let mut sb = Block::new(&t, &Operand::buf(&name), false)?;
        t.set_routine(if is_a { Routine::Geqrf } else { Routine::Gemm });
        for q in 0..pw {
            if !panel.reflected[q] {
                continue;
            }
            let vn = Operand::buf(format!("v{q}"));
            let len = top - q - 1;
            let v_tail: Vec<Val> = (0..len).map(|i| t.load(&vn, i, 0)).collect();
            let tau = t.load(&Operand::buf("tau"), q, 0);
            let mut cols: Vec<Vec<Val>> = (0..sw).map(|cc| sb.column(&mut t, cc, q, top)).collect();
            t.apply_reflector(&v_tail, tau, &mut cols);
            for (cc, col) in cols.iter().enumerate() {
                sb.set_column(cc, q, col);
            }
        }
        t.set_routine(if is_a { Routine::Getrf } else { Routine::Gemm });
        let lop = Operand::buf("l");
        let vals = t.chains(k * sw, |t, idx| {
            let (i, j) = (idx % k, idx / k);
            Chain {
                acc: Some(sb.get(t, top + i, j)),
                terms: (0..pw)
                    .map(|q| (t.load(&lop, i, q), sb.get(t, q, j)))
                    .collect(),
                subtract: true,
            }
        });
        for (idx, v) in vals.into_iter().enumerate() {
            sb.set(top + idx % k, idx / k, v);
        }
        t.begin_output(&name, rows, sw);
        for j in 0..sw {
            for i in 0..rows {
                let v = sb.get(&mut t, i, j);
                t.store(&name, i, j, v);
            }
        }
        t.end_call()?;
    }
    let values = account(work, ledger, t, cfg, mode)?;
    for &si in mine {
        let upd = &values[&format!("S{si}")];
        strips[si].data.set_submatrix(c0, 0, upd);
    }
    Ok(())
}
