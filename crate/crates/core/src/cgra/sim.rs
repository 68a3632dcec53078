use super::config::{PeConfig, SimConfig};
use super::dag::InstrDag;
use super::fuse::fuse;
use super::lower::{lower, read_outputs, Lowered};
use super::report::{CycleReport, Mode};
use super::schedule::{schedule, schedule_overlap, Schedule};
use super::workload::Workload;
use crate::error::{Error, Result};

/// Relative tolerance of the functional check on fused DAGs; unfused DAGs
/// reproduce the reference kernels to rounding.
pub const FUSED_REL_TOL: f64 = 1e-9;
pub const SCALAR_REL_TOL: f64 = 1e-10;

/// A lowered, optionally fused and scheduled workload.
#[derive(Debug, Clone)]
pub struct PeRun {
    pub lowered: Lowered,
    pub dag: InstrDag,
    pub schedule: Schedule,
    pub report: CycleReport,
}

pub fn profile(cfg: &SimConfig, mode: Mode) -> &PeConfig {
    match mode {
        Mode::Base => &cfg.base,
        Mode::Hw | Mode::Sw => &cfg.rdp,
    }
}

/// Compares the DAG's final stores with the reference kernels.
pub fn check_functional(w: &Workload, low: &Lowered, dag: &InstrDag, rel_tol: f64) -> Result<()> {
    let want = w.reference()?;
    for (name, got) in read_outputs(dag, &low.outputs)? {
        let exp = &want[&name];
        let tol = rel_tol * exp.max_abs().max(1.0);
        let err = got.max_abs_diff(exp);
        if !(err <= tol) {
            return Err(Error::Mismatch(format!(
                "{}: buffer '{name}' differs from the reference by {err:e} (tolerance {tol:e})",
                w.name
            )));
        }
    }
    Ok(())
}

/// Fuses per mode, checks the DAG against the traced values and schedules
/// it.
pub(crate) fn time_lowered(
    low: &Lowered,
    cfg: &SimConfig,
    mode: Mode,
) -> Result<(InstrDag, Schedule)> {
    let pe = profile(cfg, mode);
    let (dag, tol) = match mode {
        Mode::Base => (low.dag.clone(), SCALAR_REL_TOL),
        Mode::Hw | Mode::Sw => (fuse(&low.dag, &cfg.patterns), FUSED_REL_TOL),
    };
    for (name, got) in read_outputs(&dag, &low.outputs)? {
        let exp = &low.values[&name];
        let err = got.max_abs_diff(exp);
        if !(err <= tol * exp.max_abs().max(1.0)) {
            return Err(Error::Mismatch(format!(
                "buffer '{name}' differs from its trace by {err:e}"
            )));
        }
    }
    let sched = match mode {
        Mode::Sw => schedule_overlap(&dag, pe, cfg.overlap_window as usize)?,
        _ => schedule(&dag, pe)?,
    };
    Ok((dag, sched))
}

pub fn run_pe(w: &Workload, cfg: &SimConfig, mode: Mode) -> Result<PeRun> {
    cfg.validate()?;
    let pe = profile(cfg, mode);
    let lowered = lower(w, pe)?;
    let (dag, tol) = match mode {
        Mode::Base => (lowered.dag.clone(), SCALAR_REL_TOL),
        Mode::Hw | Mode::Sw => (fuse(&lowered.dag, &cfg.patterns), FUSED_REL_TOL),
    };
    check_functional(w, &lowered, &dag, tol)?;
    let schedule = match mode {
        Mode::Sw => schedule_overlap(&dag, pe, cfg.overlap_window as usize)?,
        _ => schedule(&dag, pe)?,
    };
    let mut report = CycleReport::new(
        &w.name,
        mode,
        "pe",
        schedule.cycles,
        dag.flops(),
        pe.peak_flops_per_cycle(),
        pe.clock_hz,
        1,
    );
    report.stall_cycles = schedule.stall_cycles;
    report.filled_stalls = schedule.filled_stalls;
    report.instructions = dag
        .nodes
        .iter()
        .filter(|n| n.class() != super::dag::Class::Free)
        .count() as u64;
    Ok(PeRun {
        lowered,
        dag,
        schedule,
        report,
    })
}

/// Cycle-level simulation of a workload on a single PE.
pub fn simulate_pe(w: &Workload, cfg: &SimConfig, mode: Mode) -> Result<CycleReport> {
    run_pe(w, cfg, mode).map(|r| r.report)
}
