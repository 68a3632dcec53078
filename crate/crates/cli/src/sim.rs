use std::path::Path;

use mfa_core::cgra::report::markdown_table;
use mfa_core::cgra::{
    gemm_workload, kf_workload, mfa_workload, peak_gflops, simulate_grid, simulate_pe, CycleReport,
    GridJob, Mode, SimConfig, Workload,
};
use mfa_core::Result as CoreResult;
use serde::{Deserialize, Serialize};

use crate::fail::{self, Failure};
use crate::manifest::{Sweep, WorkloadKind};

/// KF workloads per grid sweep; divisible by every standard tile count
/// except the 3×3 one.
pub const KF_BATCH: usize = 16;

pub struct SimArgs<'a> {
    pub workload: WorkloadKind,
    pub size: usize,
    pub mode: Mode,
    pub config: Option<&'a Path>,
    pub out: Option<&'a Path>,
    pub sweep: Option<Sweep>,
    pub seed: u64,
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub workload: String,
    pub target: String,
    pub mode: Mode,
    pub tiles: u32,
    pub cycles: u64,
    pub flops: u64,
    pub stall_cycles: u64,
    pub filled_stalls: u64,
    pub instructions: u64,
    pub noc_transfers: u64,
    pub achieved_gflops: f64,
    pub peak_gflops: f64,
    pub utilization: f64,
}

impl From<&CycleReport> for Row {
    fn from(r: &CycleReport) -> Self {
        Self {
            workload: r.workload.clone(),
            target: r.target.clone(),
            mode: r.mode,
            tiles: r.tiles,
            cycles: r.cycles,
            flops: r.flops,
            stall_cycles: r.stall_cycles,
            filled_stalls: r.filled_stalls,
            instructions: r.instructions,
            noc_transfers: r.noc_transfers,
            achieved_gflops: r.achieved_gflops,
            peak_gflops: r.peak_gflops,
            utilization: r.utilization,
        }
    }
}

pub fn rows_csv<T: Serialize>(rows: &[T]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn workload(kind: WorkloadKind, n: usize, seed: u64) -> CoreResult<Workload> {
    match kind {
        WorkloadKind::Kf => kf_workload(n, seed),
        WorkloadKind::Mfa => mfa_workload(n, n, n, seed),
        WorkloadKind::Gemm => gemm_workload(n, seed),
    }
}

fn grid_job(kind: WorkloadKind, n: usize, seed: u64) -> CoreResult<GridJob> {
    Ok(match kind {
        WorkloadKind::Kf => GridJob::Batch(
            (0..KF_BATCH as u64)
                .map(|i| kf_workload(n, seed.wrapping_add(i)))
                .collect::<CoreResult<_>>()?,
        ),
        WorkloadKind::Mfa => GridJob::Mfa {
            n,
            k: n,
            p: n,
            seed,
        },
        WorkloadKind::Gemm => GridJob::Gemm { n, seed },
    })
}

pub fn run(args: &SimArgs) -> Result<(), Failure> {
    let cfg = match args.config {
        Some(p) => SimConfig::read_file(p)?,
        None => SimConfig::default(),
    };
    let reports: Vec<CycleReport> = match args.sweep {
        None => vec![simulate_pe(
            &workload(args.workload, args.size, args.seed)?,
            &cfg,
            args.mode,
        )?],
        Some(Sweep::Modes) => {
            let w = workload(args.workload, args.size, args.seed)?;
            Mode::ALL
                .iter()
                .map(|&m| simulate_pe(&w, &cfg, m))
                .collect::<CoreResult<_>>()?
        }
        Some(Sweep::Grids) => {
            let job = grid_job(args.workload, args.size, args.seed)?;
            cfg.grids
                .iter()
                .map(|g| simulate_grid(&job, g, &cfg, args.mode))
                .collect::<CoreResult<_>>()?
        }
    };

    let text = match args.sweep {
        None => reports[0].to_json() + "\n",
        Some(_) => rows_csv(&reports.iter().map(Row::from).collect::<Vec<_>>())?,
    };
    match args.out {
        Some(out) => {
            fail::write(out, &text)?;
            print_summary(&reports, &cfg);
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn print_summary(reports: &[CycleReport], cfg: &SimConfig) {
    let mut profiles: Vec<&str> = reports
        .iter()
        .map(|r| if r.mode == Mode::Base { "base" } else { "rdp" })
        .collect();
    profiles.dedup();
    for name in profiles {
        let pe = if name == "base" { &cfg.base } else { &cfg.rdp };
        println!("peak_gflops ({name}, per PE) = {}", peak_gflops(pe));
    }
    print!("{}", markdown_table(reports));
    if let [base, .., sw] = reports {
        if base.mode == Mode::Base && sw.mode == Mode::Sw && base.achieved_gflops > 0.0 {
            println!(
                "speedup sw vs base = {:.3}",
                sw.achieved_gflops / base.achieved_gflops
            );
        }
    }
}
