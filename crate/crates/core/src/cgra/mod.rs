//! Cycle-level model of a coarse-grained reconfigurable array.
//!
//! A workload (a list of kernel calls on concrete buffers) is lowered to a
//! scalar instruction DAG, optionally fused into macro-ops for the
//! reconfigurable datapath, and list-scheduled on one PE or partitioned
//! across a tile grid. Every simulation checks the DAG's results against
//! the reference kernels before reporting cycles.

pub mod config;
pub mod dag;
pub mod fuse;
pub mod grid;
pub mod lower;
pub mod report;
pub mod schedule;
pub mod sim;
pub mod workload;

pub use config::{
    default_patterns, peak_gflops, GridConfig, MacroOpPattern, MemoryPlacement, PeConfig, SimConfig,
};
pub use dag::InstrDag;
pub use fuse::fuse;
pub use grid::{partition_blocks, simulate_grid, BlockAssignment, GridJob};
pub use lower::lower;
pub use report::{CycleReport, Mode, TileStats};
pub use schedule::schedule;
pub use sim::simulate_pe;
pub use workload::{gemm_workload, kf_workload, mfa_workload, KernelCall, Workload};
