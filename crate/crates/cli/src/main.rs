//! `mfa`: run Schur-complement jobs, Kalman scenarios and cycle-model
//! sweeps from the command line.
//!
//! Exit status: 0 on success, 1 on a numerical failure, 2 on I/O, parse
//! or configuration errors (clap usage errors also exit with 2).

mod fail;
mod kf;
mod manifest;
mod mfa;
mod report;
mod sim;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfa_core::cgra::Mode;
use mfa_core::gen::DEFAULT_SEED;

use crate::fail::Failure;
use crate::manifest::{EngineArg, RunManifest, Sweep, WorkloadKind};

#[derive(Debug, Parser)]
#[command(
    name = "mfa",
    version,
    about = "Modified Faddeeva jobs, Kalman scenarios and CGRA cycle-model sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Schur complement D + C·A⁻¹·B of four matrix files.
    Mfa {
        a: PathBuf,
        b: PathBuf,
        c: PathBuf,
        d: PathBuf,
        /// Output matrix file.
        #[arg(short, long)]
        out: PathBuf,
        /// Print the smallest |R_ii| and the residual against an LU solve.
        #[arg(long)]
        check: bool,
    },
    /// Run a Kalman scenario and write the per-step trace as CSV.
    Kf {
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineArg::Mfa)]
        engine: EngineArg,
        /// Overrides the seed of the scenario file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate a generated workload on the PE model or sweep modes/grids.
    Sim {
        #[arg(long, value_enum, default_value_t = WorkloadKind::Kf)]
        workload: WorkloadKind,
        #[arg(long, default_value_t = 16)]
        size: usize,
        #[arg(long, default_value_t = Mode::Sw)]
        mode: Mode,
        /// Simulator config JSON; built-in defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON report (single run) or CSV (sweeps); stdout otherwise.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        sweep: Option<Sweep>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Summarize sweep CSVs as markdown plus a tidy CSV.
    Report {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        /// Markdown summary; stdout otherwise.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Tidy CSV with derived columns.
        #[arg(long)]
        tidy: Option<PathBuf>,
    },
    /// Execute a JSON run manifest.
    Run { manifest: PathBuf },
}

impl Command {
    fn into_manifest(self) -> Result<RunManifest, Failure> {
        Ok(match self {
            Command::Mfa {
                a,
                b,
                c,
                d,
                out,
                check,
            } => RunManifest::Mfa {
                inputs: [a, b, c, d],
                out,
                check,
            },
            Command::Kf {
                scenario,
                out,
                engine,
                seed,
            } => RunManifest::Kf {
                scenario,
                out,
                engine,
                seed,
            },
            Command::Sim {
                workload,
                size,
                mode,
                config,
                out,
                sweep,
                seed,
            } => RunManifest::Sim {
                workload,
                size,
                mode,
                config,
                out,
                sweep,
                seed,
            },
            Command::Report { csv, out, tidy } => RunManifest::Report {
                inputs: csv,
                out,
                tidy,
            },
            Command::Run { manifest } => RunManifest::read_file(&manifest)?,
        })
    }
}

fn run(m: &RunManifest) -> Result<(), Failure> {
    match m {
        RunManifest::Mfa { inputs, out, check } => mfa::run(inputs, out, *check),
        RunManifest::Kf {
            scenario,
            out,
            engine,
            seed,
        } => kf::run(scenario, out, *engine, *seed),
        RunManifest::Sim {
            workload,
            size,
            mode,
            config,
            out,
            sweep,
            seed,
        } => sim::run(&sim::SimArgs {
            workload: *workload,
            size: *size,
            mode: *mode,
            config: config.as_deref(),
            out: out.as_deref(),
            sweep: *sweep,
            seed: *seed,
        }),
        RunManifest::Report { inputs, out, tidy } => {
            report::run(inputs, out.as_deref(), tidy.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command.into_manifest().and_then(|m| run(&m)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
