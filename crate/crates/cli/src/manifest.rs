use std::path::{Path, PathBuf};

use clap::ValueEnum;
use mfa_core::cgra::Mode;
use mfa_core::kalman::Engine;
use serde::{Deserialize, Serialize};

use crate::fail::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineArg {
    Mfa,
    Direct,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Mfa => Engine::Mfa,
            EngineArg::Direct => Engine::Direct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadKind {
    Kf,
    Mfa,
    Gemm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    Modes,
    Grids,
}

/// One command with all of its inputs. Relative paths in a manifest file
/// are taken relative to the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum RunManifest {
    Mfa {
        inputs: [PathBuf; 4],
        out: PathBuf,
        #[serde(default)]
        check: bool,
    },
    Kf {
        scenario: PathBuf,
        out: PathBuf,
        #[serde(default = "default_engine")]
        engine: EngineArg,
        #[serde(default)]
        seed: Option<u64>,
    },
    Sim {
        workload: WorkloadKind,
        size: usize,
        mode: Mode,
        #[serde(default)]
        config: Option<PathBuf>,
        #[serde(default)]
        out: Option<PathBuf>,
        #[serde(default)]
        sweep: Option<Sweep>,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    Report {
        inputs: Vec<PathBuf>,
        #[serde(default)]
        out: Option<PathBuf>,
        #[serde(default)]
        tidy: Option<PathBuf>,
    },
}

fn default_engine() -> EngineArg {
    EngineArg::Mfa
}

fn default_seed() -> u64 {
    mfa_core::gen::DEFAULT_SEED
}

impl RunManifest {
    pub fn read_file(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let mut m: RunManifest = serde_json::from_str(&text).map_err(|e| Failure::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        m.rebase(base);
        if let RunManifest::Report { inputs, .. } = &m {
            if inputs.is_empty() {
                return Err(Failure::config(format!(
                    "{}: report needs at least one CSV",
                    path.display()
                )));
            }
        }
        Ok(m)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            RunManifest::Mfa { inputs, out, .. } => {
                inputs.iter_mut().for_each(fix);
                fix(out);
            }
            RunManifest::Kf { scenario, out, .. } => {
                fix(scenario);
                fix(out);
            }
            RunManifest::Sim { config, out, .. } => {
                config.iter_mut().for_each(fix);
                out.iter_mut().for_each(fix);
            }
            RunManifest::Report { inputs, out, tidy } => {
                inputs.iter_mut().for_each(fix);
                out.iter_mut().for_each(fix);
                tidy.iter_mut().for_each(fix);
            }
        }
    }
}
