use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Functional units, latencies and storage of one processing element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeConfig {
    pub multipliers: u32,
    pub adders: u32,
    pub clock_hz: f64,
    pub mul_latency: u32,
    pub add_latency: u32,
    pub load_latency: u32,
    pub store_latency: u32,
    /// Divide and square root run on a multiplier.
    pub div_latency: u32,
    pub sqrt_latency: u32,
    pub issue_width: u32,
    /// Load/store ports shared by all memory operations in a cycle.
    pub mem_ports: u32,
    pub registers: u32,
    pub local_mem_bytes: u64,
    /// Number of independent accumulation chains the lowering interleaves.
    pub interleave: u32,
}

impl PeConfig {
    /// Scalar FPU: one multiplier, one adder.
    pub fn base() -> Self {
        Self {
            multipliers: 1,
            adders: 1,
            clock_hz: 700e6,
            mul_latency: 4,
            add_latency: 3,
            load_latency: 2,
            store_latency: 2,
            div_latency: 12,
            sqrt_latency: 12,
            issue_width: 1,
            mem_ports: 1,
            registers: 256,
            local_mem_bytes: 262_144,
            interleave: 2,
        }
    }

    /// Reconfigurable datapath: four multipliers, three adders.
    pub fn rdp() -> Self {
        Self {
            multipliers: 4,
            adders: 3,
            interleave: 7,
            ..Self::base()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clock_hz > 0.0) || !self.clock_hz.is_finite() {
            return Err(Error::Invalid(format!(
                "clock_hz must be positive, got {}",
                self.clock_hz
            )));
        }
        if self.multipliers == 0 || self.adders == 0 {
            return Err(Error::Invalid(
                "a PE needs at least one multiplier and one adder".into(),
            ));
        }
        if self.issue_width == 0 || self.mem_ports == 0 || self.interleave == 0 {
            return Err(Error::Invalid(
                "issue_width, mem_ports and interleave must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn peak_flops_per_cycle(&self) -> f64 {
        f64::from(self.multipliers + self.adders)
    }
}

/// `(multipliers + adders)·clock / 1e9`.
pub fn peak_gflops(cfg: &PeConfig) -> f64 {
    cfg.peak_flops_per_cycle() * cfg.clock_hz / 1e9
}

/// A fused reduction: each of `lanes` lanes multiplies `terms` operand
/// pairs and sums the products, plus `acc` extra addends, in an adder tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroOpPattern {
    pub name: String,
    pub lanes: u32,
    pub terms: u32,
    pub acc: u32,
}

impl MacroOpPattern {
    pub fn new(name: &str, lanes: u32, terms: u32, acc: u32) -> Self {
        Self {
            name: name.into(),
            lanes,
            terms,
            acc,
        }
    }

    pub fn muls(&self) -> u32 {
        self.lanes * self.terms
    }

    pub fn adds(&self) -> u32 {
        self.lanes * (self.terms + self.acc).saturating_sub(1)
    }

    pub fn flops(&self) -> u32 {
        self.muls() + self.adds()
    }

    pub fn fits(&self, cfg: &PeConfig) -> bool {
        self.lanes >= 1
            && self.terms >= 1
            && self.terms + self.acc >= 2
            && self.muls() <= cfg.multipliers
            && self.adds() <= cfg.adders
    }

    /// One multiply stage followed by the adder tree.
    pub fn latency(&self, cfg: &PeConfig) -> u32 {
        macro_latency(cfg, self.terms + self.acc)
    }
}

pub(crate) fn ceil_log2(x: u32) -> u32 {
    if x <= 1 {
        0
    } else {
        32 - (x - 1).leading_zeros()
    }
}

pub(crate) fn macro_latency(cfg: &PeConfig, leaves: u32) -> u32 {
    cfg.mul_latency + cfg.add_latency * ceil_log2(leaves)
}

/// The shipped pattern set. Every entry fits the RDP profile.
pub fn default_patterns() -> Vec<MacroOpPattern> {
    vec![
        MacroOpPattern::new("dot4", 1, 4, 0),
        MacroOpPattern::new("dot3", 1, 3, 0),
        MacroOpPattern::new("dot2", 1, 2, 0),
        MacroOpPattern::new("mac3", 1, 3, 1),
        MacroOpPattern::new("mac2", 1, 2, 1),
        MacroOpPattern::new("reflector_apply", 1, 1, 1),
        MacroOpPattern::new("axpy3", 3, 1, 1),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryPlacement {
    /// The last tile column holds memory; the rest compute.
    LastColumn,
    /// Every tile computes and has a memory PE on its router.
    PerTile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub rows: u32,
    pub cols: u32,
    pub placement: MemoryPlacement,
    pub hop_latency: u32,
    /// Bytes of each memory PE reserved for the owning tile; the rest is the
    /// globally addressable segment.
    pub private_bytes: u64,
}

impl GridConfig {
    /// 2×2, memory in the last column.
    pub fn config1() -> Self {
        Self::square(2, MemoryPlacement::LastColumn)
    }

    /// 3×3, memory in the last column.
    pub fn config2() -> Self {
        Self::square(3, MemoryPlacement::LastColumn)
    }

    /// 4×4, a memory PE on every tile.
    pub fn config3() -> Self {
        Self::square(4, MemoryPlacement::PerTile)
    }

    pub fn square(dim: u32, placement: MemoryPlacement) -> Self {
        Self {
            rows: dim,
            cols: dim,
            placement,
            hop_latency: 2,
            private_bytes: 131_072,
        }
    }

    pub fn standard() -> Vec<Self> {
        vec![Self::config1(), Self::config2(), Self::config3()]
    }

    pub fn name(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.rows != self.cols {
            return Err(Error::Invalid(format!(
                "grid must be square and non-empty, got {}",
                self.name()
            )));
        }
        if self.placement == MemoryPlacement::LastColumn && self.cols < 2 {
            return Err(Error::Invalid(
                "last-column memory needs at least two tile columns".into(),
            ));
        }
        Ok(())
    }

    /// Compute tiles as `(row, col)` in row-major order.
    pub fn compute_tiles(&self) -> Vec<(u32, u32)> {
        let cols = match self.placement {
            MemoryPlacement::LastColumn => self.cols - 1,
            MemoryPlacement::PerTile => self.cols,
        };
        (0..self.rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .collect()
    }

    /// Hops from a compute tile to the memory serving it.
    pub fn memory_hops(&self, tile: (u32, u32)) -> u32 {
        match self.placement {
            MemoryPlacement::LastColumn => self.cols - 1 - tile.1,
            MemoryPlacement::PerTile => 0,
        }
    }

    /// XY routing distance between two tiles.
    pub fn hops(&self, a: (u32, u32), b: (u32, u32)) -> u32 {
        a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
    }
}

/// Everything the simulator needs: both PE profiles, the macro-op set, the
/// overlap window and the grid parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub base: PeConfig,
    pub rdp: PeConfig,
    pub patterns: Vec<MacroOpPattern>,
    /// Routine segments the software-optimized mode keeps in flight.
    pub overlap_window: u32,
    pub grids: Vec<GridConfig>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            base: PeConfig::base(),
            rdp: PeConfig::rdp(),
            patterns: default_patterns(),
            overlap_window: 4,
            grids: GridConfig::standard(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.rdp.validate()?;
        if self.overlap_window == 0 {
            return Err(Error::Invalid("overlap_window must be >= 1".into()));
        }
        if let Some(p) = self.patterns.iter().find(|p| !p.fits(&self.rdp)) {
            return Err(Error::Invalid(format!(
                "pattern '{}' needs {} multipliers and {} adders, RDP has {} and {}",
                p.name,
                p.muls(),
                p.adds(),
                self.rdp.multipliers,
                self.rdp.adders
            )));
        }
        for g in &self.grids {
            g.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
