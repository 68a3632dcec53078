use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Execution mode of the cycle model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Scalar FPU, no fusion.
    Base,
    /// RDP with macro-op fusion.
    Hw,
    /// RDP with fusion and overlapped routine streams.
    Sw,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Base, Mode::Hw, Mode::Sw];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Base => "base",
            Mode::Hw => "hw",
            Mode::Sw => "sw",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown mode '{s}' (base, hw, sw)")))
    }
}

/// Outcome of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleReport {
    pub workload: String,
    pub mode: Mode,
    /// `"pe"` for a single PE, else the grid name.
    pub target: String,
    pub cycles: u64,
    pub flops: u64,
    pub stall_cycles: u64,
    pub filled_stalls: u64,
    pub instructions: u64,
    pub achieved_gflops: f64,
    pub peak_gflops: f64,
    pub utilization: f64,
    pub tiles: u32,
    /// Words moved across the NoC.
    pub noc_transfers: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_tile: Vec<TileStats>,
}

/// Per-tile totals over all phases of a grid run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileStats {
    pub tile: (u32, u32),
    pub compute_cycles: u64,
    pub transfer_cycles: u64,
    pub flops: u64,
}

impl CycleReport {
    /// Fills the derived rate fields from cycles, flops and the peak.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        workload: &str,
        mode: Mode,
        target: &str,
        cycles: u64,
        flops: u64,
        peak_flops_per_cycle: f64,
        clock_hz: f64,
        tiles: u32,
    ) -> Self {
        let (achieved_gflops, utilization) = if cycles == 0 {
            (0.0, 0.0)
        } else {
            let c = cycles as f64;
            (
                flops as f64 * clock_hz / c / 1e9,
                flops as f64 / (c * peak_flops_per_cycle),
            )
        };
        Self {
            workload: workload.to_string(),
            mode,
            target: target.to_string(),
            cycles,
            flops,
            stall_cycles: 0,
            filled_stalls: 0,
            instructions: 0,
            achieved_gflops,
            peak_gflops: peak_flops_per_cycle * clock_hz / 1e9,
            utilization,
            tiles,
            noc_transfers: 0,
            per_tile: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }
}

/// Markdown table over a set of reports.
pub fn markdown_table(reports: &[CycleReport]) -> String {
    let mut s = String::from(
        "| workload | target | mode | cycles | flops | stalls | filled | GFLOP/s | peak | utilization |\n\
         |---|---|---|---:|---:|---:|---:|---:|---:|---:|\n",
    );
    for r in reports {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {:.3} | {:.3} | {:.4} |\n",
            r.workload,
            r.target,
            r.mode,
            r.cycles,
            r.flops,
            r.stall_cycles,
            r.filled_stalls,
            r.achieved_gflops,
            r.peak_gflops,
            r.utilization
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_and_empty_case() {
        let r = CycleReport::new("w", Mode::Hw, "pe", 100, 350, 7.0, 700e6, 1);
        assert_eq!(r.utilization, 0.5);
        assert!((r.achieved_gflops - 2.45).abs() < 1e-12);
        assert!((r.peak_gflops - 4.9).abs() < 1e-12);
        let e = CycleReport::new("empty", Mode::Base, "pe", 0, 0, 2.0, 700e6, 1);
        assert_eq!((e.utilization, e.achieved_gflops), (0.0, 0.0));
    }

    #[test]
    fn json_round_trip_and_modes() {
        let r = CycleReport::new("w", Mode::Sw, "pe", 10, 20, 7.0, 1e9, 1);
        assert_eq!(CycleReport::from_json(&r.to_json()).unwrap(), r);
        assert_eq!("hw".parse::<Mode>().unwrap(), Mode::Hw);
        assert!("fast".parse::<Mode>().is_err());
        assert!(markdown_table(&[r]).lines().count() == 3);
    }
}
