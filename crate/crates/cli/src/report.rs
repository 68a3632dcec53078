use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mfa_core::cgra::Mode;
use serde::Serialize;

use crate::fail::{self, Failure};
use crate::sim::{rows_csv, Row};

/// A grid step whose relative throughput gain is below this fraction of
/// its relative tile gain counts as saturated.
pub const SATURATION_MARGINAL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TidyRow {
    pub source: String,
    pub row: Row,
    pub utilization_pct: f64,
    pub speedup_vs_base: Option<f64>,
}

/// The CSV layout of a tidy row: the sweep columns followed by the derived
/// ones. The csv writer cannot flatten nested structs.
#[derive(Serialize)]
struct TidyRecord<'a> {
    source: &'a str,
    workload: &'a str,
    target: &'a str,
    mode: Mode,
    tiles: u32,
    cycles: u64,
    flops: u64,
    stall_cycles: u64,
    filled_stalls: u64,
    instructions: u64,
    noc_transfers: u64,
    achieved_gflops: f64,
    peak_gflops: f64,
    utilization: f64,
    utilization_pct: f64,
    speedup_vs_base: Option<f64>,
}

impl<'a> From<&'a TidyRow> for TidyRecord<'a> {
    fn from(t: &'a TidyRow) -> Self {
        let r = &t.row;
        Self {
            source: &t.source,
            workload: &r.workload,
            target: &r.target,
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
            utilization_pct: t.utilization_pct,
            speedup_vs_base: t.speedup_vs_base,
        }
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>, Failure> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Failure::io(path, e))?;
    let mut rows = Vec::new();
    for rec in rd.deserialize() {
        rows.push(rec.map_err(|e| Failure::io(path, e))?);
    }
    Ok(rows)
}

fn speedup(rows: &[Row], r: &Row) -> Option<f64> {
    let base = rows
        .iter()
        .find(|b| b.mode == Mode::Base && b.workload == r.workload && b.target == r.target)?;
    (base.achieved_gflops > 0.0).then(|| r.achieved_gflops / base.achieved_gflops)
}

/// First grid configuration, by tile count, at which adding tiles stops
/// paying off, with the marginal scaling that flagged it.
pub fn saturation(grid: &[&Row]) -> Option<(String, f64)> {
    grid.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        if a.achieved_gflops <= 0.0 || b.tiles <= a.tiles {
            return None;
        }
        let gain = b.achieved_gflops / a.achieved_gflops - 1.0;
        let added = f64::from(b.tiles) / f64::from(a.tiles) - 1.0;
        let marginal = gain / added;
        (marginal < SATURATION_MARGINAL).then(|| (b.target.clone(), marginal))
    })
}

pub fn summarize(sources: &[(PathBuf, Vec<Row>)]) -> (String, Vec<TidyRow>) {
    let all: Vec<Row> = sources
        .iter()
        .flat_map(|(_, rows)| rows.iter().cloned())
        .collect();
    let mut tidy = Vec::with_capacity(all.len());
    for (path, rows) in sources {
        for r in rows {
            tidy.push(TidyRow {
                source: path.display().to_string(),
                row: r.clone(),
                utilization_pct: 100.0 * r.utilization,
                speedup_vs_base: speedup(&all, r),
            });
        }
    }

    let mut md = String::from(
        "| workload | target | mode | tiles | cycles | GFLOP/s | utilization % | speedup vs base |\n\
         |---|---|---|---:|---:|---:|---:|---:|\n",
    );
    for t in &tidy {
        let r = &t.row;
        let sp = t
            .speedup_vs_base
            .map_or_else(|| "-".to_string(), |s| format!("{s:.3}"));
        writeln!(
            md,
            "| {} | {} | {} | {} | {} | {:.3} | {:.2} | {} |",
            r.workload,
            r.target,
            r.mode,
            r.tiles,
            r.cycles,
            r.achieved_gflops,
            t.utilization_pct,
            sp
        )
        .unwrap();
    }

    let mut notes = Vec::new();
    for t in tidy.iter().filter(|t| t.row.mode != Mode::Base) {
        if let Some(s) = t.speedup_vs_base {
            notes.push(format!(
                "speedup {} vs base ({}, {}) = {s:.3}",
                t.row.mode, t.row.workload, t.row.target
            ));
        }
    }
    let mut keys: Vec<(String, Mode)> = all
        .iter()
        .filter(|r| r.target != "pe")
        .map(|r| (r.workload.clone(), r.mode))
        .collect();
    keys.sort();
    keys.dedup();
    for (workload, mode) in keys {
        let mut grid: Vec<&Row> = all
            .iter()
            .filter(|r| r.target != "pe" && r.workload == workload && r.mode == mode)
            .collect();
        grid.sort_by_key(|r| r.tiles);
        let Some(largest) = grid.last() else { continue };
        let sat = match saturation(&grid) {
            Some((target, m)) => format!("saturates at {target} (marginal scaling {m:.3})"),
            None => format!("no saturation up to {}", largest.target),
        };
        notes.push(format!(
            "grid {workload} {mode}: {sat}; utilization at {} = {:.2}%",
            largest.target,
            100.0 * largest.utilization
        ));
    }
    if !notes.is_empty() {
        md.push('\n');
        for n in notes {
            md.push_str(&n);
            md.push('\n');
        }
    }
    (md, tidy)
}

pub fn run(inputs: &[PathBuf], out: Option<&Path>, tidy_out: Option<&Path>) -> Result<(), Failure> {
    if inputs.is_empty() {
        return Err(Failure::config("report needs at least one CSV"));
    }
    let mut sources = Vec::with_capacity(inputs.len());
    for p in inputs {
        sources.push((p.clone(), read_rows(p)?));
    }
    let (md, tidy) = summarize(&sources);
    match out {
        Some(p) => fail::write(p, &md)?,
        None => print!("{md}"),
    }
    if let Some(p) = tidy_out {
        let records: Vec<TidyRecord> = tidy.iter().map(TidyRecord::from).collect();
        fail::write(p, &rows_csv(&records)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(target: &str, mode: Mode, tiles: u32, gflops: f64) -> Row {
        Row {
            workload: "w".into(),
            target: target.into(),
            mode,
            tiles,
            cycles: 100,
            flops: 100,
            stall_cycles: 0,
            filled_stalls: 0,
            instructions: 0,
            noc_transfers: 0,
            achieved_gflops: gflops,
            peak_gflops: 4.9,
            utilization: 0.5,
        }
    }

    #[test]
    fn speedups_are_per_workload_and_target() {
        let rows = vec![row("pe", Mode::Base, 1, 0.4), row("pe", Mode::Sw, 1, 1.0)];
        let (md, tidy) = summarize(&[("a.csv".into(), rows)]);
        assert_eq!(tidy[0].speedup_vs_base, Some(1.0));
        assert_eq!(tidy[1].speedup_vs_base, Some(2.5));
        assert!(md.contains("speedup sw vs base (w, pe) = 2.500"), "{md}");
    }

    #[test]
    fn saturation_is_the_first_weak_step() {
        let a = row("2x2", Mode::Sw, 2, 1.0);
        let b = row("3x3", Mode::Sw, 6, 2.5);
        let c = row("4x4", Mode::Sw, 16, 3.0);
        assert_eq!(saturation(&[&a, &b]), None);
        let (t, m) = saturation(&[&a, &b, &c]).unwrap();
        assert_eq!(t, "4x4");
        assert!((m - 0.2 / 1.666_666_666_666_666_7).abs() < 1e-12);
    }
}
