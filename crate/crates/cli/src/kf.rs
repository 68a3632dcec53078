use std::fmt::Write as _;
use std::path::Path;

use mfa_core::kalman::{run_scenario, ScenarioConfig, Trace};

use crate::fail::{self, Failure};
use crate::manifest::EngineArg;

pub fn run(
    scenario: &Path,
    out: &Path,
    engine: EngineArg,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let (cfg, base) = ScenarioConfig::read_file(scenario)?;
    let sc = cfg.build(&base, seed)?;
    let trace = run_scenario(&sc, engine.into())?;
    fail::write(out, &trace_csv(&trace))?;
    if let Some(last) = trace.rows.last() {
        println!("steps = {}", trace.rows.len());
        println!("final trace(P) = {:e}", last.trace_p);
    }
    Ok(())
}

/// Header `step, x{i}, p{i}_{j} (row-major), trace_p, innovation_norm`;
/// floats in shortest round-trip form.
pub fn trace_csv(trace: &Trace) -> String {
    let Some(first) = trace.rows.first() else {
        return String::new();
    };
    let n = first.state.x.rows();
    let mut s = String::from("step");
    for i in 0..n {
        write!(s, ",x{i}").unwrap();
    }
    for i in 0..n {
        for j in 0..n {
            write!(s, ",p{i}_{j}").unwrap();
        }
    }
    s.push_str(",trace_p,innovation_norm\n");
    for r in &trace.rows {
        write!(s, "{}", r.step).unwrap();
        for i in 0..n {
            write!(s, ",{}", r.state.x.get(i, 0)).unwrap();
        }
        for i in 0..n {
            for j in 0..n {
                write!(s, ",{}", r.state.p.get(i, j)).unwrap();
            }
        }
        writeln!(s, ",{},{}", r.trace_p, r.innovation_norm).unwrap();
    }
    s
}
