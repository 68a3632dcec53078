//! Cycle-level list scheduling of an instruction DAG on one PE.
//!
//! Each instruction stream feeds three in-order queues: arithmetic, loads
//! and stores. Per cycle up to `issue_width` arithmetic instructions issue,
//! limited by free multipliers and adders (all units are pipelined with an
//! initiation interval of one), and up to `mem_ports` memory operations,
//! loads first. An instruction issues once every operand has completed.
//!
//! With several streams, the earliest unfinished stream is the primary and
//! the next ones may issue into cycles it leaves empty.

use super::config::PeConfig;
use super::dag::{Class, InstrDag, NodeId, Op};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    /// Completion time of the last instruction.
    pub cycles: u64,
    /// Cycles up to the last arithmetic issue in which none issued.
    pub stall_cycles: u64,
    /// Primary-stream stall cycles in which another stream issued.
    pub filled_stalls: u64,
    /// Issue cycle of each node (free nodes: ready time).
    pub issue: Vec<u64>,
    pub streams: usize,
}

/// Maximal runs of non-free nodes sharing `(call, routine)`.
pub fn routine_segments(dag: &InstrDag) -> Vec<Vec<NodeId>> {
    let mut segs: Vec<Vec<NodeId>> = Vec::new();
    let mut key = None;
    for (i, n) in dag.nodes.iter().enumerate() {
        if n.class() == Class::Free {
            continue;
        }
        let k = (n.call, n.routine);
        if key != Some(k) {
            segs.push(Vec::new());
            key = Some(k);
        }
        segs.last_mut().expect("segment pushed").push(i as NodeId);
    }
    segs
}

/// Schedules the whole DAG as one in-order stream.
pub fn schedule(dag: &InstrDag, cfg: &PeConfig) -> Result<Schedule> {
    let all: Vec<NodeId> = (0..dag.len() as NodeId)
        .filter(|&i| dag.node(i).class() != Class::Free)
        .collect();
    schedule_streams(dag, cfg, &[all], 1)
}

/// Schedules routine segments as separate streams, `window` at a time.
pub fn schedule_overlap(dag: &InstrDag, cfg: &PeConfig, window: usize) -> Result<Schedule> {
    schedule_streams(dag, cfg, &routine_segments(dag), window.max(1))
}

struct Stream {
    queues: [Vec<NodeId>; 3],
    heads: [usize; 3],
}

impl Stream {
    fn head(&self, q: usize) -> Option<NodeId> {
        self.queues[q].get(self.heads[q]).copied()
    }

    fn done(&self) -> bool {
        (0..3).all(|q| self.heads[q] >= self.queues[q].len())
    }
}

const UNSET: u64 = u64::MAX;

pub fn schedule_streams(
    dag: &InstrDag,
    cfg: &PeConfig,
    streams: &[Vec<NodeId>],
    window: usize,
) -> Result<Schedule> {
    cfg.validate()?;
    let n = dag.len();
    let mut done = vec![UNSET; n];
    let mut issue = vec![UNSET; n];
    let mut queued = 0usize;
    let mut st: Vec<Stream> = Vec::with_capacity(streams.len());
    for s in streams {
        let mut queues: [Vec<NodeId>; 3] = Default::default();
        for &id in s {
            let node = dag.node(id);
            let q = match node.class() {
                Class::Arith => {
                    let (m, a) = node.units();
                    if m > cfg.multipliers || a > cfg.adders {
                        return Err(Error::Invalid(format!(
                            "node {id} needs {m} multipliers and {a} adders"
                        )));
                    }
                    0
                }
                Class::Load => 1,
                Class::Store => 2,
                Class::Free => continue,
            };
            queues[q].push(id);
            queued += 1;
        }
        st.push(Stream {
            queues,
            heads: [0; 3],
        });
    }

    // Free nodes complete when their source does.
    let free_ready = |done: &[u64], id: NodeId| -> u64 {
        match dag.node(id).op {
            Op::Input(_) => 0,
            Op::Extract { src, .. } => done[src as usize],
            _ => done[id as usize],
        }
    };
    let ready = |done: &[u64], id: NodeId, cycle: u64| -> bool {
        dag.node(id).deps().iter().all(|d| {
            let t = if dag.node(d).class() == Class::Free {
                free_ready(done, d)
            } else {
                done[d as usize]
            };
            t != UNSET && t <= cycle
        })
    };

    let mut cycle = 0u64;
    let mut first = 0usize;
    let mut issued_total = 0usize;
    let mut horizon = 0u64;
    let mut arith_cycles = 0u64;
    let mut last_arith: Option<u64> = None;
    let mut filled = 0u64;
    while issued_total < queued {
        while first < st.len() && st[first].done() {
            first += 1;
        }
        let active: Vec<usize> = (first..st.len())
            .filter(|&s| !st[s].done())
            .take(window)
            .collect();
        let mut any = false;

        let (mut slots, mut muls, mut adds) = (cfg.issue_width, 0u32, 0u32);
        let mut primary_issued = false;
        let mut other_issued = false;
        for (rank, &s) in active.iter().enumerate() {
            while slots > 0 {
                let Some(id) = st[s].head(0) else { break };
                let (m, a) = dag.node(id).units();
                if muls + m > cfg.multipliers || adds + a > cfg.adders || !ready(&done, id, cycle) {
                    break;
                }
                issue[id as usize] = cycle;
                done[id as usize] = cycle + u64::from(dag.node(id).latency(cfg));
                horizon = horizon.max(done[id as usize]);
                st[s].heads[0] += 1;
                slots -= 1;
                muls += m;
                adds += a;
                issued_total += 1;
                any = true;
                if rank == 0 {
                    primary_issued = true;
                } else {
                    other_issued = true;
                }
            }
        }
        if primary_issued || other_issued {
            arith_cycles += 1;
            last_arith = Some(cycle);
            if !primary_issued && st[active[0]].head(0).is_some() {
                filled += 1;
            }
        }

        let mut ports = cfg.mem_ports;
        for q in [1, 2] {
            for &s in &active {
                while ports > 0 {
                    let Some(id) = st[s].head(q) else { break };
                    if !ready(&done, id, cycle) {
                        break;
                    }
                    issue[id as usize] = cycle;
                    done[id as usize] = cycle + u64::from(dag.node(id).latency(cfg));
                    horizon = horizon.max(done[id as usize]);
                    st[s].heads[q] += 1;
                    ports -= 1;
                    issued_total += 1;
                    any = true;
                }
            }
        }

        if !any && cycle >= horizon && issued_total < queued {
            let stuck: Vec<NodeId> = active
                .iter()
                .flat_map(|&s| (0..3).filter_map(|q| st[s].head(q)).collect::<Vec<_>>())
                .collect();
            return Err(Error::Dependence(format!(
                "no instruction can issue at cycle {cycle}; blocked heads {stuck:?}"
            )));
        }
        cycle += 1;
    }

    for (i, node) in dag.nodes.iter().enumerate() {
        if node.class() == Class::Free {
            let t = free_ready(&done, i as NodeId);
            if t == UNSET {
                return Err(Error::Dependence(format!(
                    "node {i} reads an unscheduled value"
                )));
            }
            issue[i] = t;
            done[i] = t;
        }
    }
    for (i, node) in dag.nodes.iter().enumerate() {
        if issue[i] == UNSET {
            return Err(Error::Dependence(format!("node {i} was never scheduled")));
        }
        if let Some(d) = node.deps().iter().find(|&d| done[d as usize] > issue[i]) {
            return Err(Error::Dependence(format!(
                "node {i} issued at {} before operand {d} completed at {}",
                issue[i], done[d as usize]
            )));
        }
    }
    let cycles = done.iter().copied().max().unwrap_or(0);
    let stall_cycles = last_arith.map_or(0, |l| l + 1 - arith_cycles);
    Ok(Schedule {
        cycles,
        stall_cycles,
        filled_stalls: filled,
        issue,
        streams: streams.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgra::dag::Routine;

    fn dag(ops: Vec<Op>) -> InstrDag {
        let mut d = InstrDag::default();
        for op in ops {
            d.push(op, Routine::Gemm, 0);
        }
        d
    }

    #[test]
    fn single_multiply_takes_its_latency() {
        let d = dag(vec![Op::Input(1.0), Op::Input(2.0), Op::Mul(0, 1)]);
        let s = schedule(&d, &PeConfig::base()).unwrap();
        assert_eq!((s.cycles, s.stall_cycles), (4, 0));
    }

    #[test]
    fn dependent_adds_stall() {
        let d = dag(vec![
            Op::Input(1.0),
            Op::Input(2.0),
            Op::Add(0, 1),
            Op::Add(2, 1),
        ]);
        let s = schedule(&d, &PeConfig::base()).unwrap();
        assert_eq!((s.cycles, s.stall_cycles), (6, 2));
    }

    #[test]
    fn independent_multiplies_pipeline() {
        let d = dag(vec![
            Op::Input(1.0),
            Op::Input(2.0),
            Op::Mul(0, 1),
            Op::Mul(1, 0),
        ]);
        assert_eq!(schedule(&d, &PeConfig::base()).unwrap().cycles, 5);
        let wide = PeConfig {
            issue_width: 2,
            ..PeConfig::rdp()
        };
        let s = schedule(&d, &wide).unwrap();
        assert_eq!(s.cycles, 4);
        assert_eq!(s.issue[2], s.issue[3]);
    }

    #[test]
    fn load_waits_for_store() {
        let d = dag(vec![
            Op::Input(1.0),
            Op::Mul(0, 0),
            Op::Store {
                src: 1,
                addr: 0,
                negate: false,
            },
            Op::Load {
                addr: 0,
                dep: Some(2),
                init: 0.0,
            },
            Op::Add(3, 0),
        ]);
        let cfg = PeConfig::base();
        let s = schedule(&d, &cfg).unwrap();
        // mul 0..4, store 4..6, load 6..8, add 8..11
        assert_eq!(s.issue[2..].to_vec(), vec![4, 6, 8]);
        assert_eq!(s.cycles, 11);
        assert_eq!(s.stall_cycles, 7);
    }

    #[test]
    fn empty_dag() {
        let s = schedule(&InstrDag::default(), &PeConfig::base()).unwrap();
        assert_eq!((s.cycles, s.stall_cycles), (0, 0));
    }

    #[test]
    fn overlap_fills_primary_stalls() {
        // Two independent dependent-add pairs in different calls.
        let mut d = InstrDag::default();
        let x = d.push(Op::Input(1.0), Routine::Gemm, 0);
        let a = d.push(Op::Add(x, x), Routine::Gemm, 0);
        d.push(Op::Add(a, x), Routine::Gemm, 0);
        let b = d.push(Op::Add(x, x), Routine::Gemm, 1);
        d.push(Op::Add(b, x), Routine::Gemm, 1);
        let cfg = PeConfig::base();
        let serial = schedule(&d, &cfg).unwrap();
        let over = schedule_overlap(&d, &cfg, 2).unwrap();
        assert_eq!(routine_segments(&d).len(), 2);
        assert!(over.cycles < serial.cycles);
        assert!(over.filled_stalls >= 1);
        let single = schedule_overlap(&d, &cfg, 1).unwrap();
        assert_eq!(single.cycles, serial.cycles);
    }

    #[test]
    fn oversized_macro_is_rejected() {
        use crate::cgra::dag::{Lane, Leaf, LeafKind};
        let leaf = Leaf {
            kind: LeafKind::Product(0, 0),
            neg: false,
        };
        let d = dag(vec![
            Op::Input(1.0),
            Op::Macro {
                pattern: 0,
                lanes: vec![Lane {
                    leaves: vec![leaf; 2],
                    neg: false,
                }],
            },
        ]);
        assert!(matches!(
            schedule(&d, &PeConfig::base()),
            Err(Error::Invalid(_))
        ));
        assert!(schedule(&d, &PeConfig::rdp()).is_ok());
    }
}
