//! Scalar instruction DAG.
//!
//! Node ids are positions in program order and every operand refers to an
//! earlier node, so the id order is a topological order and doubles as the
//! in-order issue order. Memory is versioned: each call writes fresh
//! addresses, and a load names the store it reads from.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::{macro_latency, PeConfig};

pub type NodeId = u32;

/// The dense routine an instruction belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Routine {
    Geqrf,
    Gemm,
    Getrf,
}

impl fmt::Display for Routine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Routine::Geqrf => "geqrf",
            Routine::Gemm => "gemm",
            Routine::Getrf => "getrf",
        })
    }
}

/// A signed operand of a macro lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leaf {
    pub kind: LeafKind,
    pub neg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeafKind {
    /// Value computed elsewhere.
    Acc(NodeId),
    /// Product of two values, computed inside the macro.
    Product(NodeId, NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub leaves: Vec<Leaf>,
    /// The lane's tree sum is negated on output.
    pub neg: bool,
}

impl Lane {
    pub fn terms(&self) -> u32 {
        self.leaves
            .iter()
            .filter(|l| matches!(l.kind, LeafKind::Product(..)))
            .count() as u32
    }

    pub fn flops(&self) -> u64 {
        (self.terms() + self.leaves.len() as u32 - 1) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    /// A value present before the workload starts (constant or register).
    Input(f64),
    /// Reads `addr`; `dep` is the store that produced it, `init` the
    /// initial value when there is none.
    Load {
        addr: u64,
        dep: Option<NodeId>,
        init: f64,
    },
    Store {
        src: NodeId,
        addr: u64,
        negate: bool,
    },
    Mul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Div(NodeId, NodeId),
    Sqrt(NodeId),
    Macro {
        pattern: u16,
        lanes: Vec<Lane>,
    },
    /// Lane `lane` of a multi-lane macro.
    Extract {
        src: NodeId,
        lane: u16,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Free,
    Arith,
    Load,
    Store,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub op: Op,
    pub routine: Routine,
    /// Index of the kernel call that emitted the node.
    pub call: u32,
}

impl Node {
    pub fn class(&self) -> Class {
        match self.op {
            Op::Input(_) | Op::Extract { .. } => Class::Free,
            Op::Load { .. } => Class::Load,
            Op::Store { .. } => Class::Store,
            _ => Class::Arith,
        }
    }

    pub fn flops(&self) -> u64 {
        match &self.op {
            Op::Mul(..) | Op::Add(..) | Op::Sub(..) | Op::Div(..) | Op::Sqrt(_) => 1,
            Op::Macro { lanes, .. } => lanes.iter().map(Lane::flops).sum(),
            _ => 0,
        }
    }

    /// Data predecessors.
    pub fn deps(&self) -> Deps {
        let mut d = Deps::default();
        match &self.op {
            Op::Input(_) => {}
            Op::Load { dep, .. } => {
                if let Some(s) = dep {
                    d.push(*s);
                }
            }
            Op::Store { src, .. } | Op::Sqrt(src) | Op::Extract { src, .. } => d.push(*src),
            Op::Mul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Div(a, b) => {
                d.push(*a);
                d.push(*b);
            }
            Op::Macro { lanes, .. } => {
                for lane in lanes {
                    for leaf in &lane.leaves {
                        match leaf.kind {
                            LeafKind::Acc(a) => d.push(a),
                            LeafKind::Product(a, b) => {
                                d.push(a);
                                d.push(b);
                            }
                        }
                    }
                }
            }
        }
        d
    }

    /// Cycles from issue to result.
    pub fn latency(&self, cfg: &PeConfig) -> u32 {
        match &self.op {
            Op::Input(_) | Op::Extract { .. } => 0,
            Op::Load { .. } => cfg.load_latency,
            Op::Store { .. } => cfg.store_latency,
            Op::Mul(..) => cfg.mul_latency,
            Op::Add(..) | Op::Sub(..) => cfg.add_latency,
            Op::Div(..) => cfg.div_latency,
            Op::Sqrt(_) => cfg.sqrt_latency,
            Op::Macro { lanes, .. } => {
                let leaves = lanes
                    .iter()
                    .map(|l| l.leaves.len() as u32)
                    .max()
                    .unwrap_or(1);
                macro_latency(cfg, leaves)
            }
        }
    }

    /// `(multipliers, adders)` occupied in the issue cycle.
    pub fn units(&self) -> (u32, u32) {
        match &self.op {
            Op::Mul(..) | Op::Div(..) | Op::Sqrt(_) => (1, 0),
            Op::Add(..) | Op::Sub(..) => (0, 1),
            Op::Macro { lanes, .. } => lanes.iter().fold((0, 0), |(m, a), l| {
                (m + l.terms(), a + l.leaves.len() as u32 - 1)
            }),
            _ => (0, 0),
        }
    }
}

/// Small inline operand list.
#[derive(Debug, Default, Clone)]
pub struct Deps {
    small: [NodeId; 2],
    len: usize,
    more: Vec<NodeId>,
}

impl Deps {
    fn push(&mut self, id: NodeId) {
        if self.len < 2 {
            self.small[self.len] = id;
        } else {
            self.more.push(id);
        }
        self.len += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.small[..self.len.min(2)]
            .iter()
            .chain(self.more.iter())
            .copied()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InstrDag {
    pub nodes: Vec<Node>,
}

impl InstrDag {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn push(&mut self, op: Op, routine: Routine, call: u32) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node { op, routine, call });
        id
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn flops(&self) -> u64 {
        self.nodes.iter().map(Node::flops).sum()
    }

    /// `(muls, adds)` summed over scalar and macro nodes; divides and square
    /// roots count as multiplies.
    pub fn op_counts(&self) -> (u64, u64) {
        self.nodes.iter().fold((0, 0), |(m, a), n| {
            let (nm, na) = n.units();
            (m + u64::from(nm), a + u64::from(na))
        })
    }

    pub fn count(&self, pred: impl Fn(&Op) -> bool) -> usize {
        self.nodes.iter().filter(|n| pred(&n.op)).count()
    }

    /// Number of consumers of each node.
    pub fn use_counts(&self) -> Vec<u32> {
        let mut uses = vec![0u32; self.nodes.len()];
        for n in &self.nodes {
            for d in n.deps().iter() {
                uses[d as usize] += 1;
            }
        }
        uses
    }

    /// Checks that operands precede their users.
    pub fn is_topological(&self) -> bool {
        self.nodes
            .iter()
            .enumerate()
            .all(|(i, n)| n.deps().iter().all(|d| (d as usize) < i))
    }

    /// Scalar values of every node in program order. Macro lanes sum their
    /// leaves with a balanced pairwise tree.
    pub fn evaluate(&self) -> Vec<f64> {
        let mut val = vec![0.0; self.nodes.len()];
        let mut multi: HashMap<NodeId, Vec<f64>> = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let g = |id: NodeId| val[id as usize];
            val[i] = match &n.op {
                Op::Input(v) => *v,
                Op::Load { dep, init, .. } => dep.map_or(*init, g),
                Op::Store { src, negate, .. } => {
                    if *negate {
                        -g(*src)
                    } else {
                        g(*src)
                    }
                }
                Op::Mul(a, b) => g(*a) * g(*b),
                Op::Add(a, b) => g(*a) + g(*b),
                Op::Sub(a, b) => g(*a) - g(*b),
                Op::Div(a, b) => g(*a) / g(*b),
                Op::Sqrt(a) => g(*a).sqrt(),
                Op::Macro { lanes, .. } => {
                    let outs: Vec<f64> = lanes.iter().map(|l| eval_lane(l, &val)).collect();
                    let first = outs[0];
                    if lanes.len() > 1 {
                        multi.insert(i as NodeId, outs);
                    }
                    first
                }
                Op::Extract { src, lane } => match multi.get(src) {
                    Some(outs) => outs[*lane as usize],
                    None => g(*src),
                },
            };
        }
        val
    }
}

/// Balanced pairwise reduction of a lane's signed leaves. Signs are carried
/// exactly: `(-a) + (-b)` is computed as `-(a + b)`, `a + (-b)` as `a - b`.
pub(crate) fn eval_lane(lane: &Lane, val: &[f64]) -> f64 {
    let mut parts: Vec<(f64, bool)> = lane
        .leaves
        .iter()
        .map(|l| {
            let v = match l.kind {
                LeafKind::Acc(a) => val[a as usize],
                LeafKind::Product(a, b) => val[a as usize] * val[b as usize],
            };
            (v, l.neg)
        })
        .collect();
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        for pair in parts.chunks(2) {
            next.push(match pair {
                [x] => *x,
                [x, y] => signed_add(*x, *y),
                _ => unreachable!(),
            });
        }
        parts = next;
    }
    let (v, neg) = parts[0];
    if neg != lane.neg {
        -v
    } else {
        v
    }
}

/// Adds two sign-tagged magnitudes, returning a sign-tagged result.
pub(crate) fn signed_add((a, na): (f64, bool), (b, nb): (f64, bool)) -> (f64, bool) {
    match (na, nb) {
        (false, false) => (a + b, false),
        (true, true) => (a + b, true),
        (false, true) => (a - b, false),
        (true, false) => (b - a, false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_and_counts() {
        let mut d = InstrDag::default();
        let a = d.push(Op::Input(2.0), Routine::Gemm, 0);
        let b = d.push(Op::Input(3.0), Routine::Gemm, 0);
        let m = d.push(Op::Mul(a, b), Routine::Gemm, 0);
        let s = d.push(Op::Sub(m, a), Routine::Gemm, 0);
        let st = d.push(
            Op::Store {
                src: s,
                addr: 0,
                negate: true,
            },
            Routine::Gemm,
            0,
        );
        d.push(
            Op::Load {
                addr: 0,
                dep: Some(st),
                init: 0.0,
            },
            Routine::Gemm,
            1,
        );
        let v = d.evaluate();
        assert_eq!(&v[2..], &[6.0, 4.0, -4.0, -4.0]);
        assert_eq!(d.flops(), 2);
        assert_eq!(d.use_counts(), vec![2, 1, 1, 1, 1, 0]);
        assert!(d.is_topological());
    }

    #[test]
    fn macro_lanes_and_extract() {
        let mut d = InstrDag::default();
        let x: Vec<NodeId> = (1..=4)
            .map(|v| d.push(Op::Input(v as f64), Routine::Gemm, 0))
            .collect();
        let leaf = |kind| Leaf { kind, neg: false };
        let lane0 = Lane {
            leaves: vec![
                leaf(LeafKind::Product(x[0], x[1])),
                leaf(LeafKind::Product(x[2], x[3])),
            ],
            neg: false,
        };
        let lane1 = Lane {
            leaves: vec![
                leaf(LeafKind::Acc(x[3])),
                Leaf {
                    kind: LeafKind::Product(x[0], x[2]),
                    neg: true,
                },
            ],
            neg: true,
        };
        let m = d.push(
            Op::Macro {
                pattern: 0,
                lanes: vec![lane0, lane1],
            },
            Routine::Gemm,
            0,
        );
        let e = d.push(Op::Extract { src: m, lane: 1 }, Routine::Gemm, 0);
        let v = d.evaluate();
        assert_eq!(v[m as usize], 14.0);
        assert_eq!(v[e as usize], -(4.0 - 3.0));
        assert_eq!(d.node(m).flops(), 3 + 2);
        assert_eq!(d.node(m).units(), (3, 2));
        let cfg = PeConfig::rdp();
        assert_eq!(d.node(m).latency(&cfg), 4 + 3);
    }

    #[test]
    fn signed_addition_is_exact() {
        assert_eq!(signed_add((1.0, true), (3.0, false)), (2.0, false));
        assert_eq!(signed_add((1.0, true), (3.0, true)), (4.0, true));
        assert_eq!(signed_add((1.0, false), (3.0, true)), (-2.0, false));
    }
}
