//! Greedy macro-op fusion.
//!
//! Add/sub trees whose inner nodes have a single consumer are collected in
//! program order into groups of signed leaves: a product leaf is a
//! single-use multiply absorbed into the group, an accumulator leaf any
//! other value. A group keeps growing while some pattern could still hold
//! it. Groups whose shape matches a pattern lane exactly become macro
//! nodes; runs of independent groups are packed into multi-lane patterns
//! first.

use std::collections::{BTreeMap, HashMap};

use super::config::MacroOpPattern;
use super::dag::{InstrDag, Lane, Leaf, LeafKind, Node, NodeId, Op};

#[derive(Debug, Clone)]
struct Group {
    leaves: Vec<Leaf>,
    /// Absorbed nodes, root included.
    members: Vec<NodeId>,
}

impl Group {
    fn shape(&self) -> (u32, u32) {
        let t = self
            .leaves
            .iter()
            .filter(|l| matches!(l.kind, LeafKind::Product(..)))
            .count() as u32;
        (t, self.leaves.len() as u32 - t)
    }

    fn inputs(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.leaves.iter().flat_map(|l| match l.kind {
            LeafKind::Acc(a) => vec![a],
            LeafKind::Product(a, b) => vec![a, b],
        })
    }

    fn lane(&self) -> Lane {
        Lane {
            leaves: self.leaves.clone(),
            neg: false,
        }
    }
}

fn flip(leaves: &mut [Leaf]) {
    for l in leaves {
        l.neg = !l.neg;
    }
}

/// Rewrites `dag` with macro nodes for the given patterns. Values change
/// only through the reassociation inside each macro's adder tree.
pub fn fuse(dag: &InstrDag, patterns: &[MacroOpPattern]) -> InstrDag {
    if patterns.is_empty() {
        return dag.clone();
    }
    let uses = dag.use_counts();
    let can_grow = |(t, a): (u32, u32)| patterns.iter().any(|p| p.terms >= t && p.acc >= a);
    let mut open: BTreeMap<NodeId, Group> = BTreeMap::new();

    for (i, node) in dag.nodes.iter().enumerate() {
        let x = i as NodeId;
        let (a, b, sub) = match node.op {
            Op::Add(a, b) => (a, b, false),
            Op::Sub(a, b) => (a, b, true),
            _ => continue,
        };
        let product = |o: NodeId| match dag.node(o).op {
            Op::Mul(p, q) if uses[o as usize] == 1 && a != b => Some((p, q)),
            _ => None,
        };
        let operand =
            |o: NodeId, neg: bool, absorb: bool, open: &BTreeMap<NodeId, Group>| -> Group {
                if absorb && a != b && uses[o as usize] == 1 {
                    if let Some(g) = open.get(&o) {
                        let mut g = g.clone();
                        if neg {
                            flip(&mut g.leaves);
                        }
                        return g;
                    }
                }
                match product(o) {
                    Some((p, q)) => Group {
                        leaves: vec![Leaf {
                            kind: LeafKind::Product(p, q),
                            neg,
                        }],
                        members: vec![o],
                    },
                    None => Group {
                        leaves: vec![Leaf {
                            kind: LeafKind::Acc(o),
                            neg,
                        }],
                        members: Vec::new(),
                    },
                }
            };
        let combine = |ga: Group, gb: Group| {
            let mut g = ga;
            g.leaves.extend(gb.leaves);
            g.members.extend(gb.members);
            g.members.push(x);
            g
        };
        let merged = combine(operand(a, false, true, &open), operand(b, sub, true, &open));
        if can_grow(merged.shape()) {
            for o in [a, b] {
                if uses[o as usize] == 1 && a != b {
                    open.remove(&o);
                }
            }
            open.insert(x, merged);
            continue;
        }
        let fresh = combine(
            operand(a, false, false, &open),
            operand(b, sub, false, &open),
        );
        if can_grow(fresh.shape()) {
            open.insert(x, fresh);
        }
    }

    // Keep exact matches only; pack multi-lane patterns first.
    let groups: Vec<(NodeId, Group)> = open.into_iter().collect();
    let mut assigned: Vec<Option<usize>> = vec![None; groups.len()];
    let mut packs: Vec<(usize, Vec<usize>)> = Vec::new();
    for (pi, p) in patterns.iter().enumerate().filter(|(_, p)| p.lanes > 1) {
        let lanes = p.lanes as usize;
        let mut s = 0;
        while s + lanes <= groups.len() {
            let window: Vec<usize> = (s..s + lanes).collect();
            if window
                .iter()
                .all(|&g| assigned[g].is_none() && groups[g].1.shape() == (p.terms, p.acc))
                && packable(dag, &groups, &window)
            {
                for &g in &window {
                    assigned[g] = Some(packs.len());
                }
                packs.push((pi, window));
                s += lanes;
            } else {
                s += 1;
            }
        }
    }
    let mut singles: Vec<(usize, usize)> = Vec::new();
    for (g, (_, grp)) in groups.iter().enumerate() {
        if assigned[g].is_some() {
            continue;
        }
        if let Some(pi) = patterns
            .iter()
            .position(|p| p.lanes == 1 && (p.terms, p.acc) == grp.shape())
        {
            singles.push((pi, g));
        }
    }

    // Placement: a macro sits at its root (largest member); every other
    // member disappears.
    let mut drop = vec![false; dag.len()];
    let mut place: HashMap<NodeId, (usize, Vec<usize>)> = HashMap::new();
    for (pi, window) in packs {
        let root = window
            .iter()
            .map(|&g| groups[g].0)
            .max()
            .expect("non-empty pack");
        for &g in &window {
            for &m in &groups[g].1.members {
                drop[m as usize] = true;
            }
        }
        place.insert(root, (pi, window));
    }
    for (pi, g) in singles {
        for &m in &groups[g].1.members {
            drop[m as usize] = true;
        }
        place.insert(groups[g].0, (pi, vec![g]));
    }

    let mut map: Vec<NodeId> = vec![NodeId::MAX; dag.len()];
    let mut out = InstrDag::default();
    let tr = |map: &[NodeId], id: NodeId| {
        let m = map[id as usize];
        debug_assert!(m != NodeId::MAX, "operand {id} not yet placed");
        m
    };
    for (i, node) in dag.nodes.iter().enumerate() {
        let x = i as NodeId;
        if let Some((pi, window)) = place.get(&x) {
            let lanes: Vec<Lane> = window
                .iter()
                .map(|&g| {
                    let mut lane = groups[g].1.lane();
                    for l in &mut lane.leaves {
                        l.kind = match l.kind {
                            LeafKind::Acc(a) => LeafKind::Acc(tr(&map, a)),
                            LeafKind::Product(a, b) => LeafKind::Product(tr(&map, a), tr(&map, b)),
                        };
                    }
                    lane
                })
                .collect();
            let multi = lanes.len() > 1;
            let m = out.push(
                Op::Macro {
                    pattern: *pi as u16,
                    lanes,
                },
                node.routine,
                node.call,
            );
            if multi {
                for (lane, &g) in window.iter().enumerate() {
                    let root = groups[g].0;
                    let r = dag.node(root);
                    map[root as usize] = out.push(
                        Op::Extract {
                            src: m,
                            lane: lane as u16,
                        },
                        r.routine,
                        r.call,
                    );
                }
            } else {
                map[i] = m;
            }
            continue;
        }
        if drop[i] {
            continue;
        }
        let op = match &node.op {
            Op::Input(v) => Op::Input(*v),
            Op::Load { addr, dep, init } => Op::Load {
                addr: *addr,
                dep: dep.map(|d| tr(&map, d)),
                init: *init,
            },
            Op::Store { src, addr, negate } => Op::Store {
                src: tr(&map, *src),
                addr: *addr,
                negate: *negate,
            },
            Op::Mul(a, b) => Op::Mul(tr(&map, *a), tr(&map, *b)),
            Op::Add(a, b) => Op::Add(tr(&map, *a), tr(&map, *b)),
            Op::Sub(a, b) => Op::Sub(tr(&map, *a), tr(&map, *b)),
            Op::Div(a, b) => Op::Div(tr(&map, *a), tr(&map, *b)),
            Op::Sqrt(a) => Op::Sqrt(tr(&map, *a)),
            Op::Macro { .. } | Op::Extract { .. } => panic!("fuse expects a scalar DAG"),
        };
        map[i] = out.push(op, node.routine, node.call);
    }
    out
}

/// Independent groups can share one issue slot at the last root if none
/// consumes another and nothing in between feeds or reads them.
fn packable(dag: &InstrDag, groups: &[(NodeId, Group)], window: &[usize]) -> bool {
    let lo = window
        .iter()
        .flat_map(|&g| groups[g].1.members.iter().copied())
        .min()
        .expect("groups have members");
    let hi = window
        .iter()
        .map(|&g| groups[g].0)
        .max()
        .expect("non-empty");
    let inputs_ok = window.iter().all(|&g| groups[g].1.inputs().all(|i| i < lo));
    if !inputs_ok {
        return false;
    }
    // Consumers of a root lie after it; only the range up to `hi` can hold
    // an early one.
    let roots: Vec<NodeId> = window.iter().map(|&g| groups[g].0).collect();
    dag.nodes[(lo as usize)..=(hi as usize)]
        .iter()
        .all(|n: &Node| n.deps().iter().all(|d| !roots.contains(&d)))
}

/// Number of macro nodes per pattern name.
pub fn macro_counts(dag: &InstrDag, patterns: &[MacroOpPattern]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for n in &dag.nodes {
        if let Op::Macro { pattern, .. } = n.op {
            let name = patterns
                .get(pattern as usize)
                .map_or_else(|| format!("#{pattern}"), |p| p.name.clone());
            *counts.entry(name).or_insert(0) += 1;
        }
    }
    counts
}
