//! Independent reference implementations used as test oracles. Nothing here
//! calls into the graph's own path or feasibility logic.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use coplan_core::graph::{AndOrGraph, ArcId, NodeId};
use coplan_core::model::{ActionSpec, AgentKind, ArcSpec, GraphSpec, NodeSpec};
use rand::Rng;

/// A random acyclic model: `nodes` nodes, at most `max_arcs` arcs, children
/// always ranked below their parent, the last node is the root.
pub fn random_model<R: Rng>(rng: &mut R, max_nodes: usize, max_arcs: usize) -> GraphSpec {
    let n = rng.random_range(2..=max_nodes);
    let root = n - 1;
    let mut arcs = Vec::new();
    let arc_count = rng.random_range(1..=max_arcs);
    for i in 0..arc_count {
        let parent = if i == 0 { root } else { rng.random_range(1..n) };
        let k = rng.random_range(1..=parent.min(3));
        let mut children = BTreeSet::new();
        while children.len() < k {
            children.insert(rng.random_range(0..parent));
        }
        let actions = (0..rng.random_range(1..=3))
            .map(|j| {
                let agent = match rng.random_range(0..3) {
                    0 => AgentKind::Human,
                    1 => AgentKind::Robot,
                    _ => AgentKind::Joint,
                };
                ActionSpec::new(format!("a{i}_{j}"), agent)
            })
            .collect();
        arcs.push(ArcSpec {
            name: format!("h{i:02}"),
            parent: format!("n{parent}"),
            children: children.into_iter().map(|c| format!("n{c}")).collect(),
            weight: rng.random_range(0..8) as f64 * 0.5,
            actions,
        });
    }
    let parents: BTreeSet<String> = arcs.iter().map(|a| a.parent.clone()).collect();
    let nodes = (0..n)
        .map(|i| {
            let name = format!("n{i}");
            let leaf = !parents.contains(&name);
            NodeSpec {
                weight: rng.random_range(0..4) as f64 * 0.25,
                is_root: i == root,
                solved: leaf && rng.random_bool(0.85),
                name,
            }
        })
        .collect();
    GraphSpec {
        name: "random".into(),
        nodes,
        arcs,
    }
}

/// A cooperation path found by subset search: arc names and total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePath {
    pub arcs: BTreeSet<String>,
    pub nodes: BTreeSet<String>,
    pub cost: f64,
}

/// Every arc subset that picks exactly one incoming arc for each non-leaf
/// node reachable from the root through the subset, and nothing else.
pub fn brute_force_paths(spec: &GraphSpec) -> Vec<OraclePath> {
    assert!(spec.arcs.len() <= 16, "subset oracle is exponential");
    let root = spec.nodes.iter().find(|n| n.is_root).unwrap().name.clone();
    let has_incoming: BTreeSet<&str> = spec.arcs.iter().map(|a| a.parent.as_str()).collect();
    let node_weight: BTreeMap<&str, f64> = spec
        .nodes
        .iter()
        .map(|n| (n.name.as_str(), n.weight))
        .collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << spec.arcs.len()) {
        let chosen: Vec<&ArcSpec> = spec
            .arcs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, a)| a)
            .collect();
        let mut reached: BTreeSet<String> = BTreeSet::new();
        let mut stack = vec![root.clone()];
        let mut ok = true;
        while let Some(x) = stack.pop() {
            if !reached.insert(x.clone()) {
                continue;
            }
            if !has_incoming.contains(x.as_str()) {
                continue;
            }
            let into: Vec<&&ArcSpec> = chosen.iter().filter(|a| a.parent == x).collect();
            if into.len() != 1 {
                ok = false;
                break;
            }
            stack.extend(into[0].children.iter().cloned());
        }
        if !ok || chosen.iter().any(|a| !reached.contains(&a.parent)) {
            continue;
        }
        let cost = reached.iter().map(|n| node_weight[n.as_str()]).sum::<f64>()
            + chosen.iter().map(|a| a.weight).sum::<f64>();
        out.push(OraclePath {
            arcs: chosen.iter().map(|a| a.name.clone()).collect(),
            nodes: reached,
            cost,
        });
    }
    out
}

/// Run state tracked by the test driver, independent of the graph's flags.
#[derive(Debug, Clone, Default)]
pub struct Shadow {
    pub initially_solved: BTreeSet<String>,
    pub done: BTreeSet<String>,
    pub abandoned: BTreeSet<String>,
}

impl Shadow {
    pub fn new(spec: &GraphSpec) -> Self {
        Shadow {
            initially_solved: spec
                .nodes
                .iter()
                .filter(|n| n.solved)
                .map(|n| n.name.clone())
                .collect(),
            ..Default::default()
        }
    }

    pub fn solved(&self, spec: &GraphSpec) -> BTreeSet<String> {
        let mut s = self.initially_solved.clone();
        for a in &spec.arcs {
            if self.done.contains(&a.name) {
                s.insert(a.parent.clone());
            }
        }
        s
    }

    /// Abandoned arcs plus every unfinished arc sharing a child with a done arc.
    pub fn suppressed(&self, spec: &GraphSpec) -> BTreeSet<String> {
        let mut s = self.abandoned.clone();
        for a in &spec.arcs {
            if self.done.contains(&a.name) {
                continue;
            }
            let shares = spec.arcs.iter().any(|d| {
                d.name != a.name
                    && self.done.contains(&d.name)
                    && d.children.iter().any(|c| a.children.contains(c))
            });
            if shares {
                s.insert(a.name.clone());
            }
        }
        s
    }

    /// `(N_f, H_f)` by name, from scratch.
    pub fn feasible(&self, spec: &GraphSpec) -> (BTreeSet<String>, BTreeSet<String>) {
        let solved = self.solved(spec);
        let suppressed = self.suppressed(spec);
        let arcs: BTreeSet<String> = spec
            .arcs
            .iter()
            .filter(|a| {
                !self.done.contains(&a.name)
                    && !suppressed.contains(&a.name)
                    && !solved.contains(&a.parent)
                    && a.children.iter().all(|c| solved.contains(c))
            })
            .map(|a| a.name.clone())
            .collect();
        let nodes = spec
            .arcs
            .iter()
            .filter(|a| arcs.contains(&a.name))
            .map(|a| a.parent.clone())
            .collect();
        (nodes, arcs)
    }

    /// Cheapest path that can still be completed, by brute force.
    pub fn optimal_cost(&self, spec: &GraphSpec, paths: &[OraclePath]) -> Option<f64> {
        let solved = self.solved(spec);
        let suppressed = self.suppressed(spec);
        let parent: BTreeMap<&str, &str> = spec
            .arcs
            .iter()
            .map(|a| (a.name.as_str(), a.parent.as_str()))
            .collect();
        let has_incoming: BTreeSet<&str> = parent.values().copied().collect();
        paths
            .iter()
            .filter(|p| {
                p.arcs.iter().all(|a| {
                    self.done.contains(a)
                        || (!suppressed.contains(a) && !solved.contains(parent[a.as_str()]))
                }) && p
                    .nodes
                    .iter()
                    .filter(|n| !has_incoming.contains(n.as_str()))
                    .all(|n| solved.contains(n))
            })
            .map(|p| p.cost)
            .min_by(f64::total_cmp)
    }
}

pub fn node_names(graph: &AndOrGraph, ids: &BTreeSet<NodeId>) -> BTreeSet<String> {
    ids.iter().map(|&n| graph.node(n).name.clone()).collect()
}

pub fn arc_names(graph: &AndOrGraph, ids: &BTreeSet<ArcId>) -> BTreeSet<String> {
    ids.iter().map(|&a| graph.arc(a).name.clone()).collect()
}

/// Plain triple-loop 4×4 product over row-major arrays.
pub fn matmul4(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                s += a[i][k] * b[k][j];
            }
            c[i][j] = s;
        }
    }
    c
}

/// A random rigid transform built from a unit quaternion and a translation,
/// without going through the library under test.
pub fn random_rigid<R: Rng>(rng: &mut R) -> [[f64; 4]; 4] {
    let mut q = [0.0f64; 4];
    loop {
        for v in &mut q {
            *v = rng.random_range(-1.0..1.0);
        }
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-3 {
            q.iter_mut().for_each(|v| *v /= n);
            break;
        }
    }
    let [w, x, y, z] = q;
    let t: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            t[0],
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            t[1],
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
            t[2],
        ],
        [0.0, 0.0, 0.0, 1.0],
    ]
}
