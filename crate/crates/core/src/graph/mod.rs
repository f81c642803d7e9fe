//! AND/OR graph representation of a cooperation task.
//!
//! A hyper-arc `h: N_c(h) → N_p(h)` moves the cooperation from the joint
//! state of its children to its parent once every action it carries has
//! been finished in order. Nodes become solved when an incoming arc is done;
//! the graph is solved when its root is.
//!
//! The graph has two phases. Offline, [`AndOrGraph::load`] validates the
//! model and enumerates every cooperation path. Online, the caller reports
//! finished actions ([`AndOrGraph::record_action_finished`]) and completed
//! arcs ([`AndOrGraph::update_status`]) and queries the feasible sets and
//! the current optimal path.

mod paths;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::model::{AgentKind, GraphSpec};

pub use paths::{
    enumerate_paths, path_cost, path_equal, path_equivalent, CooperationPath, COST_EPSILON,
    DEFAULT_PATH_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArcId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ArcId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub name: String,
    pub agent: AgentKind,
    /// Position in the arc's temporal sequence, starting at 0.
    pub order: usize,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub weight: f64,
    pub solved: bool,
    pub feasible: bool,
    pub is_leaf: bool,
    pub is_root: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperArc {
    pub id: ArcId,
    pub name: String,
    pub parent: NodeId,
    /// Sorted by index.
    pub children: Vec<NodeId>,
    pub weight: f64,
    pub actions: Vec<Action>,
    pub done: bool,
    pub feasible: bool,
    /// Removed from consideration, either because a sibling sharing a child
    /// was solved or because the task manager abandoned it.
    pub suppressed: bool,
}

impl HyperArc {
    /// The lowest-order unfinished action, if any.
    pub fn next_action(&self) -> Option<&Action> {
        self.actions.iter().find(|a| !a.finished)
    }

    pub fn finished_count(&self) -> usize {
        self.actions.iter().take_while(|a| a.finished).count()
    }

    pub fn remaining(&self) -> usize {
        self.actions.len() - self.finished_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatusKind {
    InProgress,
    Solved,
    Failed,
}

impl fmt::Display for StatusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StatusKind::InProgress => "InProgress",
            StatusKind::Solved => "Solved",
            StatusKind::Failed => "Failed",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphStatus {
    pub kind: StatusKind,
    pub feasible_nodes: BTreeSet<NodeId>,
    pub feasible_arcs: BTreeSet<ArcId>,
}

/// Progress of one arc after an action was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArcProgress {
    pub remaining: usize,
    pub done: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph contains a cycle through node {0:?}")]
    CyclicGraph(String),
    #[error("arc {arc:?} references unknown node {node:?}")]
    DanglingReference { arc: String, node: String },
    #[error("more than one root node: {0:?} and {1:?}")]
    MultipleRoots(String, String),
    #[error("graph has no root node")]
    NoRoot,
    #[error("arc {0:?} has no children")]
    EmptyChildren(String),
    #[error("arc {0:?} has no actions")]
    EmptyActions(String),
    #[error("duplicate {kind} name {name:?}")]
    DuplicateName { kind: &'static str, name: String },
    #[error("weight of {0:?} must be a finite non-negative number")]
    InvalidWeight(String),
    #[error("node {0:?} is not a leaf and cannot start solved")]
    InvalidInitialState(String),
    #[error("more than {cap} cooperation paths; model too large for offline enumeration")]
    PathExplosion { cap: usize },
    #[error("path references a node or arc that is not in this graph")]
    UnknownMember,
    #[error("unknown arc {0:?}")]
    UnknownArc(String),
    #[error("arc {arc:?} has no action {action:?}")]
    UnknownAction { arc: String, action: String },
    #[error("action {action:?} on arc {arc:?} is out of order; {pending:?} must finish first")]
    OutOfOrder {
        arc: String,
        action: String,
        pending: String,
    },
    #[error("action {action:?} on arc {arc:?} is already finished")]
    AlreadyFinished { arc: String, action: String },
    #[error("arc {0:?} is not feasible")]
    ArcNotFeasible(String),
    #[error("arc {0:?} is not done")]
    ArcNotDone(String),
    #[error("no viable cooperation path to the root")]
    NoViablePath,
    #[error("paths have not been enumerated")]
    PathsNotEnumerated,
}

#[derive(Debug, Clone)]
pub struct AndOrGraph {
    name: String,
    nodes: Vec<Node>,
    arcs: Vec<HyperArc>,
    root: NodeId,
    node_index: HashMap<String, NodeId>,
    arc_index: HashMap<String, ArcId>,
    /// Arcs whose parent is the node, sorted by arc name.
    incoming: Vec<Vec<ArcId>>,
    /// Position of each node in a children-before-parents order.
    topo_rank: Vec<u32>,
    /// Position of each arc in name order, used for deterministic tie-breaks.
    name_rank: Vec<u32>,
    paths: Option<Arc<Vec<CooperationPath>>>,
}

impl AndOrGraph {
    /// Validates `spec` and builds the graph with initial flags.
    /// Paths are not enumerated; see [`AndOrGraph::load`].
    pub fn build(spec: &GraphSpec) -> Result<Self, GraphError> {
        let mut node_index = HashMap::with_capacity(spec.nodes.len());
        let mut nodes = Vec::with_capacity(spec.nodes.len());
        let mut root = None;
        for (i, ns) in spec.nodes.iter().enumerate() {
            let id = NodeId(i as u32);
            if node_index.insert(ns.name.clone(), id).is_some() {
                return Err(GraphError::DuplicateName {
                    kind: "node",
                    name: ns.name.clone(),
                });
            }
            if !(ns.weight.is_finite() && ns.weight >= 0.0) {
                return Err(GraphError::InvalidWeight(ns.name.clone()));
            }
            if ns.is_root {
                if let Some(prev) = root {
                    let prev: NodeId = prev;
                    return Err(GraphError::MultipleRoots(
                        spec.nodes[prev.index()].name.clone(),
                        ns.name.clone(),
                    ));
                }
                root = Some(id);
            }
            nodes.push(Node {
                id,
                name: ns.name.clone(),
                weight: ns.weight,
                solved: false,
                feasible: false,
                is_leaf: true,
                is_root: ns.is_root,
            });
        }
        let root = root.ok_or(GraphError::NoRoot)?;

        let lookup = |arc: &str, node: &str| {
            node_index
                .get(node)
                .copied()
                .ok_or_else(|| GraphError::DanglingReference {
                    arc: arc.to_string(),
                    node: node.to_string(),
                })
        };

        let mut arc_index = HashMap::with_capacity(spec.arcs.len());
        let mut arcs = Vec::with_capacity(spec.arcs.len());
        let mut incoming = vec![Vec::new(); nodes.len()];
        for (i, a) in spec.arcs.iter().enumerate() {
            let id = ArcId(i as u32);
            if arc_index.insert(a.name.clone(), id).is_some() {
                return Err(GraphError::DuplicateName {
                    kind: "arc",
                    name: a.name.clone(),
                });
            }
            if !(a.weight.is_finite() && a.weight >= 0.0) {
                return Err(GraphError::InvalidWeight(a.name.clone()));
            }
            if a.children.is_empty() {
                return Err(GraphError::EmptyChildren(a.name.clone()));
            }
            if a.actions.is_empty() {
                return Err(GraphError::EmptyActions(a.name.clone()));
            }
            let parent = lookup(&a.name, &a.parent)?;
            let mut children = a
                .children
                .iter()
                .map(|c| lookup(&a.name, c))
                .collect::<Result<Vec<_>, _>>()?;
            children.sort();
            children.dedup();
            if children.contains(&parent) {
                return Err(GraphError::CyclicGraph(a.parent.clone()));
            }
            let mut action_names = HashSet::new();
            let actions = a
                .actions
                .iter()
                .enumerate()
                .map(|(order, act)| {
                    if !action_names.insert(act.name.as_str()) {
                        return Err(GraphError::DuplicateName {
                            kind: "action",
                            name: format!("{}/{}", a.name, act.name),
                        });
                    }
                    Ok(Action {
                        name: act.name.clone(),
                        agent: act.agent,
                        order,
                        finished: false,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            nodes[parent.index()].is_leaf = false;
            incoming[parent.index()].push(id);
            arcs.push(HyperArc {
                id,
                name: a.name.clone(),
                parent,
                children,
                weight: a.weight,
                actions,
                done: false,
                feasible: false,
                suppressed: false,
            });
        }
        for list in &mut incoming {
            list.sort_by(|x, y| arcs[x.index()].name.cmp(&arcs[y.index()].name));
        }

        for (node, ns) in nodes.iter_mut().zip(&spec.nodes) {
            if ns.solved {
                if !node.is_leaf {
                    return Err(GraphError::InvalidInitialState(ns.name.clone()));
                }
                node.solved = true;
            }
        }

        let topo_rank = topological_ranks(&nodes, &arcs)?;

        let mut by_name: Vec<ArcId> = arcs.iter().map(|a| a.id).collect();
        by_name.sort_by(|x, y| arcs[x.index()].name.cmp(&arcs[y.index()].name));
        let mut name_rank = vec![0; arcs.len()];
        for (rank, id) in by_name.into_iter().enumerate() {
            name_rank[id.index()] = rank as u32;
        }

        let mut graph = AndOrGraph {
            name: spec.name.clone(),
            nodes,
            arcs,
            root,
            node_index,
            arc_index,
            incoming,
            topo_rank,
            name_rank,
            paths: None,
        };
        graph.refresh_feasibility();
        Ok(graph)
    }

    /// Offline phase: build, then enumerate all cooperation paths with the
    /// default cap.
    pub fn load(spec: &GraphSpec) -> Result<Self, GraphError> {
        let mut graph = Self::build(spec)?;
        graph.enumerate(DEFAULT_PATH_CAP)?;
        Ok(graph)
    }

    /// Enumerates and stores the cooperation paths.
    pub fn enumerate(&mut self, cap: usize) -> Result<&[CooperationPath], GraphError> {
        let paths = enumerate_paths(self, cap)?;
        self.paths = Some(Arc::new(paths));
        Ok(self.paths.as_deref().map(Vec::as_slice).unwrap_or_default())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[HyperArc] {
        &self.arcs
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn arc(&self, id: ArcId) -> &HyperArc {
        &self.arcs[id.index()]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.node_index.get(name).copied()
    }

    pub fn arc_id(&self, name: &str) -> Option<ArcId> {
        self.arc_index.get(name).copied()
    }

    pub fn incoming(&self, node: NodeId) -> &[ArcId] {
        &self.incoming[node.index()]
    }

    pub fn paths(&self) -> Result<&[CooperationPath], GraphError> {
        self.paths
            .as_deref()
            .map(Vec::as_slice)
            .ok_or(GraphError::PathsNotEnumerated)
    }

    pub(crate) fn topo_rank(&self, node: NodeId) -> u32 {
        self.topo_rank[node.index()]
    }

    pub(crate) fn name_rank(&self, arc: ArcId) -> u32 {
        self.name_rank[arc.index()]
    }

    fn arc_by_name(&self, name: &str) -> Result<ArcId, GraphError> {
        self.arc_id(name)
            .ok_or_else(|| GraphError::UnknownArc(name.to_string()))
    }

    /// Marks `action` of `arc` finished. The action must be the arc's
    /// lowest-order unfinished one and the arc must be feasible. When the
    /// last action finishes the arc becomes done; the caller must then
    /// report it through [`AndOrGraph::update_status`].
    pub fn record_action_finished(
        &mut self,
        arc: ArcId,
        action: &str,
    ) -> Result<ArcProgress, GraphError> {
        let h = self
            .arcs
            .get(arc.index())
            .ok_or(GraphError::UnknownMember)?;
        if !h.feasible {
            return Err(GraphError::ArcNotFeasible(h.name.clone()));
        }
        let pos = h
            .actions
            .iter()
            .position(|a| a.name == action)
            .ok_or_else(|| GraphError::UnknownAction {
                arc: h.name.clone(),
                action: action.to_string(),
            })?;
        if h.actions[pos].finished {
            return Err(GraphError::AlreadyFinished {
                arc: h.name.clone(),
                action: action.to_string(),
            });
        }
        if let Some(pending) = h.actions[..pos].iter().find(|a| !a.finished) {
            return Err(GraphError::OutOfOrder {
                arc: h.name.clone(),
                action: action.to_string(),
                pending: pending.name.clone(),
            });
        }

        let h = &mut self.arcs[arc.index()];
        h.actions[pos].finished = true;
        let remaining = h.remaining();
        if remaining == 0 {
            h.done = true;
            self.refresh_feasibility();
        }
        Ok(ArcProgress {
            remaining,
            done: remaining == 0,
        })
    }

    /// Same as [`AndOrGraph::record_action_finished`] with the arc given by name.
    pub fn record_action_finished_by_name(
        &mut self,
        arc: &str,
        action: &str,
    ) -> Result<ArcProgress, GraphError> {
        let id = self.arc_by_name(arc)?;
        self.record_action_finished(id, action)
    }

    /// Online update after `newly_solved` arcs became done: solves their
    /// parents, suppresses every other arc sharing a child with them, and
    /// recomputes feasibility.
    pub fn update_status(&mut self, newly_solved: &[ArcId]) -> Result<GraphStatus, GraphError> {
        for &id in newly_solved {
            let h = self.arcs.get(id.index()).ok_or(GraphError::UnknownMember)?;
            if !h.done {
                return Err(GraphError::ArcNotDone(h.name.clone()));
            }
        }
        for &id in newly_solved {
            let parent = self.arcs[id.index()].parent;
            self.nodes[parent.index()].solved = true;
            let children = self.arcs[id.index()].children.clone();
            for other in &mut self.arcs {
                if other.id != id
                    && !other.done
                    && other
                        .children
                        .iter()
                        .any(|c| children.binary_search(c).is_ok())
                {
                    other.suppressed = true;
                }
            }
        }
        self.refresh_feasibility();
        Ok(self.status())
    }

    /// Removes `arc` from consideration, e.g. after one of its actions
    /// failed. Its finished actions are kept.
    pub fn abandon_arc(&mut self, arc: ArcId) -> Result<GraphStatus, GraphError> {
        let h = self
            .arcs
            .get_mut(arc.index())
            .ok_or(GraphError::UnknownMember)?;
        if !h.done {
            h.suppressed = true;
        }
        self.refresh_feasibility();
        Ok(self.status())
    }

    /// Credits `to` with the finished prefix of `from`: as long as both arcs
    /// carry the same action (name and agent) at the same position and it is
    /// finished on `from`, it is marked finished on `to`. Returns the number
    /// of actions newly marked. If that completes `to`, it becomes done and
    /// must be reported through [`AndOrGraph::update_status`].
    pub fn carry_over_prefix(&mut self, from: ArcId, to: ArcId) -> Result<usize, GraphError> {
        if from.index() >= self.arcs.len() || to.index() >= self.arcs.len() {
            return Err(GraphError::UnknownMember);
        }
        if from == to {
            return Ok(0);
        }
        let shared: Vec<usize> = {
            let src = &self.arcs[from.index()];
            let dst = &self.arcs[to.index()];
            src.actions
                .iter()
                .zip(&dst.actions)
                .take_while(|(a, b)| a.finished && a.name == b.name && a.agent == b.agent)
                .map(|(a, _)| a.order)
                .collect()
        };
        let dst = &mut self.arcs[to.index()];
        let mut marked = 0;
        for order in shared {
            if !dst.actions[order].finished {
                dst.actions[order].finished = true;
                marked += 1;
            }
        }
        if dst.remaining() == 0 && !dst.done {
            dst.done = true;
        }
        self.refresh_feasibility();
        Ok(marked)
    }

    fn arc_is_feasible(&self, h: &HyperArc) -> bool {
        !h.done
            && !h.suppressed
            && !self.nodes[h.parent.index()].solved
            && h.children.iter().all(|c| self.nodes[c.index()].solved)
    }

    fn refresh_feasibility(&mut self) {
        let flags: Vec<bool> = self.arcs.iter().map(|h| self.arc_is_feasible(h)).collect();
        for n in &mut self.nodes {
            n.feasible = false;
        }
        for (h, feasible) in self.arcs.iter_mut().zip(flags) {
            h.feasible = feasible;
            if feasible {
                self.nodes[h.parent.index()].feasible = true;
            }
        }
    }

    /// The current feasible node and arc sets `(N_f, H_f)`.
    pub fn feasible_sets(&self) -> (BTreeSet<NodeId>, BTreeSet<ArcId>) {
        let nodes = self
            .nodes
            .iter()
            .filter(|n| n.feasible)
            .map(|n| n.id)
            .collect();
        let arcs = self
            .arcs
            .iter()
            .filter(|h| h.feasible)
            .map(|h| h.id)
            .collect();
        (nodes, arcs)
    }

    pub fn status(&self) -> GraphStatus {
        let (feasible_nodes, feasible_arcs) = self.feasible_sets();
        let kind = if self.nodes[self.root.index()].solved {
            StatusKind::Solved
        } else if feasible_nodes.is_empty() && feasible_arcs.is_empty() {
            StatusKind::Failed
        } else {
            StatusKind::InProgress
        };
        GraphStatus {
            kind,
            feasible_nodes,
            feasible_arcs,
        }
    }

    pub fn is_solved(&self) -> bool {
        self.nodes[self.root.index()].solved
    }

    /// Arcs that can never again take part in completing the task:
    /// suppressed ones, and unfinished ones whose parent is already solved.
    pub(crate) fn dead_arcs(&self) -> FixedBitSet {
        let mut dead = FixedBitSet::with_capacity(self.arcs.len());
        for h in &self.arcs {
            if !h.done && (h.suppressed || self.nodes[h.parent.index()].solved) {
                dead.insert(h.id.index());
            }
        }
        dead
    }

    /// Leaves that are not solved and never will be.
    pub(crate) fn dead_leaves(&self) -> FixedBitSet {
        let mut dead = FixedBitSet::with_capacity(self.nodes.len());
        for n in &self.nodes {
            if n.is_leaf && !n.solved {
                dead.insert(n.id.index());
            }
        }
        dead
    }

    /// Whether `path` can still be followed to the root: every arc is done
    /// or may still become feasible, and every leaf is solved.
    pub fn is_viable(&self, path: &CooperationPath) -> bool {
        path.arc_mask().is_disjoint(&self.dead_arcs())
            && path.node_mask().is_disjoint(&self.dead_leaves())
    }

    /// Minimum-cost viable path; equal costs are ordered by arc names.
    pub fn optimal_path(&self) -> Result<&CooperationPath, GraphError> {
        self.best_viable(|_| true)
    }

    /// Minimum-cost viable path that uses `arc`.
    pub fn optimal_path_through(&self, arc: ArcId) -> Result<&CooperationPath, GraphError> {
        self.best_viable(|p| p.contains_arc(arc))
    }

    fn best_viable(
        &self,
        mut filter: impl FnMut(&CooperationPath) -> bool,
    ) -> Result<&CooperationPath, GraphError> {
        let paths = self.paths()?;
        let dead_arcs = self.dead_arcs();
        let dead_leaves = self.dead_leaves();
        paths
            .iter()
            .find(|p| {
                p.arc_mask().is_disjoint(&dead_arcs)
                    && p.node_mask().is_disjoint(&dead_leaves)
                    && filter(p)
            })
            .ok_or(GraphError::NoViablePath)
    }

    /// Checks that each stored path's cost still equals the sum of its
    /// members' weights. Returns the names of offending paths' arcs.
    pub fn verify_path_costs(&self) -> Result<(), Vec<String>> {
        let Ok(paths) = self.paths() else {
            return Ok(());
        };
        let bad: Vec<String> = paths
            .iter()
            .filter(|p| match path_cost(self, p) {
                Ok(c) => (c - p.cost()).abs() > COST_EPSILON,
                Err(_) => true,
            })
            .map(|p| p.describe(self))
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(bad)
        }
    }

    /// Deterministic, sorted, line-oriented view of the graph state.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let status = self.status();
        writeln!(out, "graph {}", self.name).unwrap();
        writeln!(out, "status {}", status.kind).unwrap();
        let mut nodes: Vec<&Node> = self.nodes.iter().collect();
        nodes.sort_by(|a, b| a.name.cmp(&b.name));
        for n in nodes {
            let mut flags = Vec::new();
            if n.is_root {
                flags.push("root");
            }
            if n.is_leaf {
                flags.push("leaf");
            }
            if n.solved {
                flags.push("solved");
            }
            if n.feasible {
                flags.push("feasible");
            }
            writeln!(out, "node {} w={} [{}]", n.name, n.weight, flags.join(",")).unwrap();
        }
        let mut arcs: Vec<&HyperArc> = self.arcs.iter().collect();
        arcs.sort_by(|a, b| a.name.cmp(&b.name));
        for h in arcs {
            let mut children: Vec<&str> = h
                .children
                .iter()
                .map(|c| self.nodes[c.index()].name.as_str())
                .collect();
            children.sort();
            let mut flags = Vec::new();
            if h.done {
                flags.push("done");
            }
            if h.feasible {
                flags.push("feasible");
            }
            if h.suppressed {
                flags.push("suppressed");
            }
            writeln!(
                out,
                "arc {} {{{}}} -> {} w={} progress={}/{} [{}]",
                h.name,
                children.join(","),
                self.nodes[h.parent.index()].name,
                h.weight,
                h.finished_count(),
                h.actions.len(),
                flags.join(",")
            )
            .unwrap();
        }
        out
    }
}

/// Kahn's algorithm over the children → parent relation, ties by node name.
fn topological_ranks(nodes: &[Node], arcs: &[HyperArc]) -> Result<Vec<u32>, GraphError> {
    // indegree of a node = number of distinct child nodes it depends on
    let mut deps: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); nodes.len()];
    let mut dependents: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); nodes.len()];
    for h in arcs {
        for &c in &h.children {
            deps[h.parent.index()].insert(c);
            dependents[c.index()].insert(h.parent);
        }
    }
    let mut remaining: Vec<usize> = deps.iter().map(BTreeSet::len).collect();
    let mut ready: BTreeSet<(&str, NodeId)> = nodes
        .iter()
        .filter(|n| remaining[n.id.index()] == 0)
        .map(|n| (n.name.as_str(), n.id))
        .collect();
    let mut rank = vec![u32::MAX; nodes.len()];
    let mut next = 0u32;
    while let Some(entry) = ready.pop_first() {
        let id = entry.1;
        rank[id.index()] = next;
        next += 1;
        for &p in &dependents[id.index()] {
            remaining[p.index()] -= 1;
            if remaining[p.index()] == 0 {
                ready.insert((nodes[p.index()].name.as_str(), p));
            }
        }
    }
    if let Some(stuck) = rank.iter().position(|&r| r == u32::MAX) {
        return Err(GraphError::CyclicGraph(nodes[stuck].name.clone()));
    }
    Ok(rank)
}
