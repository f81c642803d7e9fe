use std::cmp::Ordering;

use fixedbitset::FixedBitSet;

use super::{Action, AndOrGraph, ArcId, GraphError, NodeId};

/// Offline enumeration refuses to produce more paths than this.
pub const DEFAULT_PATH_CAP: usize = 1 << 20;

/// Costs closer than this are considered equal.
pub const COST_EPSILON: f64 = 1e-9;

/// One complete way of connecting leaves to the root: a choice of exactly
/// one incoming arc for every non-leaf node the path needs.
#[derive(Debug, Clone)]
pub struct CooperationPath {
    /// Children before parents; the root is last.
    nodes: Vec<NodeId>,
    /// Execution order: an arc appears after the arcs producing its children.
    arcs: Vec<ArcId>,
    cost: f64,
    node_mask: FixedBitSet,
    arc_mask: FixedBitSet,
    /// Cost quantized to `COST_EPSILON` so that ordering is transitive.
    cost_key: i64,
    /// Sorted name ranks of the arcs; lexicographic tie-break.
    name_key: Vec<u32>,
}

impl CooperationPath {
    fn new(graph: &AndOrGraph, node_mask: FixedBitSet, arc_mask: FixedBitSet) -> Self {
        let mut nodes: Vec<NodeId> = node_mask.ones().map(|i| NodeId(i as u32)).collect();
        nodes.sort_by_key(|&n| graph.topo_rank(n));
        let mut arcs: Vec<ArcId> = arc_mask.ones().map(|i| ArcId(i as u32)).collect();
        arcs.sort_by_key(|&a| (graph.topo_rank(graph.arc(a).parent), graph.name_rank(a)));
        let cost = nodes.iter().map(|&n| graph.node(n).weight).sum::<f64>()
            + arcs.iter().map(|&a| graph.arc(a).weight).sum::<f64>();
        let mut name_key: Vec<u32> = arcs.iter().map(|&a| graph.name_rank(a)).collect();
        name_key.sort_unstable();
        CooperationPath {
            nodes,
            arcs,
            cost,
            node_mask,
            arc_mask,
            cost_key: (cost / COST_EPSILON).round() as i64,
            name_key,
        }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[ArcId] {
        &self.arcs
    }

    /// `c(cp)`: sum of member node and arc weights.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn contains_arc(&self, arc: ArcId) -> bool {
        self.arc_mask.contains(arc.index())
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.node_mask.contains(node.index())
    }

    pub(crate) fn arc_mask(&self) -> &FixedBitSet {
        &self.arc_mask
    }

    pub(crate) fn node_mask(&self) -> &FixedBitSet {
        &self.node_mask
    }

    /// Same nodes and hyper-arcs.
    pub fn is_equal(&self, other: &CooperationPath) -> bool {
        self.node_mask == other.node_mask && self.arc_mask == other.arc_mask
    }

    /// Same overall cost.
    pub fn is_equivalent(&self, other: &CooperationPath) -> bool {
        (self.cost - other.cost).abs() <= COST_EPSILON
    }

    /// Ranking order: cost, then arc names.
    pub fn rank_cmp(&self, other: &CooperationPath) -> Ordering {
        self.cost_key
            .cmp(&other.cost_key)
            .then_with(|| self.name_key.cmp(&other.name_key))
    }

    /// The ordered actions of the path, `M(cp)`.
    pub fn action_sequence<'g>(&self, graph: &'g AndOrGraph) -> Vec<(ArcId, &'g Action)> {
        self.arcs
            .iter()
            .flat_map(|&a| graph.arc(a).actions.iter().map(move |act| (a, act)))
            .collect()
    }

    /// The actions of `M(cp)` that are not yet finished.
    pub fn pending_actions<'g>(&self, graph: &'g AndOrGraph) -> Vec<(ArcId, &'g Action)> {
        self.action_sequence(graph)
            .into_iter()
            .filter(|(_, a)| !a.finished)
            .collect()
    }

    pub fn arc_names<'g>(&self, graph: &'g AndOrGraph) -> Vec<&'g str> {
        self.arcs
            .iter()
            .map(|&a| graph.arc(a).name.as_str())
            .collect()
    }

    pub fn describe(&self, graph: &AndOrGraph) -> String {
        self.arc_names(graph).join(",")
    }
}

pub fn path_equal(a: &CooperationPath, b: &CooperationPath) -> bool {
    a.is_equal(b)
}

pub fn path_equivalent(a: &CooperationPath, b: &CooperationPath) -> bool {
    a.is_equivalent(b)
}

/// Recomputes `c(cp)` from the graph's current weights.
pub fn path_cost(graph: &AndOrGraph, path: &CooperationPath) -> Result<f64, GraphError> {
    let mut total = 0.0;
    for &n in &path.nodes {
        total += graph
            .nodes()
            .get(n.index())
            .ok_or(GraphError::UnknownMember)?
            .weight;
    }
    for &a in &path.arcs {
        total += graph
            .arcs()
            .get(a.index())
            .ok_or(GraphError::UnknownMember)?
            .weight;
    }
    Ok(total)
}

/// Lists every cooperation path of `graph`, sorted by cost and then by arc
/// names. Fails with `PathExplosion` if there are more than `cap`.
pub fn enumerate_paths(graph: &AndOrGraph, cap: usize) -> Result<Vec<CooperationPath>, GraphError> {
    let mut search = Search {
        graph,
        cap,
        pending: vec![graph.root()],
        nodes: FixedBitSet::with_capacity(graph.nodes().len()),
        arcs: FixedBitSet::with_capacity(graph.arcs().len()),
        found: Vec::new(),
    };
    search.nodes.insert(graph.root().index());
    search.expand()?;
    let mut paths = search.found;
    paths.sort_by(CooperationPath::rank_cmp);
    Ok(paths)
}

struct Search<'g> {
    graph: &'g AndOrGraph,
    cap: usize,
    /// Nodes included in the partial path whose incoming arc is not chosen yet.
    pending: Vec<NodeId>,
    nodes: FixedBitSet,
    arcs: FixedBitSet,
    found: Vec<CooperationPath>,
}

impl Search<'_> {
    fn expand(&mut self) -> Result<(), GraphError> {
        let Some(node) = self.pending.pop() else {
            if self.found.len() == self.cap {
                return Err(GraphError::PathExplosion { cap: self.cap });
            }
            self.found.push(CooperationPath::new(
                self.graph,
                self.nodes.clone(),
                self.arcs.clone(),
            ));
            return Ok(());
        };

        let graph = self.graph;
        if graph.node(node).is_leaf {
            self.expand()?;
        } else {
            for &arc in graph.incoming(node) {
                let mark = self.pending.len();
                let mut added = Vec::new();
                for &c in &graph.arc(arc).children {
                    if !self.nodes.contains(c.index()) {
                        self.nodes.insert(c.index());
                        self.pending.push(c);
                        added.push(c);
                    }
                }
                self.arcs.insert(arc.index());
                let result = self.expand();
                self.arcs.set(arc.index(), false);
                for c in added {
                    self.nodes.set(c.index(), false);
                }
                self.pending.truncate(mark);
                result?;
            }
        }
        self.pending.push(node);
        Ok(())
    }
}
