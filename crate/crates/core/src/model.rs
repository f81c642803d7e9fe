//! Cooperation model files.
//!
//! A model is a JSON document tagged `"version": "coplan-model/1"` that lists
//! the nodes and hyper-arcs of an AND/OR graph together with the ordered
//! actions each hyper-arc requires. [`serialize_model`] emits a canonical
//! form (sorted keys, nodes and arcs sorted by name, children sorted,
//! shortest round-trip numbers) so model files diff cleanly and round-trip
//! byte-for-byte. See `docs/model-format.md` for the full schema.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MODEL_VERSION: &str = "coplan-model/1";

/// Who carries out an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Human,
    Robot,
    /// Both agents together, e.g. a handover.
    Joint,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Human => "human",
            AgentKind::Robot => "robot",
            AgentKind::Joint => "joint",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "human" => Ok(AgentKind::Human),
            "robot" => Ok(AgentKind::Robot),
            "joint" => Ok(AgentKind::Joint),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub name: String,
    pub agent: AgentKind,
}

impl ActionSpec {
    pub fn new(name: impl Into<String>, agent: AgentKind) -> Self {
        Self {
            name: name.into(),
            agent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub weight: f64,
    pub is_root: bool,
    /// Initial solved state; only meaningful for leaves.
    pub solved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcSpec {
    pub name: String,
    pub parent: String,
    pub children: Vec<String>,
    pub weight: f64,
    pub actions: Vec<ActionSpec>,
}

/// Parsed description of a cooperation AND/OR graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub name: String,
    pub nodes: Vec<NodeSpec>,
    pub arcs: Vec<ArcSpec>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    SyntaxError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported model version {0:?}, expected {MODEL_VERSION:?}")]
    UnsupportedVersion(String),
    #[error("duplicate {kind} name {name:?}")]
    DuplicateName { kind: &'static str, name: String },
    #[error("arc {arc:?} uses unknown agent {agent:?} (expected human, robot or joint)")]
    UnknownAgent { arc: String, agent: String },
    #[error("model has no root node")]
    MissingRoot,
    #[error("arc {0:?} has no actions")]
    EmptyActions(String),
    #[error("weight of {0:?} must be a finite non-negative number")]
    InvalidWeight(String),
    #[error("palletization needs at least one part, got {0}")]
    InvalidK(usize),
    #[error("cannot read model file {path}: {message}")]
    Io { path: String, message: String },
}

// Wire structs. Field order is alphabetical so serde emits sorted keys.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default)]
    arcs: Vec<RawArc>,
    #[serde(default)]
    name: String,
    #[serde(default)]
    nodes: Vec<RawNode>,
    version: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    name: String,
    #[serde(default, skip_serializing_if = "is_false")]
    root: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    solved: bool,
    #[serde(default)]
    weight: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArc {
    actions: Vec<RawAction>,
    children: Vec<String>,
    name: String,
    parent: String,
    #[serde(default)]
    weight: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAction {
    agent: String,
    name: String,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn check_weight(name: &str, w: f64) -> Result<(), ModelError> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidWeight(name.to_string()))
    }
}

/// Parses a model document into a [`GraphSpec`].
///
/// Only structural checks happen here; graph-level validation (dangling
/// references, cycles, multiple roots) is the job of graph construction.
pub fn parse_model(text: &str) -> Result<GraphSpec, ModelError> {
    if text.trim().is_empty() {
        return Err(ModelError::MissingRoot);
    }
    let raw: RawModel = serde_json::from_str(text).map_err(|e| ModelError::SyntaxError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if raw.version != MODEL_VERSION {
        return Err(ModelError::UnsupportedVersion(raw.version));
    }

    let mut seen = HashSet::new();
    let mut nodes = Vec::with_capacity(raw.nodes.len());
    for n in raw.nodes {
        if !seen.insert(n.name.clone()) {
            return Err(ModelError::DuplicateName {
                kind: "node",
                name: n.name,
            });
        }
        check_weight(&n.name, n.weight)?;
        nodes.push(NodeSpec {
            name: n.name,
            weight: n.weight,
            is_root: n.root,
            solved: n.solved,
        });
    }

    let mut seen = HashSet::new();
    let mut arcs = Vec::with_capacity(raw.arcs.len());
    for a in raw.arcs {
        if !seen.insert(a.name.clone()) {
            return Err(ModelError::DuplicateName {
                kind: "arc",
                name: a.name,
            });
        }
        check_weight(&a.name, a.weight)?;
        if a.actions.is_empty() {
            return Err(ModelError::EmptyActions(a.name));
        }
        let mut action_names = HashSet::new();
        let mut actions = Vec::with_capacity(a.actions.len());
        for act in a.actions {
            let agent = act
                .agent
                .parse()
                .map_err(|agent| ModelError::UnknownAgent {
                    arc: a.name.clone(),
                    agent,
                })?;
            if !action_names.insert(act.name.clone()) {
                return Err(ModelError::DuplicateName {
                    kind: "action",
                    name: format!("{}/{}", a.name, act.name),
                });
            }
            actions.push(ActionSpec::new(act.name, agent));
        }
        arcs.push(ArcSpec {
            name: a.name,
            parent: a.parent,
            children: a.children,
            weight: a.weight,
            actions,
        });
    }

    if !nodes.iter().any(|n| n.is_root) {
        return Err(ModelError::MissingRoot);
    }

    Ok(GraphSpec {
        name: raw.name,
        nodes,
        arcs,
    })
}

/// Emits the canonical text form of `spec`, terminated by a newline.
pub fn serialize_model(spec: &GraphSpec) -> String {
    let mut nodes: Vec<RawNode> = spec
        .nodes
        .iter()
        .map(|n| RawNode {
            name: n.name.clone(),
            root: n.is_root,
            solved: n.solved,
            weight: n.weight,
        })
        .collect();
    nodes.sort_by(|a, b| a.name.cmp(&b.name));

    let mut arcs: Vec<RawArc> = spec
        .arcs
        .iter()
        .map(|a| {
            let mut children = a.children.clone();
            children.sort();
            RawArc {
                actions: a
                    .actions
                    .iter()
                    .map(|act| RawAction {
                        agent: act.agent.as_str().to_string(),
                        name: act.name.clone(),
                    })
                    .collect(),
                children,
                name: a.name.clone(),
                parent: a.parent.clone(),
                weight: a.weight,
            }
        })
        .collect();
    arcs.sort_by(|a, b| a.name.cmp(&b.name));

    let raw = RawModel {
        arcs,
        name: spec.name.clone(),
        nodes,
        version: MODEL_VERSION.to_string(),
    };
    let mut out = serde_json::to_string_pretty(&raw).expect("model serialization cannot fail");
    out.push('\n');
    out
}

pub fn load_model(path: impl AsRef<Path>) -> Result<GraphSpec, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_model(&text)
}

/// Actions of a robot-placed hyper-arc `h_i`.
pub fn robot_place_actions() -> Vec<ActionSpec> {
    use AgentKind::*;
    vec![
        ActionSpec::new("inspect", Human),
        ActionSpec::new("deliver-part", Human),
        ActionSpec::new("approach-part", Robot),
        ActionSpec::new("grasp", Robot),
        ActionSpec::new("approach-goal", Robot),
        ActionSpec::new("ungrasp", Robot),
        ActionSpec::new("start-pose", Robot),
    ]
}

/// Actions of an intervention hyper-arc `hw_i`: same four-action prefix as
/// `h_i`, then a joint handover and human palletization.
pub fn intervention_actions() -> Vec<ActionSpec> {
    use AgentKind::*;
    vec![
        ActionSpec::new("inspect", Human),
        ActionSpec::new("deliver-part", Human),
        ActionSpec::new("approach-part", Robot),
        ActionSpec::new("grasp", Robot),
        ActionSpec::new("handover", Joint),
        ActionSpec::new("palletize", Human),
        ActionSpec::new("start-pose", Robot),
    ]
}

pub const EMPTY_PALLET: &str = "empty-pallet";

pub fn pallet_node(i: usize) -> String {
    if i == 0 {
        EMPTY_PALLET.to_string()
    } else {
        format!("pallet_{i}")
    }
}

/// Builds the `k`-part palletization chain: `empty-pallet` → `pallet_1` →
/// … → `pallet_k`, with two alternative hyper-arcs per step (`h_i` at
/// weight `w_h`, `hw_i` at weight `w_hw`).
pub fn generate_palletization(k: usize, w_h: f64, w_hw: f64) -> Result<GraphSpec, ModelError> {
    if k == 0 {
        return Err(ModelError::InvalidK(k));
    }
    check_weight("w_h", w_h)?;
    check_weight("w_hw", w_hw)?;

    let mut nodes = Vec::with_capacity(k + 1);
    nodes.push(NodeSpec {
        name: pallet_node(0),
        weight: 0.0,
        is_root: false,
        solved: true,
    });
    for i in 1..=k {
        nodes.push(NodeSpec {
            name: pallet_node(i),
            weight: 0.0,
            is_root: i == k,
            solved: false,
        });
    }

    let mut arcs = Vec::with_capacity(2 * k);
    for i in 1..=k {
        arcs.push(ArcSpec {
            name: format!("h_{i}"),
            parent: pallet_node(i),
            children: vec![pallet_node(i - 1)],
            weight: w_h,
            actions: robot_place_actions(),
        });
        arcs.push(ArcSpec {
            name: format!("hw_{i}"),
            parent: pallet_node(i),
            children: vec![pallet_node(i - 1)],
            weight: w_hw,
            actions: intervention_actions(),
        });
    }

    Ok(GraphSpec {
        name: format!("palletization-{k}"),
        nodes,
        arcs,
    })
}

/// Default palletization weights: `w(h_i) = 1`, `w(hw_i) = 4`.
pub fn default_palletization(k: usize) -> Result<GraphSpec, ModelError> {
    generate_palletization(k, 1.0, 4.0)
}
