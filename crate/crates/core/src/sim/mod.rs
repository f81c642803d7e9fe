//! Discrete-event simulation of cooperation runs on a virtual clock.
//!
//! A trial drives a [`TaskManager`](crate::manager::TaskManager) with the
//! simulated agents from [`agents`](crate::agents) and measures
//!
//! * `T_m`: time between an acknowledgement and the next suggestion,
//! * `T_h`: time spent on human and joint actions, perception included,
//! * `T_r`: time spent on robot actions,
//! * `T_c = T_m + T_h + T_r`: the whole run.
//!
//! Batches run trials in parallel with per-trial seeds derived from the
//! master seed, so results do not depend on scheduling.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentError, HumanPolicy, PerceptionModel, RobotModel};
use crate::graph::{AndOrGraph, GraphError};
use crate::manager::ManagerError;
use crate::model::{generate_palletization, load_model, GraphSpec, ModelError};

mod batch;
mod engine;
mod export;
mod replay;

pub use batch::{run_batch, trial_seed, BatchReport, BatchSummary, Split, Stat, TimingSummary};
pub use engine::{
    run_trial, run_trial_on, Metrics, SimEvent, TrialFailure, TrialResult, TrialStatus,
};
pub use export::{export_results, ExportFormat, ResultRow};
pub use replay::{replay_trial, Replay};

pub const SCENARIO_VERSION: &str = "coplan-scenario/1";

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Manager(#[from] ManagerError),
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("cannot replay event log: {0}")]
    Replay(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Palletize {
    pub parts: usize,
    #[serde(default = "one")]
    pub w_h: f64,
    #[serde(default = "four")]
    pub w_hw: f64,
}

impl Palletize {
    /// `parts` parts with the default arc weights.
    pub fn new(parts: usize) -> Self {
        Palletize {
            parts,
            w_h: one(),
            w_hw: four(),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn four() -> f64 {
    4.0
}

/// Where the task model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    /// A model file; relative paths resolve against the scenario file.
    File(PathBuf),
    Palletize(Palletize),
    #[serde(skip)]
    Spec(GraphSpec),
}

impl ModelSource {
    pub fn spec(&self) -> Result<GraphSpec, SimError> {
        Ok(match self {
            ModelSource::File(path) => load_model(path)?,
            ModelSource::Palletize(p) => generate_palletization(p.parts, p.w_h, p.w_hw)?,
            ModelSource::Spec(spec) => spec.clone(),
        })
    }
}

fn default_timeout() -> f64 {
    120.0
}

fn default_trials() -> u32 {
    1
}

/// Everything a batch needs. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub model: ModelSource,
    pub human: HumanPolicy,
    pub robot: RobotModel,
    #[serde(default)]
    pub perception: PerceptionModel,
    /// Delay between an acknowledgement and the next suggestion.
    #[serde(default)]
    pub manager_latency: f64,
    /// How long a human turn may take before the trial fails.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Serialize)]
struct ScenarioFile {
    version: String,
    #[serde(flatten)]
    config: SimConfig,
}

impl SimConfig {
    pub fn new(model: ModelSource, human: HumanPolicy, robot: RobotModel) -> Self {
        SimConfig {
            description: None,
            model,
            human,
            robot,
            perception: PerceptionModel::default(),
            manager_latency: 0.0,
            timeout: default_timeout(),
            trials: default_trials(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.human.validate()?;
        self.robot.validate()?;
        self.perception.validate()?;
        let secs_ok = |v: f64| v.is_finite() && v >= 0.0;
        if !secs_ok(self.manager_latency) {
            return Err(SimError::Config("manager_latency must be >= 0".into()));
        }
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(SimError::Config("timeout must be > 0".into()));
        }
        if self.trials == 0 {
            return Err(SimError::Config("trials must be >= 1".into()));
        }
        Ok(())
    }

    /// Builds the graph and enumerates its cooperation paths.
    pub fn load_graph(&self) -> Result<AndOrGraph, SimError> {
        Ok(AndOrGraph::load(&self.model.spec()?)?)
    }

    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, SimError> {
        let bad = |e: serde_json::Error| SimError::Config(e.to_string());
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
        let version = value
            .as_object_mut()
            .and_then(|o| o.remove("version"))
            .unwrap_or_default();
        if version != SCENARIO_VERSION {
            return Err(SimError::Config(format!(
                "unsupported scenario version {version}"
            )));
        }
        let mut config: SimConfig = serde_json::from_value(value).map_err(bad)?;
        if let (ModelSource::File(p), Some(base)) = (&mut config.model, base) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, path.parent())
    }

    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            version: SCENARIO_VERSION.into(),
            config: self.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).unwrap_or_default();
        s.push('\n');
        s
    }
}
