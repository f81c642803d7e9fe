//! Simulated human, robot and perception agents.
//!
//! Every decision takes an explicit random number generator, so a run is a
//! pure function of its configuration and seed.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manager::{Outcome, Suggestion};
use crate::time::Micros;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("no duration configured for action {0:?}")]
    UnknownAction(String),
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
}

/// Duration of an action in seconds: a constant or a uniform range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DurationDist {
    Constant(f64),
    Uniform { min: f64, max: f64 },
}

impl DurationDist {
    pub fn mean(&self) -> f64 {
        match *self {
            DurationDist::Constant(v) => v,
            DurationDist::Uniform { min, max } => (min + max) / 2.0,
        }
    }

    /// Always draws exactly one number, so the stream position does not
    /// depend on the distribution kind.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Micros {
        let u: f64 = rng.random();
        let secs = match *self {
            DurationDist::Constant(v) => v,
            DurationDist::Uniform { min, max } => min + (max - min) * u,
        };
        Micros::from_secs_f64(secs)
    }

    fn validate(&self, what: &str) -> Result<(), AgentError> {
        let ok = match *self {
            DurationDist::Constant(v) => v.is_finite() && v >= 0.0,
            DurationDist::Uniform { min, max } => {
                min.is_finite() && max.is_finite() && min >= 0.0 && min <= max
            }
        };
        if ok {
            Ok(())
        } else {
            Err(AgentError::InvalidConfig(format!(
                "bad duration for {what}"
            )))
        }
    }
}

impl Default for DurationDist {
    fn default() -> Self {
        DurationDist::Constant(0.0)
    }
}

fn check_probability(p: f64, what: &str) -> Result<(), AgentError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(AgentError::InvalidConfig(format!(
            "{what} must be in [0, 1], got {p}"
        )))
    }
}

/// What a scripted human does at a given round instead of complying.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "do", rename_all = "snake_case")]
pub enum Deviation {
    /// Stop the robot during the transport action of this round.
    Intervene,
    /// Never answer the suggestion.
    Stall,
    /// Perform `action` (optionally on `arc`) instead of the suggestion.
    Perform {
        action: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arc: Option<String>,
    },
    /// Report the suggested human action as failed.
    Fail,
}

/// A scripted deviation. Rounds count from 1 and advance each time an arc
/// is completed; in the palletization task the round is the part index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub round: u32,
    #[serde(flatten)]
    pub deviation: Deviation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Compliant,
    /// Stops the robot with probability `p` per round.
    Interventionist {
        p: f64,
    },
    Scripted {
        steps: Vec<ScriptStep>,
    },
}

fn default_intervene_on() -> String {
    "approach-goal".into()
}

fn default_stop_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanPolicy {
    pub policy: PolicyKind,
    /// Per-action durations; human and joint actions are looked up here.
    #[serde(default)]
    pub durations: BTreeMap<String, DurationDist>,
    /// Robot action during which an intervention happens.
    #[serde(default = "default_intervene_on")]
    pub intervene_on: String,
    /// Fraction of the robot action that runs before the stop.
    #[serde(default = "default_stop_fraction")]
    pub stop_fraction: f64,
}

impl Default for HumanPolicy {
    fn default() -> Self {
        HumanPolicy {
            policy: PolicyKind::Compliant,
            durations: BTreeMap::new(),
            intervene_on: default_intervene_on(),
            stop_fraction: default_stop_fraction(),
        }
    }
}

impl HumanPolicy {
    pub fn validate(&self) -> Result<(), AgentError> {
        if let PolicyKind::Interventionist { p } = self.policy {
            check_probability(p, "intervention probability")?;
        }
        check_probability(self.stop_fraction, "stop_fraction")?;
        for (name, d) in &self.durations {
            d.validate(name)?;
        }
        Ok(())
    }

    fn script_at(&self, round: u32) -> impl Iterator<Item = &Deviation> {
        let steps: &[ScriptStep] = match &self.policy {
            PolicyKind::Scripted { steps } => steps,
            _ => &[],
        };
        steps
            .iter()
            .filter(move |s| s.round == round)
            .map(|s| &s.deviation)
    }
}

/// The human's answer to a suggestion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HumanMove {
    pub arc: Option<String>,
    pub action: String,
    pub outcome: Outcome,
    /// `None` when the human never answers.
    pub duration: Option<Micros>,
    pub is_deviation: bool,
}

/// Decides how the human answers `suggestion` in `round`.
pub fn human_decide<R: Rng + ?Sized>(
    policy: &HumanPolicy,
    round: u32,
    suggestion: &Suggestion,
    rng: &mut R,
) -> Result<HumanMove, AgentError> {
    let mut mv = HumanMove {
        arc: Some(suggestion.arc.clone()),
        action: suggestion.action.clone(),
        outcome: Outcome::Success,
        duration: None,
        is_deviation: false,
    };
    for deviation in policy.script_at(round) {
        match deviation {
            Deviation::Intervene => continue,
            Deviation::Stall => return Ok(mv),
            Deviation::Perform { action, arc } => {
                if *action == suggestion.action && arc.as_ref().is_none_or(|a| *a == suggestion.arc)
                {
                    continue;
                }
                mv.arc = arc.clone();
                mv.action = action.clone();
                mv.is_deviation = true;
            }
            Deviation::Fail => mv.outcome = Outcome::Failure,
        }
        break;
    }
    let dist = policy
        .durations
        .get(&mv.action)
        .ok_or_else(|| AgentError::UnknownAction(mv.action.clone()))?;
    mv.duration = Some(dist.sample(rng));
    Ok(mv)
}

/// Whether the human stops the robot in `round`. Draws once per call from
/// `rng`; callers ask once per round.
pub fn human_intervenes<R: Rng + ?Sized>(policy: &HumanPolicy, round: u32, rng: &mut R) -> bool {
    match &policy.policy {
        PolicyKind::Compliant => false,
        PolicyKind::Interventionist { p } => rng.random::<f64>() < *p,
        PolicyKind::Scripted { .. } => policy
            .script_at(round)
            .any(|d| matches!(d, Deviation::Intervene)),
    }
}

fn default_speed() -> f64 {
    250.0
}

fn default_force() -> f64 {
    100.0
}

fn default_grasp_action() -> String {
    "grasp".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotModel {
    pub durations: BTreeMap<String, DurationDist>,
    #[serde(default)]
    pub grasp_failure_prob: f64,
    #[serde(default = "default_grasp_action")]
    pub grasp_action: String,
    /// Cartesian speed limit in mm/s.
    #[serde(default = "default_speed")]
    pub speed_mm_s: f64,
    /// Contact force in newtons at which the robot stops.
    #[serde(default = "default_force")]
    pub stop_force_n: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        RobotModel {
            durations: BTreeMap::new(),
            grasp_failure_prob: 0.0,
            grasp_action: default_grasp_action(),
            speed_mm_s: default_speed(),
            stop_force_n: default_force(),
        }
    }
}

impl RobotModel {
    pub fn validate(&self) -> Result<(), AgentError> {
        check_probability(self.grasp_failure_prob, "grasp_failure_prob")?;
        if !(self.speed_mm_s > 0.0 && self.stop_force_n > 0.0) {
            return Err(AgentError::InvalidConfig(
                "speed and stop force must be positive".into(),
            ));
        }
        for (name, d) in &self.durations {
            d.validate(name)?;
        }
        Ok(())
    }

    pub fn is_grasp(&self, action: &str) -> bool {
        action == self.grasp_action
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RobotOutcome {
    pub outcome: Outcome,
    pub duration: Micros,
}

/// Executes one robot action. Grasps fail with the configured probability,
/// or always when `pose_corrupted` is set.
pub fn robot_execute<R: Rng + ?Sized>(
    model: &RobotModel,
    action: &str,
    pose_corrupted: bool,
    rng: &mut R,
) -> Result<RobotOutcome, AgentError> {
    let dist = model
        .durations
        .get(action)
        .ok_or_else(|| AgentError::UnknownAction(action.to_string()))?;
    let duration = dist.sample(rng);
    let outcome = if model.is_grasp(action) {
        let u: f64 = rng.random();
        if pose_corrupted || u < model.grasp_failure_prob {
            Outcome::Failure
        } else {
            Outcome::Success
        }
    } else {
        Outcome::Success
    };
    Ok(RobotOutcome { outcome, duration })
}

/// Detection latency and failure rate of the part pose estimator. The
/// latency is spent once per human action; a failed detection corrupts the
/// pose used by the next grasp.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionModel {
    #[serde(default)]
    pub latency: DurationDist,
    #[serde(default)]
    pub failure_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub latency: Micros,
    pub failed: bool,
}

impl PerceptionModel {
    pub fn validate(&self) -> Result<(), AgentError> {
        self.latency.validate("perception latency")?;
        check_probability(self.failure_prob, "perception failure_prob")
    }

    pub fn detect<R: Rng + ?Sized>(&self, rng: &mut R) -> Detection {
        let latency = self.latency.sample(rng);
        let u: f64 = rng.random();
        Detection {
            latency,
            failed: u < self.failure_prob,
        }
    }
}
