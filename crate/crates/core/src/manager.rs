//! The task manager: drives a cooperation run over an [`AndOrGraph`].
//!
//! The manager issues one [`Suggestion`] at a time (turn-taking) along the
//! current optimal cooperation path and waits for the matching [`Ack`].
//! Robot actions are imposed, human actions are only suggested, and joint
//! actions are coordinated between both agents.
//!
//! Three things can happen on an acknowledgement:
//!
//! * the suggested action succeeded: it is recorded, completed arcs are
//!   reported to the graph, and the next suggestion follows the (possibly
//!   re-selected) cheapest viable path;
//! * the human did a different feasible action: the manager adapts and
//!   continues along the cheapest viable path through the arc the human
//!   chose;
//! * a robot action failed (or the human stopped the robot): the arc is
//!   abandoned, the plan switches to the next viable path and any shared
//!   finished prefix is credited to the replacement arc.
//!
//! The manager never reads a clock. Callers pass the time at which each
//! acknowledgement arrived and the time at which the next suggestion is
//! ready; their differences make up `T_m`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AndOrGraph, ArcId, CooperationPath, GraphError, StatusKind};
use crate::model::AgentKind;
use crate::time::Micros;

/// How strongly a suggestion binds the receiving agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binding {
    /// Robot actions are commanded.
    Imposed,
    /// Human actions are proposals the operator may ignore.
    Suggested,
    /// Joint actions need both agents.
    Coordinated,
}

impl Binding {
    pub fn for_agent(agent: AgentKind) -> Self {
        match agent {
            AgentKind::Robot => Binding::Imposed,
            AgentKind::Human => Binding::Suggested,
            AgentKind::Joint => Binding::Coordinated,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Binding::Imposed => "imposed",
            Binding::Suggested => "suggested",
            Binding::Coordinated => "coordinated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub seq: u64,
    pub arc: String,
    pub action: String,
    pub agent: AgentKind,
    pub binding: Binding,
    pub issued_at: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    /// Sequence number of the suggestion being answered.
    pub seq: u64,
    /// Arc the action was performed on. When absent the manager resolves it
    /// from the action name.
    pub arc: Option<String>,
    pub action: String,
    pub outcome: Outcome,
    pub performed_by: AgentKind,
    pub received_at: Micros,
}

impl Ack {
    /// Successful completion of `suggestion` by its own agent.
    pub fn success(suggestion: &Suggestion, received_at: Micros) -> Self {
        Ack {
            seq: suggestion.seq,
            arc: Some(suggestion.arc.clone()),
            action: suggestion.action.clone(),
            outcome: Outcome::Success,
            performed_by: suggestion.agent,
            received_at,
        }
    }

    pub fn failure(suggestion: &Suggestion, received_at: Micros) -> Self {
        Ack {
            outcome: Outcome::Failure,
            ..Ack::success(suggestion, received_at)
        }
    }
}

/// One `T_next(a_i) - T_ack(a_{i-1})` contribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingGap {
    pub ack_at: Micros,
    pub next_at: Micros,
}

impl TimingGap {
    pub fn span(&self) -> Micros {
        self.next_at.saturating_sub(self.ack_at)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub gaps: Vec<TimingGap>,
    pub total: Micros,
}

impl TimingRecord {
    fn push(&mut self, gap: TimingGap) {
        self.total += gap.span();
        self.gaps.push(gap);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Running,
    /// Recovering from a failed or stopped robot action on a replacement arc.
    Intervention,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureReason {
    /// No cooperation path to the root survives.
    NoViablePath,
    /// A robot action failed and no alternative remained.
    RobotActionFailure { arc: String, action: String },
    /// A human or joint action was reported failed.
    HumanActionFailure { arc: String, action: String },
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::NoViablePath => f.write_str("no viable path"),
            FailureReason::RobotActionFailure { arc, action } => {
                write!(f, "robot action {action} on {arc} failed")
            }
            FailureReason::HumanActionFailure { arc, action } => {
                write!(f, "human action {action} on {arc} failed")
            }
        }
    }
}

/// What the manager wants to happen next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Suggest(Suggestion),
    Done,
    Failed(FailureReason),
}

/// Why the manager moved to its new state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transition {
    /// The suggested action succeeded; the arc is still in progress.
    Continued,
    /// The suggested action completed its arc.
    ArcCompleted {
        arc: String,
    },
    /// The human did something else; the plan now goes through `arc`.
    Adapted {
        arc: String,
        completed: bool,
    },
    /// A robot action failed on `abandoned`; the plan continues on `replacement`.
    Switched {
        abandoned: String,
        replacement: String,
        carried: usize,
    },
    Aborted,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManagerError {
    #[error("no viable cooperation path")]
    NoViablePath,
    #[error("acknowledgement for suggestion {got}, expected {expected}")]
    StaleSeq { expected: u64, got: u64 },
    #[error("action {action:?} is not the next action of any feasible arc")]
    InfeasibleAction { action: String },
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("no robot action is in flight")]
    NoRobotActionInFlight,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One line of the manager's event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEntry {
    Suggest(Suggestion),
    Ack(Ack),
    Stop {
        seq: u64,
        at: Micros,
    },
    Switch {
        abandoned: String,
        replacement: String,
        carried: usize,
    },
    Adapt {
        arc: String,
    },
    Done {
        at: Micros,
    },
    Failed {
        at: Micros,
        reason: FailureReason,
    },
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogEntry::Suggest(s) => write!(
                f,
                "t={} suggest seq={} arc={} action={} agent={} binding={}",
                s.issued_at,
                s.seq,
                s.arc,
                s.action,
                s.agent,
                s.binding.as_str()
            ),
            LogEntry::Ack(a) => write!(
                f,
                "t={} ack seq={} arc={} action={} outcome={} by={}",
                a.received_at,
                a.seq,
                a.arc.as_deref().unwrap_or("-"),
                a.action,
                match a.outcome {
                    Outcome::Success => "success",
                    Outcome::Failure => "failure",
                },
                a.performed_by
            ),
            LogEntry::Stop { seq, at } => write!(f, "t={at} stop seq={seq}"),
            LogEntry::Switch {
                abandoned,
                replacement,
                carried,
            } => write!(
                f,
                "switch from={abandoned} to={replacement} carried={carried}"
            ),
            LogEntry::Adapt { arc } => write!(f, "adapt arc={arc}"),
            LogEntry::Done { at } => write!(f, "t={at} done"),
            LogEntry::Failed { at, reason } => write!(f, "t={at} failed reason={reason}"),
        }
    }
}

/// Cooperation state for one run.
#[derive(Debug, Clone)]
pub struct TaskManager {
    graph: AndOrGraph,
    path: Option<CooperationPath>,
    pending: Option<Suggestion>,
    phase: Phase,
    failure: Option<FailureReason>,
    timing: TimingRecord,
    next_seq: u64,
    /// Arc currently being worked on, kept until it is done or abandoned.
    current_arc: Option<ArcId>,
    /// Replacement arc while in the intervention phase.
    recovery_arc: Option<ArcId>,
    last_ack_at: Option<Micros>,
    completed: Vec<ArcId>,
    interventions: u32,
    deviations: u32,
    log: Vec<LogEntry>,
}

impl TaskManager {
    /// Starts a run on a loaded graph (paths enumerated). Returns the first
    /// suggestion, or `None` if the graph is already solved.
    pub fn start(
        graph: AndOrGraph,
        now: Micros,
    ) -> Result<(Self, Option<Suggestion>), ManagerError> {
        let mut mgr = TaskManager {
            graph,
            path: None,
            pending: None,
            phase: Phase::Running,
            failure: None,
            timing: TimingRecord::default(),
            next_seq: 1,
            current_arc: None,
            recovery_arc: None,
            last_ack_at: None,
            completed: Vec::new(),
            interventions: 0,
            deviations: 0,
            log: Vec::new(),
        };
        if mgr.graph.is_solved() {
            mgr.phase = Phase::Done;
            mgr.log.push(LogEntry::Done { at: now });
            return Ok((mgr, None));
        }
        let path = match mgr.graph.optimal_path() {
            Ok(p) => p.clone(),
            Err(GraphError::NoViablePath) => return Err(ManagerError::NoViablePath),
            Err(e) => return Err(e.into()),
        };
        mgr.path = Some(path);
        match mgr.advance(now) {
            Step::Suggest(s) => Ok((mgr, Some(s))),
            _ => Err(ManagerError::NoViablePath),
        }
    }

    pub fn graph(&self) -> &AndOrGraph {
        &self.graph
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn pending(&self) -> Option<&Suggestion> {
        self.pending.as_ref()
    }

    pub fn current_path(&self) -> Option<&CooperationPath> {
        self.path.as_ref()
    }

    pub fn failure(&self) -> Option<&FailureReason> {
        self.failure.as_ref()
    }

    /// Accumulated `T_m` contributions.
    pub fn timing_report(&self) -> &TimingRecord {
        &self.timing
    }

    pub fn interventions(&self) -> u32 {
        self.interventions
    }

    pub fn deviations(&self) -> u32 {
        self.deviations
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Handles an acknowledgement. `now` is when the next suggestion is
    /// ready; `now - ack.received_at` is this step's `T_m` contribution.
    pub fn on_ack(&mut self, ack: Ack, now: Micros) -> Result<(Step, Transition), ManagerError> {
        if !matches!(self.phase, Phase::Running | Phase::Intervention) {
            return Err(ManagerError::ProtocolViolation(format!(
                "cooperation is {:?}",
                self.phase
            )));
        }
        let pending = self
            .pending
            .clone()
            .ok_or_else(|| ManagerError::ProtocolViolation("no pending suggestion".into()))?;
        if ack.seq != pending.seq {
            return Err(ManagerError::StaleSeq {
                expected: pending.seq,
                got: ack.seq,
            });
        }
        let same_action =
            ack.action == pending.action && ack.arc.as_ref().is_none_or(|a| *a == pending.arc);

        if ack.outcome == Outcome::Failure {
            if !same_action {
                return Err(ManagerError::ProtocolViolation(
                    "failure reported for an action that was not suggested".into(),
                ));
            }
            self.log.push(LogEntry::Ack(ack.clone()));
            self.last_ack_at = Some(ack.received_at);
            self.pending = None;
            return Ok(if pending.agent == AgentKind::Robot {
                self.recover_from_robot_failure(&pending, now)
            } else {
                let reason = FailureReason::HumanActionFailure {
                    arc: pending.arc.clone(),
                    action: pending.action.clone(),
                };
                (self.fail(reason, now), Transition::Aborted)
            });
        }

        let pending_arc = self.arc_id(&pending.arc)?;
        let (target, deviated) = if same_action {
            if ack.performed_by != pending.agent
                && !(pending.agent == AgentKind::Joint && ack.performed_by == AgentKind::Human)
            {
                return Err(ManagerError::ProtocolViolation(format!(
                    "{} reported {} action {}",
                    ack.performed_by, pending.agent, pending.action
                )));
            }
            (pending_arc, false)
        } else {
            if pending.agent == AgentKind::Robot || ack.performed_by == AgentKind::Robot {
                return Err(ManagerError::ProtocolViolation(
                    "only the human operator may deviate from a suggestion".into(),
                ));
            }
            (self.resolve_deviation(&ack)?, true)
        };

        let progress = self.graph.record_action_finished(target, &ack.action)?;
        let target_name = self.graph.arc(target).name.clone();
        self.log.push(LogEntry::Ack(Ack {
            arc: Some(target_name.clone()),
            ..ack.clone()
        }));
        self.last_ack_at = Some(ack.received_at);
        self.pending = None;

        if progress.done {
            self.graph.update_status(&[target])?;
            self.completed.push(target);
            if self.recovery_arc == Some(target) {
                self.recovery_arc = None;
                self.phase = Phase::Running;
            }
            if self.current_arc == Some(target) {
                self.current_arc = None;
            }
        } else {
            self.current_arc = Some(target);
        }

        let transition = if deviated {
            self.deviations += 1;
            self.log.push(LogEntry::Adapt {
                arc: target_name.clone(),
            });
            match self.graph.optimal_path_through(target) {
                Ok(p) => self.path = Some(p.clone()),
                Err(GraphError::NoViablePath) => self.path = None,
                Err(e) => return Err(e.into()),
            }
            Transition::Adapted {
                arc: target_name,
                completed: progress.done,
            }
        } else if progress.done {
            Transition::ArcCompleted { arc: target_name }
        } else {
            Transition::Continued
        };

        if progress.done && !deviated {
            self.reselect();
        }
        Ok((self.advance(now), transition))
    }

    /// The human stopped the robot during its current action. Treated as a
    /// failure of that action at `stopped_at`.
    pub fn on_intervention(
        &mut self,
        stopped_at: Micros,
        now: Micros,
    ) -> Result<(Step, Transition), ManagerError> {
        let pending = match (&self.phase, &self.pending) {
            (Phase::Running, Some(p)) if p.agent == AgentKind::Robot => p.clone(),
            _ => return Err(ManagerError::NoRobotActionInFlight),
        };
        self.log.push(LogEntry::Stop {
            seq: pending.seq,
            at: stopped_at,
        });
        self.on_ack(Ack::failure(&pending, stopped_at), now)
    }

    fn arc_id(&self, name: &str) -> Result<ArcId, ManagerError> {
        self.graph
            .arc_id(name)
            .ok_or_else(|| GraphError::UnknownArc(name.to_string()).into())
    }

    /// Maps a deviating action to the feasible arc that has it next.
    /// Ambiguities go to the cheapest arc, then to the first name.
    fn resolve_deviation(&self, ack: &Ack) -> Result<ArcId, ManagerError> {
        let infeasible = || ManagerError::InfeasibleAction {
            action: ack.action.clone(),
        };
        let (_, feasible) = self.graph.feasible_sets();
        let mut candidates: Vec<ArcId> = feasible
            .into_iter()
            .filter(|&a| {
                let h = self.graph.arc(a);
                ack.arc.as_ref().is_none_or(|n| *n == h.name)
                    && h.next_action().is_some_and(|next| {
                        next.name == ack.action && next.agent != AgentKind::Robot
                    })
            })
            .collect();
        candidates.sort_by(|&x, &y| {
            let (hx, hy) = (self.graph.arc(x), self.graph.arc(y));
            hx.weight
                .total_cmp(&hy.weight)
                .then_with(|| hx.name.cmp(&hy.name))
        });
        candidates.first().copied().ok_or_else(infeasible)
    }

    fn reselect(&mut self) {
        self.path = self.graph.optimal_path().ok().cloned();
    }

    fn recover_from_robot_failure(
        &mut self,
        failed: &Suggestion,
        now: Micros,
    ) -> (Step, Transition) {
        let Some(abandoned) = self.graph.arc_id(&failed.arc) else {
            return (
                self.fail(FailureReason::NoViablePath, now),
                Transition::Aborted,
            );
        };
        let reason = FailureReason::RobotActionFailure {
            arc: failed.arc.clone(),
            action: failed.action.clone(),
        };
        if self.graph.abandon_arc(abandoned).is_err() {
            return (self.fail(reason, now), Transition::Aborted);
        }
        self.current_arc = None;
        self.recovery_arc = None;
        self.reselect();
        let Some(replacement) = self.next_arc() else {
            return (self.fail(reason, now), Transition::Aborted);
        };

        let (old, new) = (self.graph.arc(abandoned), self.graph.arc(replacement));
        let same_transition = old.parent == new.parent && old.children == new.children;
        let mut carried = 0;
        if same_transition {
            carried = self
                .graph
                .carry_over_prefix(abandoned, replacement)
                .unwrap_or(0);
            if self.graph.arc(replacement).done {
                let _ = self.graph.update_status(&[replacement]);
                self.completed.push(replacement);
                self.reselect();
            }
        }
        if !self.graph.arc(replacement).done {
            self.current_arc = Some(replacement);
            self.recovery_arc = Some(replacement);
            self.phase = Phase::Intervention;
        }
        self.interventions += 1;
        let replacement_name = self.graph.arc(replacement).name.clone();
        self.log.push(LogEntry::Switch {
            abandoned: failed.arc.clone(),
            replacement: replacement_name.clone(),
            carried,
        });
        let transition = Transition::Switched {
            abandoned: failed.arc.clone(),
            replacement: replacement_name,
            carried,
        };
        (self.advance(now), transition)
    }

    /// Next arc to work on: the arc in progress if it is still on the path
    /// and feasible, otherwise the first feasible arc of the path.
    fn next_arc(&self) -> Option<ArcId> {
        let path = self.path.as_ref()?;
        if let Some(cur) = self.current_arc {
            if path.contains_arc(cur) && self.graph.arc(cur).feasible {
                return Some(cur);
            }
        }
        path.arcs()
            .iter()
            .copied()
            .find(|&a| self.graph.arc(a).feasible)
    }

    fn fail(&mut self, reason: FailureReason, now: Micros) -> Step {
        self.phase = Phase::Failed;
        self.pending = None;
        self.failure = Some(reason.clone());
        self.log.push(LogEntry::Failed {
            at: now,
            reason: reason.clone(),
        });
        Step::Failed(reason)
    }

    /// Issues the next suggestion, or finishes the run.
    fn advance(&mut self, now: Micros) -> Step {
        match self.graph.status().kind {
            StatusKind::Solved => {
                self.phase = Phase::Done;
                self.pending = None;
                self.current_arc = None;
                self.log.push(LogEntry::Done { at: now });
                return Step::Done;
            }
            StatusKind::Failed => return self.fail(FailureReason::NoViablePath, now),
            StatusKind::InProgress => {}
        }
        let Some(arc) = self.next_arc() else {
            return self.fail(FailureReason::NoViablePath, now);
        };
        let h = self.graph.arc(arc);
        let Some(action) = h.next_action() else {
            return self.fail(FailureReason::NoViablePath, now);
        };
        let issued_at = match self.last_ack_at {
            Some(ack_at) => {
                let next_at = now.max(ack_at);
                self.timing.push(TimingGap { ack_at, next_at });
                next_at
            }
            None => now,
        };
        let suggestion = Suggestion {
            seq: self.next_seq,
            arc: h.name.clone(),
            action: action.name.clone(),
            agent: action.agent,
            binding: Binding::for_agent(action.agent),
            issued_at,
        };
        self.next_seq += 1;
        self.current_arc = Some(arc);
        self.pending = Some(suggestion.clone());
        self.log.push(LogEntry::Suggest(suggestion.clone()));
        Step::Suggest(suggestion)
    }

    pub fn completed_count(&self) -> usize {
        self.completed.len()
    }

    /// Names of the arcs completed so far, in completion order.
    pub fn completed_arcs(&self) -> Vec<String> {
        self.completed
            .iter()
            .map(|&a| self.graph.arc(a).name.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests;
