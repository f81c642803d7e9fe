//! A live cooperation session as a synchronous state machine.
//!
//! [`SessionCore::apply`] takes one input and the session time at which it
//! arrived, updates the task manager and returns the frames to broadcast
//! plus the side effects the driver must schedule. Accepted inputs are
//! appended to the journal; replaying the journal on a fresh core yields the
//! same [`Snapshot`].

use serde::{Deserialize, Serialize};
use serde_json::json;

use coplan_core::graph::{AndOrGraph, StatusKind};
use coplan_core::manager::{Ack, ManagerError, Outcome, Phase, Step, Suggestion, TaskManager};
use coplan_core::model::AgentKind;
use coplan_core::sim::TrialFailure;
use coplan_core::time::Micros;

use crate::proto::{ClientEvent, ErrorCode, Outbound, OutboundKind, ProtoError, PROTO_VERSION};

/// Everything that can change a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "input", rename_all = "snake_case")]
pub enum Input {
    Client {
        event: ClientEvent,
    },
    /// The simulated robot finished suggestion `seq`.
    RobotFinished {
        seq: u64,
        outcome: Outcome,
    },
    /// The human did not answer suggestion `seq` in time.
    TimeoutExpired {
        seq: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub at: Micros,
    pub input: Input,
}

/// Work the driver schedules after a state change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    /// Execute robot suggestion `seq` and report back.
    RunRobot { seq: u64, action: String },
    /// Start the human-turn timer for suggestion `seq`.
    ArmTimeout { seq: u64 },
}

#[derive(Debug, Default)]
pub struct Applied {
    pub messages: Vec<Outbound>,
    pub effects: Vec<Effect>,
}

/// Run metrics so far, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsView {
    pub t_m: f64,
    pub t_h: f64,
    pub t_r: f64,
    pub t_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathView {
    pub arcs: Vec<String>,
    pub cost: f64,
}

/// The full session state document, served by `GET /session/{id}` and in
/// every `state` frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub proto: String,
    pub session: String,
    pub model: String,
    pub status: String,
    pub phase: Phase,
    pub failure: Option<TrialFailure>,
    pub solved_nodes: Vec<String>,
    pub feasible_nodes: Vec<String>,
    pub feasible_arcs: Vec<String>,
    pub suppressed_arcs: Vec<String>,
    pub completed_arcs: Vec<String>,
    pub current_path: Option<PathView>,
    pub pending: Option<Suggestion>,
    pub interventions: u32,
    pub deviations: u32,
    pub metrics: MetricsView,
    pub journal_len: usize,
}

#[derive(Debug, Clone)]
pub struct SessionCore {
    id: String,
    origin: AndOrGraph,
    mgr: TaskManager,
    failure: Option<TrialFailure>,
    t_h: Micros,
    t_r: Micros,
    t_c: Micros,
    journal: Vec<JournalEntry>,
    out_seq: u64,
}

fn invalid(msg: impl Into<String>) -> ProtoError {
    ProtoError::new(ErrorCode::InvalidTransition, msg)
}

impl SessionCore {
    /// Starts the manager on `graph` (paths enumerated) at session time 0.
    pub fn new(id: impl Into<String>, graph: AndOrGraph) -> Result<(Self, Applied), ManagerError> {
        let (mgr, first) = TaskManager::start(graph.clone(), Micros::ZERO)?;
        let mut core = SessionCore {
            id: id.into(),
            origin: graph,
            failure: None,
            mgr,
            t_h: Micros::ZERO,
            t_r: Micros::ZERO,
            t_c: Micros::ZERO,
            journal: Vec::new(),
            out_seq: 0,
        };
        let applied = core.announce(first.map_or(Step::Done, Step::Suggest));
        Ok((core, applied))
    }

    /// Rebuilds a session from its journal.
    pub fn replay(
        id: impl Into<String>,
        graph: AndOrGraph,
        journal: &[JournalEntry],
    ) -> Result<Self, ProtoError> {
        let (mut core, _) = SessionCore::new(id, graph).map_err(|e| invalid(e.to_string()))?;
        for entry in journal {
            core.apply(entry.input.clone(), entry.at)?;
        }
        Ok(core)
    }

    /// Replays this session's own journal from its initial graph.
    pub fn replayed(&self) -> Result<Self, ProtoError> {
        SessionCore::replay(self.id.clone(), self.origin.clone(), &self.journal)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    pub fn pending(&self) -> Option<&Suggestion> {
        self.mgr.pending()
    }

    pub fn is_closed(&self) -> bool {
        self.failure.is_some() || matches!(self.mgr.phase(), Phase::Done | Phase::Failed)
    }

    fn next_seq(&mut self) -> u64 {
        self.out_seq += 1;
        self.out_seq
    }

    fn message(&mut self, kind: OutboundKind, payload: serde_json::Value) -> Outbound {
        Outbound {
            kind,
            session: self.id.clone(),
            seq: self.next_seq(),
            payload,
        }
    }

    /// An `error` frame for a rejected input.
    pub fn error_message(&mut self, err: &ProtoError) -> Outbound {
        self.message(OutboundKind::Error, err.payload())
    }

    /// A `state` frame with the current snapshot.
    pub fn state_message(&mut self) -> Outbound {
        let snap = serde_json::to_value(self.snapshot()).unwrap_or_default();
        self.message(OutboundKind::State, snap)
    }

    /// Applies one input received at session time `at`.
    pub fn apply(&mut self, input: Input, at: Micros) -> Result<Applied, ProtoError> {
        if self.is_closed() {
            return Err(ProtoError::new(
                ErrorCode::SessionClosed,
                "session is closed",
            ));
        }
        let pending = self
            .mgr
            .pending()
            .cloned()
            .ok_or_else(|| ProtoError::new(ErrorCode::SessionClosed, "nothing pending"))?;
        let seq = match &input {
            Input::Client { event } => event.seq(),
            Input::RobotFinished { seq, .. } | Input::TimeoutExpired { seq } => *seq,
        };
        if seq != pending.seq {
            return Err(ProtoError::new(
                ErrorCode::StaleSeq,
                format!("suggestion {} is pending, got {seq}", pending.seq),
            ));
        }
        let robot_turn = pending.agent == AgentKind::Robot;
        let result = match &input {
            Input::Client {
                event: ClientEvent::ActionDone { done, .. },
            } => {
                if robot_turn {
                    return Err(invalid("a robot action is in flight"));
                }
                let performed_by =
                    if pending.agent == AgentKind::Joint && done.action == pending.action {
                        AgentKind::Joint
                    } else {
                        AgentKind::Human
                    };
                let ack = Ack {
                    seq,
                    arc: done.arc.clone(),
                    action: done.action.clone(),
                    outcome: if done.failed {
                        Outcome::Failure
                    } else {
                        Outcome::Success
                    },
                    performed_by,
                    received_at: at,
                };
                self.mgr.on_ack(ack, at)
            }
            Input::Client {
                event: ClientEvent::Intervene { .. },
            } => {
                if !robot_turn {
                    return Err(invalid("no robot action is in flight"));
                }
                self.mgr.on_intervention(at, at)
            }
            Input::Client {
                event: ClientEvent::HandoverConfirm { .. },
            } => {
                if pending.agent != AgentKind::Joint {
                    return Err(invalid(format!("{} is not a joint action", pending.action)));
                }
                self.mgr.on_ack(Ack::success(&pending, at), at)
            }
            Input::RobotFinished { outcome, .. } => {
                if !robot_turn {
                    return Err(invalid("the pending action is not the robot's"));
                }
                let mut ack = Ack::success(&pending, at);
                ack.outcome = *outcome;
                self.mgr.on_ack(ack, at)
            }
            Input::TimeoutExpired { .. } => {
                if robot_turn {
                    return Err(invalid("the robot's turn does not time out"));
                }
                self.mgr.on_ack(Ack::failure(&pending, at), at)
            }
        };
        let (step, _) = result.map_err(|e| match e {
            ManagerError::StaleSeq { .. } => ProtoError::new(ErrorCode::StaleSeq, e.to_string()),
            other => invalid(other.to_string()),
        })?;

        let span = at.saturating_sub(pending.issued_at);
        if robot_turn {
            self.t_r += span;
        } else {
            self.t_h += span;
        }
        self.t_c = at;
        let step = if let Input::TimeoutExpired { seq } = input {
            self.failure = Some(TrialFailure::Timeout { seq });
            Step::Done
        } else {
            step
        };
        self.journal.push(JournalEntry { at, input });
        Ok(self.announce(step))
    }

    fn announce(&mut self, step: Step) -> Applied {
        let mut out = Applied::default();
        let state = self.state_message();
        out.messages.push(state);
        match step {
            Step::Suggest(s) => {
                out.effects.push(if s.agent == AgentKind::Robot {
                    Effect::RunRobot {
                        seq: s.seq,
                        action: s.action.clone(),
                    }
                } else {
                    Effect::ArmTimeout { seq: s.seq }
                });
                let payload = serde_json::to_value(&s).unwrap_or_default();
                let msg = self.message(OutboundKind::Suggestion, payload);
                out.messages.push(msg);
            }
            Step::Done | Step::Failed(_) => {
                if let Step::Failed(reason) = step {
                    self.failure.get_or_insert(reason.into());
                }
                let payload = json!({
                    "status": self.status(),
                    "failure": self.failure,
                    "metrics": self.metrics(),
                });
                let msg = self.message(OutboundKind::Metrics, payload);
                out.messages.push(msg);
            }
        }
        out
    }

    fn status(&self) -> &'static str {
        if self.failure.is_some() {
            return "failed";
        }
        match self.mgr.graph().status().kind {
            StatusKind::Solved => "solved",
            StatusKind::Failed => "failed",
            StatusKind::InProgress => "in_progress",
        }
    }

    fn metrics(&self) -> MetricsView {
        MetricsView {
            t_m: self.mgr.timing_report().total.as_secs_f64(),
            t_h: self.t_h.as_secs_f64(),
            t_r: self.t_r.as_secs_f64(),
            t_c: self.t_c.as_secs_f64(),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let g = self.mgr.graph();
        let (nf, hf) = g.feasible_sets();
        let names = |it: Vec<String>| {
            let mut v = it;
            v.sort();
            v
        };
        Snapshot {
            proto: PROTO_VERSION.into(),
            session: self.id.clone(),
            model: g.name().to_string(),
            status: self.status().into(),
            phase: self.mgr.phase(),
            failure: self.failure.clone(),
            solved_nodes: names(
                g.nodes()
                    .iter()
                    .filter(|n| n.solved)
                    .map(|n| n.name.clone())
                    .collect(),
            ),
            feasible_nodes: names(nf.iter().map(|&n| g.node(n).name.clone()).collect()),
            feasible_arcs: names(hf.iter().map(|&a| g.arc(a).name.clone()).collect()),
            suppressed_arcs: names(
                g.arcs()
                    .iter()
                    .filter(|a| a.suppressed)
                    .map(|a| a.name.clone())
                    .collect(),
            ),
            completed_arcs: self.mgr.completed_arcs(),
            current_path: self.mgr.current_path().map(|p| PathView {
                arcs: p.arc_names(g).iter().map(|s| s.to_string()).collect(),
                cost: p.cost(),
            }),
            pending: self.mgr.pending().cloned(),
            interventions: self.mgr.interventions(),
            deviations: self.mgr.deviations(),
            metrics: self.metrics(),
            journal_len: self.journal.len(),
        }
    }

    /// Canonical serialization of the snapshot.
    pub fn snapshot_json(&self) -> String {
        serde_json::to_string(&self.snapshot()).unwrap_or_default()
    }
}
