use std::collections::BTreeSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SimConfig, SimError};
use crate::agents::{human_decide, human_intervenes, robot_execute};
use crate::graph::AndOrGraph;
use crate::manager::{Ack, FailureReason, LogEntry, ManagerError, Step, Suggestion, TaskManager};
use crate::model::AgentKind;
use crate::time::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Success,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialFailure {
    /// The human did not answer suggestion `seq` in time.
    Timeout {
        seq: u64,
    },
    RobotActionFailure {
        arc: String,
        action: String,
    },
    HumanActionFailure {
        arc: String,
        action: String,
    },
    NoViablePath,
}

impl TrialFailure {
    pub fn code(&self) -> &'static str {
        match self {
            TrialFailure::Timeout { .. } => "timeout",
            TrialFailure::RobotActionFailure { .. } => "robot_action_failure",
            TrialFailure::HumanActionFailure { .. } => "human_action_failure",
            TrialFailure::NoViablePath => "no_viable_path",
        }
    }
}

impl From<FailureReason> for TrialFailure {
    fn from(r: FailureReason) -> Self {
        match r {
            FailureReason::NoViablePath => TrialFailure::NoViablePath,
            FailureReason::RobotActionFailure { arc, action } => {
                TrialFailure::RobotActionFailure { arc, action }
            }
            FailureReason::HumanActionFailure { arc, action } => {
                TrialFailure::HumanActionFailure { arc, action }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub t_m: Micros,
    pub t_h: Micros,
    pub t_r: Micros,
    pub t_c: Micros,
}

impl Metrics {
    /// Percentages of `T_c` spent in `T_m`, `T_h` and `T_r`.
    pub fn split(&self) -> [f64; 3] {
        let c = self.t_c.as_secs_f64();
        if c == 0.0 {
            return [0.0; 3];
        }
        [self.t_m, self.t_h, self.t_r].map(|t| 100.0 * t.as_secs_f64() / c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimEvent {
    Manager(LogEntry),
    /// Pose estimation failed; the next grasp will miss.
    PerceptionFailure {
        at: Micros,
    },
    /// A human deviation was rejected and the suggestion performed instead.
    Rejected {
        seq: u64,
        action: String,
        at: Micros,
    },
    Timeout {
        seq: u64,
        at: Micros,
    },
}

impl fmt::Display for SimEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimEvent::Manager(e) => e.fmt(f),
            SimEvent::PerceptionFailure { at } => write!(f, "t={at} perception-failure"),
            SimEvent::Rejected { seq, action, at } => {
                write!(f, "t={at} rejected seq={seq} action={action}")
            }
            SimEvent::Timeout { seq, at } => write!(f, "t={at} timeout seq={seq}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u32,
    pub seed: u64,
    pub status: TrialStatus,
    pub failure: Option<TrialFailure>,
    pub metrics: Metrics,
    /// Completed intervention arcs (names starting with `hw`).
    pub hw_count: u32,
    pub interventions: u32,
    pub deviations: u32,
    pub completed_arcs: Vec<String>,
    pub events: Vec<SimEvent>,
}

impl TrialResult {
    pub fn log_lines(&self) -> Vec<String> {
        self.events.iter().map(ToString::to_string).collect()
    }
}

struct Streams {
    human: ChaCha8Rng,
    decision: ChaCha8Rng,
    robot: ChaCha8Rng,
    perception: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            rng
        };
        Streams {
            human: stream(0),
            decision: stream(1),
            robot: stream(2),
            perception: stream(3),
        }
    }
}

/// Runs one trial, loading the model from the configuration.
pub fn run_trial(config: &SimConfig, trial: u32, seed: u64) -> Result<TrialResult, SimError> {
    config.validate()?;
    run_trial_on(&config.load_graph()?, config, trial, seed)
}

/// Runs one trial on an already loaded graph.
pub fn run_trial_on(
    graph: &AndOrGraph,
    config: &SimConfig,
    trial: u32,
    seed: u64,
) -> Result<TrialResult, SimError> {
    let latency = Micros::from_secs_f64(config.manager_latency);
    let timeout = Micros::from_secs_f64(config.timeout);
    let human = &config.human;
    let mut rng = Streams::new(seed);

    let (mut mgr, first) = TaskManager::start(graph.clone(), Micros::ZERO)?;
    let mut events: Vec<SimEvent> = Vec::new();
    let mut synced = 0;
    let mut sync = |mgr: &TaskManager, events: &mut Vec<SimEvent>| {
        events.extend(mgr.log()[synced..].iter().cloned().map(SimEvent::Manager));
        synced = mgr.log().len();
    };
    sync(&mgr, &mut events);

    let mut m = Metrics::default();
    let mut clock = Micros::ZERO;
    let mut pose_corrupted = false;
    let mut round = 0;
    let mut stop_armed = false;
    let mut scripted: BTreeSet<u32> = BTreeSet::new();
    let mut next = first;
    let mut failure = if next.is_none() {
        mgr.failure().cloned().map(TrialFailure::from)
    } else {
        None
    };

    while let Some(s) = next.take() {
        let r = mgr.completed_count() as u32 + 1;
        if r != round {
            round = r;
            stop_armed = human_intervenes(human, round, &mut rng.decision);
        }
        let step = match s.agent {
            AgentKind::Robot => {
                let out = robot_execute(&config.robot, &s.action, pose_corrupted, &mut rng.robot)?;
                if config.robot.is_grasp(&s.action) {
                    pose_corrupted = false;
                }
                if stop_armed && s.action == human.intervene_on {
                    stop_armed = false;
                    let ran = out.duration.scale(human.stop_fraction);
                    clock += ran;
                    m.t_r += ran;
                    mgr.on_intervention(clock, clock + latency)?.0
                } else {
                    clock += out.duration;
                    m.t_r += out.duration;
                    let mut ack = Ack::success(&s, clock);
                    ack.outcome = out.outcome;
                    mgr.on_ack(ack, clock + latency)?.0
                }
            }
            AgentKind::Human | AgentKind::Joint => {
                // round 0 matches no script step
                let script_round = if scripted.contains(&round) { 0 } else { round };
                let mv = human_decide(human, script_round, &s, &mut rng.human)?;
                let det = config.perception.detect(&mut rng.perception);
                let spent = mv.duration.map(|d| d + det.latency);
                match spent {
                    Some(spent) if spent <= timeout => {
                        clock += spent;
                        m.t_h += spent;
                        if det.failed {
                            pose_corrupted = true;
                            events.push(SimEvent::PerceptionFailure { at: clock });
                        }
                        if mv.is_deviation {
                            scripted.insert(round);
                        }
                        let ack = Ack {
                            seq: s.seq,
                            arc: mv.arc,
                            action: mv.action.clone(),
                            outcome: mv.outcome,
                            performed_by: if mv.is_deviation {
                                AgentKind::Human
                            } else {
                                s.agent
                            },
                            received_at: clock,
                        };
                        match mgr.on_ack(ack, clock + latency) {
                            Err(ManagerError::InfeasibleAction { .. }) if mv.is_deviation => {
                                events.push(SimEvent::Rejected {
                                    seq: s.seq,
                                    action: mv.action,
                                    at: clock,
                                });
                                comply(&mut mgr, &s, config, &mut rng, &mut clock, &mut m, latency)?
                            }
                            other => other?.0,
                        }
                    }
                    _ => {
                        clock += timeout;
                        m.t_h += timeout;
                        events.push(SimEvent::Timeout {
                            seq: s.seq,
                            at: clock,
                        });
                        mgr.on_ack(Ack::failure(&s, clock), clock)?;
                        failure = Some(TrialFailure::Timeout { seq: s.seq });
                        break;
                    }
                }
            }
        };
        sync(&mgr, &mut events);
        match step {
            Step::Suggest(n) => {
                clock += latency;
                next = Some(n);
            }
            Step::Done => {}
            Step::Failed(reason) => failure = Some(reason.into()),
        }
    }
    sync(&mgr, &mut events);

    m.t_m = mgr.timing_report().total;
    m.t_c = clock;
    debug_assert_eq!(m.t_c, m.t_m + m.t_h + m.t_r);
    let completed_arcs = mgr.completed_arcs();
    Ok(TrialResult {
        trial,
        seed,
        status: if failure.is_none() {
            TrialStatus::Success
        } else {
            TrialStatus::Failed
        },
        failure,
        metrics: m,
        hw_count: completed_arcs
            .iter()
            .filter(|a| a.starts_with("hw"))
            .count() as u32,
        interventions: mgr.interventions(),
        deviations: mgr.deviations(),
        completed_arcs,
        events,
    })
}

/// Performs the suggested action after a rejected deviation.
fn comply(
    mgr: &mut TaskManager,
    s: &Suggestion,
    config: &SimConfig,
    rng: &mut Streams,
    clock: &mut Micros,
    m: &mut Metrics,
    latency: Micros,
) -> Result<Step, SimError> {
    let mv = human_decide(&config.human, 0, s, &mut rng.human)?;
    let spent = mv.duration.unwrap_or_default();
    *clock += spent;
    m.t_h += spent;
    Ok(mgr.on_ack(Ack::success(s, *clock), *clock + latency)?.0)
}
