use super::engine::{Metrics, SimEvent, TrialFailure};
use super::SimError;
use crate::graph::AndOrGraph;
use crate::manager::{LogEntry, TaskManager};
use crate::model::AgentKind;
use crate::time::Micros;

/// The result of re-feeding a trial's event log into a fresh manager.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub metrics: Metrics,
    pub failure: Option<TrialFailure>,
    pub manager_log: Vec<LogEntry>,
}

/// Rebuilds a trial from its events. Acknowledgements and stops are fed to
/// a new [`TaskManager`]; the resulting log must match the recorded one.
pub fn replay_trial(graph: &AndOrGraph, events: &[SimEvent]) -> Result<Replay, SimError> {
    let entries: Vec<&LogEntry> = events
        .iter()
        .filter_map(|e| match e {
            SimEvent::Manager(entry) => Some(entry),
            _ => None,
        })
        .collect();
    let mut timed_out = None;
    for e in events {
        if let SimEvent::Timeout { seq, .. } = e {
            timed_out = Some(*seq);
        }
    }

    // time at which the manager answered the input at index i
    let answered_at = |i: usize, fallback: Micros| {
        entries[i + 1..]
            .iter()
            .find_map(|e| match e {
                LogEntry::Suggest(s) => Some(Some(s.issued_at)),
                LogEntry::Done { at } | LogEntry::Failed { at, .. } => Some(Some(*at)),
                LogEntry::Ack(_) | LogEntry::Stop { .. } => Some(None),
                _ => None,
            })
            .flatten()
            .unwrap_or(fallback)
    };

    let (mut mgr, _) = TaskManager::start(graph.clone(), Micros::ZERO)?;
    let mut m = Metrics::default();
    let mut issued: Option<(AgentKind, Micros)> = None;
    let mut skip_ack = false;
    for (i, entry) in entries.iter().enumerate() {
        match entry {
            LogEntry::Suggest(s) => issued = Some((s.agent, s.issued_at)),
            LogEntry::Stop { at, .. } => {
                let (_, from) = issued
                    .take()
                    .ok_or_else(|| SimError::Replay("stop without suggestion".into()))?;
                m.t_r += at.saturating_sub(from);
                m.t_c = *at;
                // the next entry is the failure ack the stop produced
                mgr.on_intervention(*at, answered_at(i + 1, *at))?;
                skip_ack = true;
            }
            LogEntry::Ack(ack) => {
                if std::mem::take(&mut skip_ack) {
                    continue;
                }
                let (agent, from) = issued
                    .take()
                    .ok_or_else(|| SimError::Replay("ack without suggestion".into()))?;
                let span = ack.received_at.saturating_sub(from);
                if agent == AgentKind::Robot {
                    m.t_r += span;
                } else {
                    m.t_h += span;
                }
                m.t_c = ack.received_at;
                mgr.on_ack(ack.clone(), answered_at(i, ack.received_at))?;
            }
            _ => {}
        }
    }
    m.t_m = mgr.timing_report().total;
    let failure = match timed_out {
        Some(seq) => Some(TrialFailure::Timeout { seq }),
        None => mgr.failure().cloned().map(TrialFailure::from),
    };
    Ok(Replay {
        metrics: m,
        failure,
        manager_log: mgr.log().to_vec(),
    })
}
