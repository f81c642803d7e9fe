use super::*;
use crate::graph::AndOrGraph;
use crate::model::{default_palletization, ActionSpec, ArcSpec, GraphSpec, NodeSpec};

fn pallet(k: usize) -> AndOrGraph {
    AndOrGraph::load(&default_palletization(k).unwrap()).unwrap()
}

fn t(secs: u64) -> Micros {
    Micros::from_secs(secs)
}

/// Acks the pending suggestion successfully at `at`, with the next
/// suggestion ready at `at + latency`.
fn comply(mgr: &mut TaskManager, at: Micros, latency: Micros) -> Step {
    let s = mgr.pending().unwrap().clone();
    mgr.on_ack(Ack::success(&s, at), at + latency).unwrap().0
}

fn expect_suggestion(step: Step) -> Suggestion {
    match step {
        Step::Suggest(s) => s,
        other => panic!("expected a suggestion, got {other:?}"),
    }
}

/// Drives compliant acks until the pending suggestion is `action` on `arc`.
fn run_until(mgr: &mut TaskManager, arc: &str, action: &str) {
    while {
        let p = mgr.pending().unwrap();
        !(p.arc == arc && p.action == action)
    } {
        comply(mgr, Micros::ZERO, Micros::ZERO);
    }
}

#[test]
fn start_suggests_first_human_action() {
    let (mgr, first) = TaskManager::start(pallet(15), Micros::ZERO).unwrap();
    let first = first.unwrap();
    assert_eq!(first.seq, 1);
    assert_eq!(first.arc, "h_1");
    assert_eq!(first.action, "inspect");
    assert_eq!(first.agent, AgentKind::Human);
    assert_eq!(first.binding, Binding::Suggested);
    assert_eq!(mgr.phase(), Phase::Running);
    assert_eq!(mgr.current_path().unwrap().cost(), 15.0);
}

#[test]
fn start_on_solved_graph_is_done() {
    let spec = GraphSpec {
        name: "solved".into(),
        nodes: vec![NodeSpec {
            name: "r".into(),
            weight: 0.0,
            is_root: true,
            solved: true,
        }],
        arcs: vec![],
    };
    let (mgr, first) = TaskManager::start(AndOrGraph::load(&spec).unwrap(), Micros::ZERO).unwrap();
    assert!(first.is_none());
    assert_eq!(mgr.phase(), Phase::Done);
}

#[test]
fn start_without_feasible_arcs_fails() {
    let mut spec = default_palletization(2).unwrap();
    spec.nodes[0].solved = false;
    let err = TaskManager::start(AndOrGraph::load(&spec).unwrap(), Micros::ZERO).unwrap_err();
    assert_eq!(err, ManagerError::NoViablePath);
}

#[test]
fn compliant_run_takes_105_acks() {
    let (mut mgr, _) = TaskManager::start(pallet(15), Micros::ZERO).unwrap();
    let mut acks = 0;
    loop {
        acks += 1;
        match comply(&mut mgr, Micros::ZERO, Micros::ZERO) {
            Step::Suggest(s) => assert!(!s.arc.starts_with("hw")),
            Step::Done => break,
            Step::Failed(r) => panic!("failed: {r}"),
        }
    }
    assert_eq!(acks, 105);
    assert_eq!(mgr.phase(), Phase::Done);
    assert!(mgr.graph().is_solved());
    assert_eq!(mgr.completed_arcs().len(), 15);
    assert_eq!(mgr.timing_report().total, Micros::ZERO);
}

#[test]
fn robot_failure_switches_to_intervention_arc() {
    let (mut mgr, _) = TaskManager::start(pallet(15), Micros::ZERO).unwrap();
    run_until(&mut mgr, "h_4", "approach-goal");
    let s = mgr.pending().unwrap().clone();
    let (step, transition) = mgr.on_ack(Ack::failure(&s, t(10)), t(10)).unwrap();
    let next = expect_suggestion(step);
    assert_eq!(mgr.phase(), Phase::Intervention);
    assert_eq!(next.arc, "hw_4");
    assert_eq!(next.action, "handover");
    assert_eq!(next.binding, Binding::Coordinated);
    assert_eq!(
        transition,
        Transition::Switched {
            abandoned: "h_4".into(),
            replacement: "hw_4".into(),
            carried: 4
        }
    );
    let g = mgr.graph();
    let hw4 = g.arc(g.arc_id("hw_4").unwrap());
    let finished: Vec<&str> = hw4
        .actions
        .iter()
        .filter(|a| a.finished)
        .map(|a| a.name.as_str())
        .collect();
    assert_eq!(
        finished,
        ["inspect", "deliver-part", "approach-part", "grasp"]
    );
    assert!(g.arc(g.arc_id("h_4").unwrap()).suppressed);

    // acks naming the abandoned arc are rejected without touching state
    let before = mgr.graph().dump();
    let bogus = Ack {
        seq: next.seq,
        arc: Some("h_4".into()),
        action: "ungrasp".into(),
        outcome: Outcome::Success,
        performed_by: AgentKind::Human,
        received_at: t(11),
    };
    assert_eq!(
        mgr.on_ack(bogus, t(11)).unwrap_err(),
        ManagerError::InfeasibleAction {
            action: "ungrasp".into()
        }
    );
    assert_eq!(mgr.graph().dump(), before);

    // handover, palletize, start-pose complete the replacement arc
    let mut step = comply(&mut mgr, t(12), Micros::ZERO);
    assert_eq!(expect_suggestion(step.clone()).action, "palletize");
    step = comply(&mut mgr, t(13), Micros::ZERO);
    assert_eq!(expect_suggestion(step).action, "start-pose");
    let step = comply(&mut mgr, t(14), Micros::ZERO);
    let s = expect_suggestion(step);
    assert_eq!((s.arc.as_str(), s.action.as_str()), ("h_5", "inspect"));
    assert_eq!(mgr.phase(), Phase::Running);
}

#[test]
fn intervention_on_robot_transport() {
    let (mut mgr, _) = TaskManager::start(pallet(15), Micros::ZERO).unwrap();
    run_until(&mut mgr, "h_9", "approach-goal");
    let (step, _) = mgr.on_intervention(t(5), t(5)).unwrap();
    let s = expect_suggestion(step);
    assert_eq!((s.arc.as_str(), s.action.as_str()), ("hw_9", "handover"));
    assert_eq!(mgr.interventions(), 1);
    assert_eq!(
        mgr.on_intervention(t(6), t(6)).unwrap_err(),
        ManagerError::NoRobotActionInFlight
    );
}

#[test]
fn intervention_needs_robot_action_in_flight() {
    let (mut mgr, _) = TaskManager::start(pallet(3), Micros::ZERO).unwrap();
    assert_eq!(
        mgr.on_intervention(t(1), t(1)).unwrap_err(),
        ManagerError::NoRobotActionInFlight
    );
}

#[test]
fn failed_intervention_arc_ends_the_run() {
    let (mut mgr, _) = TaskManager::start(pallet(2), Micros::ZERO).unwrap();
    run_until(&mut mgr, "h_1", "grasp");
    let s = mgr.pending().unwrap().clone();
    let next = expect_suggestion(mgr.on_ack(Ack::failure(&s, t(1)), t(1)).unwrap().0);
    // only three actions carry over; the robot retries the grasp on hw_1
    assert_eq!((next.arc.as_str(), next.action.as_str()), ("hw_1", "grasp"));
    let (step, _) = mgr.on_ack(Ack::failure(&next, t(2)), t(2)).unwrap();
    assert_eq!(
        step,
        Step::Failed(FailureReason::RobotActionFailure {
            arc: "hw_1".into(),
            action: "grasp".into()
        })
    );
    assert_eq!(mgr.phase(), Phase::Failed);
}

#[test]
fn human_failure_fails_the_run() {
    let (mut mgr, first) = TaskManager::start(pallet(2), Micros::ZERO).unwrap();
    let first = first.unwrap();
    let (step, transition) = mgr.on_ack(Ack::failure(&first, t(120)), t(120)).unwrap();
    assert!(matches!(
        step,
        Step::Failed(FailureReason::HumanActionFailure { .. })
    ));
    assert_eq!(transition, Transition::Aborted);
    assert!(matches!(
        mgr.on_ack(Ack::success(&first, t(121)), t(121)),
        Err(ManagerError::ProtocolViolation(_))
    ));
}

#[test]
fn stale_and_foreign_acks_are_rejected() {
    let (mut mgr, first) = TaskManager::start(pallet(2), Micros::ZERO).unwrap();
    let first = first.unwrap();
    let mut stale = Ack::success(&first, t(1));
    stale.seq = 7;
    assert_eq!(
        mgr.on_ack(stale, t(1)).unwrap_err(),
        ManagerError::StaleSeq {
            expected: 1,
            got: 7
        }
    );
    let mut robot = Ack::success(&first, t(1));
    robot.performed_by = AgentKind::Robot;
    assert!(matches!(
        mgr.on_ack(robot, t(1)),
        Err(ManagerError::ProtocolViolation(_))
    ));
    // a second ack for an already answered suggestion is stale
    comply(&mut mgr, t(1), Micros::ZERO);
    assert!(matches!(
        mgr.on_ack(Ack::success(&first, t(2)), t(2)),
        Err(ManagerError::StaleSeq { .. })
    ));
}

#[test]
fn bindings_follow_agents() {
    let (mut mgr, _) = TaskManager::start(pallet(2), Micros::ZERO).unwrap();
    run_until(&mut mgr, "h_1", "approach-goal");
    mgr.on_intervention(t(1), t(1)).unwrap();
    while let Some(s) = mgr.pending().cloned() {
        assert_eq!(s.binding, Binding::for_agent(s.agent));
        comply(&mut mgr, t(2), Micros::ZERO);
    }
    assert_eq!(mgr.phase(), Phase::Done);
    let suggestions: Vec<&Suggestion> = mgr
        .log()
        .iter()
        .filter_map(|e| match e {
            LogEntry::Suggest(s) => Some(s),
            _ => None,
        })
        .collect();
    assert!(suggestions
        .iter()
        .any(|s| s.action == "handover" && s.binding == Binding::Coordinated));
    assert!(suggestions
        .iter()
        .all(|s| (s.agent == AgentKind::Robot) == (s.binding == Binding::Imposed)));
}

#[test]
fn timing_zero_latency_is_zero() {
    let (mut mgr, _) = TaskManager::start(pallet(3), Micros::ZERO).unwrap();
    let mut now = Micros::ZERO;
    while mgr.pending().is_some() {
        now += t(3);
        comply(&mut mgr, now, Micros::ZERO);
    }
    assert_eq!(mgr.timing_report().total, Micros::ZERO);
    assert_eq!(mgr.timing_report().gaps.len(), 20);
}

#[test]
fn timing_constant_latency_average() {
    let (mut mgr, _) = TaskManager::start(pallet(15), Micros::ZERO).unwrap();
    let latency = Micros::from_secs_f64(0.086);
    let mut now = Micros::ZERO;
    for _ in 0..29 {
        now += t(4);
        comply(&mut mgr, now, latency);
        now += latency;
    }
    let report = mgr.timing_report();
    assert_eq!(report.gaps.len(), 29);
    assert_eq!(report.total, Micros(29 * 86_000));
    assert!((report.total.as_secs_f64() - 2.49).abs() < 0.01);
    assert_eq!(report.total, report.gaps.iter().map(TimingGap::span).sum());
}

#[test]
fn timing_single_suggestion_is_zero() {
    let spec = GraphSpec {
        name: "one".into(),
        nodes: vec![
            NodeSpec {
                name: "goal".into(),
                weight: 0.0,
                is_root: true,
                solved: false,
            },
            NodeSpec {
                name: "start".into(),
                weight: 0.0,
                is_root: false,
                solved: true,
            },
        ],
        arcs: vec![ArcSpec {
            name: "only".into(),
            parent: "goal".into(),
            children: vec!["start".into()],
            weight: 1.0,
            actions: vec![ActionSpec::new("do-it", AgentKind::Human)],
        }],
    };
    let (mut mgr, _) = TaskManager::start(AndOrGraph::load(&spec).unwrap(), Micros::ZERO).unwrap();
    assert_eq!(comply(&mut mgr, t(3), t(1)), Step::Done);
    assert_eq!(mgr.timing_report().total, Micros::ZERO);
    assert!(mgr.timing_report().gaps.is_empty());
}

/// Two ways to reach the goal; the human can pick the pricier one.
fn fork() -> GraphSpec {
    let node = |name: &str, root, solved| NodeSpec {
        name: name.into(),
        weight: 0.0,
        is_root: root,
        solved,
    };
    let arc = |name: &str, weight, actions: Vec<ActionSpec>| ArcSpec {
        name: name.into(),
        parent: "goal".into(),
        children: vec!["start".into()],
        weight,
        actions,
    };
    use AgentKind::*;
    GraphSpec {
        name: "fork".into(),
        nodes: vec![node("goal", true, false), node("start", false, true)],
        arcs: vec![
            arc(
                "cheap",
                1.0,
                vec![
                    ActionSpec::new("fetch", Human),
                    ActionSpec::new("place", Robot),
                ],
            ),
            arc(
                "manual",
                3.0,
                vec![
                    ActionSpec::new("carry", Human),
                    ActionSpec::new("stack", Human),
                ],
            ),
        ],
    }
}

#[test]
fn human_deviation_is_followed() {
    let (mut mgr, first) =
        TaskManager::start(AndOrGraph::load(&fork()).unwrap(), Micros::ZERO).unwrap();
    let first = first.unwrap();
    assert_eq!(first.action, "fetch");
    let ack = Ack {
        seq: first.seq,
        arc: None,
        action: "carry".into(),
        outcome: Outcome::Success,
        performed_by: AgentKind::Human,
        received_at: t(2),
    };
    let (step, transition) = mgr.on_ack(ack, t(2)).unwrap();
    assert_eq!(
        transition,
        Transition::Adapted {
            arc: "manual".into(),
            completed: false
        }
    );
    let next = expect_suggestion(step);
    assert_eq!(
        (next.arc.as_str(), next.action.as_str()),
        ("manual", "stack")
    );
    assert!(mgr
        .current_path()
        .unwrap()
        .contains_arc(mgr.graph().arc_id("manual").unwrap()));
    assert_eq!(mgr.deviations(), 1);
    assert_eq!(comply(&mut mgr, t(3), Micros::ZERO), Step::Done);
    assert_eq!(mgr.completed_arcs(), ["manual"]);
}

#[test]
fn unknown_deviation_is_infeasible() {
    let (mut mgr, first) =
        TaskManager::start(AndOrGraph::load(&fork()).unwrap(), Micros::ZERO).unwrap();
    let first = first.unwrap();
    let ack = Ack {
        seq: first.seq,
        arc: None,
        action: "stack".into(),
        outcome: Outcome::Success,
        performed_by: AgentKind::Human,
        received_at: t(2),
    };
    assert_eq!(
        mgr.on_ack(ack, t(2)).unwrap_err(),
        ManagerError::InfeasibleAction {
            action: "stack".into()
        }
    );
    assert_eq!(mgr.pending(), Some(&first));
}

#[test]
fn log_lines_are_stable() {
    let (mut mgr, _) = TaskManager::start(pallet(1), Micros::ZERO).unwrap();
    comply(&mut mgr, t(2), Micros(500));
    let lines: Vec<String> = mgr.log().iter().map(ToString::to_string).collect();
    assert_eq!(
        lines,
        [
            "t=0.000000 suggest seq=1 arc=h_1 action=inspect agent=human binding=suggested",
            "t=2.000000 ack seq=1 arc=h_1 action=inspect outcome=success by=human",
            "t=2.000500 suggest seq=2 arc=h_1 action=deliver-part agent=human binding=suggested",
        ]
    );
}
