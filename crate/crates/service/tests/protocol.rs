use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use futures::{SinkExt, StreamExt};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

use coplan_core::graph::AndOrGraph;
use coplan_core::model::default_palletization;
use coplan_service::server::{router, serve, AppState, CreateSession, ModelRef, ServiceConfig};
use coplan_service::session::{JournalEntry, SessionCore};

type Ws =
    tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn start(config: ServiceConfig) -> (String, AppState) {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let state = AppState::new(config);
    tokio::spawn(serve(listener, state.clone()));
    (format!("127.0.0.1:{}", addr.port()), state)
}

async fn connect(addr: &str, id: &str) -> Ws {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/session/{id}/ws"))
        .await
        .unwrap();
    ws
}

async fn recv(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("frame within 10 s")
            .expect("open socket")
            .unwrap();
        if let Message::Text(t) = msg {
            assert!(!t.contains('\n'));
            return serde_json::from_str(&t).unwrap();
        }
    }
}

async fn send(ws: &mut Ws, frame: Value) {
    ws.send(Message::Text(frame.to_string().into()))
        .await
        .unwrap();
}

fn create(k: usize) -> CreateSession {
    CreateSession {
        model: ModelRef::Palletize(k),
        robot: None,
        timeout: None,
        time_scale: Some(0.001),
        seed: Some(7),
    }
}

/// Plays the human side: completes each human suggestion, confirms each
/// handover and stops the robot's `stop_at` motion once.
async fn play(ws: &mut Ws, id: &str, stop_at: Option<(&str, &str)>) -> (Value, Vec<u64>) {
    let mut seqs = Vec::new();
    let mut stopped = false;
    loop {
        let msg = recv(ws).await;
        seqs.push(msg["seq"].as_u64().unwrap());
        assert_eq!(msg["session"], id);
        match msg["kind"].as_str().unwrap() {
            "suggestion" => {
                let p = &msg["payload"];
                let seq = p["seq"].clone();
                match p["agent"].as_str().unwrap() {
                    "human" => {
                        let done = json!({"action": p["action"]});
                        send(
                            ws,
                            json!({"kind":"action_done","session":id,"seq":seq,"payload":done}),
                        )
                        .await;
                    }
                    "joint" => {
                        send(
                            ws,
                            json!({"kind":"handover_confirm","session":id,"seq":seq,"payload":{}}),
                        )
                        .await;
                    }
                    _ => {
                        if !stopped
                            && stop_at
                                == Some((p["arc"].as_str().unwrap(), p["action"].as_str().unwrap()))
                        {
                            stopped = true;
                            send(
                                ws,
                                json!({"kind":"intervene","session":id,"seq":seq,"payload":null}),
                            )
                            .await;
                        }
                    }
                }
            }
            "metrics" => return (msg["payload"].clone(), seqs),
            "state" => {}
            other => panic!("unexpected {other}: {msg}"),
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn headless_client_runs_a_session_with_one_intervention() {
    let dir = std::env::temp_dir().join(format!("coplan-proto-{}", std::process::id()));
    let (addr, state) = start(ServiceConfig {
        log_dir: Some(dir.clone()),
        ..ServiceConfig::default()
    })
    .await;
    let mut req = create(3);
    // long enough that the stop lands while the motion is running
    req.time_scale = Some(0.05);
    let (session, _) = state.create_session(&req).unwrap();
    let id = session.id().to_string();
    let mut ws = connect(&addr, &id).await;

    let greeting = recv(&mut ws).await;
    assert_eq!(greeting["kind"], "state");
    assert_eq!(greeting["payload"]["proto"], "coplan-proto/1");
    let first = greeting["payload"]["pending"].clone();
    assert_eq!(first["action"], "inspect");
    let done = json!({"action":"inspect"});
    send(
        &mut ws,
        json!({"kind":"action_done","session":id,"seq":first["seq"],"payload":done}),
    )
    .await;

    let (metrics, seqs) = play(&mut ws, &id, Some(("h_2", "approach-goal"))).await;
    assert_eq!(metrics["status"], "solved");
    assert!(seqs.windows(2).all(|w| w[0] < w[1]), "{seqs:?}");

    let core = session.core();
    let snap = core.snapshot();
    assert_eq!(snap.completed_arcs, vec!["h_1", "hw_2", "h_3"]);
    assert_eq!(snap.interventions, 1);
    let m = snap.metrics;
    assert!((m.t_c - (m.t_m + m.t_h + m.t_r)).abs() < 1e-5);

    let graph = AndOrGraph::load(&default_palletization(3).unwrap()).unwrap();
    let replayed = SessionCore::replay(id.clone(), graph, core.journal()).unwrap();
    assert_eq!(replayed.snapshot_json(), core.snapshot_json());

    // the journal on disk replays to the same state
    let text = std::fs::read_to_string(dir.join(format!("{id}.jsonl"))).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with(r#"{"create":"#));
    let entries: Vec<JournalEntry> = lines.map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(entries.as_slice(), core.journal());
    std::fs::remove_dir_all(&dir).ok();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bad_frames_get_targeted_errors() {
    let (addr, state) = start(ServiceConfig::default()).await;
    let (session, _) = state.create_session(&create(2)).unwrap();
    let id = session.id().to_string();
    let mut ws = connect(&addr, &id).await;
    let greeting = recv(&mut ws).await;
    let seq = greeting["payload"]["pending"]["seq"].as_u64().unwrap();

    let cases = [
        (
            json!({"kind":"dance","session":id,"seq":seq,"payload":{}}),
            "unknown_kind",
        ),
        (
            json!({"kind":"intervene","session":"nope","seq":seq,"payload":{}}),
            "wrong_session",
        ),
        (
            json!({"kind":"intervene","session":id,"seq":seq + 3,"payload":{}}),
            "stale_seq",
        ),
        (
            json!({"kind":"intervene","session":id,"seq":seq,"payload":{}}),
            "invalid_transition",
        ),
        (
            json!({"kind":"action_done","session":id,"seq":seq,"payload":{"action":"palletize"}}),
            "invalid_transition",
        ),
        (
            json!({"kind":"action_done","session":id,"seq":seq}),
            "malformed",
        ),
    ];
    let mut last = greeting["seq"].as_u64().unwrap();
    for (frame, code) in cases {
        send(&mut ws, frame).await;
        let err = recv(&mut ws).await;
        assert_eq!(err["kind"], "error");
        assert_eq!(err["payload"]["code"], code, "{err}");
        assert!(err["seq"].as_u64().unwrap() > last);
        last = err["seq"].as_u64().unwrap();
    }
    ws.send(Message::Text("{".into())).await.unwrap();
    assert_eq!(recv(&mut ws).await["payload"]["code"], "malformed");
    assert!(session.core().journal().is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn sessions_are_independent() {
    let (addr, state) = start(ServiceConfig::default()).await;
    let (a, _) = state.create_session(&create(1)).unwrap();
    let (b, _) = state.create_session(&create(2)).unwrap();
    assert_ne!(a.id(), b.id());
    let mut wa = connect(&addr, a.id()).await;
    let mut wb = connect(&addr, b.id()).await;
    recv(&mut wa).await;
    recv(&mut wb).await;
    let first = a.core().pending().unwrap().seq;
    let done = json!({"action":"inspect"});
    send(
        &mut wa,
        json!({"kind":"action_done","session":a.id(),"seq":first,"payload":done}),
    )
    .await;
    let (ma, _) = play(&mut wa, a.id(), None).await;
    assert_eq!(ma["status"], "solved");
    assert_eq!(b.snapshot().journal_len, 0);
    assert_eq!(b.snapshot().pending.unwrap().action, "inspect");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn silent_human_times_out() {
    let (addr, state) = start(ServiceConfig::default()).await;
    let mut req = create(2);
    req.timeout = Some(0.2);
    let (session, _) = state.create_session(&req).unwrap();
    let mut ws = connect(&addr, session.id()).await;
    let mut kinds = Vec::new();
    let metrics = loop {
        let msg = recv(&mut ws).await;
        kinds.push(msg["kind"].as_str().unwrap().to_string());
        if msg["kind"] == "metrics" {
            break msg;
        }
    };
    assert_eq!(metrics["payload"]["status"], "failed");
    assert_eq!(metrics["payload"]["failure"]["kind"], "timeout");
    assert_eq!(kinds, vec!["state", "state", "metrics"]);
    assert_eq!(session.snapshot().status, "failed");
}

async fn call(app: axum::Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&body).unwrap())
}

fn post(body: Value) -> Request<Body> {
    Request::post("/session")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

#[tokio::test]
async fn http_routes() {
    let app = router(AppState::new(ServiceConfig::default()));
    let (status, health) = call(
        app.clone(),
        Request::get("/healthz").body(Body::empty()).unwrap(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        health,
        json!({"status":"ok","proto":"coplan-proto/1","sessions":0})
    );

    let (status, created) = call(app.clone(), post(json!({"model":{"palletize":2}}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["session"].as_str().unwrap();
    assert_eq!(created["ws"], format!("/session/{id}/ws"));
    assert_eq!(created["messages"][1]["kind"], "suggestion");

    let (status, snap) = call(
        app.clone(),
        Request::get(format!("/session/{id}"))
            .body(Body::empty())
            .unwrap(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(snap["feasible_arcs"], json!(["h_1", "hw_1"]));
    assert_eq!(snap["status"], "in_progress");

    let (status, _) = call(
        app.clone(),
        Request::get("/session/missing")
            .body(Body::empty())
            .unwrap(),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, err) = call(
        app.clone(),
        post(json!({"model":{"path":"/no/such/model.json"}})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "model_not_found");

    let inline =
        json!({"model":{"inline":{"version":"coplan-model/1","name":"x","nodes":[],"arcs":[]}}});
    let (status, err) = call(app.clone(), post(inline)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "model_invalid");

    let (status, err) = call(app, post(json!({"model":{"palletize":0}}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "model_invalid");
}
