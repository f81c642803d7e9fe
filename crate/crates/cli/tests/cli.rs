use std::path::PathBuf;
use std::process::{Command, Output};

fn coplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coplan"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn enumerate_lists_paths_cheapest_first() {
    let o = coplan(&["enumerate", "--palletize", "2"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "0 2 h_1,h_2\n1 5 h_1,hw_2\n2 5 hw_1,h_2\n3 8 hw_1,hw_2\n"
    );
    let o = coplan(&["enumerate", "--palletize", "10"]);
    assert_eq!(stdout(&o).lines().count(), 1024);
}

#[test]
fn optimal_prints_the_action_sequence() {
    let o = coplan(&["optimal", "--palletize", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("1 h_1"));
    assert_eq!(lines.next(), Some("  h_1 inspect human"));
    assert_eq!(lines.count(), 6);
    assert!(
        coplan(&["optimal", "--model", &fixture("models/small-assembly.json")])
            .status
            .success()
    );
}

#[test]
fn scenario_batch_matches_the_golden_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = coplan(&[
        "simulate",
        "--scenario",
        &fixture("batch-15.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let got = std::fs::read_to_string(&out).unwrap();
    let want = std::fs::read_to_string(fixture("batch-15.csv")).unwrap();
    assert_eq!(got, want);
    assert!(stdout(&o).starts_with("trials 10 successes 10 rate 1.000\n"));
}

#[test]
fn jsonl_output_and_json_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let o = coplan(&[
        "simulate",
        "--palletize",
        "3",
        "--trials",
        "4",
        "--seed",
        "9",
        "--policy",
        "intervene:1",
        "--json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["successes"], 4);
    assert_eq!(summary["timing"]["hw_count"], 3.0);
    let rows = std::fs::read_to_string(&out).unwrap();
    assert_eq!(rows.lines().count(), 4);
    for line in rows.lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(row["hw_count"], 3);
    }
}

#[test]
fn scripted_policy_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("s.json");
    std::fs::write(&script, r#"[{"round": 2, "do": "intervene"}]"#).unwrap();
    let policy = format!("script:{}", script.display());
    let o = coplan(&[
        "simulate",
        "--palletize",
        "3",
        "--policy",
        &policy,
        "--json",
    ]);
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["timing"]["hw_count"], 1.0);
}

#[test]
fn exit_codes() {
    // every human turn exceeds the timeout
    let o = coplan(&[
        "simulate",
        "--palletize",
        "2",
        "--trials",
        "3",
        "--timeout",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("failed timeout 3"));

    for args in [
        &["simulate", "--palletize", "2", "--policy", "intervene:1.5"][..],
        &["simulate", "--palletize", "2", "--policy", "dance"],
        &["simulate", "--scenario", "/no/such/file.json"],
        &["simulate", "--palletize", "2", "--trials", "0"],
        &["optimal", "--model", "/no/such/model.json"],
    ] {
        assert_eq!(coplan(args).status.code(), Some(2), "{args:?}");
    }
}
