use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use verios_core::evaluator::parse_report;
use verios_core::ScenarioType;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/bench/dataset.json")
}

fn verios(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_verios"))
        .args(args)
        .env_remove("VERIOS_API_BASE")
        .env_remove("VERIOS_MODEL")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture_records() -> Vec<Value> {
    serde_json::from_str(&std::fs::read_to_string(fixture()).unwrap()).unwrap()
}

fn write_records(dir: &Path, records: &[Value]) -> String {
    let path = dir.join("dataset.json");
    std::fs::write(&path, serde_json::to_string_pretty(records).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn validate_reports_and_exits() {
    let ds = fixture();
    let ds = ds.to_str().unwrap();
    let ok = verios(&["validate", "--dataset", ds]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert_eq!(stdout(&ok).trim(), "ok: 15 instances (assets checked)");

    let dir = tempfile::tempdir().unwrap();
    let mut records = fixture_records();
    let copied = write_records(dir.path(), &records);
    let missing = verios(&["validate", "--dataset", &copied]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(stdout(&missing).lines().count(), 15);
    assert!(stdout(&missing).contains("field `screenshot`"));
    assert_eq!(verios(&["validate", "--dataset", &copied, "--no-assets"]).status.code(), Some(0));

    records[0]["query"] = "Why?".into();
    records[3]["ground_truth_action"] = "CLICK[1,2".into();
    let broken = write_records(dir.path(), &records);
    let out = verios(&["validate", "--dataset", &broken, "--no-assets"]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("m-settings-wifi") && text.contains("m-popup-update"), "{text}");
    assert!(stderr(&out).contains("2 schema violation(s)"));

    std::fs::write(dir.path().join("dataset.json"), "{ not json").unwrap();
    assert_eq!(verios(&["validate", "--dataset", &broken]).status.code(), Some(1));
    let gone = dir.path().join("absent.json");
    let out = verios(&["validate", "--dataset", gone.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not found"));
}

#[test]
fn stats_in_both_forms() {
    let ds = fixture();
    let out = verios(&["stats", "--dataset", ds.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("instances: 15"));
    assert!(text.contains("untrustworthy:normal = 8:7"), "{text}");

    let out = verios(&["stats", "--dataset", ds.to_str().unwrap(), "--json"]);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["total"], 15);
    assert_eq!(v["splits"]["test"], 7);
    assert_eq!(v["scenarios"]["normal"], 7);
}

#[test]
fn prep_writes_training_files() {
    let ds = fixture();
    let ds = ds.to_str().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("train.jsonl");
    let out = verios(&["prep", "--dataset", ds, "--arrangement", "interleaved", "--epochs", "2", "--seed", "5", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(line_count(&out_path), 32);
    assert!(stdout(&out).starts_with("wrote 32 records (interleaved, 2 epoch(s), seed 5)"));
    let first: Value = serde_json::from_str(std::fs::read_to_string(&out_path).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["messages"].as_array().unwrap().len(), 3);

    let filtered = dir.path().join("filtered.jsonl");
    let continuation = dir.path().join("continuation.jsonl");
    let kept = dir.path().join("kept.json");
    let out = verios(&[
        "prep", "--dataset", ds, "--arrangement", "phased", "--epochs", "2", "--out", filtered.to_str().unwrap(),
        "--exclude-scenario", "sensitive_action", "--scope", "all",
        "--continuation-out", continuation.to_str().unwrap(), "--dataset-out", kept.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(line_count(&filtered), 28);
    assert_eq!(line_count(&continuation), 4);
    let kept = verios_core::dataset::load_dataset(&kept, false).unwrap();
    assert_eq!(kept.len(), 13);
    assert!(kept.iter().all(|i| i.scenario != ScenarioType::SensitiveAction));

    for bad in [
        vec!["prep", "--dataset", ds, "--arrangement", "sideways", "--out", "x.jsonl"],
        vec!["prep", "--dataset", ds, "--out", "x.jsonl", "--continuation-out", "y.jsonl"],
        vec!["prep", "--dataset", ds, "--out", "x.jsonl", "--exclude-scenario", "boredom"],
    ] {
        assert_eq!(verios(&bad).status.code(), Some(2), "{bad:?}");
    }
    let out = verios(&["prep", "--dataset", ds, "--epochs", "0", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("epochs"));
}

#[test]
fn eval_oracle_reports() {
    let ds = fixture();
    let ds = ds.to_str().unwrap();
    let out = verios(&["eval", "--dataset", ds, "--split", "test", "--backend", "oracle", "--mode", "query", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "| | MC | IM | EA | SA | NS | Total | SJA |");
    assert_eq!(lines[2], "| Rate (%) | 100.00 | 100.00 | 100.00 | 100.00 | 100.00 | 100.00 | 100.00 |");
    assert_eq!(lines[3], "| Correct/Total | 1/1 | 1/1 | 1/1 | 1/1 | 3/3 | 7/7 | 7/7 |");
    assert!(text.contains("mode: query_driven; seed: 4"));

    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let outcomes = dir.path().join("outcomes.jsonl");
    let out = verios(&[
        "eval", "--dataset", ds, "--mode", "autonomous", "--report", "machine",
        "--out", report.to_str().unwrap(), "--outcomes", outcomes.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
    let r = parse_report(&std::fs::read_to_string(&report).unwrap()).unwrap();
    // The oracle still asks; autonomous scoring fails every such step.
    assert_eq!((r.total.correct, r.total.total), (3, 7));
    assert_eq!(r.class(ScenarioType::Normal).correct, 3);
    assert_eq!(line_count(&outcomes), 7);

    let errors = dir.path().join("errors.json");
    std::fs::write(&errors, r#"{"misjudge": {"information_missing": {"normal": 1.0}}}"#).unwrap();
    let out = verios(&["eval", "--dataset", ds, "--split", "all", "--errors", errors.to_str().unwrap(), "--report", "machine"]);
    let r = parse_report(&stdout(&out)).unwrap();
    assert_eq!((r.sja.correct, r.sja.total), (13, 15));

    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"kind": "oracle", "never_ask": true, "mode": "autonomous"}"#).unwrap();
    let out = verios(&["eval", "--dataset", ds, "--backend-config", spec.to_str().unwrap(), "--report", "machine"]);
    let r = parse_report(&stdout(&out)).unwrap();
    assert_eq!((r.total.correct, r.asked), (7, 0));
    assert_eq!(r.mode.label(), "autonomous");
}

#[test]
fn eval_remote_failures_do_not_abort() {
    let dead = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        format!("http://{}", l.local_addr().unwrap())
    };
    let ds = fixture();
    let ds = ds.to_str().unwrap();
    let out = verios(&["eval", "--dataset", ds, "--backend", "remote", "--base-url", &dead, "--model", "m", "--report", "machine"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = parse_report(&stdout(&out)).unwrap();
    assert_eq!((r.total.correct, r.total.total, r.backend_errors), (0, 7, 7));

    let out = verios(&["eval", "--dataset", ds, "--backend", "remote"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("VERIOS_API_BASE"));
    let out = verios(&["eval", "--dataset", ds, "--backend", "dual", "--base-url", &dead]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("model"));
    let out = verios(&["eval", "--dataset", ds, "--backend", "dual", "--base-url", &dead, "--model", "a", "--scenario-model", "b", "--report", "machine"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(verios(&["eval", "--dataset", ds, "--mode", "sideways"]).status.code(), Some(2));
}

fn http(addr: &str, request: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    stream.write_all(request.as_bytes()).unwrap();
    let mut text = String::new();
    stream.read_to_string(&mut text).unwrap();
    let status = text.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = text.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}

#[test]
fn serve_answers_over_loopback() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_verios"))
        .args(["serve", "--dataset", fixture().to_str().unwrap(), "--port", "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut first).unwrap();
    let addr = first.trim().strip_prefix("listening on http://").expect("listening line").to_string();
    assert!(addr.starts_with("127.0.0.1:"));

    let body = r#"{"instance":"w-captcha"}"#;
    let (status, text) = http(
        &addr,
        &format!("POST /sessions HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len()),
    );
    assert_eq!(status, 201, "{text}");
    let view: Value = serde_json::from_str(&text).unwrap();
    let id = view["id"].as_str().unwrap();
    let (status, text) = http(&addr, &format!("POST /sessions/{id}/step HTTP/1.1\r\nHost: x\r\nContent-Length: 0\r\nConnection: close\r\n\r\n"));
    assert_eq!(status, 200);
    let view: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(view["pending_query"], "A CAPTCHA appeared. Can you solve it for me?");
    let (status, _) = http(&addr, "GET /sessions/0000 HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    assert_eq!(status, 404);
    child.kill().unwrap();
    child.wait().unwrap();

    let out = verios(&["serve", "--dataset", fixture().to_str().unwrap(), "--backend", "remote", "--port", "0"]);
    assert_eq!(out.status.code(), Some(1));
}
