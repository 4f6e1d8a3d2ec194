use std::path::Path;
use std::process::{Command, Output};

use clap::Parser;
use ior_cli::{run, serve_config, Cli, Outcome};
use serde_json::Value;

fn ior(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ior"))
        .args(args)
        .env("IOR_DATA_DIR", dir)
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn json(output: &Output) -> Value {
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    serde_json::from_slice(&output.stdout).unwrap()
}

fn run_in_process(args: &[&str]) -> (Outcome, String) {
    let cli = Cli::try_parse_from(std::iter::once("ior").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    let outcome = run(cli, &mut out).unwrap();
    (outcome, String::from_utf8(out).unwrap())
}

#[test]
fn seed_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let first = json(&ior(dir.path(), &["--json", "seed"]));
    assert_eq!(first["already_seeded"], false);
    assert_eq!(first["enterprises"], 2);
    assert_eq!(first["stations"], 3);
    assert_eq!(first["violations"], serde_json::json!([]));
    let second = json(&ior(dir.path(), &["--json", "seed"]));
    assert_eq!(second["already_seeded"], true);
    assert_eq!(second["items"], first["items"]);
}

#[test]
fn bad_template_file_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let templates = dir.path().join("templates.json");
    std::fs::write(&templates, "{\n  \"templates\": [\n    { \"id\": oops }\n  ]\n}\n").unwrap();
    let out = ior(
        &dir.path().join("data"),
        &["seed", "--templates", templates.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains(&format!("{}:3:", templates.display())), "{stderr}");
}

#[test]
fn simulate_verify_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = json(&ior(dir.path(), &["--json", "simulate", "--days", "10"]));
    assert_eq!(report["days_closed"], 10);
    assert!(dir.path().join("traces/trace-events.jsonl").exists());

    let ledger = dir.path().join("ledger.jsonl");
    let ledger = ledger.to_str().unwrap();
    let verified = ior(dir.path(), &["verify", "--ledger", ledger]);
    assert!(verified.status.success());
    assert!(stdout(&verified).contains("pass"));

    let series = json(&ior(
        dir.path(),
        &[
            "--json",
            "report",
            "--level",
            "station",
            "--id",
            "S1",
            "--from",
            "2024-01-01",
            "--to",
            "2024-01-10",
        ],
    ));
    let points = series["points"].as_array().unwrap();
    assert_eq!(points.len(), 10);
    assert_eq!(points[9]["score"], report["scores"]["station_scores"]["S1"]);

    let table = ior(
        dir.path(),
        &[
            "report",
            "--level",
            "enterprise",
            "--id",
            "E1",
            "--from",
            "2024-01-01",
            "--to",
            "2024-01-03",
        ],
    );
    let text = stdout(&table);
    assert!(text.starts_with("date"), "{text}");
    assert_eq!(text.lines().count(), 5);

    let snapshot = dir.path().join("snapshots/2024-01-05.json");
    let mut value: Value = serde_json::from_str(&std::fs::read_to_string(&snapshot).unwrap()).unwrap();
    let s2 = value["station_scores"]["S2"].as_f64().unwrap();
    value["station_scores"]["S2"] = (s2 - 1.0).into();
    std::fs::write(&snapshot, value.to_string()).unwrap();
    let failed = ior(dir.path(), &["verify", "--ledger", ledger]);
    assert_eq!(failed.status.code(), Some(1));
    let text = stdout(&failed);
    assert!(text.contains("FAIL: 2024-01-05 station `S2`"), "{text}");
}

#[test]
fn close_day_twice_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    ior(dir.path(), &["seed"]);
    let first = ior(dir.path(), &["close-day", "--date", "2024-03-01"]);
    assert!(first.status.success());
    assert!(dir.path().join("snapshots/2024-03-01.json").exists());
    let again = ior(dir.path(), &["close-day", "--date", "2024-03-01"]);
    assert_eq!(again.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&again.stderr).contains("already closed"));
}

#[test]
fn report_rejects_an_unclosed_range() {
    let dir = tempfile::tempdir().unwrap();
    ior(dir.path(), &["seed"]);
    let out = ior(
        dir.path(),
        &[
            "report",
            "--level",
            "station",
            "--id",
            "S1",
            "--from",
            "2024-01-01",
            "--to",
            "2024-01-02",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no snapshot"));
}

#[test]
fn in_process_run_matches_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().to_str().unwrap();
    let (outcome, text) = run_in_process(&["simulate", "--data-dir", data, "--days", "3", "--seed", "7"]);
    assert_eq!(outcome, Outcome::Success);
    assert!(text.contains("3 days closed"), "{text}");

    let other = tempfile::tempdir().unwrap();
    ior(other.path(), &["simulate", "--days", "3", "--seed", "7"]);
    for file in [
        "ledger.jsonl",
        "graph.jsonl",
        "readings.jsonl",
        "snapshots/2024-01-03.json",
    ] {
        assert_eq!(
            std::fs::read(dir.path().join(file)).unwrap(),
            std::fs::read(other.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn serve_flags_override_the_environment() {
    let env = vec![
        ("IOR_DATA_DIR".to_string(), "/from/env".to_string()),
        ("IOR_LISTEN_ADDR".to_string(), "0.0.0.0:9000".to_string()),
    ];
    let config = serve_config(None, Some("/from/flag".into()), None, None, None, None, env).unwrap();
    assert_eq!(config.data_dir, Path::new("/from/flag"));
    assert_eq!(config.listen_addr, "0.0.0.0:9000");
}
