use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use paperdesk_testkit::{corpus, DEMO_ID};
use serde_json::Value;

const CONFIG: &str = r#"
data_dir = "data"
tokens_file = "tokens.txt"

[agent]
trace_dir = "trace"

[sync]
manifest = "fixtures/manifest.jsonl"
scholarly_fixture = "fixtures/external/scholarly.json"
social_fixture = "fixtures/external/social.json"
"#;

fn paperdesk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paperdesk"))
        .args(args)
        .current_dir(dir)
        .env_remove("PAPERDESK_ENDPOINT")
        .env_remove("PAPERDESK_TOKEN")
        .env_remove("PAPERDESK_CONFIG")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = paperdesk(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(s: &str) -> Value {
    serde_json::from_str(s.trim()).unwrap()
}

/// A data directory holding the ingested fixture corpus and the demo record.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    corpus().write_to(&dir.path().join("fixtures")).unwrap();
    std::fs::write(dir.path().join("paperdesk.toml"), CONFIG).unwrap();
    std::fs::write(dir.path().join("tokens.txt"), "t0ken ci\n").unwrap();
    let report = json(&ok(dir.path(), &["ingest", "fixtures/manifest.jsonl"]));
    assert_eq!(report["failed"], 0);
    assert_eq!(report["new"], corpus().entries().len());
    let demo = format!("fixtures/records/arxiv/{DEMO_ID}.json");
    assert_eq!(json(&ok(dir.path(), &["import", &demo]))["inserted"], 1);
    dir
}

struct Server(Child, String);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn serve(dir: &Path) -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_paperdesk"))
        .args(["serve", "--addr", "127.0.0.1:0"])
        .current_dir(dir)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let url = json(&line)["listening"].as_str().unwrap().to_string();
    Server(child, url)
}

#[test]
fn get_prints_the_head_view() {
    let dir = workspace();
    let head = json(&ok(dir.path(), &["get", DEMO_ID, "--view", "head"]));
    assert_eq!(head["status"], "ok");
    assert_eq!(head["data"]["citations"], 63);
    assert_eq!(head["data"]["sections"][0]["name"], "1. Introduction");

    let section = json(&ok(
        dir.path(),
        &["get", DEMO_ID, "--view", "section", "--section", "0"],
    ));
    assert!(
        section["data"]["body"]
            .as_str()
            .is_some_and(|c| !c.is_empty()),
        "{section}"
    );
}

#[test]
fn failures_are_json_on_stderr() {
    let dir = workspace();
    let cases: [(&[&str], &str, i32); 5] = [
        (&["get", "2499.99999", "--view", "head"], "UnknownPaper", 1),
        (&["get", DEMO_ID, "--view", "bogus"], "InvalidView", 1),
        (
            &["get", "PMC1000001", "--view", "preview"],
            "UnsupportedView",
            1,
        ),
        (&["search", "memory", "--mode", "fuzzy"], "InvalidQuery", 1),
        (&["search"], "Usage", 2),
    ];
    for (args, code, exit) in cases {
        let out = paperdesk(dir.path(), args);
        assert_eq!(out.status.code(), Some(exit), "{args:?}");
        assert!(out.stdout.is_empty());
        let err = json(&String::from_utf8_lossy(&out.stderr));
        assert_eq!(err["error"]["code"], code, "{args:?}: {err}");
        assert!(err["error"]["message"].is_string());
    }
    let usage = json(&String::from_utf8_lossy(
        &paperdesk(dir.path(), &["search"]).stderr,
    ));
    assert!(usage["error"]["message"].as_str().unwrap().contains("<Q>"));
}

#[test]
fn local_and_served_output_agree() {
    let dir = workspace();
    let server = serve(dir.path());
    let q = "How many citations does the MemoRAG global memory paper have?";
    let commands: [&[&str]; 4] = [
        &["get", DEMO_ID, "--view", "brief"],
        &["search", "memory", "--mode", "hybrid"],
        &["agent", q, "--budget", "2000", "--seed", "4"],
        &[
            "find",
            "long context retrieval with global memory",
            "--categories",
            "cs.CL",
            "--phrase",
            "global memory",
        ],
    ];
    for args in commands {
        let local = ok(dir.path(), args);
        let mut remote_args = vec!["--endpoint", &server.1, "--token", "t0ken"];
        remote_args.extend_from_slice(args);
        assert_eq!(ok(dir.path(), &remote_args), local, "{args:?}");
    }

    let stats = json(&ok(
        dir.path(),
        &[
            "--endpoint",
            &server.1,
            "--token",
            "t0ken",
            "stats",
            "--days",
            "1",
        ],
    ));
    // The stats call is settled after its own reply is built.
    assert_eq!(stats["data"]["total"], 4, "{stats}");
    let out = paperdesk(
        dir.path(),
        &["--endpoint", &server.1, "--token", "wrong", "stats"],
    );
    assert_eq!(
        json(&String::from_utf8_lossy(&out.stderr))["error"]["code"],
        "Unauthorized"
    );
}

#[test]
fn agent_answers_and_its_trace_replays() {
    let dir = workspace();
    let task = &corpus().research_tasks[0];
    let out = json(&ok(
        dir.path(),
        &["agent", &task.question, "--budget", "4000"],
    ));
    let data = &out["data"];
    assert_eq!(data["status"], "answered");
    assert!(data["answer"].as_str().unwrap().contains(&task.expected));
    assert!(data["cost"]["spent_tokens"].as_u64().unwrap() <= 4000);
    let trace = format!("trace/{}.jsonl", data["run_id"].as_str().unwrap());
    let report = json(&ok(dir.path(), &["replay", &trace]));
    assert_eq!(report["faithful"], true);
}

#[test]
fn sync_twice_is_a_no_op() {
    let dir = workspace();
    let first = json(&ok(dir.path(), &["sync"]));
    assert_eq!(first["failed"], 0);
    // Everything was already ingested, so nothing is rebuilt.
    assert_eq!(first["new"], 0);
    assert_eq!(first["updated"], 0);
    let second = json(&ok(dir.path(), &["sync"]));
    assert_eq!(
        (
            second["new"].as_u64(),
            second["updated"].as_u64(),
            second["unchanged"].as_u64()
        ),
        (Some(0), Some(0), Some(0))
    );
}
