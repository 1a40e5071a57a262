mod common;

use std::fs;

use common::{judges, small_pool, Client};
use defgraph_harness::{Harness, HarnessOptions, ServerHandle};
use serde_json::{json, Value};

fn start(dir: &std::path::Path, judge_count: usize) -> (ServerHandle, Client) {
    let harness = Harness::open(HarnessOptions {
        pool: small_pool(3),
        judges: judges(judge_count),
        seed: 11,
        log: dir.join("log.jsonl"),
    })
    .unwrap();
    let server = ServerHandle::start(harness, "127.0.0.1:0").unwrap();
    let client = Client::new(server.base_url());
    (server, client)
}

fn answer_for(item: &Value) -> Value {
    json!({
        "query_id": item["query_id"],
        "answer": "intensifies",
        "helpfulness": "helpful",
        "aspects": ["mediator"],
    })
}

fn assert_error(reply: &(u16, Value), status: u16, code: &str) {
    assert_eq!(reply.0, status, "{}", reply.1);
    assert_eq!(reply.1["error"], code);
    assert!(reply.1["detail"].as_str().is_some_and(|d| !d.is_empty()));
}

#[test]
fn session_walkthrough() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, client) = start(dir.path(), 3);

    let (status, session) = client.post("/session", &json!({"judge_id": "judge-0"}));
    assert_eq!(status, 200);
    let sid = session["session_id"].as_str().unwrap().to_string();
    assert_eq!(session["total"], 10);
    assert_eq!(session["answered"], 0);

    let (_, first) = client.get(&format!("/session/{sid}/next"));
    assert_eq!((first["index"].as_u64(), first["total"].as_u64()), (Some(1), Some(10)));
    assert_eq!(first["done"], false);
    for key in ["premise", "hypothesis", "update", "query_id"] {
        assert!(first[key].is_string(), "missing {key}");
    }
    for key in ["contextualizer", "situation", "mediator", "hypothesis"] {
        assert!(first["chain"][key].is_string(), "missing chain.{key}");
    }
    let (_, again) = client.get(&format!("/session/{sid}/next"));
    assert_eq!(first, again, "next is idempotent");

    for i in 0..10 {
        let (_, item) = client.get(&format!("/session/{sid}/next"));
        assert_eq!(item["index"], i + 1);
        let (status, ack) = client.post(&format!("/session/{sid}/answer"), &answer_for(&item));
        assert_eq!(status, 200, "{ack}");
        assert_eq!(ack["answered"], i + 1);
    }
    let (_, done) = client.get(&format!("/session/{sid}/next"));
    assert_eq!(done["done"], true);
    assert_eq!(done["index"], 10);
    assert!(done.get("query_id").is_none());
}

#[test]
fn judge_facing_payloads_hide_gold_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, client) = start(dir.path(), 3);
    let (_, session) = client.post("/session", &json!({"judge_id": "judge-1"}));
    let sid = session["session_id"].as_str().unwrap();
    for _ in 0..10 {
        let (_, text) = client.get_text(&format!("/session/{sid}/next"));
        for forbidden in ["gold", "label", "prior", "source"] {
            assert!(!text.contains(forbidden), "`{forbidden}` leaked in {text}");
        }
        let item: Value = serde_json::from_str(&text).unwrap();
        let (_, ack_text) = client.post_text(&format!("/session/{sid}/answer"), &answer_for(&item).to_string());
        assert!(!ack_text.contains("gold"));
    }
}

#[test]
fn rejected_submissions_leave_the_log_alone() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, client) = start(dir.path(), 4);
    let (_, session) = client.post("/session", &json!({"judge_id": "judge-2"}));
    let sid = session["session_id"].as_str().unwrap();
    let log = dir.path().join("log.jsonl");

    let (_, item) = client.get(&format!("/session/{sid}/next"));
    let mut bad = answer_for(&item);
    bad["aspects"] = json!(["none", "mediator"]);
    assert_error(&client.post(&format!("/session/{sid}/answer"), &bad), 422, "invalid_judgment");
    assert_eq!(fs::read_to_string(&log).unwrap(), "");

    let ok = client.post(&format!("/session/{sid}/answer"), &answer_for(&item));
    assert_eq!(ok.0, 200);
    let after_one = fs::read_to_string(&log).unwrap();
    assert_eq!(after_one.lines().count(), 1);

    assert_error(
        &client.post(&format!("/session/{sid}/answer"), &answer_for(&item)),
        409,
        "duplicate_submission",
    );
    let mut skip = answer_for(&item);
    skip["query_id"] = json!("not-the-next-one");
    assert_error(&client.post(&format!("/session/{sid}/answer"), &skip), 409, "out_of_order");
    let mut wrong_judge = answer_for(&client.get(&format!("/session/{sid}/next")).1);
    wrong_judge["judge_id"] = json!("judge-0");
    assert_error(&client.post(&format!("/session/{sid}/answer"), &wrong_judge), 403, "judge_mismatch");
    assert_eq!(fs::read_to_string(&log).unwrap(), after_one);

    let (status, text) = client.post_text(&format!("/session/{sid}/answer"), "{not json");
    assert_error(&(status, serde_json::from_str(&text).unwrap()), 400, "bad_request");
    let mut extra = answer_for(&item);
    extra["gold_label"] = json!("intensifies");
    assert_error(&client.post(&format!("/session/{sid}/answer"), &extra), 400, "bad_request");
}

#[test]
fn unknown_ids() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, client) = start(dir.path(), 3);
    assert_error(&client.get("/session/nope/next"), 404, "unknown_session");
    assert_error(
        &client.post("/session/nope/answer", &json!({"query_id": "q", "answer": "attenuates", "helpfulness": "helpful"})),
        404,
        "unknown_session",
    );
    assert_error(&client.post("/session", &json!({"judge_id": "stranger"})), 404, "unknown_judge");
    assert_error(&client.get("/nowhere"), 404, "not_found");
}

#[test]
fn stats_start_empty_and_fill_in() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, client) = start(dir.path(), 3);
    let (status, stats) = client.get("/stats");
    assert_eq!(status, 200);
    assert_eq!(stats["queries_total"], 10);
    assert_eq!(stats["queries_complete"], 0);
    assert_eq!(stats["accuracy"], Value::Null);

    // With three judges every judge sees the pool in the same order, so one
    // answer from each completes the first query.
    for judge in ["judge-0", "judge-1", "judge-2"] {
        let (_, s) = client.post("/session", &json!({ "judge_id": judge }));
        let sid = s["session_id"].as_str().unwrap();
        let (_, item) = client.get(&format!("/session/{sid}/next"));
        assert_eq!(client.post(&format!("/session/{sid}/answer"), &answer_for(&item)).0, 200);
    }
    let (_, stats) = client.get("/stats");
    assert_eq!(stats["queries_complete"], 1);
    assert_eq!(stats["accuracy"]["overall"]["n"], 1);
    assert_eq!(stats["judgments"], 3);
}

#[test]
fn restart_resumes_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let (server, client) = start(dir.path(), 3);
    let (_, s) = client.post("/session", &json!({"judge_id": "judge-0"}));
    let sid = s["session_id"].as_str().unwrap().to_string();
    for _ in 0..4 {
        let (_, item) = client.get(&format!("/session/{sid}/next"));
        client.post(&format!("/session/{sid}/answer"), &answer_for(&item));
    }
    server.stop().unwrap();

    let (_server, client) = start(dir.path(), 3);
    let (_, s) = client.post("/session", &json!({"judge_id": "judge-0"}));
    assert_eq!(s["session_id"], sid.as_str());
    assert_eq!(s["answered"], 4);
    let (_, item) = client.get(&format!("/session/{sid}/next"));
    assert_eq!(item["index"], 5);
}

#[test]
fn replay_rejects_a_foreign_log() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("log.jsonl"),
        r#"{"query_id":"elsewhere","judge_id":"judge-0","answer":"intensifies","helpfulness":"helpful","aspects":[],"timestamp":"2024-01-01T00:00:00Z"}"#.to_string() + "\n",
    )
    .unwrap();
    let err = Harness::open(HarnessOptions {
        pool: small_pool(3),
        judges: judges(3),
        seed: 11,
        log: dir.path().join("log.jsonl"),
    })
    .err()
    .unwrap();
    assert!(err.to_string().contains("does not fit the assignment"), "{err}");
}

#[test]
fn too_few_judges() {
    let dir = tempfile::tempdir().unwrap();
    assert!(Harness::open(HarnessOptions {
        pool: small_pool(3),
        judges: judges(2),
        seed: 0,
        log: dir.path().join("log.jsonl"),
    })
    .is_err());
}
