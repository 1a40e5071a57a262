use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use defgraph::generator::{
    gate, generate_corpus, remote_generate, retrieval_baseline_generate, CopyBaseline, GeneratorError,
    GraphGenerator, RemoteConfig, RemoteGenerator, RetrievalBaseline,
};
use defgraph::metrics::node_bleu;
use defgraph::synthetic::wiqa_examples;
use defgraph::template::{decode_input, InputSequence};
use defgraph::{corpus::build_parallel_corpus, parse_dot};
use serde_json::{json, Value};

const SAMPLE: &str = include_str!("../testdata/sample.dot");
const INPUT: &str = include_str!("../testdata/input.txt");

/// Minimal HTTP/1.1 server: every request body is passed to `reply`, which
/// returns a status code and a body.
fn stub_server<F>(reply: F) -> String
where
    F: Fn(usize, Value) -> (u16, String) + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let reply = Arc::new(reply);
    let counter = Arc::new(AtomicUsize::new(0));
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let reply = Arc::clone(&reply);
            let n = counter.fetch_add(1, Ordering::SeqCst);
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut length = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        return;
                    }
                    let line = line.trim_end();
                    if line.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = line.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            length = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut body = vec![0; length];
                reader.read_exact(&mut body).unwrap();
                let request: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
                let (status, text) = reply(n, request);
                let response = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                    text.len()
                );
                let _ = stream.write_all(response.as_bytes());
            });
        }
    });
    format!("http://{addr}/generate")
}

#[test]
fn remote_echo_of_sample_is_valid() {
    let endpoint = stub_server(|_, req| {
        assert_eq!(req["max_length"], 512);
        assert!(req["input"].as_str().unwrap().starts_with("Premise:"));
        (200, json!({"output": SAMPLE, "decoding": "greedy"}).to_string())
    });
    let result = remote_generate(&InputSequence::new(INPUT), &RemoteConfig::new(endpoint)).unwrap();
    assert!(result.valid);
    assert_eq!(result.graph.unwrap(), parse_dot(SAMPLE).unwrap());
    assert!(result.repairs.is_empty());
    assert_eq!(result.metadata.unwrap()["decoding"], "greedy");
}

#[test]
fn remote_garbage_is_invalid_not_an_error() {
    let endpoint = stub_server(|_, _| (200, json!({"output": "I am not a graph"}).to_string()));
    let result = remote_generate(&InputSequence::new(INPUT), &RemoteConfig::new(endpoint)).unwrap();
    assert!(!result.valid);
    assert!(result.graph.is_none());
    assert!(result.repairs.is_unrecoverable());
}

#[test]
fn remote_output_is_repaired() {
    let coerced = SAMPLE.replacen("[label=helps]", "[label=positive]", 1);
    let endpoint = stub_server(move |_, _| (200, json!({ "output": coerced }).to_string()));
    let result = remote_generate(&InputSequence::new(INPUT), &RemoteConfig::new(endpoint)).unwrap();
    assert!(result.valid);
    assert_eq!(result.repairs.coercions(), 1);
}

#[test]
fn remote_errors() {
    let endpoint = stub_server(|_, _| (503, "overloaded".into()));
    let err = remote_generate(&InputSequence::new(INPUT), &RemoteConfig::new(endpoint)).unwrap_err();
    assert_eq!(
        err,
        GeneratorError::Status {
            status: 503,
            body: "overloaded".into()
        }
    );

    let endpoint = stub_server(|_, _| (200, json!({"text": "x"}).to_string()));
    let err = remote_generate(&InputSequence::new(INPUT), &RemoteConfig::new(endpoint)).unwrap_err();
    assert!(matches!(err, GeneratorError::ResponseSchema(_)));

    let unused = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = unused.local_addr().unwrap();
    drop(unused);
    let err = remote_generate(&InputSequence::new(INPUT), &RemoteConfig::new(format!("http://{addr}/"))).unwrap_err();
    assert!(matches!(err, GeneratorError::Transport(_)));
}

#[test]
fn remote_timeout() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        let held: Vec<_> = listener.incoming().take(1).collect();
        thread::sleep(std::time::Duration::from_secs(3));
        drop(held);
    });
    let config = RemoteConfig {
        timeout_secs: 0.3,
        ..RemoteConfig::new(format!("http://{addr}/"))
    };
    let err = remote_generate(&InputSequence::new(INPUT), &config).unwrap_err();
    assert_eq!(err, GeneratorError::Timeout);
}

#[test]
fn alternating_stub_gives_half_validity() {
    let endpoint = stub_server(|_, req| {
        let input = req["input"].as_str().unwrap().to_string();
        let index: usize = input.rsplit('#').next().unwrap().trim().parse().unwrap();
        let output = if index.is_multiple_of(2) { SAMPLE } else { "garbage" };
        (200, json!({ "output": output }).to_string())
    });
    let backend = RemoteGenerator::new(RemoteConfig::new(endpoint));
    let inputs: Vec<_> = (0..10)
        .map(|i| InputSequence::new(format!("{INPUT} #{i}")))
        .collect();
    let run = generate_corpus(&backend, &inputs);
    assert_eq!(run.results.len(), 10);
    assert_eq!(run.validity_rate, Some(0.5));
    for (i, r) in run.results.iter().enumerate() {
        assert_eq!(r.as_ref().unwrap().valid, i % 2 == 0);
    }
}

#[test]
fn empty_input_list() {
    let run = generate_corpus(&CopyBaseline::new(0), &[]);
    assert!(run.results.is_empty());
    assert_eq!(run.validity_rate, None);
}

#[test]
fn retrieval_self_match() {
    let examples = wiqa_examples(20, 4);
    let corpus = build_parallel_corpus(&examples).unwrap();
    let baseline = RetrievalBaseline::new(&corpus).unwrap();
    for (i, pair) in corpus.iter().enumerate() {
        assert_eq!(baseline.select(&pair.input), i);
        let g = baseline.graph_for(&pair.input).unwrap();
        assert_eq!(g, examples[i].graph);
        assert_eq!(node_bleu(&g, &examples[i].graph).unwrap(), 100.0);
    }
}

#[test]
fn retrieval_substitutes_query_nodes() {
    let examples = wiqa_examples(2, 6);
    let corpus = build_parallel_corpus(&examples).unwrap();
    let query = InputSequence::new(
        "Premise: Something entirely new. | Situation : more rain falls | Less : LESS fish being grown | More : MORE fish being grown",
    );
    let result = retrieval_baseline_generate(&query, &corpus).unwrap();
    assert!(result.valid);
    let g = result.graph.unwrap();
    let decoded = decode_input(&query).unwrap();
    assert_eq!(g.label(defgraph::NodeRole::Situation), Some(decoded.situation.as_str()));
    assert_eq!(g.label(defgraph::NodeRole::HypothesisPlus), Some(decoded.more.as_str()));
    assert_eq!(g.label(defgraph::NodeRole::HypothesisMinus), Some(decoded.less.as_str()));

    assert_eq!(RetrievalBaseline::new(&[]).unwrap_err(), GeneratorError::EmptyCorpus);
}

#[test]
fn copy_baseline_structure_is_seeded() {
    let input = InputSequence::new(INPUT);
    let a = CopyBaseline::new(1).generate(&input).unwrap();
    assert_eq!(a, CopyBaseline::new(1).generate(&input).unwrap());
    assert!(gate(a).valid);
}
