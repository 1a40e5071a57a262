#![allow(dead_code)]

use std::path::{Path, PathBuf};

use defgraph::evalstats::{build_eval_pool, PoolItem};
use defgraph::synthetic::pool_candidates;
use serde_json::Value;

pub struct Client {
    agent: ureq::Agent,
    pub base: String,
}

impl Client {
    pub fn new(base: String) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Client { agent, base }
    }

    fn finish(mut response: ureq::http::Response<ureq::Body>) -> (u16, String) {
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().unwrap();
        (status, text)
    }

    pub fn get_text(&self, path: &str) -> (u16, String) {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).call().unwrap())
    }

    pub fn post_text(&self, path: &str, body: &str) -> (u16, String) {
        Self::finish(
            self.agent
                .post(format!("{}{path}", self.base))
                .header("content-type", "application/json")
                .send(body)
                .unwrap(),
        )
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let (s, t) = self.get_text(path);
        (s, serde_json::from_str(&t).unwrap_or(Value::String(t)))
    }

    pub fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let (s, t) = self.post_text(path, &body.to_string());
        (s, serde_json::from_str(&t).unwrap_or(Value::String(t)))
    }
}

/// Ten-item pool, half of it prior-correct.
pub fn small_pool(seed: u64) -> Vec<PoolItem> {
    let correct = pool_candidates(12, seed);
    let wrong = pool_candidates(8, seed + 1);
    build_eval_pool(&correct, &wrong, 5, seed).unwrap()
}

pub fn judges(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("judge-{i}")).collect()
}

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}
