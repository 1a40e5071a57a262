//! HTTP service that walks judges through their assigned pool items.
//!
//! Routes:
//!
//! | method | path                    | body / reply                                  |
//! |--------|-------------------------|-----------------------------------------------|
//! | POST   | `/session`              | `{judge_id}` → [`SessionInfo`]               |
//! | GET    | `/session/{id}/next`    | → [`NextItem`]                                |
//! | POST   | `/session/{id}/answer`  | [`AnswerBody`] → [`Ack`]                      |
//! | GET    | `/stats`                | → `StatsSummary`                              |
//!
//! Failures reply with a non-2xx status and `{"error": <code>, "detail": <text>}`.
//! Judge-facing replies never carry the gold label or the prior answer.

use std::collections::{BTreeSet, HashMap};
use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use arc_swap::ArcSwap;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use defgraph::evalstats::{summarize, Aspect, Helpfulness, JudgmentRecord, PoolItem, StatsError, StatsSummary};
use defgraph::graph::ChainGraph;
use defgraph::template::UpdateEffect;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assign::{assign_judges, AssignError, Session};
use crate::journal::{Journal, JournalError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no session with id `{0}`")]
    UnknownSession(String),
    #[error("judge `{0}` is not on the judge list")]
    UnknownJudge(String),
    #[error("expected an answer for `{expected}`, got `{got}`")]
    OutOfOrder { expected: String, got: String },
    #[error("`{0}` has already been answered in this session")]
    Duplicate(String),
    #[error("all assigned items have been answered")]
    SessionComplete,
    #[error("record judge `{got}` does not match session judge `{expected}`")]
    JudgeMismatch { expected: String, got: String },
    #[error(transparent)]
    Invalid(StatsError),
    #[error("{0}")]
    BadRequest(String),
    #[error("no route for {0}")]
    NoRoute(String),
    #[error(transparent)]
    Storage(#[from] JournalError),
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error("log record {index} ({judge_id} on {query_id}) does not fit the assignment: {reason}")]
    Replay {
        index: usize,
        judge_id: String,
        query_id: String,
        reason: String,
    },
    #[error("pool is empty")]
    EmptyPool,
    #[error("statistics: {0}")]
    Stats(StatsError),
}

impl HarnessError {
    fn status_and_code(&self) -> (StatusCode, &'static str) {
        match self {
            HarnessError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            HarnessError::UnknownJudge(_) => (StatusCode::NOT_FOUND, "unknown_judge"),
            HarnessError::OutOfOrder { .. } => (StatusCode::CONFLICT, "out_of_order"),
            HarnessError::Duplicate(_) => (StatusCode::CONFLICT, "duplicate_submission"),
            HarnessError::SessionComplete => (StatusCode::CONFLICT, "session_complete"),
            HarnessError::JudgeMismatch { .. } => (StatusCode::FORBIDDEN, "judge_mismatch"),
            HarnessError::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_judgment"),
            HarnessError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            HarnessError::NoRoute(_) => (StatusCode::NOT_FOUND, "not_found"),
            HarnessError::Storage(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
            HarnessError::Assign(_)
            | HarnessError::Replay { .. }
            | HarnessError::EmptyPool
            | HarnessError::Stats(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

impl IntoResponse for HarnessError {
    fn into_response(self) -> Response {
        let (status, code) = self.status_and_code();
        let body = ErrorBody {
            error: code.to_string(),
            detail: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRequest {
    pub judge_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub judge_id: String,
    pub total: usize,
    pub answered: usize,
    pub created_at: DateTime<Utc>,
}

/// What a judge sees for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemView {
    pub query_id: String,
    pub premise: String,
    pub hypothesis: String,
    pub update: String,
    pub chain: ChainGraph,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextItem {
    pub done: bool,
    /// 1-based position of the current item; equals `total` once done.
    pub index: usize,
    pub total: usize,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub item: Option<ItemView>,
}

/// Judgment fields posted by a judge. The server supplies the timestamp;
/// a client-sent `timestamp` is accepted and ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerBody {
    pub query_id: String,
    #[serde(default)]
    pub judge_id: Option<String>,
    pub answer: UpdateEffect,
    pub helpfulness: Helpfulness,
    #[serde(default)]
    pub aspects: BTreeSet<Aspect>,
    #[serde(default)]
    pub timestamp: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub accepted: bool,
    pub query_id: String,
    /// Items answered so far in this session, including this one.
    pub answered: usize,
    pub total: usize,
    pub timestamp: DateTime<Utc>,
}

struct Writer {
    journal: Journal,
    records: Vec<JudgmentRecord>,
}

/// Shared state behind the routes.
pub struct Harness {
    pool: Vec<PoolItem>,
    index: HashMap<String, usize>,
    sessions: HashMap<String, Mutex<Session>>,
    by_judge: HashMap<String, String>,
    writer: Mutex<Writer>,
    stats: ArcSwap<StatsSummary>,
}

#[derive(Debug, Clone)]
pub struct HarnessOptions {
    pub pool: Vec<PoolItem>,
    pub judges: Vec<String>,
    pub seed: u64,
    pub log: PathBuf,
}

impl Harness {
    /// Builds the assignment and replays any existing log into it.
    pub fn open(options: HarnessOptions) -> Result<Harness, HarnessError> {
        if options.pool.is_empty() {
            return Err(HarnessError::EmptyPool);
        }
        let ids: Vec<String> = options.pool.iter().map(|p| p.query.id.clone()).collect();
        let sessions = assign_judges(&ids, &options.judges, options.seed, Utc::now())?;
        let (journal, replay) = Journal::open(&options.log)?;

        let mut by_judge = HashMap::new();
        let mut table = HashMap::new();
        for s in sessions {
            by_judge.insert(s.judge_id.clone(), s.session_id.clone());
            table.insert(s.session_id.clone(), s);
        }
        for (i, r) in replay.records.iter().enumerate() {
            let fail = |reason: &str| HarnessError::Replay {
                index: i,
                judge_id: r.judge_id.clone(),
                query_id: r.query_id.clone(),
                reason: reason.to_string(),
            };
            let sid = by_judge.get(&r.judge_id).ok_or_else(|| fail("unknown judge"))?;
            let session = table.get_mut(sid).expect("session exists for every judge");
            if session.current() != Some(r.query_id.as_str()) {
                return Err(fail("not the next assigned item"));
            }
            session.cursor += 1;
        }

        let summary = summarize(&options.pool, &replay.records).map_err(HarnessError::Stats)?;
        Ok(Harness {
            index: ids.into_iter().enumerate().map(|(i, id)| (id, i)).collect(),
            pool: options.pool,
            sessions: table.into_iter().map(|(k, v)| (k, Mutex::new(v))).collect(),
            by_judge,
            writer: Mutex::new(Writer {
                journal,
                records: replay.records,
            }),
            stats: ArcSwap::from_pointee(summary),
        })
    }

    pub fn log_path(&self) -> PathBuf {
        self.writer.lock().journal.path().to_path_buf()
    }

    pub fn sessions(&self) -> Vec<Session> {
        let mut all: Vec<Session> = self.sessions.values().map(|s| s.lock().clone()).collect();
        all.sort_by(|a, b| a.judge_id.cmp(&b.judge_id));
        all
    }

    pub fn start_session(&self, judge_id: &str) -> Result<SessionInfo, HarnessError> {
        let sid = self
            .by_judge
            .get(judge_id)
            .ok_or_else(|| HarnessError::UnknownJudge(judge_id.to_string()))?;
        let session = self.sessions[sid].lock();
        Ok(SessionInfo {
            session_id: session.session_id.clone(),
            judge_id: session.judge_id.clone(),
            total: session.assignment.len(),
            answered: session.cursor,
            created_at: session.created_at,
        })
    }

    fn session(&self, id: &str) -> Result<&Mutex<Session>, HarnessError> {
        self.sessions
            .get(id)
            .ok_or_else(|| HarnessError::UnknownSession(id.to_string()))
    }

    pub fn next_item(&self, session_id: &str) -> Result<NextItem, HarnessError> {
        let session = self.session(session_id)?.lock();
        let total = session.assignment.len();
        Ok(match session.current() {
            None => NextItem {
                done: true,
                index: total,
                total,
                item: None,
            },
            Some(qid) => {
                let p = &self.pool[self.index[qid]];
                NextItem {
                    done: false,
                    index: session.cursor + 1,
                    total,
                    item: Some(ItemView {
                        query_id: p.query.id.clone(),
                        premise: p.query.premise.clone(),
                        hypothesis: p.query.hypothesis.clone(),
                        update: p.query.update.clone(),
                        chain: p.chain.clone(),
                    }),
                }
            }
        })
    }

    /// Validates, logs durably, then advances the session.
    pub fn submit(&self, session_id: &str, body: AnswerBody) -> Result<Ack, HarnessError> {
        let mut session = self.session(session_id)?.lock();
        if let Some(judge) = &body.judge_id {
            if *judge != session.judge_id {
                return Err(HarnessError::JudgeMismatch {
                    expected: session.judge_id.clone(),
                    got: judge.clone(),
                });
            }
        }
        if session.assignment[..session.cursor].contains(&body.query_id) {
            return Err(HarnessError::Duplicate(body.query_id));
        }
        let expected = session.current().ok_or(HarnessError::SessionComplete)?;
        if expected != body.query_id {
            return Err(HarnessError::OutOfOrder {
                expected: expected.to_string(),
                got: body.query_id,
            });
        }

        let mut record = JudgmentRecord {
            query_id: body.query_id,
            judge_id: session.judge_id.clone(),
            answer: body.answer,
            helpfulness: body.helpfulness,
            aspects: body.aspects,
            timestamp: Utc::now(),
        };
        record.validate().map_err(HarnessError::Invalid)?;

        let mut writer = self.writer.lock();
        // Keep timestamps non-decreasing in log order.
        if let Some(last) = writer.records.last() {
            record.timestamp = record.timestamp.max(last.timestamp);
        }
        writer.journal.append(&record)?;
        writer.records.push(record.clone());
        let summary = summarize(&self.pool, &writer.records).map_err(HarnessError::Stats)?;
        self.stats.store(Arc::new(summary));
        drop(writer);

        session.cursor += 1;
        Ok(Ack {
            accepted: true,
            query_id: record.query_id,
            answered: session.cursor,
            total: session.assignment.len(),
            timestamp: record.timestamp,
        })
    }

    pub fn stats(&self) -> Arc<StatsSummary> {
        self.stats.load_full()
    }
}

type Shared = Arc<Harness>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, HarnessError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| HarnessError::BadRequest(e.body_text()))
}

async fn create_session(
    State(h): State<Shared>,
    payload: Result<Json<SessionRequest>, JsonRejection>,
) -> Result<Json<SessionInfo>, HarnessError> {
    let req = body(payload)?;
    h.start_session(&req.judge_id).map(Json)
}

async fn next(State(h): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<NextItem>, HarnessError> {
    h.next_item(&id).map(Json)
}

async fn answer(
    State(h): State<Shared>,
    UrlPath(id): UrlPath<String>,
    payload: Result<Json<AnswerBody>, JsonRejection>,
) -> Result<Json<Ack>, HarnessError> {
    let answer = body(payload)?;
    tokio::task::spawn_blocking(move || h.submit(&id, answer))
        .await
        .map_err(|e| HarnessError::BadRequest(format!("submission aborted: {e}")))?
        .map(Json)
}

async fn stats(State(h): State<Shared>) -> Json<StatsSummary> {
    Json(StatsSummary::clone(&h.stats()))
}

async fn not_found(uri: axum::http::Uri) -> HarnessError {
    HarnessError::NoRoute(uri.path().to_string())
}

pub fn router(harness: Shared) -> Router {
    Router::new()
        .route("/session", post(create_session))
        .route("/session/{id}/next", get(next))
        .route("/session/{id}/answer", post(answer))
        .route("/stats", get(stats))
        .fallback(not_found)
        .with_state(harness)
}

pub async fn serve(
    listener: tokio::net::TcpListener,
    harness: Shared,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(harness))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server running on its own runtime thread; used by tests and tools
/// that drive the harness from synchronous code.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn start(harness: Harness, addr: &str) -> std::io::Result<ServerHandle> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let shared = Arc::new(harness);
        let thread = std::thread::spawn(move || {
            runtime.block_on(serve(listener, shared, async {
                let _ = rx.await;
            }))
        });
        Ok(ServerHandle {
            addr,
            stop: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting requests and waits for in-flight ones to finish.
    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

/// Offline counterpart of `GET /stats`: the same summary computed from a log file.
pub fn replay_stats(pool: &[PoolItem], log: &Path) -> Result<StatsSummary, HarnessError> {
    let replay = crate::journal::read_log(log)?;
    summarize(pool, &replay.records).map_err(HarnessError::Stats)
}
