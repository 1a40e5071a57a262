//! Distribution of pool items over judges.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Judges per query.
pub const JUDGES_PER_QUERY: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssignError {
    #[error("need at least {JUDGES_PER_QUERY} judges, got {0}")]
    TooFewJudges(usize),
    #[error("duplicate judge id `{0}`")]
    DuplicateJudge(String),
    #[error("judge id must be non-empty")]
    EmptyJudge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub judge_id: String,
    pub assignment: Vec<String>,
    pub cursor: usize,
    pub created_at: DateTime<Utc>,
}

impl Session {
    pub fn current(&self) -> Option<&str> {
        self.assignment.get(self.cursor).map(String::as_str)
    }

    pub fn is_done(&self) -> bool {
        self.cursor >= self.assignment.len()
    }
}

fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in part.iter().chain(&[0xff]) {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

/// Session id derived from the judge and seed, so it is the same after a restart.
pub fn session_id(judge_id: &str, seed: u64) -> String {
    format!("s{:016x}", stable_hash(&[&seed.to_le_bytes(), judge_id.as_bytes()]))
}

/// Gives every query to exactly three distinct judges.
///
/// Judges are shuffled with `seed` and the pool is dealt round-robin in
/// runs of three, so every judge receives `floor(3n/J)` or `ceil(3n/J)`
/// items. Each judge sees their items in pool order.
pub fn assign_judges(
    query_ids: &[String],
    judge_ids: &[String],
    seed: u64,
    created_at: DateTime<Utc>,
) -> Result<Vec<Session>, AssignError> {
    if judge_ids.len() < JUDGES_PER_QUERY {
        return Err(AssignError::TooFewJudges(judge_ids.len()));
    }
    let mut seen = BTreeSet::new();
    for j in judge_ids {
        if j.trim().is_empty() {
            return Err(AssignError::EmptyJudge);
        }
        if !seen.insert(j.as_str()) {
            return Err(AssignError::DuplicateJudge(j.clone()));
        }
    }

    let mut order: Vec<usize> = (0..judge_ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![Vec::new(); judge_ids.len()];
    let mut slot = 0usize;
    for query in query_ids {
        for _ in 0..JUDGES_PER_QUERY {
            assignments[order[slot % order.len()]].push(query.clone());
            slot += 1;
        }
    }

    Ok(judge_ids
        .iter()
        .zip(assignments)
        .map(|(judge, assignment)| Session {
            session_id: session_id(judge, seed),
            judge_id: judge.clone(),
            assignment,
            cursor: 0,
            created_at,
        })
        .collect())
}
