//! Statistics for the before/after human evaluation.
//!
//! Each pool item is judged by three people. Answers are binary, so they
//! always have a 2-of-3 majority; helpfulness has three options and can
//! split three ways.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::graph::ChainGraph;
use crate::template::{DefeasibleQuery, Source, UpdateEffect};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("query {query_id} has {got} judgments, expected 3")]
    WrongArity { query_id: String, got: usize },
    #[error("judgments for a single majority must share a query id")]
    MixedQueries,
    #[error("no majority answer for {} pool item(s): {}", .0.len(), .0.join(", "))]
    MissingMajority(Vec<String>),
    #[error("judgment references query {0} which is not in the pool")]
    UnknownQuery(String),
    #[error("invalid judgment: {0}")]
    InvalidRecord(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("McNemar's test is undefined with no discordant pairs")]
    Degenerate,
    #[error("before/after maps cover different query ids")]
    IdMismatch,
    #[error("pool too small: need {needed} items, have {available} in the {which} pool")]
    InsufficientPool {
        which: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("no queries to aggregate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Helpfulness {
    Helpful,
    RelevantNotHelpful,
    IrrelevantMisleading,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aspect {
    Mediator,
    Extraneous,
    Structure,
    None,
}

/// One judge's answer for one pool item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub query_id: String,
    pub judge_id: String,
    pub answer: UpdateEffect,
    pub helpfulness: Helpfulness,
    #[serde(default)]
    pub aspects: BTreeSet<Aspect>,
    pub timestamp: DateTime<Utc>,
}

impl JudgmentRecord {
    pub fn validate(&self) -> Result<(), StatsError> {
        if self.query_id.trim().is_empty() {
            return Err(StatsError::InvalidRecord("query_id is empty".into()));
        }
        if self.judge_id.trim().is_empty() {
            return Err(StatsError::InvalidRecord("judge_id is empty".into()));
        }
        if self.aspects.contains(&Aspect::None) && self.aspects.len() > 1 {
            return Err(StatsError::InvalidRecord(
                "aspect `none` cannot be combined with other aspects".into(),
            ));
        }
        Ok(())
    }
}

/// A query presented to judges together with its pruned graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolItem {
    pub query: DefeasibleQuery,
    pub chain: ChainGraph,
    /// Whether the original, graph-free majority answer was right.
    pub prior_correct: bool,
}

/// Candidate for pool construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolCandidate {
    pub query: DefeasibleQuery,
    pub chain: ChainGraph,
}

/// Label held by at least two of three votes.
pub fn majority_of<T: PartialEq + Copy>(votes: [T; 3]) -> Option<T> {
    let [a, b, c] = votes;
    if a == b || a == c {
        Some(a)
    } else if b == c {
        Some(b)
    } else {
        None
    }
}

fn three<'a>(records: &[&'a JudgmentRecord]) -> Result<[&'a JudgmentRecord; 3], StatsError> {
    let arr: [&JudgmentRecord; 3] = records.try_into().map_err(|_| StatsError::WrongArity {
        query_id: records.first().map(|r| r.query_id.clone()).unwrap_or_default(),
        got: records.len(),
    })?;
    if arr.iter().any(|r| r.query_id != arr[0].query_id) {
        return Err(StatsError::MixedQueries);
    }
    Ok(arr)
}

pub fn majority_answer(records: &[&JudgmentRecord]) -> Result<UpdateEffect, StatsError> {
    let r = three(records)?;
    Ok(majority_of([r[0].answer, r[1].answer, r[2].answer]).expect("binary votes always have a majority"))
}

pub fn majority_helpfulness(records: &[&JudgmentRecord]) -> Result<Option<Helpfulness>, StatsError> {
    let r = three(records)?;
    Ok(majority_of([r[0].helpfulness, r[1].helpfulness, r[2].helpfulness]))
}

pub fn group_by_query(records: &[JudgmentRecord]) -> BTreeMap<&str, Vec<&JudgmentRecord>> {
    let mut groups: BTreeMap<&str, Vec<&JudgmentRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.query_id.as_str()).or_default().push(r);
    }
    groups
}

/// Fraction of queries where at least two judges gave the same helpfulness label.
pub fn majority_agreement(records: &[JudgmentRecord]) -> Result<f64, StatsError> {
    let groups = group_by_query(records);
    if groups.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut agreed = 0usize;
    for group in groups.values() {
        if majority_helpfulness(group)?.is_some() {
            agreed += 1;
        }
    }
    Ok(agreed as f64 / groups.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilsonInterval {
    pub low: f64,
    pub high: f64,
    pub center: f64,
    pub half_width: f64,
    pub confidence: f64,
}

/// Wilson score interval for `k` successes out of `n` trials.
pub fn wilson_interval(k: u64, n: u64, confidence: f64) -> Result<WilsonInterval, StatsError> {
    if n == 0 || k > n {
        return Err(StatsError::Domain(format!("need 0 <= k <= n and n > 0, got k={k}, n={n}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::Domain(format!("confidence must be in (0, 1), got {confidence}")));
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half_width = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    // At k = 0 and k = n one bound is exactly 0 or 1; avoid cancellation error there.
    let low = if k == 0 { 0.0 } else { (center - half_width).max(0.0) };
    let high = if k == n { 1.0 } else { (center + half_width).min(1.0) };
    Ok(WilsonInterval {
        low,
        high,
        center,
        half_width,
        confidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    /// Chi-square with continuity correction, one degree of freedom.
    #[default]
    ChiSquareCorrected,
    /// Two-sided exact binomial test on the discordant pairs; intended for b + c < 25.
    ExactBinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    pub b: u64,
    pub c: u64,
    /// `(|b - c| - 1)^2 / (b + c)`, reported for both methods.
    pub statistic: f64,
    pub p_value: f64,
    pub method: McNemarMethod,
}

pub fn mcnemar(b: u64, c: u64) -> Result<McNemarResult, StatsError> {
    mcnemar_with(b, c, McNemarMethod::default())
}

pub fn mcnemar_with(b: u64, c: u64, method: McNemarMethod) -> Result<McNemarResult, StatsError> {
    let n = b + c;
    if n == 0 {
        return Err(StatsError::Degenerate);
    }
    let diff = b.abs_diff(c) as f64 - 1.0;
    let statistic = diff * diff / n as f64;
    let p_value = match method {
        // Upper tail of chi-square(1) at x equals erfc(sqrt(x / 2)).
        McNemarMethod::ChiSquareCorrected => erfc((statistic / 2.0).sqrt()),
        McNemarMethod::ExactBinomial => {
            let tail = Binomial::new(0.5, n).expect("valid binomial").cdf(b.min(c));
            (2.0 * tail).min(1.0)
        }
    };
    Ok(McNemarResult {
        b,
        c,
        statistic,
        p_value,
        method,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: u64,
    pub n: u64,
    pub accuracy: f64,
    pub interval: WilsonInterval,
}

impl Accuracy {
    fn new(correct: u64, n: u64) -> Result<Self, StatsError> {
        Ok(Accuracy {
            correct,
            n,
            accuracy: correct as f64 / n as f64,
            interval: wilson_interval(correct, n, 0.95)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub overall: Accuracy,
    pub per_source: BTreeMap<Source, Accuracy>,
}

/// Accuracy of majority answers against gold labels, overall and per source.
pub fn accuracy_report(
    pool: &[PoolItem],
    majorities: &BTreeMap<String, UpdateEffect>,
) -> Result<AccuracyReport, StatsError> {
    if pool.is_empty() {
        return Err(StatsError::Empty);
    }
    let missing: Vec<String> = pool
        .iter()
        .filter(|item| !majorities.contains_key(&item.query.id))
        .map(|item| item.query.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(StatsError::MissingMajority(missing));
    }
    let mut counts: BTreeMap<Source, (u64, u64)> = BTreeMap::new();
    for item in pool {
        let entry = counts.entry(item.query.source).or_default();
        entry.1 += 1;
        if majorities[&item.query.id] == item.query.gold_label {
            entry.0 += 1;
        }
    }
    let (correct, n) = counts.values().fold((0, 0), |acc, &(c, t)| (acc.0 + c, acc.1 + t));
    let per_source = counts
        .into_iter()
        .map(|(s, (c, t))| Accuracy::new(c, t).map(|a| (s, a)))
        .collect::<Result<_, _>>()?;
    Ok(AccuracyReport {
        overall: Accuracy::new(correct, n)?,
        per_source,
    })
}

fn pct(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelpfulnessShares {
    pub helpful: f64,
    pub relevant_not_helpful: f64,
    pub irrelevant_misleading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelpfulnessTally {
    /// Queries, classified by their majority helpfulness label.
    pub n_queries: usize,
    pub helpful: f64,
    pub relevant_not_helpful: f64,
    pub irrelevant_misleading: f64,
    pub no_majority: f64,
    /// Individual judgments, without majority voting.
    pub n_judgments: usize,
    pub per_judgment: HelpfulnessShares,
}

pub fn tally_helpfulness(records: &[JudgmentRecord]) -> Result<HelpfulnessTally, StatsError> {
    let groups = group_by_query(records);
    let mut by_query = [0usize; 4];
    for group in groups.values() {
        let slot = match majority_helpfulness(group)? {
            Some(Helpfulness::Helpful) => 0,
            Some(Helpfulness::RelevantNotHelpful) => 1,
            Some(Helpfulness::IrrelevantMisleading) => 2,
            None => 3,
        };
        by_query[slot] += 1;
    }
    let count = |h| records.iter().filter(|r| r.helpfulness == h).count();
    let n_queries = groups.len();
    Ok(HelpfulnessTally {
        n_queries,
        helpful: pct(by_query[0], n_queries),
        relevant_not_helpful: pct(by_query[1], n_queries),
        irrelevant_misleading: pct(by_query[2], n_queries),
        no_majority: pct(by_query[3], n_queries),
        n_judgments: records.len(),
        per_judgment: HelpfulnessShares {
            helpful: pct(count(Helpfulness::Helpful), records.len()),
            relevant_not_helpful: pct(count(Helpfulness::RelevantNotHelpful), records.len()),
            irrelevant_misleading: pct(count(Helpfulness::IrrelevantMisleading), records.len()),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectShares {
    pub selections: usize,
    pub mediator: f64,
    pub extraneous: f64,
    pub structure: f64,
    pub none: f64,
}

impl AspectShares {
    fn from_records<'a>(records: impl Iterator<Item = &'a JudgmentRecord>) -> Self {
        let mut counts: BTreeMap<Aspect, usize> = BTreeMap::new();
        for r in records {
            for &a in &r.aspects {
                *counts.entry(a).or_default() += 1;
            }
        }
        let selections: usize = counts.values().sum();
        let share = |a| pct(counts.get(&a).copied().unwrap_or(0), selections);
        AspectShares {
            selections,
            mediator: share(Aspect::Mediator),
            extraneous: share(Aspect::Extraneous),
            structure: share(Aspect::Structure),
            none: share(Aspect::None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectTally {
    /// Selections by judges who rated the graph helpful or relevant.
    pub useful: AspectShares,
    /// Selections by every judge.
    pub all: AspectShares,
}

/// Percentages of aspect selections (multi-select, so the denominator is
/// selections rather than judges).
pub fn tally_aspects(records: &[JudgmentRecord]) -> AspectTally {
    AspectTally {
        useful: AspectShares::from_records(
            records
                .iter()
                .filter(|r| r.helpfulness != Helpfulness::IrrelevantMisleading),
        ),
        all: AspectShares::from_records(records.iter()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlipMatrix {
    pub right_right: u64,
    pub right_wrong: u64,
    pub wrong_right: u64,
    pub wrong_wrong: u64,
}

impl FlipMatrix {
    pub fn total(&self) -> u64 {
        self.right_right + self.right_wrong + self.wrong_right + self.wrong_wrong
    }

    pub fn before_accuracy(&self) -> f64 {
        (self.right_right + self.right_wrong) as f64 / self.total() as f64
    }

    pub fn after_accuracy(&self) -> f64 {
        (self.right_right + self.wrong_right) as f64 / self.total() as f64
    }

    /// McNemar's test with b = wrong→right and c = right→wrong.
    pub fn mcnemar(&self) -> Result<McNemarResult, StatsError> {
        mcnemar(self.wrong_right, self.right_wrong)
    }
}

pub fn flip_matrix(
    before: &BTreeMap<String, bool>,
    after: &BTreeMap<String, bool>,
) -> Result<FlipMatrix, StatsError> {
    if before.len() != after.len() || before.keys().any(|k| !after.contains_key(k)) {
        return Err(StatsError::IdMismatch);
    }
    if before.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut m = FlipMatrix::default();
    for (id, &was) in before {
        match (was, after[id]) {
            (true, true) => m.right_right += 1,
            (true, false) => m.right_wrong += 1,
            (false, true) => m.wrong_right += 1,
            (false, false) => m.wrong_wrong += 1,
        }
    }
    Ok(m)
}

/// Balanced pool: `k` items sampled from each side, presented in a
/// seeded random order.
pub fn build_eval_pool(
    correct: &[PoolCandidate],
    wrong: &[PoolCandidate],
    k: usize,
    seed: u64,
) -> Result<Vec<PoolItem>, StatsError> {
    for (which, pool) in [("correct", correct), ("wrong", wrong)] {
        if pool.len() < k {
            return Err(StatsError::InsufficientPool {
                which,
                needed: k,
                available: pool.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(2 * k);
    for (pool, prior_correct) in [(correct, true), (wrong, false)] {
        let mut picked = index::sample(&mut rng, pool.len(), k).into_vec();
        picked.sort_unstable();
        items.extend(picked.into_iter().map(|i| PoolItem {
            query: pool[i].query.clone(),
            chain: pool[i].chain.clone(),
            prior_correct,
        }));
    }
    items.shuffle(&mut rng);
    Ok(items)
}

/// Everything derivable from a pool plus the judgments collected so far.
/// Only queries with all three judgments contribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub queries_total: usize,
    pub queries_complete: usize,
    pub judgments: usize,
    pub majority_agreement: Option<f64>,
    pub accuracy: Option<AccuracyReport>,
    pub prior_accuracy: Option<f64>,
    pub flips: Option<FlipMatrix>,
    pub mcnemar: Option<McNemarResult>,
    pub helpfulness: HelpfulnessTally,
    pub aspects: AspectTally,
}

pub fn summarize(pool: &[PoolItem], records: &[JudgmentRecord]) -> Result<StatsSummary, StatsError> {
    let by_id: BTreeMap<&str, &PoolItem> = pool.iter().map(|p| (p.query.id.as_str(), p)).collect();
    let groups = group_by_query(records);
    let mut complete_items = Vec::new();
    let mut complete_records = Vec::new();
    let mut majorities = BTreeMap::new();
    for (id, group) in &groups {
        let item = by_id.get(id).ok_or_else(|| StatsError::UnknownQuery(id.to_string()))?;
        match group.len() {
            0..=2 => continue,
            3 => {}
            got => {
                return Err(StatsError::WrongArity {
                    query_id: id.to_string(),
                    got,
                })
            }
        }
        majorities.insert(id.to_string(), majority_answer(group)?);
        complete_items.push((*item).clone());
        complete_records.extend(group.iter().map(|r| (*r).clone()));
    }

    let (accuracy, prior_accuracy, flips, mcnemar_result, agreement) = if complete_items.is_empty() {
        (None, None, None, None, None)
    } else {
        let accuracy = accuracy_report(&complete_items, &majorities)?;
        let before: BTreeMap<String, bool> = complete_items
            .iter()
            .map(|i| (i.query.id.clone(), i.prior_correct))
            .collect();
        let after: BTreeMap<String, bool> = complete_items
            .iter()
            .map(|i| (i.query.id.clone(), majorities[&i.query.id] == i.query.gold_label))
            .collect();
        let flips = flip_matrix(&before, &after)?;
        (
            Some(accuracy),
            Some(flips.before_accuracy()),
            Some(flips),
            flips.mcnemar().ok(),
            Some(majority_agreement(&complete_records)?),
        )
    };

    Ok(StatsSummary {
        queries_total: pool.len(),
        queries_complete: complete_items.len(),
        judgments: records.len(),
        majority_agreement: agreement,
        accuracy,
        prior_accuracy,
        flips,
        mcnemar: mcnemar_result,
        helpfulness: tally_helpfulness(&complete_records)?,
        aspects: tally_aspects(&complete_records),
    })
}
