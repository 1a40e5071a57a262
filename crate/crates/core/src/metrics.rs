//! Graph-level generation metrics: Node-BLEU, Rel-BLEU and Edge-match.
//!
//! Generated nodes are matched to reference nodes by role tag. Labels are
//! tokenized by lowercasing, stripping any role prefix and splitting on
//! whitespace; `[OR]` / `[AND]` are always separate tokens.
//!
//! Sentence BLEU caps the n-gram order at the length of the shorter sequence
//! (at most 4) and applies no smoothing, so a one-word exact match scores 100
//! and disjoint labels score 0.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{strip_role_prefix, structure_class, validate_schema, InfluenceGraph, NodeRole};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("reference graph is incomplete (needs all 8 roles and 9 canonical edges)")]
    IncompleteReference,
    #[error("reference graph {index} is incomplete")]
    IncompleteReferenceAt { index: usize },
    #[error("cannot report on an empty corpus")]
    EmptyCorpus,
}

pub fn tokenize(label: &str) -> Vec<String> {
    let spaced = strip_role_prefix(label)
        .to_lowercase()
        .replace("[or]", " [or] ")
        .replace("[and]", " [and] ");
    spaced.split_whitespace().map(str::to_string).collect()
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    for window in tokens.windows(n) {
        let key: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU on a 0..=100 scale.
pub fn bleu<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> f64 {
    let order = MAX_ORDER.min(candidate.len()).min(reference.len());
    if order == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=order {
        let cand = ngram_counts(candidate, n);
        let refs = ngram_counts(reference, n);
        let clipped: usize = cand
            .iter()
            .map(|(gram, &c)| c.min(refs.get(gram).copied().unwrap_or(0)))
            .sum();
        if clipped == 0 {
            return 0.0;
        }
        let total = candidate.len() + 1 - n;
        log_sum += (clipped as f64 / total as f64).ln();
    }
    let c = candidate.len() as f64;
    let r = reference.len() as f64;
    let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    100.0 * brevity * (log_sum / order as f64).exp()
}

/// BLEU between the generated and reference labels of one role; 0 when the
/// generated graph lacks the role.
pub fn role_bleu(gen: &InfluenceGraph, reference: &InfluenceGraph, role: NodeRole) -> f64 {
    match (gen.label(role), reference.label(role)) {
        (Some(g), Some(r)) => bleu(&tokenize(g), &tokenize(r)),
        _ => 0.0,
    }
}

fn require_complete(reference: &InfluenceGraph) -> Result<(), MetricsError> {
    if reference.is_complete() {
        Ok(())
    } else {
        Err(MetricsError::IncompleteReference)
    }
}

pub fn node_bleu(gen: &InfluenceGraph, reference: &InfluenceGraph) -> Result<f64, MetricsError> {
    require_complete(reference)?;
    let total: f64 = NodeRole::ALL.iter().map(|&r| role_bleu(gen, reference, r)).sum();
    Ok(total / NodeRole::ALL.len() as f64)
}

pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Per-edge harmonic means over the reference edges, in reference edge order.
pub fn rel_bleu_per_edge(gen: &InfluenceGraph, reference: &InfluenceGraph) -> Result<Vec<f64>, MetricsError> {
    require_complete(reference)?;
    Ok(reference
        .edges()
        .iter()
        .map(|e| harmonic_mean(role_bleu(gen, reference, e.src), role_bleu(gen, reference, e.dst)))
        .collect())
}

pub fn rel_bleu(gen: &InfluenceGraph, reference: &InfluenceGraph) -> Result<f64, MetricsError> {
    let per_edge = rel_bleu_per_edge(gen, reference)?;
    Ok(per_edge.iter().sum::<f64>() / per_edge.len() as f64)
}

/// 1 when both graphs are schema-valid and share a structure class.
pub fn edge_match(gen: &InfluenceGraph, reference: &InfluenceGraph) -> u8 {
    match (structure_class(gen), structure_class(reference)) {
        (Ok(a), Ok(b)) if a == b => 1,
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphScores {
    pub node_bleu: f64,
    pub rel_bleu: f64,
    pub edge_match: u8,
    pub gen_valid: bool,
}

pub fn score_pair(gen: &InfluenceGraph, reference: &InfluenceGraph) -> Result<GraphScores, MetricsError> {
    Ok(GraphScores {
        node_bleu: node_bleu(gen, reference)?,
        rel_bleu: rel_bleu(gen, reference)?,
        edge_match: edge_match(gen, reference),
        gen_valid: validate_schema(gen).valid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMetricsReport {
    pub node_bleu: f64,
    pub rel_bleu: f64,
    pub edge_match_pct: f64,
    pub n_graphs: usize,
    pub per_graph: Vec<GraphScores>,
}

/// Scores every (generated, reference) pair and averages across the corpus.
/// Pairs are scored in parallel; the reduction runs in input order.
pub fn corpus_report(pairs: &[(InfluenceGraph, InfluenceGraph)]) -> Result<GraphMetricsReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let per_graph = pairs
        .par_iter()
        .enumerate()
        .map(|(index, (gen, reference))| {
            score_pair(gen, reference).map_err(|_| MetricsError::IncompleteReferenceAt { index })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n = per_graph.len() as f64;
    let mut node = 0.0;
    let mut rel = 0.0;
    let mut matched = 0u64;
    for s in &per_graph {
        node += s.node_bleu;
        rel += s.rel_bleu;
        matched += u64::from(s.edge_match);
    }
    Ok(GraphMetricsReport {
        node_bleu: node / n,
        rel_bleu: rel / n,
        edge_match_pct: 100.0 * matched as f64 / n,
        n_graphs: per_graph.len(),
        per_graph,
    })
}
