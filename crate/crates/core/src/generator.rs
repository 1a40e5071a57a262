//! Graph-generation backends and the validity gate.
//!
//! A backend turns an input sequence into raw text that is meant to be DOT.
//! [`gate`] then parses it, falling back to [`repair_dot`], and records
//! whether the result is a complete schema-valid graph.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::dot::{parse_dot, repair_dot, serialize_dot, RepairAction, RepairLog};
use crate::graph::{
    complete_graph, enumerate_structure_classes, sanitize_label, validate_schema, InfluenceGraph, NodeRole,
};
use crate::metrics::tokenize;
use crate::template::{decode_input, DecodedInput, InputSequence, SeqPair, TemplateError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeneratorError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("retrieval corpus is empty")]
    EmptyCorpus,
    #[error("retrieval corpus entry {index} has an unparseable graph: {reason}")]
    BadCorpusEntry { index: usize, reason: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("response schema error: {0}")]
    ResponseSchema(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub raw: String,
    pub graph: Option<InfluenceGraph>,
    pub valid: bool,
    pub repairs: RepairLog,
    /// Backend-specific details (e.g. the decoding policy a server reports).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Value>,
}

/// Parses raw generator output, repairing if needed.
pub fn gate(raw: impl Into<String>) -> GenerationResult {
    let raw = raw.into();
    let (graph, repairs) = match parse_dot(&raw) {
        Ok(g) => (Some(g), RepairLog::default()),
        Err(_) => match repair_dot(&raw) {
            Ok((g, log)) => (Some(g), log),
            Err(e) => (
                None,
                RepairLog {
                    actions: vec![RepairAction::Unrecoverable { reason: e.to_string() }],
                },
            ),
        },
    };
    let valid = graph.as_ref().is_some_and(|g| validate_schema(g).valid);
    GenerationResult {
        raw,
        graph,
        valid,
        repairs,
        metadata: None,
    }
}

pub trait GraphGenerator: Send + Sync {
    /// Raw (intended DOT) text for one input.
    fn generate(&self, input: &InputSequence) -> Result<String, GeneratorError>;

    fn generate_result(&self, input: &InputSequence) -> Result<GenerationResult, GeneratorError> {
        self.generate(input).map(gate)
    }

    /// Whether `generate` may be called from several threads at once.
    fn concurrent(&self) -> bool {
        true
    }
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Model-free baseline that copies the three query nodes and fills the rest
/// with reserved placeholders.
///
/// The situation and both hypothesis nodes come straight from the input;
/// the other five roles get sentinel labels that share no token with the
/// input. The structure class is drawn uniformly from the two canonical
/// classes, seeded by `(seed, input)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CopyBaseline {
    pub seed: u64,
}

impl CopyBaseline {
    pub fn new(seed: u64) -> Self {
        CopyBaseline { seed }
    }

    pub fn graph_for(&self, input: &InputSequence) -> Result<InfluenceGraph, GeneratorError> {
        let decoded = decode_input(input)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(input.as_str().as_bytes()));
        let classes = enumerate_structure_classes();
        let class = &classes[rng.gen_range(0..classes.len())];
        let polarities = class.polarities().expect("canonical classes are complete");

        let taken: std::collections::HashSet<String> = tokenize(input.as_str()).into_iter().collect();
        let placeholders: Vec<String> = NodeRole::ALL.iter().map(|r| sentinel(*r, &taken)).collect();
        let mut labels: Vec<String> = placeholders;
        labels[2] = copy_label(&decoded.situation);
        labels[6] = copy_label(&decoded.more);
        labels[7] = copy_label(&decoded.less);
        let refs: [&str; 8] = std::array::from_fn(|i| labels[i].as_str());
        complete_graph(refs, &polarities).map_err(|e| GeneratorError::Template(TemplateError::Graph(e)))
    }
}

fn copy_label(text: &str) -> String {
    let cleaned = sanitize_label(text);
    if cleaned.is_empty() {
        "_".to_string()
    } else {
        cleaned
    }
}

fn sentinel(role: NodeRole, taken: &std::collections::HashSet<String>) -> String {
    let name = role.tag().replace('+', "plus").replace('-', "minus").to_lowercase();
    let mut label = format!("__blank_{name}__");
    while taken.contains(&label) {
        label.push('_');
    }
    label
}

impl GraphGenerator for CopyBaseline {
    fn generate(&self, input: &InputSequence) -> Result<String, GeneratorError> {
        Ok(serialize_dot(&self.graph_for(input)?))
    }
}

pub fn copy_baseline_generate(input: &InputSequence, seed: u64) -> Result<GenerationResult, GeneratorError> {
    CopyBaseline::new(seed).generate_result(input)
}

fn overlap_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Token-overlap F1 between two texts (multiset overlap, lowercase
/// whitespace tokens).
pub fn token_f1(a: &str, b: &str) -> f64 {
    f1_of(&overlap_tokens(a), &overlap_tokens(b))
}

fn f1_of(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut counts: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for t in b {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in a {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    2.0 * overlap as f64 / (a.len() + b.len()) as f64
}

/// Nearest-neighbour baseline: returns the graph of the most similar
/// training input, with the query's own situation and hypothesis nodes.
#[derive(Debug, Clone)]
pub struct RetrievalBaseline {
    entries: Vec<(Vec<String>, InfluenceGraph)>,
}

impl RetrievalBaseline {
    pub fn new(corpus: &[SeqPair]) -> Result<Self, GeneratorError> {
        if corpus.is_empty() {
            return Err(GeneratorError::EmptyCorpus);
        }
        let entries = corpus
            .iter()
            .enumerate()
            .map(|(index, pair)| {
                let graph = parse_dot(&pair.output).map_err(|e| GeneratorError::BadCorpusEntry {
                    index,
                    reason: e.to_string(),
                })?;
                Ok((overlap_tokens(pair.input.as_str()), graph))
            })
            .collect::<Result<_, GeneratorError>>()?;
        Ok(RetrievalBaseline { entries })
    }

    /// Index of the best-matching corpus entry; ties go to the earliest.
    pub fn select(&self, input: &InputSequence) -> usize {
        let query = overlap_tokens(input.as_str());
        let mut best = (0, f64::NEG_INFINITY);
        for (i, (tokens, _)) in self.entries.iter().enumerate() {
            let score = f1_of(&query, tokens);
            if score > best.1 {
                best = (i, score);
            }
        }
        best.0
    }

    pub fn graph_for(&self, input: &InputSequence) -> Result<InfluenceGraph, GeneratorError> {
        let decoded: DecodedInput = decode_input(input)?;
        let mut graph = self.entries[self.select(input)].1.clone();
        let set = |g: &mut InfluenceGraph, role, text: &str| {
            g.set_label(role, &copy_label(text))
                .map_err(|e| GeneratorError::Template(TemplateError::Graph(e)))
        };
        set(&mut graph, NodeRole::Situation, &decoded.situation)?;
        set(&mut graph, NodeRole::HypothesisPlus, &decoded.more)?;
        set(&mut graph, NodeRole::HypothesisMinus, &decoded.less)?;
        Ok(graph)
    }
}

impl GraphGenerator for RetrievalBaseline {
    fn generate(&self, input: &InputSequence) -> Result<String, GeneratorError> {
        Ok(serialize_dot(&self.graph_for(input)?))
    }
}

pub fn retrieval_baseline_generate(
    input: &InputSequence,
    corpus: &[SeqPair],
) -> Result<GenerationResult, GeneratorError> {
    RetrievalBaseline::new(corpus)?.generate_result(input)
}

fn default_timeout_secs() -> f64 {
    30.0
}

fn default_max_length() -> u32 {
    512
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default = "default_max_length")]
    pub max_length: u32,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            timeout_secs: default_timeout_secs(),
            max_length: default_max_length(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteRequest {
    pub input: String,
    pub max_length: u32,
}

/// Client for a model served over HTTP.
///
/// `POST <endpoint>` with `{"input": ..., "max_length": ...}`; the reply
/// must be `{"output": "..."}`. Extra reply fields are kept as metadata.
pub struct RemoteGenerator {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteGenerator {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteGenerator { config, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn call(&self, input: &InputSequence) -> Result<(String, Option<Value>), GeneratorError> {
        let request = RemoteRequest {
            input: input.as_str().to_string(),
            max_length: self.config.max_length,
        };
        let mut response = self
            .agent
            .post(&self.config.endpoint)
            .send_json(&request)
            .map_err(transport_error)?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(transport_error)?;
        if !(200..300).contains(&status) {
            return Err(GeneratorError::Status { status, body });
        }
        let value: Value =
            serde_json::from_str(&body).map_err(|e| GeneratorError::ResponseSchema(format!("not JSON: {e}")))?;
        let Value::Object(mut obj) = value else {
            return Err(GeneratorError::ResponseSchema("response is not an object".into()));
        };
        let output = match obj.remove("output") {
            Some(Value::String(s)) => s,
            Some(_) => return Err(GeneratorError::ResponseSchema("`output` is not a string".into())),
            None => return Err(GeneratorError::ResponseSchema("missing `output`".into())),
        };
        let metadata = (!obj.is_empty()).then(|| Value::Object(Map::from_iter(obj)));
        Ok((output, metadata))
    }
}

fn transport_error(e: ureq::Error) -> GeneratorError {
    match e {
        ureq::Error::Timeout(_) => GeneratorError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => GeneratorError::Timeout,
        other => GeneratorError::Transport(other.to_string()),
    }
}

impl GraphGenerator for RemoteGenerator {
    fn generate(&self, input: &InputSequence) -> Result<String, GeneratorError> {
        self.call(input).map(|(output, _)| output)
    }

    fn generate_result(&self, input: &InputSequence) -> Result<GenerationResult, GeneratorError> {
        let (output, metadata) = self.call(input)?;
        Ok(GenerationResult {
            metadata,
            ..gate(output)
        })
    }
}

pub fn remote_generate(input: &InputSequence, config: &RemoteConfig) -> Result<GenerationResult, GeneratorError> {
    RemoteGenerator::new(config.clone()).generate_result(input)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusGeneration {
    pub results: Vec<Result<GenerationResult, GeneratorError>>,
    /// Valid results over all inputs (errors count as invalid); absent for
    /// an empty input list.
    pub validity_rate: Option<f64>,
}

/// Runs a backend over every input, in parallel when the backend allows.
/// Output order matches input order; a failed item does not stop the run.
pub fn generate_corpus(backend: &dyn GraphGenerator, inputs: &[InputSequence]) -> CorpusGeneration {
    let results: Vec<_> = if backend.concurrent() {
        inputs.par_iter().map(|i| backend.generate_result(i)).collect()
    } else {
        inputs.iter().map(|i| backend.generate_result(i)).collect()
    };
    let valid = results.iter().filter(|r| matches!(r, Ok(g) if g.valid)).count();
    let validity_rate = (!results.is_empty()).then(|| valid as f64 / results.len() as f64);
    CorpusGeneration { results, validity_rate }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(premise: &str, situation: &str, hyp: &str) -> InputSequence {
        InputSequence::new(format!(
            "Premise: {premise} | Situation : {situation} | Less : LESS {hyp} | More : MORE {hyp}"
        ))
    }

    #[test]
    fn copy_baseline_is_complete_and_deterministic() {
        let i = input("p", "rain falls", "plants grow");
        let a = copy_baseline_generate(&i, 7).unwrap();
        assert!(a.valid);
        assert!(a.repairs.is_empty());
        let g = a.graph.as_ref().unwrap();
        assert_eq!(g.label(NodeRole::Situation), Some("rain falls"));
        assert_eq!(g.label(NodeRole::HypothesisPlus), Some("MORE plants grow"));
        assert_eq!(g.label(NodeRole::HypothesisMinus), Some("LESS plants grow"));
        assert_eq!(copy_baseline_generate(&i, 7).unwrap(), a);
    }

    #[test]
    fn sentinels_avoid_input_tokens() {
        let i = input("__blank_cplus__ x", "s", "h");
        let g = CopyBaseline::new(0).graph_for(&i).unwrap();
        assert_eq!(g.label(NodeRole::ContextPlus), Some("__blank_cplus___"));
    }

    #[test]
    fn copy_baseline_rejects_malformed_input() {
        assert!(matches!(
            copy_baseline_generate(&InputSequence::new("nonsense"), 0),
            Err(GeneratorError::Template(_))
        ));
    }

    #[test]
    fn token_f1_basics() {
        assert_eq!(token_f1("a b c", "a b c"), 1.0);
        assert_eq!(token_f1("a b", "c d"), 0.0);
        assert!((token_f1("a a b", "a c") - 2.0 / 5.0).abs() < 1e-12);
        assert_eq!(token_f1("", "a"), 0.0);
    }

    #[test]
    fn retrieval_needs_corpus() {
        assert!(matches!(RetrievalBaseline::new(&[]), Err(GeneratorError::EmptyCorpus)));
    }

    #[test]
    fn gate_reports_unrecoverable() {
        let r = gate("complete garbage");
        assert!(!r.valid);
        assert!(r.graph.is_none());
        assert!(r.repairs.is_unrecoverable());
    }

    #[test]
    fn empty_corpus_generation_has_no_rate() {
        let out = generate_corpus(&CopyBaseline::new(1), &[]);
        assert!(out.results.is_empty());
        assert_eq!(out.validity_rate, None);
    }
}
