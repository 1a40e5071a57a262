//! Line-delimited record files, split manifests and parallel corpora.
//!
//! A record file starts with a header line naming its schema and version,
//! followed by one JSON object per line:
//!
//! ```text
//! {"schema":"wiqa","version":1}
//! {"id":"w1","passage":"...","graph_dot":"strict digraph { ... }"}
//! ```
//!
//! ```text
//! {"schema":"defeasible","version":1}
//! {"id":"d1","premise":"...","hypothesis":"...","update":"...","label":"intensifies","source":"atomic"}
//! ```
//!
//! Blank lines are ignored. Bad records are skipped and counted with a
//! reason; they never abort ingestion. A completely empty file is an empty
//! corpus.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::dot::{parse_dot, serialize_dot};
use crate::graph::validate_schema;
use crate::template::{
    encode_wiqa, DefeasibleQuery, InputSequence, SeqPair, Source, TemplateError, UpdateEffect, WiqaExample,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const WIQA_SCHEMA: &str = "wiqa";
pub const DEFEASIBLE_SCHEMA: &str = "defeasible";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("schema mismatch: expected {expected} v{SCHEMA_VERSION}, found {found}")]
    SchemaMismatch { expected: &'static str, found: String },
    #[error("example {id}: {source}")]
    Example { id: String, source: TemplateError },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("parallel corpus line {line}: {reason}")]
    Parallel { line: usize, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Wiqa,
    Atomic,
    Social,
    Snli,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [Dataset::Wiqa, Dataset::Atomic, Dataset::Social, Dataset::Snli];

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Wiqa => "wiqa",
            Dataset::Atomic => "atomic",
            Dataset::Social => "social",
            Dataset::Snli => "snli",
        }
    }

    /// The defeasible source corresponding to this dataset, if any.
    pub fn source(self) -> Option<Source> {
        match self {
            Dataset::Wiqa => None,
            Dataset::Atomic => Some(Source::Atomic),
            Dataset::Social => Some(Source::Social),
            Dataset::Snli => Some(Source::Snli),
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown dataset `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown split `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvalidRecord {
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records: usize,
    pub valid: usize,
    pub invalid: usize,
    pub invalid_records: Vec<InvalidRecord>,
    /// Mean whitespace-token length of the passage (premise for defeasible data).
    pub mean_passage_tokens: f64,
    /// Fraction of records whose graph parsed and passed schema validation.
    /// Absent for data without graphs.
    pub graph_validity_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested<T> {
    pub items: Vec<T>,
    pub stats: CorpusStats,
}

fn read_file(path: &Path) -> Result<BufReader<fs::File>, CorpusError> {
    fs::File::open(path).map(BufReader::new).map_err(io_err(path))
}

pub fn ingest_wiqa(path: &Path) -> Result<Ingested<WiqaExample>, CorpusError> {
    ingest_wiqa_reader(read_file(path)?).map_err(|e| match e {
        CorpusError::Io { source, .. } => io_err(path)(source),
        other => other,
    })
}

pub fn ingest_defeasible(path: &Path) -> Result<Ingested<DefeasibleQuery>, CorpusError> {
    ingest_defeasible_reader(read_file(path)?).map_err(|e| match e {
        CorpusError::Io { source, .. } => io_err(path)(source),
        other => other,
    })
}

pub fn ingest_wiqa_reader(reader: impl BufRead) -> Result<Ingested<WiqaExample>, CorpusError> {
    let mut graphs_valid = 0usize;
    let mut ingested = ingest_lines(reader, WIQA_SCHEMA, |obj| {
        let id = text_field(obj, "id")?;
        let passage = text_field(obj, "passage")?;
        let dot = text_field(obj, "graph_dot")?;
        let graph = parse_dot(&dot).map_err(|e| format!("graph_dot: {e}"))?;
        let report = validate_schema(&graph);
        if !report.valid {
            let first = report.violations.first().map(ToString::to_string).unwrap_or_default();
            return Err(format!("graph: {} violation(s), first: {first}", report.violations.len()));
        }
        graphs_valid += 1;
        let tokens = passage.split_whitespace().count();
        Ok((WiqaExample { id, passage, graph }, tokens))
    })?;
    ingested.stats.graph_validity_rate = Some(if ingested.stats.records == 0 {
        0.0
    } else {
        graphs_valid as f64 / ingested.stats.records as f64
    });
    Ok(ingested)
}

pub fn ingest_defeasible_reader(reader: impl BufRead) -> Result<Ingested<DefeasibleQuery>, CorpusError> {
    ingest_lines(reader, DEFEASIBLE_SCHEMA, |obj| {
        let id = text_field(obj, "id")?;
        let premise = text_field(obj, "premise")?;
        let hypothesis = text_field(obj, "hypothesis")?;
        let update = text_field(obj, "update")?;
        let label = text_field(obj, "label")?;
        let source = text_field(obj, "source")?;
        let gold_label = UpdateEffect::parse(&label).ok_or_else(|| format!("invalid label `{label}`"))?;
        let source = Source::parse(&source).ok_or_else(|| format!("invalid source `{source}`"))?;
        let tokens = premise.split_whitespace().count();
        Ok((
            DefeasibleQuery {
                id,
                premise,
                hypothesis,
                update,
                gold_label,
                source,
            },
            tokens,
        ))
    })
}

fn text_field(obj: &Map<String, Value>, name: &str) -> Result<String, String> {
    match obj.get(name) {
        None | Some(Value::Null) => Err(format!("missing-field({name})")),
        Some(Value::String(s)) if s.trim().is_empty() => Err(format!("empty-field({name})")),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(format!("field `{name}` is not a string")),
    }
}

#[derive(Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

fn ingest_lines<T>(
    reader: impl BufRead,
    schema: &'static str,
    mut parse: impl FnMut(&Map<String, Value>) -> Result<(T, usize), String>,
) -> Result<Ingested<T>, CorpusError> {
    let mut items = Vec::new();
    let mut invalid_records = Vec::new();
    let mut records = 0usize;
    let mut token_total = 0usize;
    let mut header_seen = false;

    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: String::new(),
            source,
        })?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            let header: Header = serde_json::from_str(&line).map_err(|_| CorpusError::SchemaMismatch {
                expected: schema,
                found: "no header line".into(),
            })?;
            if header.schema != schema || header.version != SCHEMA_VERSION {
                return Err(CorpusError::SchemaMismatch {
                    expected: schema,
                    found: format!("{} v{}", header.schema, header.version),
                });
            }
            header_seen = true;
            continue;
        }
        records += 1;
        let value: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                invalid_records.push(InvalidRecord {
                    line: line_no,
                    id: None,
                    reason: format!("malformed record: {e}"),
                });
                continue;
            }
        };
        let Value::Object(obj) = value else {
            invalid_records.push(InvalidRecord {
                line: line_no,
                id: None,
                reason: "record is not an object".into(),
            });
            continue;
        };
        match parse(&obj) {
            Ok((item, tokens)) => {
                token_total += tokens;
                items.push(item);
            }
            Err(reason) => invalid_records.push(InvalidRecord {
                line: line_no,
                id: obj.get("id").and_then(Value::as_str).map(str::to_string),
                reason,
            }),
        }
    }

    let valid = items.len();
    Ok(Ingested {
        stats: CorpusStats {
            records,
            valid,
            invalid: invalid_records.len(),
            invalid_records,
            mean_passage_tokens: if valid == 0 { 0.0 } else { token_total as f64 / valid as f64 },
            graph_validity_rate: None,
        },
        items,
    })
}

/// Record-file line for a WIQA example.
pub fn wiqa_record_line(ex: &WiqaExample) -> String {
    serde_json::json!({
        "id": ex.id,
        "passage": ex.passage,
        "graph_dot": serialize_dot(&ex.graph),
    })
    .to_string()
}

/// Record-file line for a defeasible query.
pub fn defeasible_record_line(q: &DefeasibleQuery) -> String {
    serde_json::json!({
        "id": q.id,
        "premise": q.premise,
        "hypothesis": q.hypothesis,
        "update": q.update,
        "label": q.gold_label,
        "source": q.source,
    })
    .to_string()
}

pub fn header_line(schema: &str) -> String {
    serde_json::json!({ "schema": schema, "version": SCHEMA_VERSION }).to_string()
}

pub fn write_wiqa_records(path: &Path, examples: &[WiqaExample]) -> Result<(), CorpusError> {
    let mut lines = vec![header_line(WIQA_SCHEMA)];
    lines.extend(examples.iter().map(wiqa_record_line));
    write_lines(path, &lines)
}

pub fn write_defeasible_records(path: &Path, queries: &[DefeasibleQuery]) -> Result<(), CorpusError> {
    let mut lines = vec![header_line(DEFEASIBLE_SCHEMA)];
    lines.extend(queries.iter().map(defeasible_record_line));
    write_lines(path, &lines)
}

fn write_lines(path: &Path, lines: &[String]) -> Result<(), CorpusError> {
    let mut file = io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    for line in lines {
        writeln!(file, "{line}").map_err(io_err(path))?;
    }
    file.flush().map_err(io_err(path))
}

/// Maps each example to its (input, DOT) pair, preserving order.
pub fn build_parallel_corpus(examples: &[WiqaExample]) -> Result<Vec<SeqPair>, CorpusError> {
    examples
        .iter()
        .map(|ex| {
            encode_wiqa(ex).map_err(|source| CorpusError::Example {
                id: ex.id.clone(),
                source,
            })
        })
        .collect()
}

/// Writes `input<TAB>output` lines.
pub fn write_parallel_corpus(path: &Path, pairs: &[SeqPair]) -> Result<(), CorpusError> {
    let mut lines = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        if p.input.as_str().contains(['\t', '\n']) || p.output.contains(['\t', '\n']) {
            return Err(CorpusError::Parallel {
                line: i + 1,
                reason: "tab or newline inside a field".into(),
            });
        }
        lines.push(format!("{}\t{}", p.input, p.output));
    }
    write_lines(path, &lines)
}

pub fn read_parallel_corpus(path: &Path) -> Result<Vec<SeqPair>, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_parallel_corpus(&text)
}

pub fn parse_parallel_corpus(text: &str) -> Result<Vec<SeqPair>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let (input, output) = line.split_once('\t').ok_or_else(|| CorpusError::Parallel {
                line: i + 1,
                reason: "expected input<TAB>output".into(),
            })?;
            Ok(SeqPair {
                input: InputSequence::new(input),
                output: output.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub dataset: Dataset,
    pub split: Split,
    pub count: u64,
}

/// Expected per-split sample counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{dataset}/{split}: expected {expected} samples, ingested {actual}")]
pub struct ManifestMismatch {
    pub dataset: Dataset,
    pub split: Split,
    pub expected: u64,
    pub actual: u64,
}

impl SplitManifest {
    /// Published split sizes of the four upstream datasets.
    pub fn published() -> Self {
        use Dataset::*;
        use Split::*;
        let rows = [
            (Wiqa, Train, 1522),
            (Wiqa, Test, 189),
            (Wiqa, Dev, 152),
            (Atomic, Train, 35_001),
            (Atomic, Test, 4137),
            (Atomic, Dev, 3839),
            (Social, Train, 88_675),
            (Social, Test, 1836),
            (Social, Dev, 1784),
            (Snli, Train, 77_015),
            (Snli, Test, 9438),
            (Snli, Dev, 9342),
        ];
        SplitManifest {
            entries: rows
                .into_iter()
                .map(|(dataset, split, count)| ManifestEntry { dataset, split, count })
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let manifest: SplitManifest =
            serde_json::from_str(&text).map_err(|e| CorpusError::Manifest(format!("{}: {e}", path.display())))?;
        let mut seen = std::collections::BTreeSet::new();
        for e in &manifest.entries {
            if !seen.insert((e.dataset, e.split)) {
                return Err(CorpusError::Manifest(format!("duplicate entry {}/{}", e.dataset, e.split)));
            }
        }
        Ok(manifest)
    }

    pub fn expected(&self, dataset: Dataset, split: Split) -> Option<u64> {
        self.entries
            .iter()
            .find(|e| e.dataset == dataset && e.split == split)
            .map(|e| e.count)
    }

    /// Per-dataset totals, always the sum of the split counts.
    pub fn totals(&self) -> BTreeMap<Dataset, u64> {
        let mut totals = BTreeMap::new();
        for e in &self.entries {
            *totals.entry(e.dataset).or_default() += e.count;
        }
        totals
    }

    pub fn check(&self, dataset: Dataset, split: Split, actual: u64) -> Result<(), CorpusError> {
        let expected = self
            .expected(dataset, split)
            .ok_or_else(|| CorpusError::Manifest(format!("no entry for {dataset}/{split}")))?;
        if expected == actual {
            Ok(())
        } else {
            Err(CorpusError::Manifest(
                ManifestMismatch {
                    dataset,
                    split,
                    expected,
                    actual,
                }
                .to_string(),
            ))
        }
    }
}
