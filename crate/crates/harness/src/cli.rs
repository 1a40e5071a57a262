//! The `defgraph` command line.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use defgraph::corpus::{
    build_parallel_corpus, ingest_defeasible, ingest_wiqa, read_parallel_corpus, write_defeasible_records,
    write_parallel_corpus, write_wiqa_records, CorpusStats, Dataset, Split, SplitManifest,
};
use defgraph::evalstats::build_eval_pool;
use defgraph::generator::{
    gate, generate_corpus, CopyBaseline, GraphGenerator, RemoteConfig, RemoteGenerator, RetrievalBaseline,
};
use defgraph::graph::{prune_to_strengthening_chain, validate_schema, InfluenceGraph};
use defgraph::metrics::corpus_report;
use defgraph::synthetic;
use defgraph::template::{encode_defeasible_with, InputSequence, Source, TemplateFormat};
use defgraph::{parse_dot, repair_dot, serialize_dot};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Config;
use crate::pool::{read_candidates, read_judges, read_pool, write_lines};
use crate::server::{replay_stats, serve, Harness, HarnessOptions};

#[derive(Debug, Parser)]
#[command(name = "defgraph", version, about = "Influence-graph toolkit for defeasible reasoning")]
pub struct Cli {
    /// TOML file supplying defaults for `serve` and `generate` flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Situation,
    Compact,
}

impl From<Format> for TemplateFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Situation => TemplateFormat::Situation,
            Format::Compact => TemplateFormat::Compact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Copy,
    Retrieval,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Wiqa,
    Atomic,
    Social,
    Snli,
    Candidates,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a record file, report statistics and write the model-ready form.
    Ingest {
        #[arg(long)]
        dataset: Dataset,
        #[arg(long)]
        split: Split,
        #[arg(long = "in")]
        input: PathBuf,
        /// WIQA: `input<TAB>output` parallel corpus. Defeasible data: one
        /// `{"id", "input"}` object per line.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Expected split sizes: a manifest file, or `published` for the
        /// upstream dataset sizes. Exits with status 1 on mismatch.
        #[arg(long)]
        manifest: Option<String>,
        #[arg(long, default_value = "situation")]
        format: Format,
    },
    /// Encode defeasible queries as input sequences.
    Encode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "situation")]
        format: Format,
    },
    /// Generate graphs for input sequences.
    Generate {
        #[arg(long, value_enum)]
        backend: Backend,
        /// Lines of `{"id", "input"}` JSON, or TSV whose first column is the input.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel corpus searched by the retrieval backend.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        timeout_secs: Option<f64>,
        #[arg(long)]
        max_length: Option<u32>,
    },
    /// Check a DOT file against the graph schema. Exits with status 1 if invalid.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Attempt repair when strict parsing fails.
        #[arg(long)]
        repair: bool,
    },
    /// Reduce a DOT graph to its strengthening chain.
    Prune {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        hypothesis: Option<String>,
    },
    /// Score generated graphs against references.
    Score {
        /// Output of `generate`, or a directory of `.dot` files taken in name order.
        #[arg(long)]
        gen: PathBuf,
        /// Parallel corpus whose output column holds the reference graphs.
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Human-evaluation statistics from a judgment log.
    Stats {
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the judgment-collection service.
    Serve {
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long)]
        judges: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        addr: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build a balanced evaluation pool from correct and wrong candidates.
    BuildPool {
        #[arg(long)]
        correct: PathBuf,
        #[arg(long)]
        wrong: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write deterministic synthetic data.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn emit(out: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{text}")?;
            Ok(())
        }
    }
}

fn write_jsonl(out: Option<&Path>, rows: &[Value]) -> Result<()> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row)?);
        text.push('\n');
    }
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(Into::into),
    }
}

fn load_manifest(spec: &str) -> Result<SplitManifest> {
    if spec == "published" {
        Ok(SplitManifest::published())
    } else {
        Ok(SplitManifest::load(Path::new(spec))?)
    }
}

#[derive(Serialize)]
struct IngestReport<'a> {
    dataset: Dataset,
    split: Split,
    stats: &'a CorpusStats,
    manifest: Option<ManifestResult>,
}

#[derive(Serialize)]
struct ManifestResult {
    expected: Option<u64>,
    actual: u64,
    ok: bool,
    detail: Option<String>,
}

fn ingest(
    dataset: Dataset,
    split: Split,
    input: &Path,
    out: Option<&Path>,
    manifest: Option<&str>,
    format: TemplateFormat,
) -> Result<ExitCode> {
    let stats = match dataset.source() {
        None => {
            let ingested = ingest_wiqa(input)?;
            if let Some(out) = out {
                write_parallel_corpus(out, &build_parallel_corpus(&ingested.items)?)?;
            }
            ingested.stats
        }
        Some(source) => {
            let ingested = ingest_defeasible(input)?;
            if let Some(q) = ingested.items.iter().find(|q| q.source != source) {
                bail!("record {} has source {} but --dataset is {dataset}", q.id, q.source);
            }
            if let Some(out) = out {
                let rows: Vec<Value> = ingested
                    .items
                    .iter()
                    .map(|q| json!({"id": q.id, "input": encode_defeasible_with(q, format).as_str()}))
                    .collect();
                write_jsonl(Some(out), &rows)?;
            }
            ingested.stats
        }
    };
    let manifest = manifest
        .map(|m| -> Result<ManifestResult> {
            let manifest = load_manifest(m)?;
            let actual = stats.valid as u64;
            let check = manifest.check(dataset, split, actual);
            Ok(ManifestResult {
                expected: manifest.expected(dataset, split),
                actual,
                ok: check.is_ok(),
                detail: check.err().map(|e| e.to_string()),
            })
        })
        .transpose()?;
    let failed = manifest.as_ref().is_some_and(|m| !m.ok);
    emit(
        None,
        &IngestReport {
            dataset,
            split,
            stats: &stats,
            manifest,
        },
    )?;
    if failed {
        eprintln!("manifest mismatch for {dataset}/{split}");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Deserialize)]
struct InputRow {
    id: String,
    input: String,
}

/// Reads generator inputs; ids default to 1-based line numbers.
fn read_inputs(path: &Path) -> Result<Vec<(String, InputSequence)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if line.trim_start().starts_with('{') {
            let row: InputRow =
                serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
            rows.push((row.id, InputSequence::new(row.input)));
        } else {
            let input = line.split('\t').next().unwrap_or(line);
            rows.push(((i + 1).to_string(), InputSequence::new(input)));
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn generate(
    config: &Config,
    backend: Backend,
    input: &Path,
    out: Option<&Path>,
    train: Option<&Path>,
    seed: Option<u64>,
    endpoint: Option<String>,
    timeout_secs: Option<f64>,
    max_length: Option<u32>,
) -> Result<ExitCode> {
    let g = &config.generate;
    let backend: Box<dyn GraphGenerator> = match backend {
        Backend::Copy => Box::new(CopyBaseline::new(seed.or(g.seed).unwrap_or(0))),
        Backend::Retrieval => {
            let train = train.ok_or_else(|| anyhow!("--train is required for the retrieval backend"))?;
            Box::new(RetrievalBaseline::new(&read_parallel_corpus(train)?)?)
        }
        Backend::Remote => {
            let endpoint = endpoint
                .or_else(|| g.endpoint.clone())
                .ok_or_else(|| anyhow!("--endpoint (or generate.endpoint in the config) is required"))?;
            let mut remote = RemoteConfig::new(endpoint);
            if let Some(t) = timeout_secs.or(g.timeout_secs) {
                remote.timeout_secs = t;
            }
            if let Some(m) = max_length.or(g.max_length) {
                remote.max_length = m;
            }
            Box::new(RemoteGenerator::new(remote))
        }
    };
    let rows = read_inputs(input)?;
    let inputs: Vec<InputSequence> = rows.iter().map(|(_, i)| i.clone()).collect();
    let run = generate_corpus(backend.as_ref(), &inputs);
    let lines: Vec<Value> = rows
        .iter()
        .zip(&run.results)
        .map(|((id, input), result)| match result {
            Ok(r) => json!({
                "id": id,
                "input": input.as_str(),
                "raw": r.raw,
                "valid": r.valid,
                "dot": r.graph.as_ref().map(serialize_dot),
                "repairs": r.repairs,
                "metadata": r.metadata,
            }),
            Err(e) => json!({
                "id": id,
                "input": input.as_str(),
                "valid": false,
                "dot": Value::Null,
                "error": e.to_string(),
            }),
        })
        .collect();
    write_jsonl(out, &lines)?;
    eprintln!(
        "generated {} graph(s), validity {}",
        lines.len(),
        run.validity_rate
            .map(|r| format!("{:.1}%", 100.0 * r))
            .unwrap_or_else(|| "n/a".into())
    );
    Ok(ExitCode::SUCCESS)
}

fn validate(input: &Path, repair: bool) -> Result<ExitCode> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let (graph, repairs) = if repair {
        let (g, log) = repair_dot(&text)?;
        (g, Some(log))
    } else {
        (parse_dot(&text)?, None)
    };
    let report = validate_schema(&graph);
    emit(
        None,
        &json!({
            "valid": report.valid,
            "node_count": report.node_count,
            "edge_count": report.edge_count,
            "violations": report.violations.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "repairs": repairs,
            "canonical": serialize_dot(&graph),
        }),
    )?;
    Ok(if report.valid { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn prune(input: &Path, hypothesis: Option<&str>) -> Result<ExitCode> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let chain = prune_to_strengthening_chain(&parse_dot(&text)?, hypothesis)?;
    emit(None, &chain)?;
    Ok(ExitCode::SUCCESS)
}

/// Generated graphs in order; unparseable outputs become empty graphs.
fn read_generated(path: &Path) -> Result<Vec<InfluenceGraph>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "dot"))
            .collect();
        files.sort();
        return files
            .iter()
            .map(|f| {
                let text = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
                Ok(gate(text).graph.unwrap_or_default())
            })
            .collect();
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let row: Value = serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
            Ok(match row.get("dot").and_then(Value::as_str) {
                Some(dot) => parse_dot(dot).unwrap_or_default(),
                None => InfluenceGraph::default(),
            })
        })
        .collect()
}

fn score(gen: &Path, reference: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let generated = read_generated(gen)?;
    let references = read_parallel_corpus(reference)?;
    if generated.len() != references.len() {
        bail!(
            "{} generated graph(s) but {} reference(s)",
            generated.len(),
            references.len()
        );
    }
    let pairs = generated
        .into_iter()
        .zip(&references)
        .enumerate()
        .map(|(i, (g, r))| {
            parse_dot(&r.output)
                .map(|r| (g, r))
                .with_context(|| format!("reference {} is not a valid graph", i + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    emit(out, &corpus_report(&pairs)?)?;
    Ok(ExitCode::SUCCESS)
}

fn stats(judgments: &Path, pool: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let pool = read_pool(pool)?;
    emit(out, &replay_stats(&pool, judgments)?)?;
    Ok(ExitCode::SUCCESS)
}

fn serve_cmd(
    config: &Config,
    pool: Option<PathBuf>,
    judges: Option<PathBuf>,
    log: Option<PathBuf>,
    addr: Option<String>,
    seed: Option<u64>,
) -> Result<ExitCode> {
    let c = &config.serve;
    let pool = pool.or_else(|| c.pool.clone()).ok_or_else(|| anyhow!("--pool is required"))?;
    let judges = judges.or_else(|| c.judges.clone()).ok_or_else(|| anyhow!("--judges is required"))?;
    let log = log.or_else(|| c.log.clone()).ok_or_else(|| anyhow!("--log is required"))?;
    let addr = addr.or_else(|| c.addr.clone()).unwrap_or_else(|| "127.0.0.1:8080".into());
    let seed = seed.or(c.seed).unwrap_or(0);

    let harness = Harness::open(HarnessOptions {
        pool: read_pool(&pool)?,
        judges: read_judges(&judges)?,
        seed,
        log,
    })?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("serving on http://{}", listener.local_addr()?);
        serve(listener, std::sync::Arc::new(harness), async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        anyhow::Ok(())
    })?;
    Ok(ExitCode::SUCCESS)
}

fn build_pool(correct: &Path, wrong: &Path, k: usize, seed: u64, out: &Path) -> Result<ExitCode> {
    let pool = build_eval_pool(&read_candidates(correct)?, &read_candidates(wrong)?, k, seed)?;
    write_lines(out, &pool)?;
    eprintln!("wrote {} pool items to {}", pool.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn synth(kind: SynthKind, n: usize, seed: u64, out: &Path) -> Result<ExitCode> {
    let source = match kind {
        SynthKind::Wiqa => {
            write_wiqa_records(out, &synthetic::wiqa_examples(n, seed))?;
            return Ok(ExitCode::SUCCESS);
        }
        SynthKind::Candidates => {
            write_lines(out, &synthetic::pool_candidates(n, seed))?;
            return Ok(ExitCode::SUCCESS);
        }
        SynthKind::Atomic => Source::Atomic,
        SynthKind::Social => Source::Social,
        SynthKind::Snli => Source::Snli,
    };
    write_defeasible_records(out, &synthetic::defeasible_queries(n, seed, source))?;
    Ok(ExitCode::SUCCESS)
}

fn encode(input: &Path, out: Option<&Path>, format: TemplateFormat) -> Result<ExitCode> {
    let ingested = ingest_defeasible(input)?;
    let rows: Vec<Value> = ingested
        .items
        .iter()
        .map(|q| json!({"id": q.id, "input": encode_defeasible_with(q, format).as_str()}))
        .collect();
    write_jsonl(out, &rows)?;
    Ok(ExitCode::SUCCESS)
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Ingest {
            dataset,
            split,
            input,
            out,
            manifest,
            format,
        } => ingest(dataset, split, &input, out.as_deref(), manifest.as_deref(), format.into()),
        Command::Encode { input, out, format } => encode(&input, out.as_deref(), format.into()),
        Command::Generate {
            backend,
            input,
            out,
            train,
            seed,
            endpoint,
            timeout_secs,
            max_length,
        } => generate(
            &config,
            backend,
            &input,
            out.as_deref(),
            train.as_deref(),
            seed,
            endpoint,
            timeout_secs,
            max_length,
        ),
        Command::Validate { input, repair } => validate(&input, repair),
        Command::Prune { input, hypothesis } => prune(&input, hypothesis.as_deref()),
        Command::Score { gen, reference, out } => score(&gen, &reference, out.as_deref()),
        Command::Stats { judgments, pool, out } => stats(&judgments, &pool, out.as_deref()),
        Command::Serve {
            pool,
            judges,
            log,
            addr,
            seed,
        } => serve_cmd(&config, pool, judges, log, addr, seed),
        Command::BuildPool {
            correct,
            wrong,
            k,
            seed,
            out,
        } => build_pool(&correct, &wrong, k, seed, &out),
        Command::Synth { kind, n, seed, out } => synth(kind, n, seed, &out),
    }
}
