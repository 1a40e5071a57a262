//! Input-sequence templates for the graph generator.
//!
//! The default layout carries four fields:
//!
//! ```text
//! Premise: <passage> | Situation : <situation> | Less : LESS <h> | More : MORE <h>
//! ```
//!
//! [`TemplateFormat::Compact`] is the older three-field layout
//! (`Premise: <T> | Update: <U> | less/ more: <H>`), kept for models trained on it.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dot::serialize_dot;
use crate::graph::{strip_leading_token, GraphError, InfluenceGraph, NodeRole};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("malformed input sequence: marker `{marker}` is {problem}")]
    Malformed { marker: &'static str, problem: &'static str },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateFormat {
    #[default]
    Situation,
    Compact,
}

impl TemplateFormat {
    fn markers(self) -> &'static [&'static str] {
        match self {
            TemplateFormat::Situation => &["Premise:", " | Situation :", " | Less :", " | More :"],
            TemplateFormat::Compact => &["Premise:", " | Update:", " | less/ more:"],
        }
    }

    fn marker_names(self) -> &'static [&'static str] {
        match self {
            TemplateFormat::Situation => &["Premise", "Situation", "Less", "More"],
            TemplateFormat::Compact => &["Premise", "Update", "less/ more"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateEffect {
    Intensifies,
    Attenuates,
}

impl UpdateEffect {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "intensifies" | "intensifier" | "strengthener" => Some(UpdateEffect::Intensifies),
            "attenuates" | "attenuator" | "weakener" => Some(UpdateEffect::Attenuates),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            UpdateEffect::Intensifies => UpdateEffect::Attenuates,
            UpdateEffect::Attenuates => UpdateEffect::Intensifies,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Snli,
    Social,
    Atomic,
}

impl Source {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "snli" => Some(Source::Snli),
            "social" => Some(Source::Social),
            "atomic" => Some(Source::Atomic),
            _ => None,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Snli => "snli",
            Source::Social => "social",
            Source::Atomic => "atomic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WiqaExample {
    pub id: String,
    pub passage: String,
    pub graph: InfluenceGraph,
}

/// One defeasible inference instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefeasibleQuery {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub update: String,
    pub gold_label: UpdateEffect,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputSequence(String);

impl InputSequence {
    /// Wraps text without checking it; use [`decode_input`] to validate.
    pub fn new(text: impl Into<String>) -> Self {
        InputSequence(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for InputSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An (input sequence, DOT output) training pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqPair {
    pub input: InputSequence,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedInput {
    pub premise: String,
    pub situation: String,
    /// Attenuated hypothesis, `LESS` prefix included.
    pub less: String,
    /// Strengthened hypothesis, `MORE` prefix included.
    pub more: String,
}

impl DecodedInput {
    /// The hypothesis text with the `MORE` prefix removed.
    pub fn hypothesis(&self) -> &str {
        strip_leading_token(&self.more, "more")
    }
}

fn render(format: TemplateFormat, fields: &[&str]) -> InputSequence {
    let mut out = String::new();
    for (marker, field) in format.markers().iter().zip(fields) {
        out.push_str(marker);
        out.push(' ');
        out.push_str(&field.split_whitespace().collect::<Vec<_>>().join(" "));
    }
    InputSequence(out)
}

pub fn encode_wiqa(ex: &WiqaExample) -> Result<SeqPair, TemplateError> {
    encode_wiqa_with(ex, TemplateFormat::Situation)
}

pub fn encode_wiqa_with(ex: &WiqaExample, format: TemplateFormat) -> Result<SeqPair, TemplateError> {
    let label = |role| ex.graph.label(role).ok_or(GraphError::MissingNode(role));
    let situation = label(NodeRole::Situation)?;
    let more = label(NodeRole::HypothesisPlus)?;
    let less = label(NodeRole::HypothesisMinus)?;
    let input = match format {
        TemplateFormat::Situation => render(format, &[&ex.passage, situation, less, more]),
        TemplateFormat::Compact => render(format, &[&ex.passage, situation, strip_leading_token(more, "more")]),
    };
    Ok(SeqPair {
        input,
        output: serialize_dot(&ex.graph),
    })
}

pub fn encode_defeasible(q: &DefeasibleQuery) -> InputSequence {
    encode_defeasible_with(q, TemplateFormat::Situation)
}

pub fn encode_defeasible_with(q: &DefeasibleQuery, format: TemplateFormat) -> InputSequence {
    let hypothesis = q.hypothesis.trim();
    match format {
        TemplateFormat::Situation => render(
            format,
            &[
                &q.premise,
                &q.update,
                &format!("LESS {hypothesis}"),
                &format!("MORE {hypothesis}"),
            ],
        ),
        TemplateFormat::Compact => render(format, &[&q.premise, &q.update, hypothesis]),
    }
}

pub fn decode_input(s: &InputSequence) -> Result<DecodedInput, TemplateError> {
    decode_input_with(s, TemplateFormat::Situation)
}

/// Splits an input sequence into its fields.
///
/// Markers are located left to right, each search starting after the
/// previous marker, so a payload containing ` | ` stays intact as long as it
/// does not itself contain a later marker.
pub fn decode_input_with(s: &InputSequence, format: TemplateFormat) -> Result<DecodedInput, TemplateError> {
    let text = s.as_str().trim();
    let markers = format.markers();
    let names = format.marker_names();

    if !text.starts_with(markers[0]) {
        return Err(TemplateError::Malformed {
            marker: names[0],
            problem: "missing at the start",
        });
    }
    let mut bounds = vec![(0, markers[0].len())];
    let mut from = markers[0].len();
    for (i, marker) in markers.iter().enumerate().skip(1) {
        let Some(off) = text[from..].find(marker) else {
            return Err(TemplateError::Malformed {
                marker: names[i],
                problem: "missing",
            });
        };
        let start = from + off;
        bounds.push((start, start + marker.len()));
        from = start + marker.len();
    }
    let last = markers[markers.len() - 1];
    if text[from..].contains(last) {
        return Err(TemplateError::Malformed {
            marker: names[markers.len() - 1],
            problem: "duplicated",
        });
    }

    let fields: Vec<String> = bounds
        .iter()
        .enumerate()
        .map(|(i, &(_, content_start))| {
            let end = bounds.get(i + 1).map_or(text.len(), |b| b.0);
            text[content_start..end].trim().to_string()
        })
        .collect();

    Ok(match format {
        TemplateFormat::Situation => DecodedInput {
            premise: fields[0].clone(),
            situation: fields[1].clone(),
            less: fields[2].clone(),
            more: fields[3].clone(),
        },
        TemplateFormat::Compact => DecodedInput {
            premise: fields[0].clone(),
            situation: fields[1].clone(),
            less: format!("LESS {}", fields[2]),
            more: format!("MORE {}", fields[2]),
        },
    })
}
