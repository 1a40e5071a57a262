//! Parser and serializer for the influence-graph DOT dialect.
//!
//! ```text
//! graph     = "strict" "digraph" "{" { statement [ ";" ] } "}"
//! statement = node "->" node "[" "label" "=" polarity "]"
//! node      = '"' tag ":" label '"'
//! tag       = "C+" | "C-" | "S" | "S-" | "M+" | "M-" | "H+" | "H-"
//! polarity  = "helps" | "hurts"          (bare or double-quoted)
//! ```
//!
//! The parser tolerates any whitespace between tokens and around the `:`
//! inside node literals. The serializer is strict: one space on each side of
//! `:`, one space after every `;`, edges in canonical order.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{canonical_index, GraphError, InfluenceGraph, NodeRole, Polarity};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DotError {
    #[error("syntax error at byte {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: usize,
        expected: String,
        found: String,
    },
    #[error("unknown role `{tag}` at byte {pos}")]
    UnknownRole { pos: usize, tag: String },
    #[error("invalid polarity `{value}` at byte {pos}")]
    InvalidPolarity { pos: usize, value: String },
    #[error("conflicting labels for {role}: `{first}` vs `{second}`")]
    ConflictingLabel {
        role: NodeRole,
        first: String,
        second: String,
    },
    #[error("statement at byte {pos}: {source}")]
    Graph { pos: usize, source: GraphError },
    #[error("no digraph block found")]
    NoDigraph,
}

/// Parses the dialect strictly: the first problem is an error.
pub fn parse_dot(text: &str) -> Result<InfluenceGraph, DotError> {
    let mut cur = Cursor::new(text);
    cur.skip_ws();
    cur.expect_word("strict")?;
    cur.skip_ws();
    cur.expect_word("digraph")?;
    cur.skip_ws();
    cur.expect_char('{')?;

    let mut g = InfluenceGraph::new();
    loop {
        cur.skip_ws();
        match cur.peek() {
            Some('}') => {
                cur.bump();
                break;
            }
            None => return Err(cur.syntax("`}`")),
            _ => {}
        }
        let stmt = parse_statement(&mut cur)?;
        let polarity = stmt
            .polarity
            .parse::<Polarity>()
            .map_err(|_| DotError::InvalidPolarity {
                pos: stmt.polarity_pos,
                value: stmt.polarity.clone(),
            })?;
        apply_strict(&mut g, &stmt, polarity)?;
        cur.skip_ws();
        if cur.peek() == Some(';') {
            cur.bump();
        }
    }
    cur.skip_ws();
    if cur.peek().is_some() {
        return Err(cur.syntax("end of input"));
    }
    Ok(g)
}

fn apply_strict(g: &mut InfluenceGraph, stmt: &Statement, polarity: Polarity) -> Result<(), DotError> {
    for node in [&stmt.src, &stmt.dst] {
        g.insert_node(node.role, &node.label).map_err(|e| match e {
            GraphError::ConflictingLabel {
                role,
                existing,
                requested,
            } => DotError::ConflictingLabel {
                role,
                first: existing,
                second: requested,
            },
            other => DotError::Graph {
                pos: node.pos,
                source: other,
            },
        })?;
    }
    // `strict` merges a repeated edge; a repeat with the other polarity is an error.
    if let Some(existing) = g.edge(stmt.src.role, stmt.dst.role) {
        if existing.polarity == polarity {
            return Ok(());
        }
    }
    g.add_edge(stmt.src.role, stmt.dst.role, polarity)
        .map_err(|source| DotError::Graph { pos: stmt.pos, source })
}

/// Renders a graph in canonical form.
///
/// Canonical role pairs come first in the fixed order, then any other edges
/// in insertion order. Nodes without edges have no DOT form and are not
/// emitted.
pub fn serialize_dot(g: &InfluenceGraph) -> String {
    let mut edges: Vec<_> = g.edges().iter().enumerate().collect();
    edges.sort_by_key(|(i, e)| (canonical_index(e.src, e.dst).unwrap_or(usize::MAX), *i));

    let mut out = String::from("strict digraph { ");
    for (_, e) in edges {
        let src = g.label(e.src).expect("edge endpoints always have nodes");
        let dst = g.label(e.dst).expect("edge endpoints always have nodes");
        let _ = write!(
            out,
            "\"{} : {}\" -> \"{} : {}\" [label={}]; ",
            e.src, src, e.dst, dst, e.polarity
        );
    }
    out.push('}');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum RepairAction {
    /// Text before the `digraph` keyword (including a missing `strict`).
    SkippedPreamble { text: String },
    MissingStrict,
    DroppedStatement {
        index: usize,
        text: String,
        reason: String,
    },
    CoercedPolarity {
        index: usize,
        from: String,
        to: Polarity,
    },
    KeptFirstLabel {
        role: NodeRole,
        kept: String,
        discarded: String,
    },
    MissingClosingBrace,
    SkippedTrailing { text: String },
    Unrecoverable { reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairLog {
    pub actions: Vec<RepairAction>,
}

impl RepairLog {
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn drops(&self) -> usize {
        self.count(|a| matches!(a, RepairAction::DroppedStatement { .. }))
    }

    pub fn coercions(&self) -> usize {
        self.count(|a| matches!(a, RepairAction::CoercedPolarity { .. }))
    }

    pub fn is_unrecoverable(&self) -> bool {
        self.count(|a| matches!(a, RepairAction::Unrecoverable { .. })) > 0
    }

    fn count(&self, f: impl Fn(&RepairAction) -> bool) -> usize {
        self.actions.iter().filter(|a| f(a)).count()
    }

    fn push(&mut self, action: RepairAction) {
        self.actions.push(action);
    }
}

fn coerce_polarity(raw: &str) -> Option<Polarity> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "helps" | "help" | "positive" => Some(Polarity::Helps),
        "hurts" | "hurt" | "negative" => Some(Polarity::Hurts),
        _ => None,
    }
}

/// Best-effort parse for output of imperfect generators.
///
/// Unparseable statements are dropped, polarity synonyms are coerced, and a
/// role that appears with two labels keeps the first. Every change is
/// recorded. On input that [`parse_dot`] accepts, the result is the same
/// graph with an empty log. Fails only when there is no `digraph {` block.
pub fn repair_dot(text: &str) -> Result<(InfluenceGraph, RepairLog), DotError> {
    let mut log = RepairLog::default();
    let Some(kw) = find_keyword(text, "digraph") else {
        return Err(DotError::NoDigraph);
    };
    let preamble = text[..kw].trim();
    match preamble.strip_suffix("strict").map(str::trim) {
        Some("") => {}
        Some(rest) => {
            log.push(RepairAction::SkippedPreamble { text: rest.to_string() });
        }
        None => {
            if !preamble.is_empty() {
                log.push(RepairAction::SkippedPreamble {
                    text: preamble.to_string(),
                });
            }
            log.push(RepairAction::MissingStrict);
        }
    }

    let mut cur = Cursor::new(text);
    cur.pos = kw + "digraph".len();
    cur.skip_ws();
    // Tolerate a graph id between `digraph` and `{`.
    while let Some(c) = cur.peek() {
        if c == '{' {
            break;
        }
        cur.bump();
    }
    if cur.peek() != Some('{') {
        return Err(DotError::NoDigraph);
    }
    cur.bump();

    let mut g = InfluenceGraph::new();
    let mut index = 0usize;
    loop {
        cur.skip_ws();
        match cur.peek() {
            Some('}') => {
                cur.bump();
                break;
            }
            Some(';') => {
                cur.bump();
                continue;
            }
            None => {
                log.push(RepairAction::MissingClosingBrace);
                break;
            }
            _ => {}
        }
        let start = cur.pos;
        match parse_statement(&mut cur) {
            Ok(stmt) => apply_lenient(&mut g, &stmt, index, &text[start..cur.pos], &mut log),
            Err(err) => {
                cur.pos = start;
                cur.skip_statement();
                log.push(RepairAction::DroppedStatement {
                    index,
                    text: text[start..cur.pos].trim().to_string(),
                    reason: err.to_string(),
                });
            }
        }
        index += 1;
        cur.skip_ws();
        if cur.peek() == Some(';') {
            cur.bump();
        }
    }
    let trailing = text[cur.pos.min(text.len())..].trim();
    if !trailing.is_empty() {
        log.push(RepairAction::SkippedTrailing {
            text: trailing.to_string(),
        });
    }
    Ok((g, log))
}

fn apply_lenient(g: &mut InfluenceGraph, stmt: &Statement, index: usize, raw: &str, log: &mut RepairLog) {
    let drop = |log: &mut RepairLog, reason: String| {
        log.push(RepairAction::DroppedStatement {
            index,
            text: raw.trim().to_string(),
            reason,
        });
    };

    let polarity = match stmt.polarity.parse::<Polarity>() {
        Ok(p) => p,
        Err(_) => match coerce_polarity(&stmt.polarity) {
            Some(p) => {
                log.push(RepairAction::CoercedPolarity {
                    index,
                    from: stmt.polarity.clone(),
                    to: p,
                });
                p
            }
            None => return drop(log, format!("invalid polarity `{}`", stmt.polarity)),
        },
    };
    if stmt.src.role == stmt.dst.role {
        return drop(log, format!("self loop on {}", stmt.src.role));
    }
    if let Some(existing) = g.edge(stmt.src.role, stmt.dst.role) {
        if existing.polarity != polarity {
            return drop(log, format!("duplicate edge {} -> {}", stmt.src.role, stmt.dst.role));
        }
    }
    for node in [&stmt.src, &stmt.dst] {
        match g.label(node.role) {
            Some(kept) if kept != node.label => log.push(RepairAction::KeptFirstLabel {
                role: node.role,
                kept: kept.to_string(),
                discarded: node.label.clone(),
            }),
            Some(_) => {}
            None => g
                .insert_node(node.role, &node.label)
                .expect("labels are validated while parsing"),
        }
    }
    if g.edge(stmt.src.role, stmt.dst.role).is_none() {
        g.add_edge(stmt.src.role, stmt.dst.role, polarity)
            .expect("endpoints inserted and pair checked above");
    }
}

/// Finds `word` outside of double-quoted text.
fn find_keyword(text: &str, word: &str) -> Option<usize> {
    let mut in_quotes = false;
    for (i, c) in text.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            _ if !in_quotes && text[i..].starts_with(word) => return Some(i),
            _ => {}
        }
    }
    None
}

struct NodeLit {
    role: NodeRole,
    label: String,
    pos: usize,
}

struct Statement {
    pos: usize,
    src: NodeLit,
    dst: NodeLit,
    polarity: String,
    polarity_pos: usize,
}

fn parse_statement(cur: &mut Cursor<'_>) -> Result<Statement, DotError> {
    let pos = cur.pos;
    let src = parse_node(cur)?;
    cur.skip_ws();
    cur.expect_str("->")?;
    cur.skip_ws();
    let dst = parse_node(cur)?;
    cur.skip_ws();
    cur.expect_char('[')?;
    cur.skip_ws();
    cur.expect_word("label")?;
    cur.skip_ws();
    cur.expect_char('=')?;
    cur.skip_ws();
    let polarity_pos = cur.pos;
    let polarity = if cur.peek() == Some('"') {
        cur.quoted()?
    } else {
        cur.ident()?
    };
    cur.skip_ws();
    cur.expect_char(']')?;
    Ok(Statement {
        pos,
        src,
        dst,
        polarity,
        polarity_pos,
    })
}

fn parse_node(cur: &mut Cursor<'_>) -> Result<NodeLit, DotError> {
    let pos = cur.pos;
    let body = cur.quoted()?;
    let Some((tag, label)) = body.split_once(':') else {
        return Err(DotError::Syntax {
            pos,
            expected: "`TAG : label` node literal".into(),
            found: format!("\"{body}\""),
        });
    };
    let role = NodeRole::from_tag(tag).ok_or_else(|| DotError::UnknownRole {
        pos,
        tag: tag.trim().to_string(),
    })?;
    let label = label.trim().to_string();
    crate::graph::InfluenceNode::new(role, label.as_str()).map_err(|source| DotError::Graph { pos, source })?;
    Ok(NodeLit { role, label, pos })
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) {
        if let Some(c) = self.peek() {
            self.pos += c.len_utf8();
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn syntax(&self, expected: &str) -> DotError {
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(_) => {
                let snippet: String = self.rest().chars().take(12).collect();
                format!("`{snippet}`")
            }
        };
        DotError::Syntax {
            pos: self.pos,
            expected: expected.to_string(),
            found,
        }
    }

    fn expect_char(&mut self, c: char) -> Result<(), DotError> {
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(&format!("`{c}`")))
        }
    }

    fn expect_str(&mut self, s: &str) -> Result<(), DotError> {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            Ok(())
        } else {
            Err(self.syntax(&format!("`{s}`")))
        }
    }

    fn expect_word(&mut self, word: &str) -> Result<(), DotError> {
        let rest = self.rest();
        let boundary = rest[word.len().min(rest.len())..]
            .chars()
            .next()
            .is_none_or(|c| !is_ident_char(c));
        if rest.starts_with(word) && boundary {
            self.pos += word.len();
            Ok(())
        } else {
            Err(self.syntax(&format!("`{word}`")))
        }
    }

    fn ident(&mut self) -> Result<String, DotError> {
        let start = self.pos;
        while self.peek().is_some_and(is_ident_char) {
            self.bump();
        }
        if self.pos == start {
            return Err(self.syntax("identifier"));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    /// Reads a double-quoted string. The dialect has no escapes.
    fn quoted(&mut self) -> Result<String, DotError> {
        self.expect_char('"')?;
        let start = self.pos;
        match self.rest().find('"') {
            Some(len) => {
                self.pos += len + 1;
                Ok(self.src[start..start + len].to_string())
            }
            None => {
                self.pos = start - 1;
                Err(self.syntax("closing `\"`"))
            }
        }
    }

    /// Advances to just before the next `;` or `}` outside quotes.
    fn skip_statement(&mut self) {
        let mut in_quotes = false;
        while let Some(c) = self.peek() {
            match c {
                '"' => in_quotes = !in_quotes,
                ';' | '}' if !in_quotes => return,
                _ => {}
            }
            self.bump();
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}
