//! Influence-graph domain model.
//!
//! An influence graph has up to eight role-tagged nodes (two contextualizers,
//! the situation and its negation, two mediators, and the two hypothesis
//! outcomes) connected by `helps` / `hurts` edges. Construction only enforces
//! what every graph must satisfy (well-formed labels, no self loops, no
//! duplicate role pairs, no dangling endpoints). Completeness and polarity
//! consistency are reported by [`validate_schema`], so the metrics can still
//! score malformed generations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The closed set of role tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeRole {
    #[serde(rename = "C+")]
    ContextPlus,
    #[serde(rename = "C-")]
    ContextMinus,
    #[serde(rename = "S")]
    Situation,
    #[serde(rename = "S-")]
    SituationMinus,
    #[serde(rename = "M+")]
    MediatorPlus,
    #[serde(rename = "M-")]
    MediatorMinus,
    #[serde(rename = "H+")]
    HypothesisPlus,
    #[serde(rename = "H-")]
    HypothesisMinus,
}

impl NodeRole {
    pub const ALL: [NodeRole; 8] = [
        NodeRole::ContextPlus,
        NodeRole::ContextMinus,
        NodeRole::Situation,
        NodeRole::SituationMinus,
        NodeRole::MediatorPlus,
        NodeRole::MediatorMinus,
        NodeRole::HypothesisPlus,
        NodeRole::HypothesisMinus,
    ];

    /// The ASCII tag used in DOT node literals.
    pub fn tag(self) -> &'static str {
        match self {
            NodeRole::ContextPlus => "C+",
            NodeRole::ContextMinus => "C-",
            NodeRole::Situation => "S",
            NodeRole::SituationMinus => "S-",
            NodeRole::MediatorPlus => "M+",
            NodeRole::MediatorMinus => "M-",
            NodeRole::HypothesisPlus => "H+",
            NodeRole::HypothesisMinus => "H-",
        }
    }

    /// Parses a tag. Accepts the Unicode minus sign as well as `-`.
    pub fn from_tag(tag: &str) -> Option<NodeRole> {
        let tag = tag.trim().replace('\u{2212}', "-");
        NodeRole::ALL.into_iter().find(|r| r.tag() == tag)
    }
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for NodeRole {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeRole::from_tag(s).ok_or_else(|| GraphError::UnknownRole(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Helps,
    Hurts,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Helps => "helps",
            Polarity::Hurts => "hurts",
        }
    }

    pub fn flipped(self) -> Polarity {
        match self {
            Polarity::Helps => Polarity::Hurts,
            Polarity::Hurts => Polarity::Helps,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "helps" => Ok(Polarity::Helps),
            "hurts" => Ok(Polarity::Hurts),
            other => Err(GraphError::InvalidPolarity(other.to_string())),
        }
    }
}

/// The nine role pairs of a complete graph, in canonical emission order.
pub const CANONICAL_EDGES: [(NodeRole, NodeRole); 9] = [
    (NodeRole::ContextPlus, NodeRole::Situation),
    (NodeRole::ContextMinus, NodeRole::Situation),
    (NodeRole::Situation, NodeRole::MediatorMinus),
    (NodeRole::Situation, NodeRole::MediatorPlus),
    (NodeRole::SituationMinus, NodeRole::MediatorPlus),
    (NodeRole::MediatorMinus, NodeRole::HypothesisMinus),
    (NodeRole::MediatorMinus, NodeRole::HypothesisPlus),
    (NodeRole::MediatorPlus, NodeRole::HypothesisPlus),
    (NodeRole::MediatorPlus, NodeRole::HypothesisMinus),
];

/// Position of a role pair in [`CANONICAL_EDGES`], if canonical.
pub fn canonical_index(src: NodeRole, dst: NodeRole) -> Option<usize> {
    CANONICAL_EDGES.iter().position(|&p| p == (src, dst))
}

/// Mediator-to-hypothesis polarity forced by the +/- signs: a mediator
/// helps the hypothesis outcome of the same sign and hurts the other.
pub fn required_polarity(src: NodeRole, dst: NodeRole) -> Option<Polarity> {
    use NodeRole::*;
    match (src, dst) {
        (MediatorPlus, HypothesisPlus) | (MediatorMinus, HypothesisMinus) => Some(Polarity::Helps),
        (MediatorPlus, HypothesisMinus) | (MediatorMinus, HypothesisPlus) => Some(Polarity::Hurts),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown role tag `{0}`")]
    UnknownRole(String),
    #[error("invalid polarity `{0}` (expected helps or hurts)")]
    InvalidPolarity(String),
    #[error("invalid label for {role}: {reason}")]
    InvalidLabel { role: NodeRole, reason: &'static str },
    #[error("role {role} already has label `{existing}`, cannot relabel to `{requested}`")]
    ConflictingLabel {
        role: NodeRole,
        existing: String,
        requested: String,
    },
    #[error("self loop on {0}")]
    SelfLoop(NodeRole),
    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: NodeRole, dst: NodeRole },
    #[error("edge {src} -> {dst} references a role with no node")]
    DanglingEdge { src: NodeRole, dst: NodeRole },
    #[error("missing node {0}")]
    MissingNode(NodeRole),
    #[error("graph is not schema-valid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfluenceNode {
    pub role: NodeRole,
    label: String,
}

impl InfluenceNode {
    pub fn new(role: NodeRole, label: impl Into<String>) -> Result<Self, GraphError> {
        let label = label.into().trim().to_string();
        check_label(role, &label)?;
        Ok(InfluenceNode { role, label })
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

fn check_label(role: NodeRole, label: &str) -> Result<(), GraphError> {
    let reason = if label.is_empty() {
        "label is empty"
    } else if label.contains('"') {
        "label contains a double quote"
    } else if label.contains(['\n', '\r']) {
        "label contains a newline"
    } else if label.contains('\t') {
        "label contains a tab"
    } else {
        return Ok(());
    };
    Err(GraphError::InvalidLabel { role, reason })
}

/// Rewrites arbitrary text into something usable as a node label: quotes
/// become apostrophes and control whitespace becomes spaces.
pub fn sanitize_label(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .map(|c| match c {
            '"' => '\'',
            c if c.is_control() => ' ',
            c => c,
        })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolarityEdge {
    pub src: NodeRole,
    pub dst: NodeRole,
    pub polarity: Polarity,
}

/// Role-tagged nodes plus polarity edges.
///
/// Equality is structural: two graphs are equal when they have the same
/// nodes and the same edge set, whatever order the edges were added in.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InfluenceGraph {
    nodes: BTreeMap<NodeRole, InfluenceNode>,
    edges: Vec<PolarityEdge>,
}

impl PartialEq for InfluenceGraph {
    fn eq(&self, other: &Self) -> bool {
        if self.nodes != other.nodes || self.edges.len() != other.edges.len() {
            return false;
        }
        let mine: BTreeSet<_> = self.edges.iter().map(|e| (e.src, e.dst, e.polarity)).collect();
        let theirs: BTreeSet<_> = other.edges.iter().map(|e| (e.src, e.dst, e.polarity)).collect();
        mine == theirs
    }
}

impl Eq for InfluenceGraph {}

impl InfluenceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a node, or confirms an existing one with the same label.
    pub fn insert_node(&mut self, role: NodeRole, label: &str) -> Result<(), GraphError> {
        let node = InfluenceNode::new(role, label)?;
        match self.nodes.get(&role) {
            Some(existing) if existing.label == node.label => Ok(()),
            Some(existing) => Err(GraphError::ConflictingLabel {
                role,
                existing: existing.label.clone(),
                requested: node.label,
            }),
            None => {
                self.nodes.insert(role, node);
                Ok(())
            }
        }
    }

    /// Replaces the label of a role, creating the node if absent.
    pub fn set_label(&mut self, role: NodeRole, label: &str) -> Result<(), GraphError> {
        let node = InfluenceNode::new(role, label)?;
        self.nodes.insert(role, node);
        Ok(())
    }

    pub fn add_edge(&mut self, src: NodeRole, dst: NodeRole, polarity: Polarity) -> Result<(), GraphError> {
        if src == dst {
            return Err(GraphError::SelfLoop(src));
        }
        if !self.nodes.contains_key(&src) || !self.nodes.contains_key(&dst) {
            return Err(GraphError::DanglingEdge { src, dst });
        }
        if self.edge(src, dst).is_some() {
            return Err(GraphError::DuplicateEdge { src, dst });
        }
        self.edges.push(PolarityEdge { src, dst, polarity });
        Ok(())
    }

    /// Convenience for tests and fixtures: inserts both endpoint nodes, then the edge.
    pub fn connect(
        &mut self,
        (src, src_label): (NodeRole, &str),
        (dst, dst_label): (NodeRole, &str),
        polarity: Polarity,
    ) -> Result<(), GraphError> {
        self.insert_node(src, src_label)?;
        self.insert_node(dst, dst_label)?;
        self.add_edge(src, dst, polarity)
    }

    pub fn node(&self, role: NodeRole) -> Option<&InfluenceNode> {
        self.nodes.get(&role)
    }

    pub fn label(&self, role: NodeRole) -> Option<&str> {
        self.nodes.get(&role).map(|n| n.label.as_str())
    }

    pub fn nodes(&self) -> impl Iterator<Item = &InfluenceNode> {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[PolarityEdge] {
        &self.edges
    }

    pub fn edge(&self, src: NodeRole, dst: NodeRole) -> Option<&PolarityEdge> {
        self.edges.iter().find(|e| e.src == src && e.dst == dst)
    }

    /// Removes the edge for a role pair, returning it.
    pub fn remove_edge(&mut self, src: NodeRole, dst: NodeRole) -> Option<PolarityEdge> {
        let idx = self.edges.iter().position(|e| e.src == src && e.dst == dst)?;
        Some(self.edges.remove(idx))
    }

    /// Sets the polarity of an existing edge.
    pub fn set_polarity(&mut self, src: NodeRole, dst: NodeRole, polarity: Polarity) -> bool {
        match self.edges.iter_mut().find(|e| e.src == src && e.dst == dst) {
            Some(e) => {
                e.polarity = polarity;
                true
            }
            None => false,
        }
    }

    /// All eight roles present and all nine canonical role pairs connected.
    pub fn is_complete(&self) -> bool {
        self.nodes.len() == NodeRole::ALL.len()
            && CANONICAL_EDGES.iter().all(|&(s, d)| self.edge(s, d).is_some())
    }

    /// Roles that have a node but no incident edge.
    pub fn isolated_roles(&self) -> Vec<NodeRole> {
        self.nodes
            .keys()
            .copied()
            .filter(|&r| !self.edges.iter().any(|e| e.src == r || e.dst == r))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    MissingRole { role: NodeRole },
    MissingEdge { src: NodeRole, dst: NodeRole },
    NonCanonicalPair { src: NodeRole, dst: NodeRole },
    PolarityInconsistency {
        src: NodeRole,
        dst: NodeRole,
        expected: Polarity,
        found: Polarity,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingRole { role } => write!(f, "missing role {role}"),
            Violation::MissingEdge { src, dst } => write!(f, "missing edge {src} -> {dst}"),
            Violation::NonCanonicalPair { src, dst } => {
                write!(f, "non-canonical edge {src} -> {dst}")
            }
            Violation::PolarityInconsistency {
                src,
                dst,
                expected,
                found,
            } => write!(f, "edge {src} -> {dst} is {found}, expected {expected}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub node_count: usize,
    pub edge_count: usize,
    pub violations: Vec<Violation>,
}

/// Checks a graph against the complete eight-node, nine-edge shape.
///
/// A canonical edge whose endpoint role is missing is covered by the
/// missing-role violation and is not reported again as a missing edge.
pub fn validate_schema(g: &InfluenceGraph) -> ValidationReport {
    let mut violations = Vec::new();
    for role in NodeRole::ALL {
        if g.node(role).is_none() {
            violations.push(Violation::MissingRole { role });
        }
    }
    for &(src, dst) in &CANONICAL_EDGES {
        if g.node(src).is_some() && g.node(dst).is_some() && g.edge(src, dst).is_none() {
            violations.push(Violation::MissingEdge { src, dst });
        }
    }
    for e in g.edges() {
        if canonical_index(e.src, e.dst).is_none() {
            violations.push(Violation::NonCanonicalPair { src: e.src, dst: e.dst });
        } else if let Some(expected) = required_polarity(e.src, e.dst) {
            if expected != e.polarity {
                violations.push(Violation::PolarityInconsistency {
                    src: e.src,
                    dst: e.dst,
                    expected,
                    found: e.polarity,
                });
            }
        }
    }
    ValidationReport {
        valid: violations.is_empty(),
        node_count: g.node_count(),
        edge_count: g.edges().len(),
        violations,
    }
}

/// Label-free edge signature of a graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StructureClass {
    signature: Vec<(NodeRole, NodeRole, Polarity)>,
}

impl StructureClass {
    pub fn from_polarities(polarities: &[Polarity; 9]) -> Self {
        let mut signature: Vec<_> = CANONICAL_EDGES
            .iter()
            .zip(polarities)
            .map(|(&(s, d), &p)| (s, d, p))
            .collect();
        signature.sort();
        StructureClass { signature }
    }

    pub fn signature(&self) -> &[(NodeRole, NodeRole, Polarity)] {
        &self.signature
    }

    pub fn contains(&self, src: NodeRole, dst: NodeRole, polarity: Polarity) -> bool {
        self.signature.contains(&(src, dst, polarity))
    }

    /// Polarities in canonical edge order. Only meaningful for classes of
    /// complete graphs.
    pub fn polarities(&self) -> Option<[Polarity; 9]> {
        let mut out = [Polarity::Helps; 9];
        let mut seen = 0;
        for &(s, d, p) in &self.signature {
            let idx = canonical_index(s, d)?;
            out[idx] = p;
            seen += 1;
        }
        (seen == 9).then_some(out)
    }
}

pub fn structure_class(g: &InfluenceGraph) -> Result<StructureClass, GraphError> {
    let report = validate_schema(g);
    if !report.valid {
        let first = report.violations.first().map(ToString::to_string).unwrap_or_default();
        return Err(GraphError::Invalid(format!(
            "{} violation(s), first: {first}",
            report.violations.len()
        )));
    }
    let mut signature: Vec<_> = g.edges().iter().map(|e| (e.src, e.dst, e.polarity)).collect();
    signature.sort();
    Ok(StructureClass { signature })
}

/// Polarity rules that pick out the structures a well-formed influence
/// graph can take, over the canonical skeleton:
///
/// * mediator-to-hypothesis edges follow [`required_polarity`];
/// * the two contextualizers act on the situation with opposite polarity;
/// * the situation helps `M+` and hurts `M-`;
/// * the negated situation acts on `M+` opposite to the situation.
///
/// The only remaining degree of freedom is the contextualizer polarity.
pub fn is_structurally_consistent(polarities: &[Polarity; 9]) -> bool {
    use NodeRole::*;
    let at = |s, d| polarities[canonical_index(s, d).expect("canonical pair")];
    let mediators_ok = CANONICAL_EDGES
        .iter()
        .zip(polarities)
        .all(|(&(s, d), &p)| required_polarity(s, d).is_none_or(|req| req == p));
    mediators_ok
        && at(ContextPlus, Situation) != at(ContextMinus, Situation)
        && at(Situation, MediatorPlus) == Polarity::Helps
        && at(Situation, MediatorMinus) == Polarity::Hurts
        && at(SituationMinus, MediatorPlus) != at(Situation, MediatorPlus)
}

/// Exhaustively enumerates all 2^9 polarity assignments over the canonical
/// skeleton and returns the distinct classes that pass
/// [`is_structurally_consistent`], sorted.
pub fn enumerate_structure_classes() -> Vec<StructureClass> {
    let mut classes = BTreeSet::new();
    for mask in 0u32..(1 << 9) {
        let mut polarities = [Polarity::Helps; 9];
        for (i, p) in polarities.iter_mut().enumerate() {
            if mask & (1 << i) != 0 {
                *p = Polarity::Hurts;
            }
        }
        if is_structurally_consistent(&polarities) {
            classes.insert(StructureClass::from_polarities(&polarities));
        }
    }
    classes.into_iter().collect()
}

/// Builds a complete graph from eight labels (in [`NodeRole::ALL`] order)
/// and nine polarities (in [`CANONICAL_EDGES`] order).
pub fn complete_graph(labels: [&str; 8], polarities: &[Polarity; 9]) -> Result<InfluenceGraph, GraphError> {
    let mut g = InfluenceGraph::new();
    for (role, label) in NodeRole::ALL.into_iter().zip(labels) {
        g.insert_node(role, label)?;
    }
    for (&(s, d), &p) in CANONICAL_EDGES.iter().zip(polarities) {
        g.add_edge(s, d, p)?;
    }
    Ok(g)
}

/// Removes any leading `TAG :` prefixes (as written in DOT node literals).
pub fn strip_role_prefix(label: &str) -> &str {
    let mut rest = label.trim();
    loop {
        let Some((head, tail)) = rest.split_once(':') else {
            return rest;
        };
        if NodeRole::from_tag(head).is_none() {
            return rest;
        }
        rest = tail.trim_start();
    }
}

/// The pruned four-node path shown to human judges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainGraph {
    pub contextualizer: String,
    pub situation: String,
    pub mediator: String,
    pub hypothesis: String,
}

/// Keeps only the strengthening path `C+ -> S -> M+ -> H`.
///
/// When `hypothesis` is given (the defeasible query's H) it is used
/// verbatim. Otherwise the `H+` label is used with its leading `MORE`
/// token removed.
pub fn prune_to_strengthening_chain(
    g: &InfluenceGraph,
    hypothesis: Option<&str>,
) -> Result<ChainGraph, GraphError> {
    let take = |role: NodeRole| {
        g.label(role)
            .map(|l| strip_role_prefix(l).to_string())
            .ok_or(GraphError::MissingNode(role))
    };
    let contextualizer = take(NodeRole::ContextPlus)?;
    let situation = take(NodeRole::Situation)?;
    let mediator = take(NodeRole::MediatorPlus)?;
    let hypothesis = match hypothesis.map(str::trim).filter(|h| !h.is_empty()) {
        Some(h) => strip_role_prefix(h).to_string(),
        None => {
            let more = take(NodeRole::HypothesisPlus)?;
            strip_leading_token(&more, "more").to_string()
        }
    };
    Ok(ChainGraph {
        contextualizer,
        situation,
        mediator,
        hypothesis,
    })
}

/// Drops `token` (case-insensitive) from the start of `text` if it is a whole word.
pub(crate) fn strip_leading_token<'a>(text: &'a str, token: &str) -> &'a str {
    let trimmed = text.trim_start();
    match trimmed.split_once(char::is_whitespace) {
        Some((first, rest)) if first.eq_ignore_ascii_case(token) => rest.trim_start(),
        _ => trimmed,
    }
}

/// Normalization used for redundancy checks: prefix strip, lowercase,
/// whitespace collapse.
pub fn normalize_label(label: &str) -> String {
    strip_role_prefix(label)
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedundancyReport {
    pub redundant: bool,
    pub collisions: Vec<(NodeRole, NodeRole)>,
}

const REDUNDANCY_ROLES: [NodeRole; 4] = [
    NodeRole::ContextPlus,
    NodeRole::ContextMinus,
    NodeRole::MediatorPlus,
    NodeRole::MediatorMinus,
];

/// Flags graphs where two contextualizer/mediator nodes repeat the same text.
pub fn detect_redundancy(g: &InfluenceGraph) -> RedundancyReport {
    let mut collisions = Vec::new();
    for (i, &a) in REDUNDANCY_ROLES.iter().enumerate() {
        for &b in &REDUNDANCY_ROLES[i + 1..] {
            if let (Some(la), Some(lb)) = (g.label(a), g.label(b)) {
                if normalize_label(la) == normalize_label(lb) {
                    collisions.push((a, b));
                }
            }
        }
    }
    RedundancyReport {
        redundant: !collisions.is_empty(),
        collisions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use NodeRole::*;

    fn chain_labels() -> [&'static str; 8] {
        ["ctx plus", "ctx minus", "sit", "not sit", "med plus", "med minus", "MORE hyp", "LESS hyp"]
    }

    fn class_a() -> [Polarity; 9] {
        StructureClass::polarities(&enumerate_structure_classes()[0]).unwrap()
    }

    #[test]
    fn role_tags_round_trip() {
        for role in NodeRole::ALL {
            assert_eq!(NodeRole::from_tag(role.tag()), Some(role));
        }
        assert_eq!(NodeRole::from_tag("M\u{2212}"), Some(MediatorMinus));
        assert_eq!(NodeRole::from_tag("U"), None);
    }

    #[test]
    fn labels_reject_quotes_and_newlines() {
        assert!(InfluenceNode::new(Situation, "  ").is_err());
        assert!(InfluenceNode::new(Situation, "say \"hi\"").is_err());
        assert!(InfluenceNode::new(Situation, "a\nb").is_err());
        assert!(InfluenceNode::new(Situation, "less soil [OR] less root").is_ok());
    }

    #[test]
    fn edges_require_endpoints_and_are_unique() {
        let mut g = InfluenceGraph::new();
        assert_eq!(
            g.add_edge(ContextPlus, Situation, Polarity::Helps),
            Err(GraphError::DanglingEdge { src: ContextPlus, dst: Situation })
        );
        g.connect((ContextPlus, "a"), (Situation, "b"), Polarity::Helps).unwrap();
        assert!(matches!(
            g.add_edge(ContextPlus, Situation, Polarity::Hurts),
            Err(GraphError::DuplicateEdge { .. })
        ));
        assert_eq!(g.add_edge(Situation, Situation, Polarity::Helps), Err(GraphError::SelfLoop(Situation)));
    }

    #[test]
    fn empty_graph_has_eight_missing_roles() {
        let report = validate_schema(&InfluenceGraph::new());
        assert!(!report.valid);
        assert_eq!(report.violations.len(), 8);
        assert!(report.violations.iter().all(|v| matches!(v, Violation::MissingRole { .. })));
    }

    #[test]
    fn polarity_flip_on_mediator_edge_is_one_violation() {
        let mut g = complete_graph(chain_labels(), &class_a()).unwrap();
        assert!(validate_schema(&g).valid);
        g.set_polarity(MediatorPlus, HypothesisPlus, Polarity::Hurts);
        let report = validate_schema(&g);
        assert_eq!(
            report.violations,
            vec![Violation::PolarityInconsistency {
                src: MediatorPlus,
                dst: HypothesisPlus,
                expected: Polarity::Helps,
                found: Polarity::Hurts,
            }]
        );
    }

    #[test]
    fn non_canonical_pair_reported() {
        let mut g = complete_graph(chain_labels(), &class_a()).unwrap();
        g.add_edge(ContextPlus, HypothesisPlus, Polarity::Helps).unwrap();
        let report = validate_schema(&g);
        assert_eq!(
            report.violations,
            vec![Violation::NonCanonicalPair { src: ContextPlus, dst: HypothesisPlus }]
        );
    }

    #[test]
    fn structure_class_requires_valid_graph() {
        assert!(matches!(structure_class(&InfluenceGraph::new()), Err(GraphError::Invalid(_))));
    }

    #[test]
    fn structure_class_ignores_labels_and_order() {
        let g = complete_graph(chain_labels(), &class_a()).unwrap();
        let other = complete_graph(["a", "b", "c", "d", "e", "f", "g", "h"], &class_a()).unwrap();
        assert_eq!(structure_class(&g).unwrap(), structure_class(&other).unwrap());

        let mut reordered = InfluenceGraph::new();
        for role in NodeRole::ALL {
            reordered.insert_node(role, g.label(role).unwrap()).unwrap();
        }
        for e in g.edges().iter().rev() {
            reordered.add_edge(e.src, e.dst, e.polarity).unwrap();
        }
        assert_eq!(structure_class(&reordered).unwrap(), structure_class(&g).unwrap());
    }

    #[test]
    fn prune_missing_mediator() {
        let mut g = complete_graph(chain_labels(), &class_a()).unwrap();
        let mut pruned = InfluenceGraph::new();
        for node in g.nodes().filter(|n| n.role != MediatorPlus) {
            pruned.insert_node(node.role, node.label()).unwrap();
        }
        assert_eq!(
            prune_to_strengthening_chain(&pruned, None),
            Err(GraphError::MissingNode(MediatorPlus))
        );
        g.set_label(HypothesisPlus, "MORE   rain falls").unwrap();
        assert_eq!(prune_to_strengthening_chain(&g, None).unwrap().hypothesis, "rain falls");
    }

    #[test]
    fn prune_prefers_query_hypothesis() {
        let g = complete_graph(chain_labels(), &class_a()).unwrap();
        let chain = prune_to_strengthening_chain(&g, Some("Rob saw a pink elephant")).unwrap();
        assert_eq!(chain.hypothesis, "Rob saw a pink elephant");
        assert_eq!(chain.contextualizer, "ctx plus");
        assert_eq!(chain.mediator, "med plus");
    }

    #[test]
    fn strip_prefix_handles_repeats_and_plain_colons() {
        assert_eq!(strip_role_prefix("C+ : M+ :  rain"), "rain");
        assert_eq!(strip_role_prefix("ratio: 3 to 1"), "ratio: 3 to 1");
        assert_eq!(strip_role_prefix("H- :LESS sugar"), "LESS sugar");
    }

    #[test]
    fn redundancy_exact_and_normalized() {
        let mut g = complete_graph(chain_labels(), &class_a()).unwrap();
        assert!(!detect_redundancy(&g).redundant);
        g.set_label(ContextMinus, "ctx plus").unwrap();
        assert_eq!(detect_redundancy(&g).collisions, vec![(ContextPlus, ContextMinus)]);

        let mut g = complete_graph(chain_labels(), &class_a()).unwrap();
        g.set_label(ContextPlus, "More Rain").unwrap();
        g.set_label(MediatorPlus, "more   rain").unwrap();
        let report = detect_redundancy(&g);
        assert!(report.redundant);
        assert_eq!(report.collisions, vec![(ContextPlus, MediatorPlus)]);
    }

    #[test]
    fn redundancy_ignores_hypothesis_and_situation_nodes() {
        let mut g = complete_graph(chain_labels(), &class_a()).unwrap();
        g.set_label(Situation, "ctx plus").unwrap();
        g.set_label(HypothesisPlus, "med plus").unwrap();
        assert!(!detect_redundancy(&g).redundant);
    }

    #[test]
    fn sanitize_produces_valid_labels() {
        let s = sanitize_label("he said \"no\"\tthen\nleft");
        assert_eq!(s, "he said 'no' then left");
        assert!(InfluenceNode::new(Situation, s).is_ok());
    }
}
