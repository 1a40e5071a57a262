//! Influence graphs for defeasible reasoning: encoding, generation,
//! validation, pruning and scoring, plus the statistics behind a
//! before/after human evaluation.

pub mod corpus;
pub mod dot;
pub mod evalstats;
pub mod generator;
pub mod graph;
pub mod metrics;
pub mod synthetic;
pub mod template;

pub use dot::{parse_dot, repair_dot, serialize_dot, DotError, RepairAction, RepairLog};
pub use graph::{
    detect_redundancy, prune_to_strengthening_chain, structure_class, validate_schema, ChainGraph,
    GraphError, InfluenceGraph, InfluenceNode, NodeRole, Polarity, PolarityEdge, StructureClass,
    ValidationReport, Violation,
};
pub use template::{
    decode_input, encode_defeasible, encode_wiqa, DecodedInput, DefeasibleQuery, InputSequence,
    SeqPair, Source, TemplateError, TemplateFormat, UpdateEffect, WiqaExample,
};
