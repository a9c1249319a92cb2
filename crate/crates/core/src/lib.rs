//! Colored e-graphs.
//!
//! One e-graph stores the root ("black") congruence together with any number
//! of coarsened congruences, one per set of assumptions ("colors"). Colors
//! share every black e-node and only store what differs: extra unions in a
//! sparse union-find layer and the e-nodes that only exist under them.
//!
//! The crate also carries an equality saturation runner with conditional
//! rules and automatic case splitting, a baseline that forks whole e-graphs
//! per assumption, and the benchmark driver behind the `ceg` binary.

pub mod baseline;
pub mod bench;
pub mod colors;
pub mod egraph;
pub mod ematch;
pub mod language;
pub mod memory;
pub mod random;
pub mod saturate;
pub mod ufind;

pub use colors::{ColorId, ColoredEGraph, NodeMode};
pub use egraph::EGraph;
pub use ematch::{Match, Pattern};
pub use language::{ENode, Symbol, Term};
pub use saturate::{Goal, Limits, Rule, RunReport, StopReason};
pub use ufind::{Id, LayeredUnionFind, UnionFind};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unknown e-class id {0}")]
    UnknownId(Id),
    #[error("unknown layer {0:?}")]
    UnknownLayer(ufind::LayerId),
    #[error("unknown color {0}")]
    UnknownColor(ColorId),
    #[error("`{op}` used with {found} arguments, expected {expected}")]
    Arity { op: Symbol, expected: usize, found: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid rule `{rule}`: {reason}")]
    Rule { rule: String, reason: String },
}
