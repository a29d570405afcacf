//! Typed-edge graphs over token sequences and their split into a forward
//! and a backward DAG.

mod build;
mod dag;
mod dump;
mod registry;

pub use build::{build_graph, AnnotatedGraph, BuiltGraph, Edge, MultiSequenceLayout, Relation, Segment, SequenceOrder};
pub use dag::{decompose, DagDecomposition, Direction, Incoming};
pub use dump::{read_records, write_records, GraphRecord};
pub use registry::{EdgeType, EdgeTypeEntry, EdgeTypeRegistry};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge type `{0}` is already registered")]
    DuplicateEdgeType(String),
    #[error("edge type {0} is not registered")]
    UnknownEdgeType(EdgeType),
    #[error("edge type name `{0}` is not registered")]
    UnknownEdgeName(String),
    #[error("relation uses inverse type `{0}`; inverses are generated")]
    InverseTypeGiven(String),
    #[error("position {pos} out of range for sequence {seq}")]
    PositionOutOfRange { seq: usize, pos: usize },
    #[error("node {index} out of range for {len} nodes")]
    NodeOutOfRange { index: usize, len: usize },
    #[error("self loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0} -> {1} of type `{2}`")]
    DuplicateEdge(usize, usize, String),
    #[error("no sequences given")]
    NoSequences,
    #[error("sequence {0} is empty")]
    EmptySequence(usize),
    #[error("{0:?} is not a permutation of the sequences")]
    BadPermutation(Vec<usize>),
    #[error("segments do not tile the token range")]
    BadSegments,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
