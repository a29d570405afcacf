//! The typed-edge GRU cell and the encoders built from it.
//!
//! Each direction keeps one hidden state per edge type (a *slot*). At node
//! `t` every slot's gates read the input `x_t` and the summed
//! `U^{e,e'} h^{e'}_{t'}` over all incoming edges `(t', e')`; the node
//! output is the concatenation of the slot states in registry order. When
//! no node has two incoming edges of one type, the per-type updates can be
//! stacked into a single GRU update over a memory vector `g_t`
//! ([`StepPath::Chain`]); both paths produce the same numbers.

mod encode;
mod params;
mod step;

pub use encode::{encode_bidirectional, encode_direction, stack_layers, DirectionOutput, EncodeOptions, Encoded, StepPath};
pub use params::{DirectionParams, EdgeDimSplit, Gates, LayerParams, Slot, StateLayout};
pub use step::{CellContext, GateTrace, MemoryBank, StackedParams, StepState};

use thiserror::Error;

use crate::autodiff::TensorError;
use crate::graph::EdgeType;

#[derive(Debug, Error)]
pub enum CellError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{what}: width {left} does not match {right}")]
    WidthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("edge type {0} has no state in this direction")]
    MissingType(EdgeType),
    #[error("state for {have} slots, expected {want}")]
    MissingState { have: usize, want: usize },
    #[error("node {0} referenced before it was processed")]
    Unprocessed(usize),
    #[error("node {0} has two incoming edges of one type; the stacked update does not apply")]
    NotChainDecomposable(usize),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
