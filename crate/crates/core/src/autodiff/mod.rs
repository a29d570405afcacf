//! Dense tensors with a tape-based reverse-mode differentiator.
//!
//! Every operation records a node on a [`Tape`]; [`Tape::backward`] sweeps
//! the tape once in reverse and accumulates gradients into the
//! [`ParamStore`] leaves that the loss depends on. There is no broadcasting:
//! shapes must line up exactly or the op returns a [`TensorError`].

mod check;
mod checkpoint;
mod param;
mod tape;
mod tensor;

pub use check::{grad_check, GradCheckReport};
pub use checkpoint::{
    load_checkpoint, load_checkpoint_file, read_checkpoint, save_checkpoint, write_checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{softmax_values, Gradients, Tape, Var, LOG_EPS};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid shape {shape:?}")]
    InvalidShape { shape: Vec<usize> },
    #[error("shape {shape:?} does not hold {len} values")]
    LengthMismatch { shape: Vec<usize>, len: usize },
    #[error("axis {axis} out of range for rank {rank}")]
    AxisOutOfRange { axis: usize, rank: usize },
    #[error("slice [{start}, {start}+{len}) out of range for extent {extent}")]
    SliceOutOfRange { start: usize, len: usize, extent: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{0}: empty input list")]
    Empty(&'static str),
    #[error("backward needs a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),
    #[error("parameter stores do not line up")]
    StoreMismatch,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
