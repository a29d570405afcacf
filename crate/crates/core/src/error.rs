use thiserror::Error;

use crate::autodiff::TensorError;
use crate::babi::DataError;
use crate::cell::CellError;
use crate::graph::GraphError;
use crate::reader::ReaderError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Reader(#[from] ReaderError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("non-finite loss at example {example}")]
    NonFinite { example: usize, param_norms: Vec<(String, f64)> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
