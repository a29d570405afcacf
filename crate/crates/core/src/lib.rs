//! Recurrent encoders over typed-edge DAG decompositions of annotated text.
//!
//! A token sequence (or several) plus typed relations such as coreference
//! links becomes an [`graph::AnnotatedGraph`]; splitting its edges by
//! direction yields two DAGs whose natural order is a topological order.
//! [`cell`] runs a GRU-style recurrence over each DAG with one hidden state
//! per edge type, and [`reader`] puts attention and answer heads on top for
//! reading comprehension. [`babi`] and [`train`] wire this to bAbi-format
//! question answering.

pub mod autodiff;
pub mod babi;
pub mod cell;
pub mod graph;
pub mod reader;
pub mod train;

mod error;

pub use error::{Error, Result};
