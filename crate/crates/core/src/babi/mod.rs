//! bAbi story files: parsing, entity chains, graph construction, candidate
//! sets, the bAbi-Mix variant and a template generator for tasks 1 and 2.

mod coref;
mod example;
mod mix;
mod parse;
mod synth;

pub use coref::{extract_coref, CorefAnnotation, EntityLexicon};
pub use example::{build_candidates, build_example_graph, ExampleGraph, Vocab, UNK};
pub use mix::{
    draw_interleave, draw_rename, generate_babi_mix, interleave, mix_stories, unmix, MixedStory, RenameMap,
    ALTERNATE_NAMES, ALTERNATE_NOUNS,
};
pub use parse::{
    examples_from_stories, parse_babi, parse_babi_file, parse_stories, raw_tokens, read_stories_file,
    task_from_path, tokenize, write_stories, BabiExample, Line, Story,
};
pub use synth::{generate_stories, SynthConfig};

use thiserror::Error;

use crate::graph::GraphError;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot tell the task number of `{0}`")]
    UnknownTask(String),
    #[error("alternate name pool exhausted while renaming `{0}`")]
    PoolExhausted(String),
    #[error("mix: {0}")]
    Mix(String),
    #[error("no answers in the training split")]
    NoCandidates,
    #[error("task {0} has no story generator")]
    NoGenerator(u8),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
