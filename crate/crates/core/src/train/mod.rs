//! Training and evaluation of readers on bAbi-format data.

mod adam;
mod config;
mod data;
mod model;
mod run;

pub use adam::Adam;
pub use config::{DataSource, Encoder, Head, TrainConfig};
pub use data::{Dataset, PreparedExample, Split, StorySplits};
pub use model::{Forward, Model};
pub use run::{
    build_model, error_rate, evaluate, load_model, multi_seed, select_run, train, train_model, EpochRecord,
    MultiSeedResult, ResultRecord, RunResult, CHECKPOINT_FILE, RESULT_FILE,
};
