//! Candidate models: a tree bound to embeddings, per-node weights and the
//! optional FC head, trained with cross-entropy, Adam and early stopping.

mod checkpoint;
mod metrics;
mod model;
mod train;

use thiserror::Error;

use crate::numcore::NumError;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, write_trace_csv, CheckpointManifest, CheckpointMetrics, ParamEntry,
    BLOB_FILE, MANIFEST_FILE,
};
pub use metrics::{auc, evaluate, EvalError, EvalReport};
pub use model::{CandidateModel, Dims, OutputMode, HEAD_DIMS, PROB_CLAMP};
pub use train::{train, EarlyStopper, EpochRecord, StopReason, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("tree is not shape-feasible (nodes {0:?})")]
    Infeasible(Vec<usize>),
    #[error("item (student {student}, exercise {exercise}) is outside the model's dimensions")]
    Index { student: usize, exercise: usize },
    #[error("invalid training setup: {0}")]
    Config(String),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("{0}")]
    Io(String),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
}
