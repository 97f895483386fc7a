//! Response logs, the Q-matrix, student filtering, per-student splits and
//! training batches.

mod load;
mod split;
mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use load::{load_dataset, write_logs_csv, write_q_csv};
pub use split::{batches, filter_students, split_per_student, FilteredLogs, SplitRatios, Splits};
pub use synth::{generate_synthetic, SynthConfig, SynthData};

/// Students with fewer logs are dropped before splitting.
pub const MIN_LOGS_PER_STUDENT: usize = 15;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{file}, line {line}: {msg}")]
    Malformed {
        file: String,
        line: u64,
        msg: String,
    },
    #[error("{file}, line {line}: score '{value}' is not 0 or 1")]
    Score {
        file: String,
        line: u64,
        value: String,
    },
    #[error("{file}, line {line}: exercise '{exercise}' is missing from the Q-matrix")]
    UnknownExercise {
        file: String,
        line: u64,
        exercise: String,
    },
    #[error("Q-matrix row {row} (exercise '{exercise}') has no concept")]
    EmptyQRow { row: usize, exercise: String },
    #[error("no students left after filtering (minimum {0} logs)")]
    NoStudents(usize),
    #[error("invalid split ratios {0:?}: they must be nonnegative and sum to 1")]
    Ratios([f64; 3]),
    #[error("{0}")]
    Invalid(String),
}

/// One response event, with dense indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResponseLog {
    pub student: usize,
    pub exercise: usize,
    pub score: u8,
}

/// Binary exercise-by-concept matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl QMatrix {
    /// Validates entries and that every row tags at least one concept.
    pub fn new(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self, DataError> {
        if data.len() != rows * cols {
            return Err(DataError::Invalid(format!(
                "Q-matrix has {} cells, expected {rows} x {cols}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(DataError::Invalid(format!("Q-matrix entry {v} is not binary")));
        }
        for r in 0..rows {
            if data[r * cols..(r + 1) * cols].iter().all(|&v| v == 0) {
                return Err(DataError::EmptyQRow {
                    row: r,
                    exercise: r.to_string(),
                });
            }
        }
        Ok(QMatrix { rows, cols, data })
    }

    /// Number of exercises.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of concepts.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, exercise: usize) -> &[u8] {
        &self.data[exercise * self.cols..(exercise + 1) * self.cols]
    }
}

/// Logs and Q-matrix as loaded, before filtering and splitting.
#[derive(Clone, Debug)]
pub struct RawData {
    pub logs: Vec<ResponseLog>,
    pub q: QMatrix,
    /// Dense student index to raw id.
    pub student_ids: Vec<String>,
    /// Dense exercise index to raw id (Q-matrix row order).
    pub exercise_ids: Vec<String>,
    pub concept_ids: Vec<String>,
}

/// Split record written next to results so a run can be reproduced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub min_logs: usize,
    /// Row indices into the filtered log list.
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Filtered logs partitioned into train/validation/test.
#[derive(Clone, Debug)]
pub struct ResponseDataset {
    pub train: Vec<ResponseLog>,
    pub val: Vec<ResponseLog>,
    pub test: Vec<ResponseLog>,
    pub q: QMatrix,
    pub student_ids: Vec<String>,
    pub exercise_ids: Vec<String>,
    pub manifest: SplitManifest,
}

impl ResponseDataset {
    /// Filters sparse students, then splits each student's logs.
    pub fn build(
        raw: &RawData,
        min_logs: usize,
        ratios: SplitRatios,
        seed: u64,
    ) -> Result<Self, DataError> {
        let filtered = filter_students(&raw.logs, raw.student_ids.len(), min_logs)?;
        let splits = split_per_student(&filtered.logs, ratios, seed)?;
        let pick = |idx: &[usize]| idx.iter().map(|&i| filtered.logs[i]).collect::<Vec<_>>();
        Ok(ResponseDataset {
            train: pick(&splits.train),
            val: pick(&splits.val),
            test: pick(&splits.test),
            q: raw.q.clone(),
            student_ids: filtered
                .kept
                .iter()
                .map(|&s| raw.student_ids[s].clone())
                .collect(),
            exercise_ids: raw.exercise_ids.clone(),
            manifest: SplitManifest {
                seed,
                ratios: ratios.as_array(),
                min_logs,
                train: splits.train,
                val: splits.val,
                test: splits.test,
            },
        })
    }

    pub fn n_students(&self) -> usize {
        self.student_ids.len()
    }

    pub fn n_exercises(&self) -> usize {
        self.q.rows()
    }

    pub fn n_concepts(&self) -> usize {
        self.q.cols()
    }

    pub fn total_logs(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }
}
