use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DataError, ResponseLog};

/// Train/validation/test fractions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn as_array(self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    pub fn validate(self) -> Result<(), DataError> {
        let a = self.as_array();
        let ok = a.iter().all(|r| r.is_finite() && *r >= 0.0) && (a.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(DataError::Ratios(a))
        }
    }
}

/// Logs that survived filtering, with students renumbered densely.
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredLogs {
    pub logs: Vec<ResponseLog>,
    /// New student index to original student index.
    pub kept: Vec<usize>,
}

/// Drops students with fewer than `min_logs` responses, keeping log order.
pub fn filter_students(
    logs: &[ResponseLog],
    n_students: usize,
    min_logs: usize,
) -> Result<FilteredLogs, DataError> {
    let mut counts = vec![0usize; n_students];
    for log in logs {
        if log.student >= n_students {
            return Err(DataError::Invalid(format!(
                "student index {} out of range {n_students}",
                log.student
            )));
        }
        counts[log.student] += 1;
    }
    let mut remap = vec![usize::MAX; n_students];
    let mut kept = Vec::new();
    for (s, &c) in counts.iter().enumerate() {
        if c >= min_logs && c > 0 {
            remap[s] = kept.len();
            kept.push(s);
        }
    }
    if kept.is_empty() {
        return Err(DataError::NoStudents(min_logs));
    }
    let logs = logs
        .iter()
        .filter(|l| remap[l.student] != usize::MAX)
        .map(|l| ResponseLog {
            student: remap[l.student],
            ..*l
        })
        .collect();
    Ok(FilteredLogs { logs, kept })
}

/// Row indices of each partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

// Products like 0.7 * 15 land a hair below the .5 boundary in binary.
fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor() as usize
}

/// Shuffles each student's logs and cuts them at the rounded cumulative
/// ratios, so every student appears in every partition they can fill.
pub fn split_per_student(
    logs: &[ResponseLog],
    ratios: SplitRatios,
    seed: u64,
) -> Result<Splits, DataError> {
    ratios.validate()?;
    let n_students = logs.iter().map(|l| l.student + 1).max().unwrap_or(0);
    let mut per_student: Vec<Vec<usize>> = vec![Vec::new(); n_students];
    for (i, log) in logs.iter().enumerate() {
        per_student[log.student].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Splits {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for mut rows in per_student {
        rows.shuffle(&mut rng);
        let n = rows.len() as f64;
        let a = round_half_up(ratios.train * n).min(rows.len());
        let b = round_half_up((ratios.train + ratios.val) * n).clamp(a, rows.len());
        out.train.extend_from_slice(&rows[..a]);
        out.val.extend_from_slice(&rows[a..b]);
        out.test.extend_from_slice(&rows[b..]);
    }
    Ok(out)
}

/// Shuffled minibatches of positions `0..len`. The order depends only on
/// `(seed, epoch)`; the final batch may be short.
pub fn batches(len: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    assert!(batch_size > 0, "batch size must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}
