use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Accuracy, RMSE and AUC over one prediction set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub rmse: f64,
    pub auc: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction and label counts differ ({preds} vs {labels})")]
    Length { preds: usize, labels: usize },
    #[error("no predictions to evaluate")]
    Empty,
    /// Labels of a single class; the threshold metrics are still reported.
    #[error("AUC is undefined for single-class labels (acc {acc:.4}, rmse {rmse:.4})")]
    AucUndefined { acc: f64, rmse: f64, n: usize },
}

/// ACC at threshold 0.5, RMSE, and the Mann-Whitney AUC with half credit
/// for tied scores.
pub fn evaluate(preds: &[f64], labels: &[u8]) -> Result<EvalReport, EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::Length {
            preds: preds.len(),
            labels: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = preds.len();
    let correct = preds
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= 0.5) == (y == 1))
        .count();
    let acc = correct as f64 / n as f64;
    let sq: f64 = preds
        .iter()
        .zip(labels)
        .map(|(&p, &y)| (p - f64::from(y)).powi(2))
        .sum();
    let rmse = (sq / n as f64).sqrt();
    match auc(preds, labels) {
        Some(auc) => Ok(EvalReport { acc, rmse, auc, n }),
        None => Err(EvalError::AucUndefined { acc, rmse, n }),
    }
}

/// Mann-Whitney AUC via average ranks; `None` if either class is absent.
pub fn auc(preds: &[f64], labels: &[u8]) -> Option<f64> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[a].total_cmp(&preds[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && preds[order[j + 1]] == preds[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mean_rank = (i + j + 2) as f64 / 2.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += mean_rank * tied_pos as f64;
        i = j + 1;
    }
    let (p, q) = (pos as f64, neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}
