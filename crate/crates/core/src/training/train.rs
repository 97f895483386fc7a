use serde::{Deserialize, Serialize};

use crate::data::{batches, QMatrix, ResponseDataset, ResponseLog};
use crate::numcore::NumError;
use crate::training::{auc, CandidateModel, TrainError};

/// Optimizer and schedule settings for one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Epochs without a validation AUC improvement before stopping.
    pub patience: usize,
    /// Seeds the batch order.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            lr: 0.001,
            batch_size: 128,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Zero epochs is accepted and evaluates the initial parameters.
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(TrainError::Config("patience must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(TrainError::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

/// Patience counter on a metric that should increase.
#[derive(Clone, Debug)]
pub struct EarlyStopper {
    patience: usize,
    best: Option<f64>,
    stale: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records one epoch's metric; returns true on a strict improvement.
    pub fn observe(&mut self, metric: f64) -> bool {
        match self.best {
            Some(b) if metric <= b => {
                self.stale += 1;
                false
            }
            _ => {
                self.best = Some(metric);
                self.stale = 0;
                true
            }
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    EarlyStop,
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Best validation AUC; 0.5 if no epoch completed.
    pub best_val_auc: f64,
    pub best_epoch: Option<usize>,
    pub trace: Vec<EpochRecord>,
    pub stop: StopReason,
}

/// Validation AUC reported when it cannot be computed.
const FALLBACK_AUC: f64 = 0.5;

/// Minimizes cross-entropy on the training split with Adam, checking
/// validation AUC after every epoch. The model is left holding the
/// parameters of its best epoch (or its initial ones if none completed).
pub fn train(
    model: &mut CandidateModel,
    data: &ResponseDataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(TrainError::Config("train and validation splits must be non-empty".into()));
    }
    // Surface index errors up front so numeric failures below are only
    // ever overflow.
    model.check_items(&data.q, &data.train)?;
    model.check_items(&data.q, &data.val)?;

    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut best_store = model.store().clone();
    let mut best_epoch = None;
    let mut trace = Vec::new();
    let mut stop = StopReason::Completed;

    if cfg.epochs == 0 {
        let val_auc = validation_auc(model, &data.q, &data.val).unwrap_or(FALLBACK_AUC);
        return Ok(TrainOutcome {
            best_val_auc: val_auc,
            best_epoch: None,
            trace,
            stop,
        });
    }

    let mut batch = Vec::with_capacity(cfg.batch_size);
    'epochs: for epoch in 1..=cfg.epochs {
        let mut loss_sum = 0.0;
        for idx in batches(data.train.len(), cfg.batch_size, cfg.seed, epoch as u64) {
            batch.clear();
            batch.extend(idx.iter().map(|&i| data.train[i]));
            match sgd_step(model, &data.q, &batch, cfg.lr) {
                Ok(l) => loss_sum += l,
                Err(_) => {
                    stop = StopReason::Overflow;
                    break 'epochs;
                }
            }
        }
        let Ok(val_auc) = validation_auc(model, &data.q, &data.val) else {
            stop = StopReason::Overflow;
            break;
        };
        trace.push(EpochRecord {
            epoch,
            train_loss: loss_sum / data.train.len() as f64,
            val_auc,
        });
        if stopper.observe(val_auc) {
            best_store = model.store().clone();
            best_epoch = Some(epoch);
        }
        if stopper.should_stop() {
            stop = StopReason::EarlyStop;
            break;
        }
    }
    *model.store_mut() = best_store;
    Ok(TrainOutcome {
        best_val_auc: stopper.best().unwrap_or(FALLBACK_AUC),
        best_epoch,
        trace,
        stop,
    })
}

fn validation_auc(model: &CandidateModel, q: &QMatrix, val: &[ResponseLog]) -> Result<f64, TrainError> {
    let preds = model.predict(q, val)?;
    let labels: Vec<u8> = val.iter().map(|l| l.score).collect();
    Ok(auc(&preds, &labels).unwrap_or(FALLBACK_AUC))
}

/// One Adam step on a batch; returns the summed cross-entropy.
pub(crate) fn sgd_step(
    model: &mut CandidateModel,
    q: &QMatrix,
    batch: &[ResponseLog],
    lr: f64,
) -> Result<f64, NumError> {
    let (mean_loss, grads) = model.loss_and_gradients(q, batch)?;
    model.store_mut().adam_step(&grads, lr);
    Ok(mean_loss * batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_trace_stops_after_patience() {
        let mut s = EarlyStopper::new(5);
        let mut epochs = 0;
        for _ in 0..30 {
            epochs += 1;
            s.observe(0.7);
            if s.should_stop() {
                break;
            }
        }
        assert_eq!(epochs, 6);
    }

    #[test]
    fn improvement_resets_counter() {
        let mut s = EarlyStopper::new(2);
        assert!(s.observe(0.5));
        assert!(!s.observe(0.5));
        assert!(s.observe(0.6));
        assert!(!s.should_stop());
        s.observe(0.1);
        s.observe(0.1);
        assert!(s.should_stop());
        assert_eq!(s.best(), Some(0.6));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            patience: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let zero_epochs = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(zero_epochs.validate().is_ok());
    }
}
