use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::loss::{bce_l2_loss, logit_grads};
use super::metrics::MetricsReport;
use crate::data::{batches, EncodedDataset};
use crate::error::{Error, Result};
use crate::model::{forward_batch, init_params, predict, ModelConfig, ModelParams};

fn default_learning_rate() -> f64 {
    1e-3
}
fn default_l2_gamma() -> f64 {
    1e-5
}
fn default_batch_size() -> usize {
    1024
}
fn default_max_epochs() -> usize {
    10
}
fn default_patience() -> usize {
    3
}
fn default_shuffle_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_l2_gamma")]
    pub l2_gamma: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    /// Epochs without a validation AUC improvement before stopping.
    #[serde(default = "default_patience")]
    pub patience: usize,
    /// Seed for parameter initialization.
    #[serde(default)]
    pub init_seed: u64,
    /// Seed for the per-epoch shuffles, independent of `init_seed`.
    #[serde(default = "default_shuffle_seed")]
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: default_learning_rate(),
            l2_gamma: default_l2_gamma(),
            batch_size: default_batch_size(),
            max_epochs: default_max_epochs(),
            patience: default_patience(),
            init_seed: 0,
            shuffle_seed: default_shuffle_seed(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("train.learning_rate must be positive".into()));
        }
        if !(self.l2_gamma >= 0.0 && self.l2_gamma.is_finite()) {
            return Err(Error::Config("train.l2_gamma must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Objective value and its gradient for one batch: mean BCE plus
/// `gamma * ||params||^2`.
pub fn loss_and_grads(params: &ModelParams, records: &[u32], labels: &[u8], gamma: f64) -> Result<(f64, ModelParams)> {
    let fwd = forward_batch(params, records)?;
    if fwd.batch() != labels.len() {
        return Err(Error::shape("labels", fwd.batch(), labels.len()));
    }
    let preds = fwd.probabilities();
    let loss = bce_l2_loss(preds, labels, params, gamma);
    let mut grads = params.zeros_like();
    fwd.accumulate_grads(logit_grads(preds, labels), &mut grads)?;
    if gamma != 0.0 {
        for (g, (_, p)) in grads.tensors_mut().into_iter().zip(params.tensors()) {
            g.zip_mut_with(p, |g, &p| *g += 2.0 * gamma * p);
        }
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation AUC (initial
    /// parameters when no epoch ran).
    pub params: ModelParams,
    pub reports: Vec<MetricsReport>,
    pub best_epoch: Option<usize>,
}

pub fn train(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    train_data: &EncodedDataset,
    valid_data: &EncodedDataset,
) -> Result<TrainOutcome> {
    train_with(model_config, train_config, train_data, valid_data, |_| {})
}

/// Runs Adam over shuffled minibatches, evaluating on `valid_data` after each
/// epoch and calling `on_epoch` with the report.
pub fn train_with(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    train_data: &EncodedDataset,
    valid_data: &EncodedDataset,
    mut on_epoch: impl FnMut(&MetricsReport),
) -> Result<TrainOutcome> {
    model_config.validate()?;
    train_config.validate()?;
    if train_data.num_fields() != model_config.num_fields || valid_data.num_fields() != model_config.num_fields {
        return Err(Error::shape(
            "dataset fields",
            model_config.num_fields,
            (train_data.num_fields(), valid_data.num_fields()),
        ));
    }
    let mut params = init_params(model_config, &train_data.vocab.sizes(), train_config.init_seed)?;
    let mut outcome = TrainOutcome {
        params: params.clone(),
        reports: Vec::new(),
        best_epoch: None,
    };
    if train_config.max_epochs == 0 {
        return Ok(outcome);
    }
    if train_data.is_empty() || valid_data.is_empty() {
        return Err(Error::InvalidArgument(
            "training and validation data must be non-empty".into(),
        ));
    }

    let mut state = AdamState::new(&params);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(train_config.shuffle_seed);
    let mut best_auc = f64::NEG_INFINITY;
    let mut since_best = 0;
    for epoch in 1..=train_config.max_epochs {
        let epoch_seed = shuffle_rng.next_u64();
        for (b, batch) in batches(train_data, train_config.batch_size, Some(epoch_seed))?.enumerate() {
            let (loss, grads) = loss_and_grads(&params, &batch.records, &batch.labels, train_config.l2_gamma)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b, loss });
            }
            adam_step(&mut params, &grads, &mut state, train_config.learning_rate).map_err(|e| match e {
                Error::NonFiniteGradient { .. } => Error::Diverged { epoch, batch: b, loss },
                other => other,
            })?;
        }
        let preds = predict(&params, &valid_data.records)?;
        let report = MetricsReport::evaluate("validation", epoch, &preds, &valid_data.labels)?;
        on_epoch(&report);
        let improved = report.auc > best_auc;
        outcome.reports.push(report);
        if improved {
            best_auc = outcome.reports.last().unwrap().auc;
            outcome.params = params.clone();
            outcome.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= train_config.patience {
                break;
            }
        }
    }
    Ok(outcome)
}

/// Metrics of `params` on a whole dataset.
pub fn evaluate(params: &ModelParams, data: &EncodedDataset, split: &str, epoch: usize) -> Result<MetricsReport> {
    let preds = predict(params, &data.records)?;
    MetricsReport::evaluate(split, epoch, &preds, &data.labels)
}
