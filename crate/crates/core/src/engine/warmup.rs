use std::collections::BTreeSet;

use super::local::local_sgd;
use super::{Hyperparams, TransferConfig, TransferMode};
use crate::data::{Dataset, SampleSet};
use crate::error::{Error, Result};
use crate::nn::{init_weights, ModelSpec, ModelWeights};
use crate::rng;

/// Freeze everything except the last two parameterized layers.
pub fn default_freeze_count(spec: &ModelSpec) -> usize {
    spec.param_layer_count().saturating_sub(2)
}

/// Build the initial global model `w_0`.
///
/// `dataset` supplies the pretraining source rows (labels in
/// `transfer.pretrain_labels`) in [`TransferMode::WarmupPretrained`];
/// `buffer` is the pooled warmup share of the clients.
pub fn train_warmup(
    dataset: &Dataset,
    buffer: &SampleSet,
    spec: &ModelSpec,
    transfer: &TransferConfig,
    hp: &Hyperparams,
) -> Result<ModelWeights> {
    let mut weights = init_weights(spec, hp.seed)?;
    let lr = transfer.warmup_lr.unwrap_or(hp.lr);
    let fit_buffer = |weights: &mut ModelWeights| -> Result<()> {
        let all: Vec<usize> = (0..buffer.len()).collect();
        local_sgd(
            spec,
            weights,
            &buffer.inputs,
            &buffer.labels,
            &all,
            hp.batch_size,
            transfer.warmup_epochs,
            lr,
            hp.seed,
            "warmup",
            &[],
        )
        .map(drop)
    };
    match transfer.mode {
        TransferMode::None => Ok(weights),
        TransferMode::WarmupScratch => {
            if buffer.is_empty() {
                return Err(Error::Config("warmup training needs a nonempty warmup buffer".into()));
            }
            fit_buffer(&mut weights)?;
            Ok(weights)
        }
        TransferMode::WarmupPretrained => {
            if buffer.is_empty() {
                return Err(Error::Config("warmup training needs a nonempty warmup buffer".into()));
            }
            let layers = spec.param_layer_count();
            if transfer.freeze_layer_count >= layers {
                return Err(Error::Config(format!(
                    "freeze_layer_count {} leaves nothing trainable in a model with {layers} parameterized layers",
                    transfer.freeze_layer_count
                )));
            }
            if transfer.pretrain_labels.is_empty() {
                return Err(Error::Config("pretraining needs at least one source label".into()));
            }
            let source_labels: BTreeSet<usize> = transfer.pretrain_labels.iter().copied().collect();
            if let Some(l) = buffer.labels.iter().find(|l| source_labels.contains(l)) {
                return Err(Error::Config(format!(
                    "pretraining label {l} is also a federated task label"
                )));
            }
            let source: Vec<usize> = (0..dataset.train_labels.len())
                .filter(|&i| source_labels.contains(&dataset.train_labels[i]))
                .collect();
            if source.is_empty() {
                return Err(Error::Config(format!(
                    "no training samples carry the pretraining labels {:?}",
                    transfer.pretrain_labels
                )));
            }
            local_sgd(
                spec,
                &mut weights,
                &dataset.train_inputs,
                &dataset.train_labels,
                &source,
                hp.batch_size,
                transfer.pretrain_epochs,
                lr,
                hp.seed,
                "pretrain",
                &[],
            )?;
            // Fresh classifier tail; keep the pretrained extractor.
            let fresh = init_weights(spec, rng::stream_key(hp.seed, "head-init", &[]))?;
            let keep = weights.layer_offsets[transfer.freeze_layer_count];
            weights.params[keep..].copy_from_slice(&fresh.params[keep..]);
            weights.set_frozen_prefix(transfer.freeze_layer_count)?;
            fit_buffer(&mut weights)?;
            Ok(weights)
        }
    }
}
