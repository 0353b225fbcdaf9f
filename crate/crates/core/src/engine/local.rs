use rand::seq::SliceRandom;

use super::{ClientUpdate, Hyperparams};
use crate::data::{ClientPartition, Dataset};
use crate::error::{Error, Result};
use crate::nn::{backward, forward, sgd_step_in_place, softmax_cross_entropy, Batch, ModelSpec, ModelWeights};
use crate::rng;

/// Mini-batch SGD over `indices` of `(inputs, labels)`.
///
/// Each epoch reshuffles with the stream `(seed, tag, counters ++ [epoch])`;
/// the final partial batch is kept. Returns the sample-weighted mean loss of
/// every epoch, measured before each step. With `lr == 0` the weights are
/// left untouched.
#[allow(clippy::too_many_arguments)]
pub fn local_sgd(
    spec: &ModelSpec,
    weights: &mut ModelWeights,
    inputs: &crate::nn::Matrix<f32>,
    labels: &[usize],
    indices: &[usize],
    batch_size: usize,
    epochs: usize,
    lr: f32,
    seed: u64,
    tag: &str,
    counters: &[u64],
) -> Result<Vec<f64>> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let mut stream_counters = counters.to_vec();
    stream_counters.push(0);
    let mut losses = Vec::with_capacity(epochs);
    let mut order = indices.to_vec();
    for epoch in 0..epochs {
        *stream_counters.last_mut().unwrap() = epoch as u64;
        let mut g = rng::stream(seed, tag, &stream_counters);
        order.copy_from_slice(indices);
        order.shuffle(&mut g);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch = Batch {
                inputs: inputs.gather(chunk),
                labels: chunk.iter().map(|&i| labels[i]).collect(),
            };
            let (logits, cache) = forward(spec, weights, &batch)?;
            let (loss, grad_logits) = softmax_cross_entropy(&logits, &batch.labels)?;
            total += loss * chunk.len() as f64;
            if lr > 0.0 {
                let grad = backward(spec, weights, &cache, &grad_logits)?;
                sgd_step_in_place(weights, &grad, lr)?;
            }
        }
        losses.push(if order.is_empty() { 0.0 } else { total / order.len() as f64 });
    }
    Ok(losses)
}

/// One client's local training for `round`, starting from `global`.
pub fn train_user(
    client: &ClientPartition,
    global: &ModelWeights,
    dataset: &Dataset,
    spec: &ModelSpec,
    hp: &Hyperparams,
    round: usize,
) -> Result<ClientUpdate> {
    if client.train_indices.is_empty() {
        return Err(Error::Contract(format!(
            "client {} has no local training samples",
            client.client_id
        )));
    }
    let mut weights = global.clone();
    local_sgd(
        spec,
        &mut weights,
        &dataset.train_inputs,
        &dataset.train_labels,
        &client.train_indices,
        hp.batch_size,
        hp.local_epochs,
        hp.lr,
        hp.seed,
        "train",
        &[round as u64, client.client_id as u64],
    )?;
    Ok(ClientUpdate {
        client_id: client.client_id,
        weights,
        sample_count: client.train_indices.len(),
    })
}
