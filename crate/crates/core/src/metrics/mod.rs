//! Accuracy, weight divergence and per-round logs.

mod csvlog;

pub use csvlog::{read_round_records, write_round_logs, RoundRecord, CSV_HEADER};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::ModelWeights;

/// Metrics of one communication round (or one centralized epoch block).
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    pub global_accuracy: f64,
    /// Accuracy of the round's global model on each client's label slice.
    pub client_accuracies: BTreeMap<usize, f64>,
    pub avg_accuracy: f64,
    /// L2 distance of each selected client's upload from the aggregate.
    pub divergence: BTreeMap<usize, f64>,
    pub selected_clients: Vec<usize>,
    pub wallclock_ms: u64,
}

impl RoundLog {
    pub fn mean_divergence(&self) -> f64 {
        if self.divergence.is_empty() {
            0.0
        } else {
            self.divergence.values().sum::<f64>() / self.divergence.len() as f64
        }
    }

    pub fn max_divergence(&self) -> f64 {
        self.divergence.values().copied().fold(0.0, f64::max)
    }
}

/// `(TP + TN) / total` against `positive_label`, or the exact-match rate over
/// all classes when no positive label is given.
pub fn accuracy(predictions: &[usize], truths: &[usize], positive_label: Option<usize>) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Contract("accuracy of an empty sample".into()));
    }
    let correct = match positive_label {
        Some(pos) => predictions
            .iter()
            .zip(truths)
            .filter(|(&p, &t)| (p == pos) == (t == pos))
            .count(),
        None => predictions.iter().zip(truths).filter(|(p, t)| p == t).count(),
    };
    Ok(correct as f64 / predictions.len() as f64)
}

/// Arithmetic mean of per-client accuracies.
pub fn avg_accuracy(accs: &[f64]) -> Result<f64> {
    if accs.is_empty() {
        return Err(Error::Contract("average of no client accuracies".into()));
    }
    Ok(accs.iter().sum::<f64>() / accs.len() as f64)
}

/// Euclidean distance between two parameter vectors, accumulated in `f64`.
pub fn weight_divergence(client: &ModelWeights, global: &ModelWeights) -> Result<f64> {
    if client.params.len() != global.params.len() {
        return Err(Error::Shape(format!(
            "cannot compare {} params with {}",
            client.params.len(),
            global.params.len()
        )));
    }
    Ok(client
        .params
        .iter()
        .zip(&global.params)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt())
}
