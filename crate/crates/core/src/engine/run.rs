use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;

use super::aggregate::aggregate_fedavg;
use super::local::{local_sgd, train_user};
use super::select::select_participants;
use super::warmup::train_warmup;
use super::{ClientUpdate, Hyperparams, TransferConfig, TransferMode};
use crate::data::{build_warmup_buffer, ClientPartition, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{avg_accuracy, weight_divergence, RoundLog};
use crate::nn::{init_weights, predict, ModelSpec, ModelWeights};

/// Progress notifications from the experiment loops.
#[derive(Debug, Clone, Copy)]
pub enum RunEvent<'a> {
    /// The initial global model `w_0`.
    Initial { weights: &'a ModelWeights },
    /// A finished round: its log, the new global model and the client
    /// uploads it was averaged from (empty for the centralized baseline).
    Round {
        log: &'a RoundLog,
        global: &'a ModelWeights,
        updates: &'a [ClientUpdate],
    },
}

/// Execution settings that never change results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Threads used to train one round's clients concurrently.
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { workers: 1 }
    }
}

/// The test rows of the clients' labels, pre-sliced by label.
struct TestView {
    inputs: crate::nn::Matrix<f32>,
    labels: Vec<usize>,
    by_client: Vec<(usize, Vec<usize>)>,
}

impl TestView {
    fn new(dataset: &Dataset, partitions: &[ClientPartition]) -> Self {
        let task: BTreeSet<usize> = partitions.iter().map(|p| p.label).collect();
        let rows: Vec<usize> = (0..dataset.test_labels.len())
            .filter(|&i| task.contains(&dataset.test_labels[i]))
            .collect();
        let labels: Vec<usize> = rows.iter().map(|&i| dataset.test_labels[i]).collect();
        let by_client = partitions
            .iter()
            .map(|p| {
                let slice = (0..labels.len()).filter(|&i| labels[i] == p.label).collect();
                (p.client_id, slice)
            })
            .collect();
        TestView {
            inputs: dataset.test_inputs.gather(&rows),
            labels,
            by_client,
        }
    }

    fn evaluate(&self, spec: &ModelSpec, weights: &ModelWeights) -> Result<(f64, BTreeMap<usize, f64>)> {
        let preds = predict(spec, weights, &self.inputs)?;
        let correct = preds.iter().zip(&self.labels).filter(|(p, t)| p == t).count();
        let global = correct as f64 / self.labels.len().max(1) as f64;
        let mut per_client = BTreeMap::new();
        for (client, slice) in &self.by_client {
            let hits = slice.iter().filter(|&&i| preds[i] == self.labels[i]).count();
            per_client.insert(*client, hits as f64 / slice.len().max(1) as f64);
        }
        Ok((global, per_client))
    }
}

/// Global accuracy on the test rows of the clients' labels, and each
/// client's accuracy on the rows of its own label.
pub fn evaluate(
    dataset: &Dataset,
    partitions: &[ClientPartition],
    spec: &ModelSpec,
    weights: &ModelWeights,
) -> Result<(f64, BTreeMap<usize, f64>)> {
    TestView::new(dataset, partitions).evaluate(spec, weights)
}

fn check_setup(dataset: &Dataset, partitions: &[ClientPartition], spec: &ModelSpec, hp: &Hyperparams) -> Result<()> {
    hp.validate()?;
    if partitions.is_empty() {
        return Err(Error::Config("no clients".into()));
    }
    if spec.input_len() != dataset.feature_len() {
        return Err(Error::Shape(format!(
            "model input {:?} does not match dataset features {:?}",
            spec.input_shape, dataset.feature_shape
        )));
    }
    if spec.num_classes != dataset.num_classes {
        return Err(Error::Shape(format!(
            "model predicts {} classes, dataset has {}",
            spec.num_classes, dataset.num_classes
        )));
    }
    let mut labels = BTreeSet::new();
    let mut ids = BTreeSet::new();
    for p in partitions {
        if !labels.insert(p.label) || !ids.insert(p.client_id) {
            return Err(Error::Config(format!(
                "client {} repeats a label or id of another client",
                p.client_id
            )));
        }
        if !dataset.test_labels.contains(&p.label) {
            return Err(Error::Config(format!("label {} has no test samples", p.label)));
        }
    }
    Ok(())
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Warmup (per `transfer`) followed by `hp.rounds` FedAvg rounds.
pub fn run_federated(
    dataset: &Dataset,
    partitions: &[ClientPartition],
    spec: &ModelSpec,
    transfer: &TransferConfig,
    hp: &Hyperparams,
) -> Result<Vec<RoundLog>> {
    run_federated_with(dataset, partitions, spec, transfer, hp, RunOptions::default(), |_: RunEvent<'_>| {})
}

/// [`run_federated`] with explicit execution options and a per-round
/// callback.
pub fn run_federated_with(
    dataset: &Dataset,
    partitions: &[ClientPartition],
    spec: &ModelSpec,
    transfer: &TransferConfig,
    hp: &Hyperparams,
    options: RunOptions,
    mut observe: impl FnMut(RunEvent<'_>) + Send,
) -> Result<Vec<RoundLog>> {
    check_setup(dataset, partitions, spec, hp)?;
    if transfer.mode == TransferMode::WarmupPretrained {
        if let Some(p) = partitions.iter().find(|p| transfer.pretrain_labels.contains(&p.label)) {
            return Err(Error::Config(format!(
                "pretraining label {} belongs to client {}",
                p.label, p.client_id
            )));
        }
    }
    let mut clients: Vec<&ClientPartition> = partitions.iter().collect();
    clients.sort_by_key(|p| p.client_id);
    let buffer = build_warmup_buffer(dataset, partitions);
    let test = TestView::new(dataset, partitions);

    with_pool(options.workers, || {
        let mut global = train_warmup(dataset, &buffer, spec, transfer, hp)?;
        observe(RunEvent::Initial { weights: &global });
        let mut logs = Vec::with_capacity(hp.rounds);
        for round in 1..=hp.rounds {
            let started = Instant::now();
            let step = || -> Result<(RoundLog, ModelWeights, Vec<ClientUpdate>)> {
                let selected: Vec<&ClientPartition> =
                    select_participants(clients.len(), hp.participation_fraction, round, hp.seed)
                        .into_iter()
                        .map(|i| clients[i])
                        .collect();
                let updates: Vec<ClientUpdate> = if options.workers > 1 {
                    selected
                        .par_iter()
                        .map(|c| train_user(c, &global, dataset, spec, hp, round))
                        .collect::<Result<_>>()?
                } else {
                    selected
                        .iter()
                        .map(|c| train_user(c, &global, dataset, spec, hp, round))
                        .collect::<Result<_>>()?
                };
                let next = aggregate_fedavg(&updates)?;
                let mut divergence = BTreeMap::new();
                for u in &updates {
                    divergence.insert(u.client_id, weight_divergence(&u.weights, &next)?);
                }
                let (global_accuracy, client_accuracies) = test.evaluate(spec, &next)?;
                let accs: Vec<f64> = client_accuracies.values().copied().collect();
                let log = RoundLog {
                    round,
                    global_accuracy,
                    avg_accuracy: avg_accuracy(&accs)?,
                    client_accuracies,
                    divergence,
                    selected_clients: selected.iter().map(|c| c.client_id).collect(),
                    wallclock_ms: 0,
                };
                Ok((log, next, updates))
            };
            let (mut log, next, updates) = step().map_err(|e| Error::Round { round, source: Box::new(e) })?;
            global = next;
            log.wallclock_ms = started.elapsed().as_millis() as u64;
            observe(RunEvent::Round { log: &log, global: &global, updates: &updates });
            logs.push(log);
        }
        Ok(logs)
    })?
}

/// Centralized baseline: all clients' samples (local and warmup) pooled on
/// the server; each round is `hp.local_epochs` epochs over the pool.
pub fn run_centralized(
    dataset: &Dataset,
    partitions: &[ClientPartition],
    spec: &ModelSpec,
    hp: &Hyperparams,
) -> Result<Vec<RoundLog>> {
    run_centralized_with(dataset, partitions, spec, hp, |_: RunEvent<'_>| {})
}

pub fn run_centralized_with(
    dataset: &Dataset,
    partitions: &[ClientPartition],
    spec: &ModelSpec,
    hp: &Hyperparams,
    mut observe: impl FnMut(RunEvent<'_>),
) -> Result<Vec<RoundLog>> {
    check_setup(dataset, partitions, spec, hp)?;
    let pool = pooled_indices(partitions);
    let test = TestView::new(dataset, partitions);
    let mut weights = init_weights(spec, hp.seed)?;
    observe(RunEvent::Initial { weights: &weights });
    let mut logs = Vec::with_capacity(hp.rounds);
    for round in 1..=hp.rounds {
        let started = Instant::now();
        let step = |weights: &mut ModelWeights| -> Result<RoundLog> {
            local_sgd(
                spec,
                weights,
                &dataset.train_inputs,
                &dataset.train_labels,
                &pool,
                hp.batch_size,
                hp.local_epochs,
                hp.lr,
                hp.seed,
                "central",
                &[round as u64],
            )?;
            let (global_accuracy, client_accuracies) = test.evaluate(spec, weights)?;
            let accs: Vec<f64> = client_accuracies.values().copied().collect();
            Ok(RoundLog {
                round,
                global_accuracy,
                avg_accuracy: avg_accuracy(&accs)?,
                client_accuracies,
                divergence: BTreeMap::new(),
                selected_clients: Vec::new(),
                wallclock_ms: 0,
            })
        };
        let mut log = step(&mut weights).map_err(|e| Error::Round { round, source: Box::new(e) })?;
        log.wallclock_ms = started.elapsed().as_millis() as u64;
        observe(RunEvent::Round { log: &log, global: &weights, updates: &[] });
        logs.push(log);
    }
    Ok(logs)
}

/// Every client's local and warmup indices, in ascending client order: the
/// centralized training pool.
pub fn pooled_indices(partitions: &[ClientPartition]) -> Vec<usize> {
    let mut clients: Vec<&ClientPartition> = partitions.iter().collect();
    clients.sort_by_key(|p| p.client_id);
    clients
        .iter()
        .flat_map(|p| p.train_indices.iter().chain(&p.warmup_indices).copied())
        .collect()
}
