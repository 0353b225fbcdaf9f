//! Warmup bootstrap, local training, FedAvg aggregation and the experiment
//! loops.

mod aggregate;
mod local;
mod run;
mod select;
mod warmup;

pub use aggregate::aggregate_fedavg;
pub use local::{local_sgd, train_user};
pub use run::{
    evaluate, pooled_indices, run_centralized, run_centralized_with, run_federated, run_federated_with, RunEvent,
    RunOptions,
};
pub use select::{participant_count, select_participants};
pub use warmup::{default_freeze_count, train_warmup};

use crate::error::{Error, Result};
use crate::nn::ModelWeights;

/// Optimisation and scheduling settings shared by all experiment modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Step size. Zero is accepted and turns training into a no-op.
    pub lr: f32,
    pub batch_size: usize,
    pub local_epochs: usize,
    pub rounds: usize,
    /// Share of clients selected per round, in `(0, 1]`.
    pub participation_fraction: f64,
    pub seed: u64,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be a non-negative number, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.local_epochs == 0 {
            return Err(Error::Config("local_epochs must be at least 1".into()));
        }
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if !(self.participation_fraction > 0.0 && self.participation_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "participation_fraction must lie in (0, 1], got {}",
                self.participation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferMode {
    /// Random initial weights (plain FedAvg).
    None,
    /// Train the initial model on the pooled warmup buffer.
    WarmupScratch,
    /// Pretrain on disjoint source labels, freeze the leading layers,
    /// reinitialize the rest and fine-tune on the warmup buffer.
    WarmupPretrained,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferConfig {
    pub mode: TransferMode,
    /// Leading parameterized layers kept frozen after pretraining.
    pub freeze_layer_count: usize,
    /// Source labels for pretraining; must not overlap the clients' labels.
    pub pretrain_labels: Vec<usize>,
    pub warmup_epochs: usize,
    pub pretrain_epochs: usize,
    /// Step size for server-side training; defaults to the federated `lr`.
    pub warmup_lr: Option<f32>,
}

impl TransferConfig {
    pub fn none() -> Self {
        TransferConfig {
            mode: TransferMode::None,
            freeze_layer_count: 0,
            pretrain_labels: Vec::new(),
            warmup_epochs: 0,
            pretrain_epochs: 0,
            warmup_lr: None,
        }
    }
}

/// A client's upload: `w^k_{r+1}` together with its local sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub weights: ModelWeights,
    pub sample_count: usize,
}
