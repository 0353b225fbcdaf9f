//! Deterministic single-process federated learning simulator for continuous
//! authentication under one-label-per-client skew.
//!
//! The crate is organised bottom-up:
//!
//! * [`nn`] is a small dense/conv network engine with softmax cross-entropy,
//!   plain SGD with a frozen-prefix mask, and finite-difference checking.
//! * [`data`] loads IDX files, generates synthetic blobs, and builds the
//!   unique-label client partitions plus the pooled warmup buffer.
//! * [`engine`] runs warmup training, participant selection, local training,
//!   FedAvg aggregation and the centralized baseline.
//! * [`metrics`] computes accuracies and weight divergence and persists
//!   per-round logs as CSV.
//!
//! All randomness is derived from a single experiment seed through named
//! streams (see [`rng`]), so identical configurations produce identical
//! round logs regardless of how clients are scheduled across threads.

pub mod data;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod rng;

pub use data::{ClientPartition, Dataset, PartitionSpec, SampleSet, SyntheticSpec};
pub use engine::{ClientUpdate, Hyperparams, TransferConfig, TransferMode};
pub use metrics::RoundLog;



pub use error::{Error, Result};

pub use nn::{Batch, Layer, Matrix, ModelSpec, ModelWeights};
