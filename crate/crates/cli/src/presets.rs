//! Named experiment and model presets.
//!
//! MNIST presets use one epoch per round, batch size 10, step size 0.1
//! federated and 0.001 centralized, 20% of the clients per round and 5% of
//! each client's data shared for warmup. Architectures are sized for a
//! desktop CPU.

use std::path::PathBuf;

use fedwarm_core::nn::Layer;

use crate::config::{
    DatasetConfig, ExperimentConfig, HyperparamsConfig, Mode, ModelConfig, PartitionConfig, TransferSection,
};

pub const DEFAULT_PRESET: &str = "mnist-fedavg";

pub const EXPERIMENT_PRESETS: &[&str] = &[
    "mnist-fedavg",
    "mnist-warmup",
    "mnist-centralized",
    "synthetic-smoke",
    "hard-fedavg",
    "hard-warmup",
    "transfer-scratch",
    "transfer-pretrained",
];

pub const MODEL_PRESETS: &[&str] = &["mnist-mlp", "mnist-cnn", "conv-small", "smoke-mlp", "hard-cnn", "transfer-cnn"];

/// A model preset with the input it was designed for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPreset {
    pub layers: Vec<Layer>,
    pub input_shape: Vec<usize>,
    pub num_classes: usize,
}

fn dense(in_dim: usize, out_dim: usize) -> Layer {
    Layer::Dense { in_dim, out_dim }
}

fn conv(in_channels: usize, out_channels: usize, kernel_size: usize, stride: usize) -> Layer {
    Layer::Conv2d { in_channels, out_channels, kernel_size, stride }
}

pub fn model(name: &str) -> Option<ModelPreset> {
    use Layer::{Flatten, Relu};
    let (layers, input_shape, num_classes) = match name {
        "mnist-mlp" => (vec![dense(784, 64), Relu, dense(64, 10)], vec![1, 28, 28], 10),
        // 28x28 -> 12x12x16 -> 4x4x32 -> 512 -> 10
        "mnist-cnn" => (
            vec![conv(1, 16, 5, 2), Relu, conv(16, 32, 5, 2), Relu, Flatten, dense(512, 10)],
            vec![1, 28, 28],
            10,
        ),
        // 12x12 -> 10x10x8 -> 800 -> 10
        "conv-small" => (vec![conv(1, 8, 3, 1), Relu, Flatten, dense(800, 10)], vec![1, 12, 12], 10),
        "smoke-mlp" => (vec![dense(16, 16), Relu, dense(16, 4)], vec![16], 4),
        // 12x12 -> 10x10x8 -> 4x4x16 -> 256 -> 32 -> 20
        "hard-cnn" => (
            vec![conv(1, 8, 3, 1), Relu, conv(8, 16, 4, 2), Relu, Flatten, dense(256, 32), Relu, dense(32, 20)],
            vec![1, 12, 12],
            20,
        ),
        // Same trunk, 40 output classes: 20 task labels and 20 source labels.
        "transfer-cnn" => (
            vec![conv(1, 8, 3, 1), Relu, conv(8, 16, 4, 2), Relu, Flatten, dense(256, 32), Relu, dense(32, 40)],
            vec![1, 12, 12],
            40,
        ),
        _ => return None,
    };
    Some(ModelPreset { layers, input_shape, num_classes })
}

/// `$FEDWARM_MNIST_DIR`, or `data/mnist` under the working directory.
pub fn default_mnist_dir() -> PathBuf {
    std::env::var_os("FEDWARM_MNIST_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data/mnist"))
}

fn layers_of(name: &str) -> ModelConfig {
    let preset = model(name).expect("built-in model preset");
    ModelConfig { layers: preset.layers.iter().map(|l| l.to_string()).collect() }
}

fn no_transfer(lr: f64) -> TransferSection {
    TransferSection { warmup_epochs: 0, warmup_lr: lr, pretrain_epochs: 0, pretrain_labels: Vec::new(), freeze_layer_count: 0 }
}

fn mnist(mode: Mode) -> ExperimentConfig {
    let lr = if mode == Mode::Centralized { 0.001 } else { 0.1 };
    ExperimentConfig {
        mode,
        seed: 42,
        output_dir: PathBuf::from(format!("runs/mnist-{}", mode.name())),
        workers: 1,
        dataset: DatasetConfig::Mnist { dir: default_mnist_dir() },
        partition: PartitionConfig { num_clients: 10, min_samples: 800, max_samples: 1000, warmup_fraction: 0.05 },
        model: layers_of("mnist-cnn"),
        hyperparams: HyperparamsConfig { lr, batch_size: 10, local_epochs: 1, rounds: 200, participation_fraction: 0.2 },
        transfer: TransferSection { warmup_epochs: 5, ..no_transfer(0.1) },
    }
}

fn hard(mode: Mode) -> ExperimentConfig {
    ExperimentConfig {
        mode,
        seed: 42,
        output_dir: PathBuf::from(format!("runs/hard-{}", mode.name())),
        workers: 1,
        dataset: DatasetConfig::Synthetic {
            num_classes: 20,
            samples_per_class: 150,
            feature_shape: vec![1, 12, 12],
            class_separation: 0.6,
            latent_dim: 0,
        },
        partition: PartitionConfig { num_clients: 20, min_samples: 90, max_samples: 120, warmup_fraction: 0.05 },
        model: layers_of("hard-cnn"),
        hyperparams: HyperparamsConfig { lr: 0.01, batch_size: 10, local_epochs: 1, rounds: 30, participation_fraction: 0.2 },
        transfer: TransferSection { warmup_epochs: 40, ..no_transfer(0.05) },
    }
}

fn transfer(mode: Mode) -> ExperimentConfig {
    ExperimentConfig {
        mode,
        seed: 42,
        output_dir: PathBuf::from(format!("runs/transfer-{}", mode.name())),
        workers: 1,
        dataset: DatasetConfig::Synthetic {
            num_classes: 40,
            samples_per_class: 150,
            feature_shape: vec![1, 12, 12],
            class_separation: 0.6,
            latent_dim: 8,
        },
        partition: PartitionConfig { num_clients: 20, min_samples: 90, max_samples: 120, warmup_fraction: 0.05 },
        model: layers_of("transfer-cnn"),
        hyperparams: HyperparamsConfig { lr: 0.01, batch_size: 10, local_epochs: 1, rounds: 10, participation_fraction: 0.2 },
        transfer: TransferSection {
            warmup_epochs: if mode == Mode::WarmupPretrained { 20 } else { 40 },
            warmup_lr: 0.05,
            pretrain_epochs: 20,
            pretrain_labels: (20..40).collect(),
            freeze_layer_count: 2,
        },
    }
}

pub fn experiment(name: &str) -> Option<ExperimentConfig> {
    Some(match name {
        "mnist-fedavg" => mnist(Mode::Fedavg),
        "mnist-warmup" => mnist(Mode::WarmupScratch),
        "mnist-centralized" => mnist(Mode::Centralized),
        "synthetic-smoke" => ExperimentConfig {
            mode: Mode::Fedavg,
            seed: 42,
            output_dir: PathBuf::from("runs/synthetic-smoke"),
            workers: 1,
            dataset: DatasetConfig::Synthetic {
                num_classes: 4,
                samples_per_class: 50,
                feature_shape: vec![16],
                class_separation: 3.0,
                latent_dim: 0,
            },
            partition: PartitionConfig { num_clients: 4, min_samples: 20, max_samples: 40, warmup_fraction: 0.1 },
            model: layers_of("smoke-mlp"),
            hyperparams: HyperparamsConfig { lr: 0.1, batch_size: 10, local_epochs: 1, rounds: 5, participation_fraction: 0.5 },
            transfer: TransferSection { warmup_epochs: 5, ..no_transfer(0.1) },
        },
        "hard-fedavg" => hard(Mode::Fedavg),
        "hard-warmup" => hard(Mode::WarmupScratch),
        "transfer-scratch" => transfer(Mode::WarmupScratch),
        "transfer-pretrained" => transfer(Mode::WarmupPretrained),
        _ => return None,
    })
}
