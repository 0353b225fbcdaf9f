//! Fixtures shared by the benchmarks.

use fedwarm_core::data::{generate_synthetic, partition_unique_label};
use fedwarm_core::nn::init_weights;
use fedwarm_core::{Batch, ClientPartition, Dataset, Layer, ModelSpec, ModelWeights, PartitionSpec, SyntheticSpec};

/// MNIST-shaped convolutional model: 28x28 -> 12x12x16 -> 4x4x32 -> 10.
pub fn cnn() -> ModelSpec {
    ModelSpec::new(
        vec![
            Layer::Conv2d { in_channels: 1, out_channels: 16, kernel_size: 5, stride: 2 },
            Layer::Relu,
            Layer::Conv2d { in_channels: 16, out_channels: 32, kernel_size: 5, stride: 2 },
            Layer::Relu,
            Layer::Flatten,
            Layer::Dense { in_dim: 512, out_dim: 10 },
        ],
        vec![1, 28, 28],
        10,
    )
    .expect("valid model")
}

pub fn mlp() -> ModelSpec {
    ModelSpec::new(
        vec![Layer::Dense { in_dim: 784, out_dim: 64 }, Layer::Relu, Layer::Dense { in_dim: 64, out_dim: 10 }],
        vec![1, 28, 28],
        10,
    )
    .expect("valid model")
}

/// Ten MNIST-shaped classes of Gaussian blobs.
pub fn dataset(samples_per_class: usize) -> Dataset {
    generate_synthetic(&SyntheticSpec {
        num_classes: 10,
        samples_per_class,
        feature_shape: vec![1, 28, 28],
        class_separation: 1.0,
        latent_dim: None,
        seed: 7,
    })
    .expect("valid synthetic spec")
}

pub fn clients(dataset: &Dataset, min: usize, max: usize) -> Vec<ClientPartition> {
    let spec = PartitionSpec { num_clients: 10, min_samples: min, max_samples: max, warmup_fraction: 0.05, seed: 7 };
    partition_unique_label(dataset, &spec).expect("partition")
}

pub fn weights(spec: &ModelSpec) -> ModelWeights {
    init_weights(spec, 7).expect("init")
}

/// The first `rows` training samples as one batch.
pub fn batch(dataset: &Dataset, rows: usize) -> Batch {
    let indices: Vec<usize> = (0..rows).collect();
    let labels = indices.iter().map(|&i| dataset.train_labels[i]).collect();
    Batch::new(dataset.train_inputs.gather(&indices), labels).expect("batch")
}
