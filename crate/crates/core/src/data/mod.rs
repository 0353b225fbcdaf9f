//! Datasets, the unique-label partitioner and the warmup buffer.

mod idx;
mod partition;
mod synthetic;

pub use idx::{encode_idx_images, encode_idx_labels, load_idx, parse_idx_images, parse_idx_labels, IdxSamples};
pub use partition::{build_warmup_buffer, partition_unique_label, ClientPartition, PartitionSpec};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use std::path::{Path, PathBuf};

/// Train images, train labels, test images, test labels.
pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

use crate::error::{Error, Result};
use crate::nn::{Batch, Matrix};

/// Train/test split of normalized samples with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train_inputs: Matrix<f32>,
    pub train_labels: Vec<usize>,
    pub test_inputs: Matrix<f32>,
    pub test_labels: Vec<usize>,
    pub num_classes: usize,
    pub feature_shape: Vec<usize>,
}

impl Dataset {
    pub fn new(
        train: SampleSet,
        test: SampleSet,
        num_classes: usize,
        feature_shape: Vec<usize>,
    ) -> Result<Self> {
        let features: usize = feature_shape.iter().product();
        for (name, set) in [("train", &train), ("test", &test)] {
            if set.inputs.cols != features {
                return Err(Error::Shape(format!(
                    "{name} rows have {} features, feature shape {feature_shape:?} needs {features}",
                    set.inputs.cols
                )));
            }
            if set.inputs.rows != set.labels.len() {
                return Err(Error::Shape(format!(
                    "{name} split has {} rows and {} labels",
                    set.inputs.rows,
                    set.labels.len()
                )));
            }
            if let Some(bad) = set.labels.iter().find(|&&l| l >= num_classes) {
                return Err(Error::Config(format!(
                    "{name} label {bad} out of range for {num_classes} classes"
                )));
            }
        }
        let mut seen = vec![false; num_classes];
        for &l in &test.labels {
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!("class {missing} is absent from the test split")));
        }
        Ok(Dataset {
            train_inputs: train.inputs,
            train_labels: train.labels,
            test_inputs: test.inputs,
            test_labels: test.labels,
            num_classes,
            feature_shape,
        })
    }

    /// Load a dataset from the four IDX files of an MNIST-style release.
    pub fn from_idx(
        train_images: &Path,
        train_labels: &Path,
        test_images: &Path,
        test_labels: &Path,
    ) -> Result<Self> {
        let train = load_idx(train_images, train_labels)?;
        let test = load_idx(test_images, test_labels)?;
        if train.image_shape != test.image_shape {
            return Err(Error::Consistency {
                path: test_images.to_path_buf(),
                msg: format!(
                    "image shape {:?} differs from training images {:?}",
                    test.image_shape, train.image_shape
                ),
            });
        }
        let num_classes = train
            .labels
            .iter()
            .chain(&test.labels)
            .max()
            .map_or(0, |m| m + 1);
        let shape = vec![1, train.image_shape[0], train.image_shape[1]];
        Dataset::new(
            SampleSet { inputs: train.inputs, labels: train.labels },
            SampleSet { inputs: test.inputs, labels: test.labels },
            num_classes,
            shape,
        )
    }

    /// Load the standard MNIST file names from `dir`, each either plain or
    /// with a `.gz` suffix.
    pub fn from_mnist_dir(dir: &Path) -> Result<Self> {
        let find = |name: &str| -> Result<PathBuf> {
            let plain = dir.join(name);
            let gz = dir.join(format!("{name}.gz"));
            if plain.is_file() {
                Ok(plain)
            } else if gz.is_file() {
                Ok(gz)
            } else {
                Err(Error::Io {
                    path: plain,
                    offset: None,
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found (also tried .gz)"),
                })
            }
        };
        Dataset::from_idx(
            &find(MNIST_FILES[0])?,
            &find(MNIST_FILES[1])?,
            &find(MNIST_FILES[2])?,
            &find(MNIST_FILES[3])?,
        )
    }

    pub fn feature_len(&self) -> usize {
        self.train_inputs.cols
    }

    /// Training rows at `indices`, in order.
    pub fn train_subset(&self, indices: &[usize]) -> SampleSet {
        SampleSet {
            inputs: self.train_inputs.gather(indices),
            labels: indices.iter().map(|&i| self.train_labels[i]).collect(),
        }
    }

    /// Training indices grouped by label, ascending within each group.
    pub fn train_indices_by_label(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_classes];
        for (i, &l) in self.train_labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }
}

/// An owned set of samples (a mini-batch source).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub inputs: Matrix<f32>,
    pub labels: Vec<usize>,
}

impl SampleSet {
    pub fn empty(features: usize) -> Self {
        SampleSet {
            inputs: Matrix { rows: 0, cols: features, data: Vec::new() },
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn append(&mut self, other: &SampleSet) {
        debug_assert_eq!(self.inputs.cols, other.inputs.cols);
        self.inputs.data.extend_from_slice(&other.inputs.data);
        self.inputs.rows += other.inputs.rows;
        self.labels.extend_from_slice(&other.labels);
    }

    /// Rows at `order[..]` as a mini-batch.
    pub fn batch(&self, order: &[usize]) -> Batch {
        Batch {
            inputs: self.inputs.gather(order),
            labels: order.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}
