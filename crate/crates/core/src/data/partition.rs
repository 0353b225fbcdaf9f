use rand::seq::SliceRandom;
use rand::Rng;

use super::{Dataset, SampleSet};
use crate::error::{Error, Result};
use crate::rng;

/// How to carve a dataset into one-label clients.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    pub num_clients: usize,
    pub min_samples: usize,
    pub max_samples: usize,
    /// Share of each client's samples sent to the server for warmup, in `[0, 1)`.
    pub warmup_fraction: f64,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::Config("num_clients must be at least 1".into()));
        }
        if self.num_clients > num_classes {
            return Err(Error::Config(format!(
                "{} clients need {} distinct labels but the dataset has {num_classes} classes",
                self.num_clients, self.num_clients
            )));
        }
        if self.min_samples == 0 || self.min_samples > self.max_samples {
            return Err(Error::Config(format!(
                "sample range [{}, {}] must satisfy 0 < min <= max",
                self.min_samples, self.max_samples
            )));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config(format!(
                "warmup_fraction must lie in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        Ok(())
    }

    /// `ceil(warmup_fraction * n)`, immune to representation error such as
    /// `0.07 * 100 = 7.000000000000001`.
    pub fn warmup_count(&self, n: usize) -> usize {
        let exact = self.warmup_fraction * n as f64;
        let rounded = exact.round();
        if (exact - rounded).abs() < 1e-9 {
            rounded as usize
        } else {
            exact.ceil() as usize
        }
    }
}

/// One client's share of the training split. Every referenced sample carries
/// `label`, and no index appears in another client or in both lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientPartition {
    pub client_id: usize,
    pub label: usize,
    pub train_indices: Vec<usize>,
    pub warmup_indices: Vec<usize>,
}

impl ClientPartition {
    /// Local training set size `n_k`. Warmup samples do not count.
    pub fn sample_count(&self) -> usize {
        self.train_indices.len()
    }
}

/// Assign the `K` lowest labels to clients `0..K`, one label each, and draw a
/// seeded number of samples per client from that label's training rows.
///
/// For client `k` the target size is uniform on `[min_samples, max_samples]`
/// (capped at availability); the samples are a seeded shuffle prefix of the
/// label's rows, and the first `ceil(warmup_fraction * n)` of them become the
/// warmup share.
pub fn partition_unique_label(dataset: &Dataset, spec: &PartitionSpec) -> Result<Vec<ClientPartition>> {
    spec.validate(dataset.num_classes)?;
    let groups = dataset.train_indices_by_label();
    let present: Vec<usize> = (0..groups.len()).filter(|&l| !groups[l].is_empty()).collect();
    if present.len() < spec.num_clients {
        return Err(Error::Partition(format!(
            "{} clients requested but only {} labels have training samples",
            spec.num_clients,
            present.len()
        )));
    }
    let mut clients = Vec::with_capacity(spec.num_clients);
    for (client_id, &label) in present.iter().take(spec.num_clients).enumerate() {
        let pool = &groups[label];
        if pool.len() < spec.min_samples {
            return Err(Error::Partition(format!(
                "label {label} has {} training samples, fewer than min_samples {}",
                pool.len(),
                spec.min_samples
            )));
        }
        let mut g = rng::stream(spec.seed, "partition", &[client_id as u64]);
        let target = g.random_range(spec.min_samples..=spec.max_samples);
        let n_total = target.min(pool.len());
        let mut shuffled = pool.clone();
        shuffled.shuffle(&mut g);
        shuffled.truncate(n_total);
        let n_warm = spec.warmup_count(n_total);
        if n_warm >= n_total {
            return Err(Error::Partition(format!(
                "label {label}: warmup share {n_warm} of {n_total} samples leaves no local training data"
            )));
        }
        let train_indices = shuffled.split_off(n_warm);
        clients.push(ClientPartition {
            client_id,
            label,
            train_indices,
            warmup_indices: shuffled,
        });
    }
    Ok(clients)
}

/// Pool every client's warmup samples, in ascending client order.
pub fn build_warmup_buffer(dataset: &Dataset, partitions: &[ClientPartition]) -> SampleSet {
    let mut order: Vec<&ClientPartition> = partitions.iter().collect();
    order.sort_by_key(|p| p.client_id);
    let indices: Vec<usize> = order
        .iter()
        .flat_map(|p| p.warmup_indices.iter().copied())
        .collect();
    dataset.train_subset(&indices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};

    fn blobs(per_class: usize) -> Dataset {
        generate_synthetic(&SyntheticSpec {
            num_classes: 4,
            samples_per_class: per_class,
            feature_shape: vec![3],
            class_separation: 1.0,
            latent_dim: None,
            seed: 1,
        })
        .unwrap()
    }

    fn spec(k: usize, min: usize, max: usize, warm: f64) -> PartitionSpec {
        PartitionSpec {
            num_clients: k,
            min_samples: min,
            max_samples: max,
            warmup_fraction: warm,
            seed: 3,
        }
    }

    #[test]
    fn warmup_ceiling_arithmetic() {
        let s = spec(1, 1, 1, 0.05);
        assert_eq!(s.warmup_count(1000), 50);
        assert_eq!(s.warmup_count(901), 46);
        assert_eq!(spec(1, 1, 1, 0.07).warmup_count(100), 7);
        assert_eq!(spec(1, 1, 1, 0.0).warmup_count(100), 0);
    }

    #[test]
    fn lowest_labels_ascending() {
        let d = blobs(50);
        let parts = partition_unique_label(&d, &spec(3, 10, 20, 0.1)).unwrap();
        assert_eq!(parts.iter().map(|p| p.label).collect::<Vec<_>>(), vec![0, 1, 2]);
        for p in &parts {
            let n = p.train_indices.len() + p.warmup_indices.len();
            assert!((10..=20).contains(&n));
            assert_eq!(p.warmup_indices.len(), spec(3, 10, 20, 0.1).warmup_count(n));
        }
    }

    #[test]
    fn caps_at_availability_and_errors_below_min() {
        let d = blobs(50); // 40 training rows per class
        let parts = partition_unique_label(&d, &spec(4, 30, 100, 0.0)).unwrap();
        assert!(parts.iter().all(|p| p.train_indices.len() <= 40));
        let err = partition_unique_label(&d, &spec(2, 41, 50, 0.0)).unwrap_err();
        assert!(err.to_string().contains("label 0"), "{err}");
        assert!(matches!(partition_unique_label(&d, &spec(5, 1, 2, 0.0)), Err(Error::Config(_))));
    }

    #[test]
    fn warmup_buffer_concatenates_in_client_order() {
        let d = blobs(50);
        let mut parts = partition_unique_label(&d, &spec(4, 20, 20, 0.25)).unwrap();
        parts.reverse();
        let buf = build_warmup_buffer(&d, &parts);
        assert_eq!(buf.len(), 20);
        assert_eq!(buf.labels, [0, 1, 2, 3].iter().flat_map(|&l| [l; 5]).collect::<Vec<_>>());
        let none = partition_unique_label(&d, &spec(4, 20, 20, 0.0)).unwrap();
        assert!(build_warmup_buffer(&d, &none).is_empty());
    }
}
