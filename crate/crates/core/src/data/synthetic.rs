use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, SampleSet};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng;

/// Gaussian-blob generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub feature_shape: Vec<usize>,
    /// Scale of the class means relative to unit per-sample noise.
    pub class_separation: f64,
    /// When set, class means are drawn inside a shared random subspace of
    /// this dimension, so what distinguishes one group of classes also
    /// distinguishes another.
    pub latent_dim: Option<usize>,
    pub seed: u64,
}

/// Raw values `separation * mean + noise` are mapped to `[0, 1]` by
/// `0.5 + raw / VALUE_SPAN` and clamped.
const VALUE_SPAN: f64 = 8.0;

/// Per-class Gaussian blobs with a stratified 80/20 train/test split.
///
/// Training rows are class-major (all of class 0, then class 1, ...), as are
/// test rows.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.num_classes < 2 {
        return Err(Error::Config(format!(
            "synthetic data needs at least 2 classes, got {}",
            spec.num_classes
        )));
    }
    if spec.samples_per_class < 2 {
        return Err(Error::Config("samples_per_class must be at least 2".into()));
    }
    if !(spec.class_separation >= 0.0 && spec.class_separation.is_finite()) {
        return Err(Error::Config(format!(
            "class_separation must be a non-negative number, got {}",
            spec.class_separation
        )));
    }
    let features: usize = spec.feature_shape.iter().product();
    if features == 0 {
        return Err(Error::Config(format!("invalid feature shape {:?}", spec.feature_shape)));
    }
    if spec.latent_dim == Some(0) {
        return Err(Error::Config("latent_dim must be positive".into()));
    }

    let basis: Option<Vec<f64>> = spec.latent_dim.map(|r| {
        let mut g = rng::stream(spec.seed, "synthetic-basis", &[]);
        (0..r * features).map(|_| g.sample::<f64, _>(StandardNormal)).collect()
    });

    let n_train = spec.samples_per_class * 4 / 5;
    let n_test = spec.samples_per_class - n_train;
    let mut train = SampleSet::empty(features);
    let mut test = SampleSet::empty(features);
    for class in 0..spec.num_classes {
        let mut g = rng::stream(spec.seed, "synthetic-mean", &[class as u64]);
        let mean: Vec<f64> = match (&basis, spec.latent_dim) {
            (Some(basis), Some(r)) => {
                let z: Vec<f64> = (0..r).map(|_| g.sample(StandardNormal)).collect();
                let norm = (r as f64).sqrt();
                (0..features)
                    .map(|j| (0..r).map(|k| z[k] * basis[k * features + j]).sum::<f64>() / norm)
                    .collect()
            }
            _ => (0..features).map(|_| g.sample(StandardNormal)).collect(),
        };
        let mut g = rng::stream(spec.seed, "synthetic-sample", &[class as u64]);
        for s in 0..spec.samples_per_class {
            let row: Vec<f32> = mean
                .iter()
                .map(|&m| {
                    let raw = spec.class_separation * m + g.sample::<f64, _>(StandardNormal);
                    (0.5 + raw / VALUE_SPAN).clamp(0.0, 1.0) as f32
                })
                .collect();
            let dst = if s < n_train { &mut train } else { &mut test };
            dst.inputs.data.extend_from_slice(&row);
            dst.inputs.rows += 1;
            dst.labels.push(class);
        }
    }
    debug_assert_eq!(test.len(), n_test * spec.num_classes);
    let train = SampleSet {
        inputs: Matrix::new(train.inputs.rows, features, train.inputs.data)?,
        labels: train.labels,
    };
    Dataset::new(train, test, spec.num_classes, spec.feature_shape.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sep: f64) -> SyntheticSpec {
        SyntheticSpec {
            num_classes: 3,
            samples_per_class: 10,
            feature_shape: vec![1, 2, 3],
            class_separation: sep,
            latent_dim: None,
            seed: 5,
        }
    }

    #[test]
    fn stratified_split_sizes() {
        let d = generate_synthetic(&spec(1.0)).unwrap();
        assert_eq!(d.train_labels.len(), 24);
        assert_eq!(d.test_labels.len(), 6);
        assert_eq!(d.feature_len(), 6);
        assert!(d.train_inputs.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn deterministic_under_seed() {
        assert_eq!(generate_synthetic(&spec(2.0)).unwrap(), generate_synthetic(&spec(2.0)).unwrap());
        let mut other = spec(2.0);
        other.seed = 6;
        assert_ne!(generate_synthetic(&other).unwrap(), generate_synthetic(&spec(2.0)).unwrap());
    }

    #[test]
    fn zero_separation_makes_classes_identically_distributed() {
        // With coinciding means, each class sees the same noise law; per-class
        // empirical means converge to the common center.
        let mut s = spec(0.0);
        s.samples_per_class = 2000;
        let d = generate_synthetic(&s).unwrap();
        let f = d.feature_len();
        for class in 0..3 {
            let rows: Vec<usize> = (0..d.train_labels.len()).filter(|&i| d.train_labels[i] == class).collect();
            for j in 0..f {
                let m: f64 = rows.iter().map(|&r| d.train_inputs.row(r)[j] as f64).sum::<f64>() / rows.len() as f64;
                assert!((m - 0.5).abs() < 0.02, "class {class} feature {j} mean {m}");
            }
        }
    }

    #[test]
    fn rejects_degenerate_specs() {
        let mut s = spec(1.0);
        s.num_classes = 1;
        assert!(generate_synthetic(&s).is_err());
        let mut s = spec(1.0);
        s.latent_dim = Some(0);
        assert!(generate_synthetic(&s).is_err());
    }
}
