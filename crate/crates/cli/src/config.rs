//! Experiment configuration files.
//!
//! A config is a TOML document. Every key is optional: missing values come
//! from the preset named by the top-level `preset` key (default
//! `mnist-fedavg`). Grammar:
//!
//! ```toml
//! preset = "mnist-warmup"         # base values
//! mode = "warmup-scratch"         # centralized | fedavg | warmup-scratch | warmup-pretrained
//! seed = 42                       # drives every random stream
//! output_dir = "runs/mnist"
//! workers = 1                     # threads for client training
//!
//! [dataset]
//! kind = "mnist"                  # mnist | idx | synthetic
//! dir = "data/mnist"              # mnist: directory holding the four IDX files
//! # idx: train_images, train_labels, test_images, test_labels
//! # synthetic: num_classes, samples_per_class, feature_shape, class_separation,
//! #            latent_dim (0 = independent class means)
//!
//! [partition]
//! num_clients = 10
//! min_samples = 800
//! max_samples = 1000
//! warmup_fraction = 0.05
//!
//! [model]
//! preset = "mnist-mlp"            # or: layers = ["dense 784 64", "relu", "dense 64 10"]
//!
//! [hyperparams]
//! lr = 0.1
//! batch_size = 10
//! local_epochs = 1
//! rounds = 200
//! participation_fraction = 0.2
//!
//! [transfer]
//! warmup_epochs = 5
//! warmup_lr = 0.1
//! pretrain_epochs = 5
//! pretrain_labels = [10, 11]
//! freeze_layer_count = 1
//! ```
//!
//! Relative paths are resolved against the working directory.

use std::path::{Path, PathBuf};

use fedwarm_core::data::{Dataset, PartitionSpec, SyntheticSpec};
use fedwarm_core::engine::{Hyperparams, TransferConfig, TransferMode};
use fedwarm_core::nn::{Layer, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Centralized,
    Fedavg,
    WarmupScratch,
    WarmupPretrained,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Centralized => "centralized",
            Mode::Fedavg => "fedavg",
            Mode::WarmupScratch => "warmup-scratch",
            Mode::WarmupPretrained => "warmup-pretrained",
        }
    }

    pub fn transfer_mode(self) -> TransferMode {
        match self {
            Mode::Centralized | Mode::Fedavg => TransferMode::None,
            Mode::WarmupScratch => TransferMode::WarmupScratch,
            Mode::WarmupPretrained => TransferMode::WarmupPretrained,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetConfig {
    Mnist {
        dir: PathBuf,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    Synthetic {
        num_classes: usize,
        samples_per_class: usize,
        feature_shape: Vec<usize>,
        class_separation: f64,
        latent_dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub num_clients: usize,
    pub min_samples: usize,
    pub max_samples: usize,
    pub warmup_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperparamsConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub local_epochs: usize,
    pub rounds: usize,
    pub participation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSection {
    pub warmup_epochs: usize,
    pub warmup_lr: f64,
    pub pretrain_epochs: usize,
    pub pretrain_labels: Vec<usize>,
    pub freeze_layer_count: usize,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub dataset: DatasetConfig,
    pub partition: PartitionConfig,
    pub model: ModelConfig,
    pub hyperparams: HyperparamsConfig,
    pub transfer: TransferSection,
}

// The shape of a config file: everything optional, nothing unknown.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    preset: Option<String>,
    mode: Option<Mode>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    workers: Option<usize>,
    dataset: Option<FileDataset>,
    partition: Option<FilePartition>,
    model: Option<FileModel>,
    hyperparams: Option<FileHyperparams>,
    transfer: Option<FileTransfer>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
struct FileDataset {
    kind: Option<String>,
    dir: Option<PathBuf>,
    train_images: Option<PathBuf>,
    train_labels: Option<PathBuf>,
    test_images: Option<PathBuf>,
    test_labels: Option<PathBuf>,
    num_classes: Option<usize>,
    samples_per_class: Option<usize>,
    feature_shape: Option<Vec<usize>>,
    class_separation: Option<f64>,
    latent_dim: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePartition {
    num_clients: Option<usize>,
    min_samples: Option<usize>,
    max_samples: Option<usize>,
    warmup_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileModel {
    preset: Option<String>,
    layers: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileHyperparams {
    lr: Option<f64>,
    batch_size: Option<usize>,
    local_epochs: Option<usize>,
    rounds: Option<usize>,
    participation_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTransfer {
    warmup_epochs: Option<usize>,
    warmup_lr: Option<f64>,
    pretrain_epochs: Option<usize>,
    pretrain_labels: Option<Vec<usize>>,
    freeze_layer_count: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// 1-based line of `key` inside `[section]` (or the top level when
/// `section` is `None`).
fn key_line(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(header.trim().to_string());
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        if k.trim() == key && current.as_deref() == section {
            return Some(i + 1);
        }
    }
    section.and_then(|s| {
        text.lines()
            .position(|l| l.trim() == format!("[{s}]"))
            .map(|i| i + 1)
    })
}

impl FileDataset {
    fn apply(self, base: DatasetConfig) -> Result<DatasetConfig, String> {
        let base_kind = match &base {
            DatasetConfig::Mnist { .. } => "mnist",
            DatasetConfig::Idx { .. } => "idx",
            DatasetConfig::Synthetic { .. } => "synthetic",
        };
        let kind = self.kind.clone().unwrap_or_else(|| base_kind.to_string());
        let inherit = kind == base_kind;
        let missing = |field: &str| format!("dataset kind `{kind}` needs `{field}`");
        let stray = |fields: &[(&str, bool)]| -> Result<(), String> {
            match fields.iter().find(|f| f.1) {
                Some((name, _)) => Err(format!("`{name}` does not apply to dataset kind `{kind}`")),
                None => Ok(()),
            }
        };
        let synthetic_fields = [
            ("num_classes", self.num_classes.is_some()),
            ("samples_per_class", self.samples_per_class.is_some()),
            ("feature_shape", self.feature_shape.is_some()),
            ("class_separation", self.class_separation.is_some()),
            ("latent_dim", self.latent_dim.is_some()),
        ];
        let idx_fields = [
            ("train_images", self.train_images.is_some()),
            ("train_labels", self.train_labels.is_some()),
            ("test_images", self.test_images.is_some()),
            ("test_labels", self.test_labels.is_some()),
        ];
        match kind.as_str() {
            "mnist" => {
                stray(&synthetic_fields)?;
                stray(&idx_fields)?;
                let dir = match (self.dir, base) {
                    (Some(d), _) => d,
                    (None, DatasetConfig::Mnist { dir }) => dir,
                    (None, _) => presets::default_mnist_dir(),
                };
                Ok(DatasetConfig::Mnist { dir })
            }
            "idx" => {
                stray(&synthetic_fields)?;
                stray(&[("dir", self.dir.is_some())])?;
                let (bi, bl, ti, tl) = match base {
                    DatasetConfig::Idx { train_images, train_labels, test_images, test_labels } if inherit => {
                        (Some(train_images), Some(train_labels), Some(test_images), Some(test_labels))
                    }
                    _ => (None, None, None, None),
                };
                Ok(DatasetConfig::Idx {
                    train_images: self.train_images.or(bi).ok_or_else(|| missing("train_images"))?,
                    train_labels: self.train_labels.or(bl).ok_or_else(|| missing("train_labels"))?,
                    test_images: self.test_images.or(ti).ok_or_else(|| missing("test_images"))?,
                    test_labels: self.test_labels.or(tl).ok_or_else(|| missing("test_labels"))?,
                })
            }
            "synthetic" => {
                stray(&idx_fields)?;
                stray(&[("dir", self.dir.is_some())])?;
                let base = match base {
                    DatasetConfig::Synthetic { num_classes, samples_per_class, feature_shape, class_separation, latent_dim }
                        if inherit =>
                    {
                        Some((num_classes, samples_per_class, feature_shape, class_separation, latent_dim))
                    }
                    _ => None,
                };
                let (bn, bs, bf, bc, bl) = match base {
                    Some((n, s, f, c, l)) => (Some(n), Some(s), Some(f), Some(c), Some(l)),
                    None => (None, None, None, None, Some(0)),
                };
                Ok(DatasetConfig::Synthetic {
                    num_classes: self.num_classes.or(bn).ok_or_else(|| missing("num_classes"))?,
                    samples_per_class: self.samples_per_class.or(bs).ok_or_else(|| missing("samples_per_class"))?,
                    feature_shape: self.feature_shape.or(bf).ok_or_else(|| missing("feature_shape"))?,
                    class_separation: self.class_separation.or(bc).ok_or_else(|| missing("class_separation"))?,
                    latent_dim: self.latent_dim.or(bl).unwrap_or(0),
                })
            }
            other => Err(format!("unknown dataset kind `{other}` (expected mnist, idx or synthetic)")),
        }
    }
}

impl ExperimentConfig {
    /// Parse config text. `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &Path) -> CliResult<Self> {
        let err = |line: Option<usize>, msg: String| CliError::Config { path: origin.to_path_buf(), line, msg };
        let file: FileConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            err(line, e.message().to_string())
        })?;

        let preset_name = file.preset.clone().unwrap_or_else(|| presets::DEFAULT_PRESET.to_string());
        let mut cfg = presets::experiment(&preset_name).ok_or_else(|| {
            err(
                key_line(text, None, "preset"),
                format!("unknown preset `{preset_name}`; available: {}", presets::EXPERIMENT_PRESETS.join(", ")),
            )
        })?;

        set(&mut cfg.mode, file.mode);
        set(&mut cfg.seed, file.seed);
        set(&mut cfg.output_dir, file.output_dir);
        set(&mut cfg.workers, file.workers);
        if let Some(d) = file.dataset {
            cfg.dataset = d.apply(cfg.dataset).map_err(|m| err(key_line(text, Some("dataset"), "kind"), m))?;
        }
        if let Some(p) = file.partition {
            set(&mut cfg.partition.num_clients, p.num_clients);
            set(&mut cfg.partition.min_samples, p.min_samples);
            set(&mut cfg.partition.max_samples, p.max_samples);
            set(&mut cfg.partition.warmup_fraction, p.warmup_fraction);
        }
        if let Some(m) = file.model {
            match (m.preset, m.layers) {
                (Some(_), Some(_)) => {
                    return Err(err(
                        key_line(text, Some("model"), "layers"),
                        "give either `preset` or `layers` in [model], not both".into(),
                    ))
                }
                (Some(name), None) => {
                    let preset = presets::model(&name).ok_or_else(|| {
                        err(
                            key_line(text, Some("model"), "preset"),
                            format!("unknown model preset `{name}`; available: {}", presets::MODEL_PRESETS.join(", ")),
                        )
                    })?;
                    cfg.model.layers = preset.layers.iter().map(|l| l.to_string()).collect();
                }
                (None, Some(layers)) => cfg.model.layers = layers,
                (None, None) => {}
            }
        }
        if let Some(h) = file.hyperparams {
            set(&mut cfg.hyperparams.lr, h.lr);
            set(&mut cfg.hyperparams.batch_size, h.batch_size);
            set(&mut cfg.hyperparams.local_epochs, h.local_epochs);
            set(&mut cfg.hyperparams.rounds, h.rounds);
            set(&mut cfg.hyperparams.participation_fraction, h.participation_fraction);
        }
        if let Some(t) = file.transfer {
            set(&mut cfg.transfer.warmup_epochs, t.warmup_epochs);
            set(&mut cfg.transfer.warmup_lr, t.warmup_lr);
            set(&mut cfg.transfer.pretrain_epochs, t.pretrain_epochs);
            set(&mut cfg.transfer.pretrain_labels, t.pretrain_labels);
            set(&mut cfg.transfer.freeze_layer_count, t.freeze_layer_count);
        }

        cfg.validate().map_err(|(section, key, msg)| err(key_line(text, section, key), msg))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    /// Constraint checks that need no data. Errors carry the section and key
    /// they concern.
    fn validate(&self) -> Result<(), (Option<&'static str>, &'static str, String)> {
        let hp = &self.hyperparams;
        let p = &self.partition;
        let t = &self.transfer;
        let fail = |section, key, msg: String| Err((Some(section), key, msg));
        if !(hp.lr >= 0.0 && hp.lr.is_finite()) {
            return fail("hyperparams", "lr", format!("lr must be a non-negative number, got {}", hp.lr));
        }
        if hp.batch_size == 0 {
            return fail("hyperparams", "batch_size", "batch_size must be at least 1".into());
        }
        if hp.local_epochs == 0 {
            return fail("hyperparams", "local_epochs", "local_epochs must be at least 1".into());
        }
        if hp.rounds == 0 {
            return fail("hyperparams", "rounds", "rounds must be at least 1".into());
        }
        if !(hp.participation_fraction > 0.0 && hp.participation_fraction <= 1.0) {
            return fail(
                "hyperparams",
                "participation_fraction",
                format!("participation_fraction must lie in (0, 1], got {}", hp.participation_fraction),
            );
        }
        if p.num_clients == 0 {
            return fail("partition", "num_clients", "num_clients must be at least 1".into());
        }
        if p.min_samples == 0 || p.min_samples > p.max_samples {
            return fail(
                "partition",
                "min_samples",
                format!("sample range [{}, {}] must satisfy 0 < min <= max", p.min_samples, p.max_samples),
            );
        }
        if !(0.0..1.0).contains(&p.warmup_fraction) {
            return fail(
                "partition",
                "warmup_fraction",
                format!("warmup_fraction must lie in [0, 1), got {}", p.warmup_fraction),
            );
        }
        if matches!(self.mode, Mode::WarmupScratch | Mode::WarmupPretrained) {
            if p.warmup_fraction <= 0.0 {
                return fail(
                    "partition",
                    "warmup_fraction",
                    format!("mode {} needs warmup_fraction > 0", self.mode.name()),
                );
            }
            if t.warmup_epochs == 0 {
                return fail("transfer", "warmup_epochs", "warmup modes need warmup_epochs >= 1".into());
            }
            if !(t.warmup_lr > 0.0 && t.warmup_lr.is_finite()) {
                return fail("transfer", "warmup_lr", format!("warmup_lr must be positive, got {}", t.warmup_lr));
            }
        }
        if self.mode == Mode::WarmupPretrained {
            if t.pretrain_labels.is_empty() {
                return fail("transfer", "pretrain_labels", "warmup-pretrained needs pretrain_labels".into());
            }
            if t.pretrain_epochs == 0 {
                return fail("transfer", "pretrain_epochs", "warmup-pretrained needs pretrain_epochs >= 1".into());
            }
        }
        if self.workers == 0 {
            return Err((None, "workers", "workers must be at least 1".into()));
        }
        if self.model.layers.is_empty() {
            return fail("model", "layers", "the model needs at least one layer".into());
        }
        for l in &self.model.layers {
            if let Err(e) = l.parse::<Layer>() {
                return fail("model", "layers", e.to_string());
            }
        }
        if let DatasetConfig::Synthetic { num_classes, samples_per_class, feature_shape, .. } = &self.dataset {
            if *num_classes < 2 {
                return fail("dataset", "num_classes", "synthetic data needs at least 2 classes".into());
            }
            if *samples_per_class < 2 {
                return fail("dataset", "samples_per_class", "samples_per_class must be at least 2".into());
            }
            if feature_shape.is_empty() || feature_shape.contains(&0) {
                return fail("dataset", "feature_shape", format!("invalid feature_shape {feature_shape:?}"));
            }
        }
        Ok(())
    }

    /// TOML that re-parses to this exact config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are always representable in TOML")
    }

    pub fn layers(&self) -> CliResult<Vec<Layer>> {
        self.model
            .layers
            .iter()
            .map(|l| l.parse::<Layer>().map_err(CliError::from))
            .collect()
    }

    pub fn load_dataset(&self) -> CliResult<Dataset> {
        Ok(match &self.dataset {
            DatasetConfig::Mnist { dir } => Dataset::from_mnist_dir(dir)?,
            DatasetConfig::Idx { train_images, train_labels, test_images, test_labels } => {
                Dataset::from_idx(train_images, train_labels, test_images, test_labels)?
            }
            DatasetConfig::Synthetic { num_classes, samples_per_class, feature_shape, class_separation, latent_dim } => {
                fedwarm_core::data::generate_synthetic(&SyntheticSpec {
                    num_classes: *num_classes,
                    samples_per_class: *samples_per_class,
                    feature_shape: feature_shape.clone(),
                    class_separation: *class_separation,
                    latent_dim: (*latent_dim > 0).then_some(*latent_dim),
                    seed: self.seed,
                })?
            }
        })
    }

    pub fn model_spec(&self, dataset: &Dataset) -> CliResult<ModelSpec> {
        Ok(ModelSpec::new(self.layers()?, dataset.feature_shape.clone(), dataset.num_classes)?)
    }

    pub fn partition_spec(&self) -> PartitionSpec {
        PartitionSpec {
            num_clients: self.partition.num_clients,
            min_samples: self.partition.min_samples,
            max_samples: self.partition.max_samples,
            warmup_fraction: self.partition.warmup_fraction,
            seed: self.seed,
        }
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            lr: self.hyperparams.lr as f32,
            batch_size: self.hyperparams.batch_size,
            local_epochs: self.hyperparams.local_epochs,
            rounds: self.hyperparams.rounds,
            participation_fraction: self.hyperparams.participation_fraction,
            seed: self.seed,
        }
    }

    pub fn transfer(&self) -> TransferConfig {
        let t = &self.transfer;
        let mode = self.mode.transfer_mode();
        TransferConfig {
            mode,
            freeze_layer_count: if mode == TransferMode::WarmupPretrained { t.freeze_layer_count } else { 0 },
            pretrain_labels: t.pretrain_labels.clone(),
            warmup_epochs: t.warmup_epochs,
            pretrain_epochs: t.pretrain_epochs,
            warmup_lr: Some(t.warmup_lr as f32),
        }
    }
}
