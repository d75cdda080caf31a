//! Experiment configuration files (TOML).
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys
//! are rejected with their full key path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetSpec;
use crate::error::{Error, Result};
use crate::nn::{Arch, ModelSpec, TrainConfig};
use crate::scoring::DEFAULT_BETA;
use crate::selection::{validate_rate, validate_tiers, Method, EQUAL_TIERS};

/// The shipped default experiment.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

pub const DEFAULT_RATES: [f64; 5] = [0.01, 0.05, 0.10, 0.20, 0.30];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Mlp,
    Cnn1d,
}

/// Architecture choice with optional overrides of the reference sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ArchKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
}

impl ModelConfig {
    pub fn of(kind: ArchKind) -> Self {
        ModelConfig {
            kind,
            hidden: None,
            channels: None,
            kernel: None,
            stride: None,
            embedding_dim: None,
        }
    }

    /// Fills in the dataset-dependent dimensions.
    pub fn resolve(&self, frame_len: usize, num_classes: usize) -> Result<ModelSpec> {
        let mut spec = match self.kind {
            ArchKind::Mlp => {
                if self.channels.is_some() || self.kernel.is_some() || self.stride.is_some() {
                    return Err(Error::invalid("mlp takes no channels/kernel/stride"));
                }
                let mut s = ModelSpec::mlp(frame_len, num_classes);
                if let (Some(h), Arch::Mlp { hidden }) = (self.hidden, &mut s.arch) {
                    *hidden = h;
                }
                s
            }
            ArchKind::Cnn1d => {
                if self.hidden.is_some() {
                    return Err(Error::invalid("cnn1d takes no hidden width"));
                }
                let mut s = ModelSpec::cnn1d(frame_len, num_classes);
                if let Arch::Cnn1d {
                    channels,
                    kernel,
                    stride,
                } = &mut s.arch
                {
                    *channels = self.channels.unwrap_or(*channels);
                    *kernel = self.kernel.unwrap_or(*kernel);
                    *stride = self.stride.unwrap_or(*stride);
                }
                s
            }
        };
        if let Some(e) = self.embedding_dim {
            spec.embedding_dim = e;
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Optimizer settings; seeds are derived from `base_seed` per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub shuffle: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            momentum: d.momentum,
            shuffle: d.shuffle,
        }
    }
}

impl TrainSection {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            seed,
            shuffle: self.shuffle,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Read the dataset from this file instead of generating `dataset`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_path: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub rates: Vec<f64>,
    pub repeats: usize,
    pub base_seed: u64,
    pub beta: f64,
    pub tiers: [f64; 3],
    pub class_balanced: bool,
    pub snr_stratified: bool,
    pub dataset: DatasetSpec,
    pub select_model: ModelConfig,
    pub eval_model: ModelConfig,
    pub record: TrainSection,
    pub retrain: TrainSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset_path: None,
            methods: Method::ALL.to_vec(),
            rates: DEFAULT_RATES.to_vec(),
            repeats: 3,
            base_seed: 0,
            beta: DEFAULT_BETA,
            tiers: EQUAL_TIERS,
            class_balanced: true,
            snr_stratified: false,
            dataset: DatasetSpec::default(),
            select_model: ModelConfig::of(ArchKind::Mlp),
            eval_model: ModelConfig::of(ArchKind::Mlp),
            record: TrainSection::default(),
            retrain: TrainSection::default(),
        }
    }
}

fn config_err(key: &str, e: impl std::fmt::Display) -> Error {
    Error::Config {
        key: key.to_string(),
        msg: e.to_string(),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(config_err("methods", "no methods listed"));
        }
        if self.rates.is_empty() {
            return Err(config_err("rates", "no rates listed"));
        }
        for (k, &r) in self.rates.iter().enumerate() {
            validate_rate(r).map_err(|_| config_err(&format!("rates[{k}]"), "rate must be in (0,1]"))?;
        }
        if self.repeats == 0 {
            return Err(config_err("repeats", "must be at least 1"));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(config_err("beta", "must be finite and non-negative"));
        }
        validate_tiers(self.tiers).map_err(|e| config_err("tiers", e))?;
        if self.dataset_path.is_none() {
            self.dataset.validate().map_err(|e| config_err("dataset", e))?;
        }
        for (key, section) in [("record", &self.record), ("retrain", &self.retrain)] {
            section.with_seed(0).validate().map_err(|e| config_err(key, e))?;
        }
        if self.record.epochs < 2 {
            return Err(config_err("record.epochs", "recording needs at least 2 epochs"));
        }
        Ok(())
    }

    /// Parses and validates. Errors name the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_err("", e.message()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            config_err(&key, e.into_inner().message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn selection_model(&self, frame_len: usize, num_classes: usize) -> Result<ModelSpec> {
        self.select_model
            .resolve(frame_len, num_classes)
            .map_err(|e| config_err("select_model", e))
    }

    pub fn evaluation_model(&self, frame_len: usize, num_classes: usize) -> Result<ModelSpec> {
        self.eval_model
            .resolve(frame_len, num_classes)
            .map_err(|e| config_err("eval_model", e))
    }
}

/// Loads `default` (the shipped config) or a TOML file. A relative
/// `dataset_path` is resolved against the config file's directory.
pub fn load_config(path: &str) -> Result<ExperimentConfig> {
    if path == "default" {
        return ExperimentConfig::from_toml(DEFAULT_CONFIG);
    }
    let p = Path::new(path);
    let text = std::fs::read_to_string(p)?;
    let mut cfg = ExperimentConfig::from_toml(&text).map_err(|e| match e {
        Error::Config { key, msg } => Error::Config {
            key,
            msg: format!("{msg} (in {path})"),
        },
        other => other,
    })?;
    if let (Some(data), Some(dir)) = (&cfg.dataset_path, p.parent()) {
        if data.is_relative() {
            cfg.dataset_path = Some(dir.join(data));
        }
    }
    Ok(cfg)
}
