//! Versioned experiment configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::OpticsParams;
use crate::datagen::{ColumnMap, GeneratorSpec};
use crate::detector::DetectorSettings;
use crate::nn::TrainConfig;
use crate::projection::TsneParams;
use crate::vae::{LossConfig, SamplingMode, Variant, HIDDEN_UNITS, LATENT_DIM};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSource {
    Generate {
        #[serde(default)]
        spec: GeneratorSpec,
        #[serde(default = "default_data_seed")]
        seed: u64,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        column_map: ColumnMap,
    },
}

fn default_data_seed() -> u64 {
    7
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Generate {
            spec: GeneratorSpec::table(),
            seed: default_data_seed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingKind {
    Standard,
    Adaptive,
}

/// Architecture and loss overrides on top of the variant's defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSettings {
    pub latent_dim: usize,
    pub hidden: usize,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub sampling: Option<SamplingKind>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            latent_dim: LATENT_DIM,
            hidden: HIDDEN_UNITS,
            beta: None,
            gamma: None,
            alpha: None,
            sampling: None,
        }
    }
}

impl ModelSettings {
    /// Loss and sampling of `variant` with overrides applied.
    pub fn resolve(&self, variant: Variant, n_channels: usize) -> Option<(LossConfig, SamplingMode)> {
        let (mut loss, mut sampling) = variant.embedding_config(self.latent_dim, n_channels)?;
        if let Some(b) = self.beta {
            loss.beta = b;
        }
        if let Some(g) = self.gamma {
            loss.gamma = g;
        }
        let alpha = self.alpha.unwrap_or(self.latent_dim as f64 / 2.0);
        sampling = match (self.sampling, sampling) {
            (Some(SamplingKind::Standard), _) => SamplingMode::Standard,
            (Some(SamplingKind::Adaptive), _) | (None, SamplingMode::Adaptive { .. }) => {
                SamplingMode::Adaptive { alpha }
            }
            (None, s) => s,
        };
        Some((loss, sampling))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSettings {
    /// AMIG against raw-input clustering.
    pub amig: bool,
    pub lsg: bool,
    pub mmi: bool,
    pub ksg_k: usize,
    pub tsne: bool,
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self {
            amig: true,
            lsg: true,
            mmi: true,
            ksg_k: crate::metrics::ksg::DEFAULT_K,
            tsne: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub dataset: DatasetSource,
    pub variant: Variant,
    #[serde(default)]
    pub model: ModelSettings,
    #[serde(default = "TrainConfig::autoencoder")]
    pub autoencoder_training: TrainConfig,
    #[serde(default = "TrainConfig::one_class")]
    pub one_class_training: TrainConfig,
    #[serde(default)]
    pub detector: DetectorSettings,
    #[serde(default)]
    pub optics: OpticsParams,
    #[serde(default)]
    pub metrics: MetricSettings,
    #[serde(default)]
    pub tsne: TsneParams,
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn new(name: &str, variant: Variant) -> Self {
        Self {
            version: CONFIG_VERSION,
            name: name.to_string(),
            dataset: DatasetSource::default(),
            variant,
            model: ModelSettings::default(),
            autoencoder_training: TrainConfig::autoencoder(),
            one_class_training: TrainConfig::one_class(),
            detector: DetectorSettings::default(),
            optics: OpticsParams::default(),
            metrics: MetricSettings::default(),
            tsne: TsneParams::default(),
            seeds: vec![0],
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.seeds.is_empty() {
            return bad("seed list must not be empty".into());
        }
        if self.model.latent_dim == 0 || self.model.hidden == 0 {
            return bad("latent_dim and hidden must be positive".into());
        }
        if self.autoencoder_training.batch_size == 0 || self.one_class_training.batch_size == 0 {
            return bad("batch sizes must be at least 1".into());
        }
        if let Err(e) = self.optics.validate() {
            return bad(e.to_string());
        }
        if let DatasetSource::Generate { spec, .. } = &self.dataset {
            if let Err(e) = spec.validate() {
                return bad(e.to_string());
            }
        }
        if let DatasetSource::Csv { path, .. } = &self.dataset {
            if !path.exists() {
                return bad(format!("dataset file {} does not exist", path.display()));
            }
        }
        if self.metrics.ksg_k == 0 {
            return bad("ksg_k must be positive".into());
        }
        Ok(())
    }
}
