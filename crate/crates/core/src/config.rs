//! Run configuration (TOML).
//!
//! ```toml
//! output_root = "out"
//! seed = 7
//! architectures = ["tiny"]
//!
//! [datasets.GlyphClean]
//! root = "raw/GlyphClean"
//! provenance = "lab_controlled"
//! layout = "index_csv"
//! video_sampling = "uniform_five"
//!
//! [adapters]
//! face_detector = "stub"
//! landmarks_pose = { process = ["python3", "landmarks.py"] }
//!
//! [training]
//! fold_count = 2
//! ```
//!
//! Relative paths are resolved against the config file's directory.
//! `FERBENCH_OUT` overrides `output_root`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::read_to_string;
use crate::ingest::Layout;
use crate::labels::Provenance;
use crate::normalize::SamplingStrategy;
use crate::training::{architecture, TrainingConfig};

pub const OUTPUT_ENV: &str = "FERBENCH_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub root: PathBuf,
    pub provenance: Provenance,
    #[serde(default)]
    pub layout: Layout,
    #[serde(default = "default_sampling")]
    pub video_sampling: SamplingStrategy,
}

fn default_sampling() -> SamplingStrategy {
    SamplingStrategy::UniformFive
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdapterChoice {
    /// Ground truth from the synthetic generator's sidecar.
    #[default]
    Stub,
    /// An out-of-process adapter speaking the batch CSV protocol.
    Process(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    pub face_detector: AdapterChoice,
    pub landmarks_pose: AdapterChoice,
    pub age_gender: AdapterChoice,
}

fn default_architectures() -> Vec<String> {
    vec!["tiny".into()]
}

fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_root: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub class_map_path: Option<PathBuf>,
    pub datasets: BTreeMap<String, DatasetConfig>,
    #[serde(default)]
    pub adapters: AdapterConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default = "default_architectures")]
    pub architectures: Vec<String>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

impl RunConfig {
    /// Minimal config over the given dataset roots.
    pub fn new(output_root: impl Into<PathBuf>, datasets: BTreeMap<String, DatasetConfig>) -> Self {
        RunConfig {
            output_root: output_root.into(),
            seed: 0,
            class_map_path: None,
            datasets,
            adapters: AdapterConfig::default(),
            training: TrainingConfig::default(),
            architectures: default_architectures(),
            jobs: 1,
        }
    }

    /// Parses TOML, resolves relative paths against `base_dir`, applies the
    /// output override and propagates the run seed to training.
    pub fn from_toml_str(text: &str, base_dir: &Path, origin: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.output_root);
        if let Some(p) = cfg.class_map_path.as_mut() {
            resolve(p);
        }
        for d in cfg.datasets.values_mut() {
            resolve(&mut d.root);
        }
        if let Some(p) = cfg.training.pretrained_weights.as_mut() {
            resolve(p);
        }
        if let Some(out) = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()) {
            cfg.output_root = PathBuf::from(out);
        }
        cfg.set_seed(cfg.seed);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base, path)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.training.seed = seed;
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks the settings and that every referenced input path exists.
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("no datasets configured".into()));
        }
        for (name, d) in &self.datasets {
            if !d.root.exists() {
                return Err(Error::Config(format!("dataset {name}: root {} does not exist", d.root.display())));
            }
        }
        if let Some(p) = &self.class_map_path {
            if !p.exists() {
                return Err(Error::Config(format!("class map {} does not exist", p.display())));
            }
        }
        if self.architectures.is_empty() {
            return Err(Error::Config("no architectures configured".into()));
        }
        for a in &self.architectures {
            architecture(a)?;
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        self.training.validate()
    }

    pub fn dataset(&self, name: &str) -> Result<&DatasetConfig> {
        self.datasets
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown dataset `{name}`")))
    }
}
