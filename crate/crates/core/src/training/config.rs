use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Random training-time perturbations. Ranges are symmetric unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    pub enabled: bool,
    pub flip_probability: f64,
    pub rotation_degrees: f64,
    /// Fraction of the image side.
    pub translation: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Relative brightness change, e.g. 0.2 for +-20%.
    pub brightness: f64,
    pub contrast: f64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            enabled: true,
            flip_probability: 0.5,
            rotation_degrees: 15.0,
            translation: 0.1,
            scale_min: 0.9,
            scale_max: 1.1,
            brightness: 0.2,
            contrast: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub architecture_id: String,
    pub max_epochs: usize,
    /// Absolute validation-accuracy gain that counts as an improvement.
    pub early_stop_min_delta: f64,
    pub early_stop_patience: usize,
    pub fold_count: usize,
    pub seed: u64,
    pub augmentation: AugmentationConfig,
    pub pretrained_init: bool,
    pub pretrained_weights: Option<PathBuf>,
    // Optimizer settings below are artifact defaults, not part of the protocol.
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Command used for architectures trained out of process.
    pub external_command: Vec<String>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            architecture_id: "tiny".into(),
            max_epochs: 20,
            early_stop_min_delta: 0.01,
            early_stop_patience: 5,
            fold_count: 5,
            seed: 0,
            augmentation: AugmentationConfig::default(),
            pretrained_init: false,
            pretrained_weights: None,
            learning_rate: 1e-3,
            batch_size: 16,
            external_command: Vec::new(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.max_epochs < 1 {
            return fail("max_epochs must be at least 1");
        }
        if self.fold_count < 2 {
            return fail("fold_count must be at least 2");
        }
        if self.early_stop_patience < 1 {
            return fail("early_stop_patience must be at least 1");
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        let a = &self.augmentation;
        if !(0.0..=1.0).contains(&a.flip_probability) || a.scale_min <= 0.0 || a.scale_min > a.scale_max {
            return fail("invalid augmentation ranges");
        }
        Ok(())
    }

    /// Stable fingerprint of every setting, recorded in job specs.
    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
