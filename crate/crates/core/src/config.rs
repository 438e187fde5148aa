//! Run configuration shared by training, cross-validation and the CLI.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentPolicy, SmoteConfig};
use crate::error::{Error, Result};
use crate::model::{AdamConfig, CnnConfig, LrSchedule};
use crate::normalize::NormalizationMode;
use crate::svm::SvmConfig;

/// Schedule shape; the base rate and horizon come from the run config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleChoice {
    Constant,
    Step { period: usize, decay: f64 },
    /// Annealed over the full run (`t_max = epochs`).
    CosineAnnealing { eta_min: f64 },
}

impl Default for ScheduleChoice {
    fn default() -> Self {
        ScheduleChoice::CosineAnnealing { eta_min: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CnnArch {
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub embed_dim: usize,
}

impl Default for CnnArch {
    fn default() -> Self {
        let c = CnnConfig::compact(1, 1);
        Self { conv_channels: c.conv_channels, kernel: c.kernel, embed_dim: c.embed_dim }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Square side every image is resized to.
    pub image_size: usize,
    /// Band indices to keep, in order; all bands when absent.
    pub bands: Option<Vec<usize>>,
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub schedule: ScheduleChoice,
    pub adam: AdamConfig,
    pub normalization: NormalizationMode,
    pub augment: AugmentPolicy,
    /// Oversample the minority class with SSIM-SMOTE up to balance.
    pub smote_balance: bool,
    pub smote: SmoteConfig,
    pub svm: SvmConfig,
    pub cnn: CnnArch,
    pub k_folds: usize,
    /// Oversample the whole dataset before splitting into folds.
    pub global_smote: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            image_size: 256,
            bands: None,
            epochs: 50,
            batch_size: 36,
            base_lr: 3e-4,
            schedule: ScheduleChoice::default(),
            adam: AdamConfig::default(),
            normalization: NormalizationMode::Standard,
            augment: AugmentPolicy::bag_of_freebies(),
            smote_balance: true,
            smote: SmoteConfig::default(),
            svm: SvmConfig::with_c(0.1),
            cnn: CnnArch::default(),
            k_folds: 5,
            global_smote: false,
            output_dir: None,
        }
    }
}

impl RunConfig {
    /// Desk-scale preset for the synthetic benchmark: 32×32 inputs, 20
    /// epochs, a from-scratch learning rate of 1e-2 and an SVM head with C = 0.1.
    pub fn benchmark() -> Self {
        Self { image_size: 32, epochs: 20, base_lr: 1e-2, ..Self::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::format("run config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes")
    }

    pub fn lr_schedule(&self) -> LrSchedule {
        match self.schedule {
            ScheduleChoice::Constant => LrSchedule::Constant { base_lr: self.base_lr },
            ScheduleChoice::Step { period, decay } => LrSchedule::Step { base_lr: self.base_lr, period, decay },
            ScheduleChoice::CosineAnnealing { eta_min } => LrSchedule::CosineAnnealing {
                base_lr: self.base_lr,
                t_max: self.epochs.max(1),
                eta_min,
            },
        }
    }

    pub fn cnn_config(&self, input_channels: usize) -> CnnConfig {
        CnnConfig {
            input_channels,
            input_height: self.image_size,
            input_width: self.image_size,
            conv_channels: self.cnn.conv_channels.clone(),
            kernel: self.cnn.kernel,
            embed_dim: self.cnn.embed_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 {
            return Err(Error::Argument("image_size must be positive".into()));
        }
        if let Some(b) = &self.bands {
            let mut sorted = b.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if b.is_empty() || sorted.len() != b.len() {
                return Err(Error::Argument("bands must be a non-empty list of distinct indices".into()));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be positive".into()));
        }
        if self.k_folds < 2 {
            return Err(Error::Argument("k_folds must be at least 2".into()));
        }
        self.lr_schedule().validate()?;
        self.augment.validate()?;
        self.smote.validate()?;
        self.svm.validate()?;
        self.cnn_config(1).validate()
    }
}
