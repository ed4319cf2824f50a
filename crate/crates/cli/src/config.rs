//! JSON configuration shared by all commands. Every section and field is
//! optional; missing values fall back to the canonical radar setup and the
//! default training hyper-parameters.

use std::path::Path;

use headmotion::dsp::MagnitudeScale;
use headmotion::eval::SplitFractions;
use headmotion::radar_sim::{RadarConfig, SceneDefaults};
use headmotion::siamese::{DistanceMode, TrainConfig, NUM_CLASSES};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::read_file;

/// Per-class sample counts of the default synthetic dataset.
pub const DEFAULT_CLASS_COUNTS: [usize; NUM_CLASSES] = [1395, 1346, 1378, 1362];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub class_counts: Vec<usize>,
    pub scale: MagnitudeScale,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            class_counts: DEFAULT_CLASS_COUNTS.to_vec(),
            scale: MagnitudeScale::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { episodes: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSettings {
    pub fractions: Vec<f64>,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self {
            fractions: vec![0.10, 0.20, 0.30, 0.50],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub radar: RadarConfig,
    pub scene: SceneDefaults,
    pub dataset: DatasetConfig,
    pub split: SplitFractions,
    pub train: TrainConfig,
    pub distance: DistanceMode,
    pub eval: EvalConfig,
    pub ablation: AblationSettings,
}

impl Config {
    /// Reads and validates a config file; `None` gives the defaults.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let cfg = match path {
            None => Config::default(),
            Some(p) => {
                let bytes = read_file(p)?;
                serde_json::from_slice(&bytes)
                    .map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.radar.validate()?;
        self.scene.motion.validate()?;
        for r in &self.scene.clutter {
            r.validate()?;
        }
        if !(self.scene.noise_std.is_finite() && self.scene.noise_std >= 0.0) {
            return Err(CliError::Invalid("scene.noise_std must be non-negative".into()));
        }
        if self.dataset.class_counts.len() != NUM_CLASSES {
            return Err(CliError::Invalid(format!(
                "dataset.class_counts needs {NUM_CLASSES} entries, got {}",
                self.dataset.class_counts.len()
            )));
        }
        let s = self.split;
        let parts = [s.train, s.val, s.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(CliError::Invalid("split fractions must lie in [0, 1] and sum to 1".into()));
        }
        self.train.validate()?;
        if self.eval.episodes == 0 {
            return Err(CliError::Invalid("eval.episodes must be positive".into()));
        }
        Ok(())
    }
}
