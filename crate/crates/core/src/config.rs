//! Pipeline configuration. Every threshold is exposed and loadable from a
//! TOML file; missing keys fall back to the defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::FusionConfig;
use crate::bundle::{DEFAULT_CLIP_RADIUS_M, DEFAULT_MAX_SKEW_MS};
use crate::headscan::ScanParams;
use crate::motion::MotionConfig;
use crate::scene::SceneConfig;
use crate::stopline::StopLineConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BundleConfig {
    pub max_skew_ms: f64,
    pub clip_radius_m: f64,
}

impl Default for BundleConfig {
    fn default() -> Self {
        Self { max_skew_ms: DEFAULT_MAX_SKEW_MS, clip_radius_m: DEFAULT_CLIP_RADIUS_M }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub bundle: BundleConfig,
    pub stopline: StopLineConfig,
    pub motion: MotionConfig,
    pub scene: SceneConfig,
    pub fusion: FusionConfig,
    pub headscan: ScanParams,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate().map_err(ConfigError::Invalid)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to toml")
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.bundle.max_skew_ms >= 0.0) || !(self.bundle.clip_radius_m > 0.0) {
            return Err("bundle.max_skew_ms must be >= 0 and bundle.clip_radius_m > 0".into());
        }
        if !self.stopline.peak.is_valid() {
            return Err("stopline.peak has inconsistent bounds".into());
        }
        if self.stopline.rotation_min_deg > self.stopline.rotation_max_deg {
            return Err("stopline rotation range is empty".into());
        }
        let m = &self.motion;
        if m.smoothing_window % 2 == 0 || m.noisy_smoothing_window % 2 == 0 {
            return Err("motion smoothing windows must be odd".into());
        }
        if !(0.0..1.0).contains(&m.turn_extent_tolerance) {
            return Err("motion.turn_extent_tolerance must be within [0, 1)".into());
        }
        if self.scene.passing_median_frames % 2 == 0 {
            return Err("scene.passing_median_frames must be odd".into());
        }
        self.fusion.validate()?;
        self.headscan.validate()
    }
}
