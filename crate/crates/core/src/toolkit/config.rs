//! Flat `key = value` run configuration. Every key is optional; see
//! `docs/config.md` for the reference.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::confidence::{ConfidenceMode, LossConfig};
use crate::error::{Error, Result};
use crate::reid::ReidConfig;
use crate::revision::{FlowProvider, RevisionConfig};
use crate::skeleton::SkeletonSpec;
use crate::tracker::TrackerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub conf_threshold: f64,
    pub confidence_mode: ConfidenceMode,
    pub match_threshold: f64,
    pub nms_oks_threshold: f64,
    pub revival_margin: f64,
    pub enable_revision: bool,
    pub enable_reid: bool,
    pub flow_provider: FlowProvider,
    pub score_threshold: f64,
    pub overlap_threshold: f64,
    pub iou_gate: f64,
    pub reid_distance_threshold: f64,
    pub reid_max_age: u64,
    pub feature_dim: usize,
    pub tau_factor: f64,
    pub focal_alpha: f64,
    pub focal_gamma: f64,
    /// Per-joint OKS falloff override.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub falloff: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrackerConfig::default();
        let loss = LossConfig::default();
        RunConfig {
            conf_threshold: t.conf_threshold,
            confidence_mode: t.confidence_mode,
            match_threshold: t.match_threshold,
            nms_oks_threshold: t.nms_oks_threshold,
            revival_margin: t.revival_margin,
            enable_revision: t.enable_revision,
            enable_reid: t.enable_reid,
            flow_provider: t.flow_provider,
            score_threshold: t.revision.score_threshold,
            overlap_threshold: t.revision.overlap_threshold,
            iou_gate: t.revision.iou_gate,
            reid_distance_threshold: t.reid.distance_threshold,
            reid_max_age: t.reid.max_age,
            feature_dim: t.feature_dim,
            tau_factor: crate::metrics::DEFAULT_TAU_FACTOR,
            focal_alpha: loss.alpha,
            focal_gamma: loss.gamma,
            falloff: None,
            flow_dir: None,
            features: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn tracker_config(&self) -> TrackerConfig {
        TrackerConfig {
            conf_threshold: self.conf_threshold,
            confidence_mode: self.confidence_mode,
            match_threshold: self.match_threshold,
            nms_oks_threshold: self.nms_oks_threshold,
            revival_margin: self.revival_margin,
            enable_revision: self.enable_revision,
            enable_reid: self.enable_reid,
            flow_provider: self.flow_provider,
            revision: RevisionConfig {
                score_threshold: self.score_threshold,
                overlap_threshold: self.overlap_threshold,
                iou_gate: self.iou_gate,
                conf_threshold: self.conf_threshold,
                nms_oks_threshold: self.nms_oks_threshold,
            },
            reid: ReidConfig {
                distance_threshold: self.reid_distance_threshold,
                max_age: self.reid_max_age,
            },
            feature_dim: self.feature_dim,
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            alpha: self.focal_alpha,
            gamma: self.focal_gamma,
        }
    }

    /// `base` with the falloff override applied.
    pub fn skeleton(&self, base: SkeletonSpec) -> Result<SkeletonSpec> {
        match &self.falloff {
            None => Ok(base),
            Some(f) => SkeletonSpec::new(base.joint_names, f.clone(), base.head_pair, base.edges),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker_config().validate()?;
        if !(self.tau_factor > 0.0 && self.tau_factor.is_finite()) {
            return Err(Error::Config(format!(
                "tau_factor = {} must be positive",
                self.tau_factor
            )));
        }
        if !(0.0..=1.0).contains(&self.focal_alpha) {
            return Err(Error::Config(format!(
                "focal_alpha = {} must lie in [0, 1]",
                self.focal_alpha
            )));
        }
        if !(self.focal_gamma >= 0.0 && self.focal_gamma.is_finite()) {
            return Err(Error::Config(format!(
                "focal_gamma = {} must be non-negative",
                self.focal_gamma
            )));
        }
        if let Some(f) = &self.falloff {
            if f.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Config("falloff values must be positive".into()));
            }
        }
        Ok(())
    }
}
