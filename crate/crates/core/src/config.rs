//! Tunable pipeline parameters, loadable from the `[pipeline]` table of a
//! `gm.toml` file. Missing keys take the defaults.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::DEFAULT_DEPTH_RADIUS_PX;
use crate::sidewalk::{RegionOfInterest, DEFAULT_MIN_RUN_FRACTION, DEFAULT_ROI_TOP_FRACTION};
use crate::stabilize::{DEFAULT_MIN_INSTANCE_AREA, DEFAULT_PRECEDING_FRAMES};

/// Three frame periods at 30 fps.
pub const DEFAULT_MAX_FRAME_GAP_S: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot parse configuration: {0}")]
    Parse(String),
}

/// Sidewalk ROI as fractions of the image size: rows `[top, bottom)`, columns `[left, right)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoiFractions {
    pub top: f64,
    pub bottom: f64,
    pub left: f64,
    pub right: f64,
}

impl Default for RoiFractions {
    fn default() -> Self {
        Self {
            top: DEFAULT_ROI_TOP_FRACTION,
            bottom: 1.0,
            left: 0.0,
            right: 1.0,
        }
    }
}

impl RoiFractions {
    pub fn resolve(&self, width: u32, height: u32) -> RegionOfInterest {
        let at = |f: f64, n: u32| ((f.clamp(0.0, 1.0) * n as f64).round() as u32).min(n);
        RegionOfInterest {
            row_min: at(self.top, height),
            row_max: at(self.bottom, height),
            col_min: at(self.left, width),
            col_max: at(self.right, width),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Preceding frames fused with each capture.
    pub preceding_frames: usize,
    /// Predecessors must be consecutive: a larger time step between two
    /// frames ends the run.
    pub max_frame_gap_s: f64,
    pub depth_radius_px: f64,
    pub min_instance_area: usize,
    pub min_run_fraction: f64,
    pub roi: RoiFractions,
    /// Instances touching the image border are reported as truncated instead
    /// of localized; their visible centroid is not the object's.
    pub skip_truncated: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preceding_frames: DEFAULT_PRECEDING_FRAMES,
            max_frame_gap_s: DEFAULT_MAX_FRAME_GAP_S,
            depth_radius_px: DEFAULT_DEPTH_RADIUS_PX,
            min_instance_area: DEFAULT_MIN_INSTANCE_AREA,
            min_run_fraction: DEFAULT_MIN_RUN_FRACTION,
            roi: RoiFractions::default(),
            skip_truncated: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.depth_radius_px >= 0.0 && self.depth_radius_px.is_finite()) {
            return bad("depth_radius_px must be a finite value ≥ 0");
        }
        if !(self.max_frame_gap_s > 0.0) {
            return bad("max_frame_gap_s must be positive");
        }
        if !(self.min_run_fraction > 0.0 && self.min_run_fraction <= 1.0) {
            return bad("min_run_fraction must lie in (0, 1]");
        }
        let r = &self.roi;
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(in_unit(r.top) && in_unit(r.bottom) && in_unit(r.left) && in_unit(r.right))
            || r.top >= r.bottom
            || r.left >= r.right
        {
            return bad("roi fractions must satisfy 0 ≤ top < bottom ≤ 1 and 0 ≤ left < right ≤ 1");
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}
