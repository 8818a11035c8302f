//! Recorded sessions: frame bundles, capture selection, optional ground
//! truth, the on-disk directory format and the synthetic scene renderer.

mod io;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{DepthMap, GeoPoint, GpsFix, Intrinsics, Pose};
use crate::mask::{FeatureClass, SegMask};
use crate::stabilize::Homography;

pub use io::{read_session, write_session, FORMAT_NAME, FORMAT_VERSION};
pub use synth::{
    generate_synthetic, injected_gps_errors, render_frame, NoiseSpec, ObjectShape, SceneObject,
    SceneSpec, SidewalkStrip, Station, TrajectorySpec,
};

pub type FrameId = u32;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: field `{field}`: {message}")]
    Format {
        file: String,
        field: String,
        message: String,
    },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("degenerate scene: {0}")]
    DegenerateScene(String),
}

impl SessionError {
    pub(crate) fn format(
        file: impl Into<String>,
        field: impl Into<String>,
        message: impl ToString,
    ) -> Self {
        Self::Format {
            file: file.into(),
            field: field.into(),
            message: message.to_string(),
        }
    }
}

/// Sensor data of one capture instant. Rasters are shared so identical
/// renders need not be duplicated in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    pub frame_id: FrameId,
    pub timestamp: f64,
    pub mask: Arc<SegMask>,
    pub depth: Arc<DepthMap>,
    pub intrinsics: Intrinsics,
    pub pose: Pose,
    pub gps: GpsFix,
    /// Maps this frame's pixels into the next frame's.
    pub homography_to_next: Option<Homography>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthObject {
    pub id: u32,
    pub class: FeatureClass,
    pub location: GeoPoint,
    pub east_m: f64,
    pub north_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub origin: GeoPoint,
    pub objects: Vec<TruthObject>,
    pub sidewalk_width_m: Option<f64>,
    /// True (noise-free) device position at each captured frame.
    pub camera_positions: BTreeMap<FrameId, GeoPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub frames: Vec<FrameBundle>,
    pub capture_indices: Vec<FrameId>,
    pub class_selection: BTreeSet<FeatureClass>,
    pub ground_truth: Option<GroundTruth>,
}

impl Session {
    pub fn frame_position(&self, id: FrameId) -> Option<usize> {
        self.frames.iter().position(|f| f.frame_id == id)
    }

    pub fn frame(&self, id: FrameId) -> Option<&FrameBundle> {
        self.frame_position(id).map(|i| &self.frames[i])
    }

    /// Checks every structural invariant; the reader and writer both call this.
    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: String| Err(SessionError::InvariantViolation(m));
        if self.frames.is_empty() {
            return bad("session has no frames".into());
        }
        if self.class_selection.is_empty() {
            return bad("class selection is empty".into());
        }
        if self.class_selection.contains(&FeatureClass::Background) {
            return bad("background is not a selectable class".into());
        }
        let mut ids = BTreeSet::new();
        let mut last_t = f64::NEG_INFINITY;
        for f in &self.frames {
            if !ids.insert(f.frame_id) {
                return bad(format!("duplicate frame id {}", f.frame_id));
            }
            if !(f.timestamp.is_finite() && f.timestamp > last_t) {
                return bad(format!("frame {} timestamp is not increasing", f.frame_id));
            }
            last_t = f.timestamp;
            let (mw, mh) = (f.mask.width(), f.mask.height());
            if (mw, mh) != (f.depth.width(), f.depth.height()) {
                return bad(format!(
                    "frame {}: mask {mw}x{mh} vs depth {}x{}",
                    f.frame_id,
                    f.depth.width(),
                    f.depth.height()
                ));
            }
            if (mw, mh) != (f.intrinsics.width(), f.intrinsics.height()) {
                return bad(format!(
                    "frame {}: intrinsics size differs from mask",
                    f.frame_id
                ));
            }
        }
        let mut seen = BTreeSet::new();
        for c in &self.capture_indices {
            if !ids.contains(c) {
                return bad(format!("capture {c} is not a frame id"));
            }
            if !seen.insert(c) {
                return bad(format!("capture {c} listed twice"));
            }
        }
        Ok(())
    }
}
