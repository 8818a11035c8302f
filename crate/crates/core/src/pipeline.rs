//! Capture processing: fusion of the captured frame with its predecessors,
//! instance extraction, localization and sidewalk measurement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::exec::Exec;
use crate::geo::{localize_instance_detailed, GeoError, GeoPoint, GpsFix};
use crate::mask::{FeatureClass, SegMask};
use crate::session::{FrameId, Session};
use crate::sidewalk::{
    apply_roi, extract_trapezoid, measure_sidewalk, SidewalkError, SidewalkMeasurement, Trapezoid,
};
use crate::stabilize::{
    extract_instances, infinite_homography, majority_vote_with, warp_mask_with, Contour,
    Homography, StabilizeError,
};
use crate::vetting::Detections;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceShape {
    Contour {
        points: Vec<(u32, u32)>,
        area: usize,
    },
    Trapezoid(Trapezoid),
}

/// A localized detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInstance {
    pub instance_id: String,
    pub class: FeatureClass,
    pub shape: InstanceShape,
    pub centroid: (f64, f64),
    pub location: GeoPoint,
    pub capture_id: FrameId,
    pub timestamp: f64,
    /// Sidewalk width; `None` for point features.
    pub width_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub enum ItemError {
    #[error("{class} instance {index} touches the image border")]
    Truncated { class: FeatureClass, index: usize },
    #[error("{class} instance {index}: {message}")]
    Localization {
        class: FeatureClass,
        index: usize,
        message: String,
        #[serde(skip)]
        cause: Option<GeoError>,
    },
    #[error("sidewalk: {message}")]
    Sidewalk {
        message: String,
        #[serde(skip)]
        cause: Option<SidewalkError>,
    },
}

impl ItemError {
    pub fn is_no_sidewalk(&self) -> bool {
        matches!(
            self,
            ItemError::Sidewalk {
                cause: Some(SidewalkError::NoSidewalk),
                ..
            }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("frame {0} is not a capture of this session")]
    UnknownCapture(FrameId),
    #[error(transparent)]
    Stabilize(#[from] StabilizeError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureResult {
    pub capture_id: FrameId,
    pub timestamp: f64,
    pub gps: GpsFix,
    /// Localized instances per class; indices are what vetting refers to.
    pub detections: Detections<FeatureInstance>,
    pub sidewalk: Option<SidewalkMeasurement>,
    pub errors: Vec<ItemError>,
    /// Number of frames that went into the vote, the capture included.
    pub fused_frames: usize,
}

impl CaptureResult {
    pub fn instance_count(&self) -> usize {
        self.detections.values().map(Vec::len).sum()
    }
}

/// Homography taking frame `from`'s pixels into frame `to`'s (`from < to`).
/// Precomputed per-link homographies win when the whole chain has them.
fn alignment(session: &Session, from: usize, to: usize) -> Result<Homography, StabilizeError> {
    let links: Option<Vec<Homography>> = (from..to)
        .map(|i| session.frames[i].homography_to_next)
        .collect();
    match links {
        Some(links) => links
            .iter()
            .try_fold(Homography::identity(), |acc, h| h.compose(&acc)),
        None => {
            let (a, b) = (&session.frames[from], &session.frames[to]);
            Ok(infinite_homography(&a.pose, &b.pose, &b.intrinsics))
        }
    }
}

/// Majority vote of the capture and up to `k` aligned predecessors. The run
/// of predecessors ends at the first gap longer than `max_gap_s`.
pub fn fuse_capture(
    session: &Session,
    pos: usize,
    k: usize,
    max_gap_s: f64,
    exec: Exec,
) -> Result<(SegMask, usize), StabilizeError> {
    let cap = &session.frames[pos];
    let mut first = pos;
    while first > 0
        && pos - first < k
        && session.frames[first].timestamp - session.frames[first - 1].timestamp <= max_gap_s
    {
        first -= 1;
    }
    let aligned = (first..pos)
        .map(|i| {
            let h = alignment(session, i, pos)?;
            warp_mask_with(&session.frames[i].mask, &h, exec)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = aligned.len() + 1;
    Ok((majority_vote_with(&cap.mask, &aligned, exec)?, n))
}

fn touches_border(c: &Contour, w: u32, h: u32) -> bool {
    let (x0, y0, x1, y1) = c.bounding_box();
    x0 == 0 || y0 == 0 || x1 + 1 >= w || y1 + 1 >= h
}

pub fn process_capture(
    session: &Session,
    capture_id: FrameId,
    config: &PipelineConfig,
    exec: Exec,
) -> Result<CaptureResult, PipelineError> {
    config
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    if !session.capture_indices.contains(&capture_id) {
        return Err(PipelineError::UnknownCapture(capture_id));
    }
    let pos = session
        .frame_position(capture_id)
        .ok_or(PipelineError::UnknownCapture(capture_id))?;
    let frame = &session.frames[pos];
    let (fused, fused_frames) = fuse_capture(
        session,
        pos,
        config.preceding_frames,
        config.max_frame_gap_s,
        exec,
    )?;
    let (w, h) = (fused.width(), fused.height());

    let point_classes: Vec<FeatureClass> = session
        .class_selection
        .iter()
        .copied()
        .filter(|c| c.is_mappable() && *c != FeatureClass::Sidewalk)
        .collect();
    let mut detections = Detections::new();
    let mut errors = Vec::new();
    let mut index_in_class = std::collections::BTreeMap::<FeatureClass, usize>::new();
    for contour in extract_instances(&fused, &point_classes, config.min_instance_area) {
        let class = contour.class();
        let slot = index_in_class.entry(class).or_insert(0);
        let index = *slot;
        *slot += 1;
        if config.skip_truncated && touches_border(&contour, w, h) {
            errors.push(ItemError::Truncated { class, index });
            continue;
        }
        match localize_instance_detailed(
            &fused,
            &contour,
            &frame.depth,
            &frame.intrinsics,
            &frame.pose,
            &frame.gps,
            config.depth_radius_px,
        ) {
            Ok(loc) => {
                let list: &mut Vec<FeatureInstance> = detections.entry(class).or_default();
                list.push(FeatureInstance {
                    instance_id: format!("{capture_id}-{}-{}", class.name(), list.len()),
                    class,
                    shape: InstanceShape::Contour {
                        points: contour.points().to_vec(),
                        area: contour.area(),
                    },
                    centroid: loc.centroid,
                    location: loc.location,
                    capture_id,
                    timestamp: frame.timestamp,
                    width_m: None,
                });
            }
            Err(e) => errors.push(ItemError::Localization {
                class,
                index,
                message: e.to_string(),
                cause: Some(e),
            }),
        }
    }

    let mut sidewalk = None;
    if session.class_selection.contains(&FeatureClass::Sidewalk) {
        let roi = config.roi.resolve(w, h);
        let measured = apply_roi(&fused, &roi)
            .and_then(|m| extract_trapezoid(&m, &roi, config.min_run_fraction))
            .and_then(|t| {
                measure_sidewalk(
                    &t,
                    &frame.depth,
                    &frame.intrinsics,
                    &frame.pose,
                    &frame.gps,
                    config.depth_radius_px,
                )
                .map(|m| (t, m))
            });
        match measured {
            Ok((trap, m)) => {
                detections.insert(
                    FeatureClass::Sidewalk,
                    vec![FeatureInstance {
                        instance_id: format!("{capture_id}-sidewalk-0"),
                        class: FeatureClass::Sidewalk,
                        shape: InstanceShape::Trapezoid(trap),
                        centroid: trap.centroid(),
                        location: m.location,
                        capture_id,
                        timestamp: frame.timestamp,
                        width_m: Some(m.width_m),
                    }],
                );
                sidewalk = Some(m);
            }
            Err(e) => errors.push(ItemError::Sidewalk {
                message: e.to_string(),
                cause: Some(e),
            }),
        }
    }

    Ok(CaptureResult {
        capture_id,
        timestamp: frame.timestamp,
        gps: frame.gps,
        detections,
        sidewalk,
        errors,
        fused_frames,
    })
}

/// Processes every capture, in capture order.
pub fn process_session(
    session: &Session,
    config: &PipelineConfig,
    exec: Exec,
) -> Result<Vec<CaptureResult>, PipelineError> {
    // captures run in parallel; each one's inner loops stay sequential
    let inner = if exec.is_parallel() {
        Exec::Sequential
    } else {
        exec
    };
    exec.map_slice(&session.capture_indices, |&id| {
        process_capture(session, id, config, inner)
    })
    .into_iter()
    .collect()
}
