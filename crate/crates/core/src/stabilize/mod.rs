//! Temporal mask stabilization and discrete instance extraction.
//!
//! Preceding frames are aligned to the captured frame with a homography,
//! fused by a per-pixel majority vote, and the fused mask is split into
//! 8-connected instances whose outer borders become [`Contour`]s.

mod contour;
mod fusion;
mod homography;

use thiserror::Error;

pub use contour::{extract_instances, trace_boundary, Contour, DEFAULT_MIN_INSTANCE_AREA};
pub use fusion::{majority_vote, majority_vote_with, vote_pixel, warp_mask, warp_mask_with};
pub use homography::{infinite_homography, Homography};

/// Default number of preceding frames fused with the captured one.
pub const DEFAULT_PRECEDING_FRAMES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StabilizeError {
    #[error("homography is singular or non-finite")]
    SingularHomography,
    #[error("contour needs at least 3 points, got {0}")]
    DegenerateContour(usize),
    #[error("mask dimensions differ: {0}")]
    DimensionMismatch(String),
}
