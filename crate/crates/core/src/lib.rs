//! Ground-level sidewalk mapping: mask fusion, instance extraction, feature
//! geolocation from RGB-D captures, sidewalk width estimation, human vetting
//! and OpenSidewalks-style node/way modeling.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`geo`]: pinhole back-projection, world transform and spherical
//!   destination-point projection, plus per-instance localization.
//! - [`stabilize`]: homography alignment of preceding masks, per-pixel
//!   majority vote and contour-based instance extraction.
//! - [`sidewalk`]: region-of-interest filtering, trapezoid extraction and width
//!   measurement.
//! - [`vetting`]: Agree / Discard / Missing verdicts gating what is uploaded.
//! - [`osw`]: nodes, ways, changesets and the GeoJSON workspace document.
//! - [`session`]: the on-disk session format and the synthetic scene renderer.
//! - [`pipeline`] and [`metrics`]: capture processing and error statistics.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default); see [`exec::Exec`].

pub mod config;
pub mod contribution;
pub mod exec;
pub mod geo;
pub mod mask;
pub mod metrics;
pub mod osw;
pub mod pipeline;
pub mod privacy;
pub mod session;
pub mod sidewalk;
pub mod stabilize;
pub mod vetting;

pub use exec::Exec;
pub use geo::{
    CameraPoint, DepthMap, GeoError, GeoPoint, GpsFix, Intrinsics, PlanarDelta, Pose, WorldPoint,
};
pub use mask::{FeatureClass, SegMask};
