use nalgebra::Vector3;

use super::{CameraPoint, GeoError, Intrinsics, PlanarDelta, Pose, WorldPoint};

/// Lifts pixel `(u, v)` with z-depth `depth` into the camera frame:
/// `depth · K⁻¹ [u, v, 1]ᵀ`.
pub fn back_project(u: f64, v: f64, depth: f64, k: &Intrinsics) -> Result<CameraPoint, GeoError> {
    if !(depth.is_finite() && depth > 0.0) {
        return Err(GeoError::InvalidDepth(depth));
    }
    if !k.contains(u, v) {
        return Err(GeoError::OutOfBounds {
            u,
            v,
            width: k.width(),
            height: k.height(),
        });
    }
    Ok(CameraPoint(Vector3::new(
        (u - k.cx()) / k.fx() * depth,
        (v - k.cy()) / k.fy() * depth,
        depth,
    )))
}

/// Pinhole projection `K · x / z`. Returns `None` for points at or behind the
/// camera plane.
pub fn project(p: &CameraPoint, k: &Intrinsics) -> Option<(f64, f64)> {
    let z = p.0.z;
    if z <= 0.0 {
        return None;
    }
    Some((k.fx() * p.0.x / z + k.cx(), k.fy() * p.0.y / z + k.cy()))
}

pub fn to_world(p: &CameraPoint, pose: &Pose) -> WorldPoint {
    WorldPoint(pose.rotation() * p.0 + pose.translation())
}

/// Horizontal offset of `x_world` from the camera origin `t`; the vertical
/// component is dropped.
pub fn planar_delta(x_world: &WorldPoint, t: &Vector3<f64>) -> PlanarDelta {
    let d = x_world.0 - t;
    PlanarDelta {
        north: d.y,
        east: d.x,
    }
}
