//! Camera and geodesic mathematics: pixel → camera → world → GPS.
//!
//! Frame conventions used throughout the crate:
//!
//! - pixel `(u, v)`: `u` is the column, `v` the row; integer coordinates are
//!   pixel centers.
//! - camera frame: `+x` right, `+y` down, `+z` forward along the optical axis.
//! - world frame: `x` east, `y` north, `z` up (meters).
//! - [`Pose`] is camera-to-world: `x_world = R · x_cam + t`, with `t` the
//!   camera origin in the world frame.

mod camera;
mod geodesy;
mod localize;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use camera::{back_project, planar_delta, project, to_world};
pub use geodesy::{
    destination_by_bearing, haversine_distance, initial_bearing, normalize_longitude,
    spherical_destination, EARTH_RADIUS_M,
};
pub use localize::{
    average_depth, instance_pixels, localize_instance, localize_instance_detailed, localize_pixel,
    pixel_centroid, Localization, DEFAULT_DEPTH_RADIUS_PX,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("depth {0} is not a positive finite value")]
    InvalidDepth(f64),
    #[error("pixel ({u}, {v}) lies outside the {width}x{height} image")]
    OutOfBounds {
        u: f64,
        v: f64,
        width: u32,
        height: u32,
    },
    #[error("no valid depth sample in the averaging region")]
    NoValidDepth,
    #[error("contour encloses no pixel of its class")]
    EmptyInstance,
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("raster dimensions differ: {0}")]
    DimensionMismatch(String),
}

/// Pinhole intrinsics without skew or distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl Intrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeoError> {
        let bad = |msg: String| Err(GeoError::InvalidIntrinsics(msg));
        if !(fx.is_finite() && fx > 0.0 && fy.is_finite() && fy > 0.0) {
            return bad(format!("focal lengths must be positive (fx={fx}, fy={fy})"));
        }
        if width == 0 || height == 0 {
            return bad(format!("image size {width}x{height}"));
        }
        if !(cx >= 0.0 && cx < width as f64) || !(cy >= 0.0 && cy < height as f64) {
            return bad(format!(
                "principal point ({cx}, {cy}) outside {width}x{height}"
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Row-major 3×3 matrix, the layout used by session metadata.
    pub fn to_row_major(&self) -> [f64; 9] {
        [self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0]
    }

    pub fn from_row_major(k: &[f64; 9], width: u32, height: u32) -> Result<Self, GeoError> {
        if k[1] != 0.0 || k[3] != 0.0 || k[6] != 0.0 || k[7] != 0.0 || k[8] != 1.0 {
            return Err(GeoError::InvalidIntrinsics(
                "expected [fx 0 cx; 0 fy cy; 0 0 1]".into(),
            ));
        }
        Self::new(k[0], k[4], k[2], k[5], width, height)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64
    }
}

/// Rigid camera-to-world transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

const POSE_TOLERANCE: f64 = 1e-9;

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeoError> {
        if rotation
            .iter()
            .chain(translation.iter())
            .any(|x| !x.is_finite())
        {
            return Err(GeoError::InvalidPose("non-finite entry".into()));
        }
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if ortho_err > POSE_TOLERANCE {
            return Err(GeoError::InvalidPose(format!(
                "rotation is not orthonormal (|RᵀR − I| = {ortho_err:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > POSE_TOLERANCE {
            return Err(GeoError::InvalidPose(format!("det(R) = {det}")));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Camera at `position` looking along compass `heading_deg` (clockwise from
    /// north), pitched up by `pitch_deg` (negative looks down) and rolled by
    /// `roll_deg` about the optical axis (positive dips the camera's right side).
    pub fn from_heading_pitch_roll(
        heading_deg: f64,
        pitch_deg: f64,
        roll_deg: f64,
        position: Vector3<f64>,
    ) -> Self {
        let (h, p, r) = (
            heading_deg.to_radians(),
            pitch_deg.to_radians(),
            roll_deg.to_radians(),
        );
        let forward = Vector3::new(h.sin() * p.cos(), h.cos() * p.cos(), p.sin());
        let right0 = Vector3::new(h.cos(), -h.sin(), 0.0);
        let down0 = forward.cross(&right0);
        let right = right0 * r.cos() + down0 * r.sin();
        let down = down0 * r.cos() - right0 * r.sin();
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Self {
            rotation,
            translation: position,
        }
    }

    /// Applies an extra rotation of `angle_rad` about `axis` (camera frame)
    /// after this pose's rotation, keeping the camera position.
    pub fn rotated_in_camera(&self, axis: Vector3<f64>, angle_rad: f64) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle_rad);
        Self {
            rotation: self.rotation * rot.matrix(),
            translation: self.translation,
        }
    }

    /// Rotates the whole pose about the world vertical through `pivot`.
    pub fn yawed_about(&self, pivot: Vector3<f64>, angle_rad: f64) -> Self {
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), angle_rad);
        Self {
            rotation: rot.matrix() * self.rotation,
            translation: rot * (self.translation - pivot) + pivot,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// 4×4 homogeneous matrix, row-major.
    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t[0],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t[1],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t[2],
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }

    pub fn from_row_major(m: &[f64; 16]) -> Result<Self, GeoError> {
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(GeoError::InvalidPose("bottom row must be [0 0 0 1]".into()));
        }
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        Self::new(rotation, Vector3::new(m[3], m[7], m[11]))
    }
}

/// Metric depth raster; zero, negative or non-finite values mark dropouts.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self, GeoError> {
        if width == 0 || height == 0 || values.len() != width as usize * height as usize {
            return Err(GeoError::DimensionMismatch(format!(
                "{} depth values for {width}x{height}",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: u32, height: u32, depth: f32) -> Result<Self, GeoError> {
        Self::new(width, height, vec![depth; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn values(&self) -> &[f32] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn raw(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// Depth at a pixel if it is a valid measurement.
    pub fn valid_at(&self, x: u32, y: u32) -> Option<f64> {
        if x >= self.width || y >= self.height {
            return None;
        }
        let d = self.raw(x, y);
        (d.is_finite() && d > 0.0).then_some(d as f64)
    }

    pub fn set(&mut self, x: u32, y: u32, depth: f32) {
        let i = y as usize * self.width as usize + x as usize;
        self.values[i] = depth;
    }
}

fn check_latitude(lat: f64) -> Result<(), GeoError> {
    if !(lat.is_finite() && (-90.0..=90.0).contains(&lat)) {
        return Err(GeoError::InvalidCoordinate(format!(
            "latitude {lat} outside [-90, 90]"
        )));
    }
    Ok(())
}

fn checked_longitude(lon: f64) -> Result<f64, GeoError> {
    if !lon.is_finite() {
        return Err(GeoError::InvalidCoordinate(format!("longitude {lon}")));
    }
    Ok(normalize_longitude(lon))
}

/// Device GPS fix. Longitude is normalized into (−180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GpsFixRepr", into = "GpsFixRepr")]
pub struct GpsFix {
    latitude: f64,
    longitude: f64,
    horizontal_accuracy: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GpsFixRepr {
    latitude: f64,
    longitude: f64,
    horizontal_accuracy: f64,
}

impl TryFrom<GpsFixRepr> for GpsFix {
    type Error = GeoError;
    fn try_from(r: GpsFixRepr) -> Result<Self, GeoError> {
        GpsFix::new(r.latitude, r.longitude, r.horizontal_accuracy)
    }
}

impl From<GpsFix> for GpsFixRepr {
    fn from(g: GpsFix) -> Self {
        Self {
            latitude: g.latitude,
            longitude: g.longitude,
            horizontal_accuracy: g.horizontal_accuracy,
        }
    }
}

impl GpsFix {
    pub fn new(latitude: f64, longitude: f64, horizontal_accuracy: f64) -> Result<Self, GeoError> {
        check_latitude(latitude)?;
        let longitude = checked_longitude(longitude)?;
        if !(horizontal_accuracy.is_finite() && horizontal_accuracy >= 0.0) {
            return Err(GeoError::InvalidCoordinate(format!(
                "horizontal accuracy {horizontal_accuracy}"
            )));
        }
        Ok(Self {
            latitude,
            longitude,
            horizontal_accuracy,
        })
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }
    pub fn longitude(&self) -> f64 {
        self.longitude
    }
    pub fn horizontal_accuracy(&self) -> f64 {
        self.horizontal_accuracy
    }
    pub fn point(&self) -> GeoPoint {
        GeoPoint {
            latitude: self.latitude,
            longitude: self.longitude,
        }
    }
}

/// A geographic position in degrees. Longitude is normalized into (−180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeoPointRepr", into = "GeoPointRepr")]
pub struct GeoPoint {
    latitude: f64,
    longitude: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeoPointRepr {
    latitude: f64,
    longitude: f64,
}

impl TryFrom<GeoPointRepr> for GeoPoint {
    type Error = GeoError;
    fn try_from(r: GeoPointRepr) -> Result<Self, GeoError> {
        GeoPoint::new(r.latitude, r.longitude)
    }
}

impl From<GeoPoint> for GeoPointRepr {
    fn from(g: GeoPoint) -> Self {
        Self {
            latitude: g.latitude,
            longitude: g.longitude,
        }
    }
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self, GeoError> {
        check_latitude(latitude)?;
        Ok(Self {
            latitude,
            longitude: checked_longitude(longitude)?,
        })
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }
    pub fn longitude(&self) -> f64 {
        self.longitude
    }

    pub fn as_fix(&self, horizontal_accuracy: f64) -> GpsFix {
        GpsFix {
            latitude: self.latitude,
            longitude: self.longitude,
            horizontal_accuracy: horizontal_accuracy.max(0.0),
        }
    }
}

/// A point in the camera frame (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPoint(pub Vector3<f64>);

/// A point in the east/north/up world frame (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPoint(pub Vector3<f64>);

/// Horizontal offset in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarDelta {
    pub north: f64,
    pub east: f64,
}

impl PlanarDelta {
    pub fn new(north: f64, east: f64) -> Self {
        Self { north, east }
    }

    pub fn distance(&self) -> f64 {
        self.north.hypot(self.east)
    }

    /// Bearing in radians, clockwise from north.
    pub fn bearing(&self) -> f64 {
        self.east.atan2(self.north)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn intrinsics_invariants() {
        assert!(Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).is_ok());
        assert!(Intrinsics::new(0.0, 500.0, 320.0, 240.0, 640, 480).is_err());
        assert!(Intrinsics::new(500.0, 500.0, 640.0, 240.0, 640, 480).is_err());
        assert!(Intrinsics::new(500.0, 500.0, 320.0, -1.0, 640, 480).is_err());
        let k = Intrinsics::new(500.0, 400.0, 320.0, 240.0, 640, 480).unwrap();
        assert_relative_eq!(
            k.matrix() * k.inverse_matrix(),
            Matrix3::identity(),
            epsilon = 1e-15
        );
        let again = Intrinsics::from_row_major(&k.to_row_major(), 640, 480).unwrap();
        assert_eq!(again, k);
    }

    #[test]
    fn pose_rejects_non_rotations() {
        assert!(Pose::new(Matrix3::identity() * 2.0, Vector3::zeros()).is_err());
        let reflection = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Pose::new(reflection, Vector3::zeros()).is_err());
        assert!(Pose::new(Matrix3::identity(), Vector3::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn heading_pitch_roll_builds_valid_rotations() {
        let level_north = Pose::from_heading_pitch_roll(0.0, 0.0, 0.0, Vector3::zeros());
        // forward = north, right = east, down = -up
        assert_relative_eq!(
            level_north.rotation() * Vector3::z(),
            Vector3::new(0.0, 1.0, 0.0),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            level_north.rotation() * Vector3::x(),
            Vector3::new(1.0, 0.0, 0.0),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            level_north.rotation() * Vector3::y(),
            Vector3::new(0.0, 0.0, -1.0),
            epsilon = 1e-15
        );
        for (h, p, r) in [(37.0, -30.0, 2.0), (200.0, 10.0, -5.0), (90.0, -89.0, 45.0)] {
            let pose = Pose::from_heading_pitch_roll(h, p, r, Vector3::new(1.0, 2.0, 3.0));
            assert!(Pose::new(*pose.rotation(), *pose.translation()).is_ok());
        }
        let east = Pose::from_heading_pitch_roll(90.0, 0.0, 0.0, Vector3::zeros());
        assert_relative_eq!(
            east.rotation() * Vector3::z(),
            Vector3::new(1.0, 0.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn pose_row_major_round_trip() {
        let pose = Pose::from_heading_pitch_roll(12.0, -20.0, 3.0, Vector3::new(4.0, 5.0, 1.4));
        let m = pose.to_row_major();
        assert_eq!(Pose::from_row_major(&m).unwrap(), pose);
        let mut bad = m;
        bad[15] = 2.0;
        assert!(Pose::from_row_major(&bad).is_err());
    }

    #[test]
    fn gps_ranges_and_normalization() {
        assert!(GpsFix::new(91.0, 0.0, 1.0).is_err());
        assert!(GpsFix::new(0.0, f64::NAN, 1.0).is_err());
        assert!(GpsFix::new(0.0, 0.0, -1.0).is_err());
        assert_eq!(GpsFix::new(10.0, 190.0, 0.0).unwrap().longitude(), -170.0);
        assert_eq!(GpsFix::new(10.0, -180.0, 0.0).unwrap().longitude(), 180.0);
        assert_eq!(GeoPoint::new(0.0, 540.0).unwrap().longitude(), 180.0);
        let p: Result<GeoPoint, _> = serde_json::from_str(r#"{"latitude":95,"longitude":0}"#);
        assert!(p.is_err());
    }

    #[test]
    fn depth_validity() {
        let d = DepthMap::new(3, 1, vec![1.5, 0.0, f32::NAN]).unwrap();
        assert_eq!(d.valid_at(0, 0), Some(1.5));
        assert_eq!(d.valid_at(1, 0), None);
        assert_eq!(d.valid_at(2, 0), None);
        assert_eq!(d.valid_at(3, 0), None);
        assert!(DepthMap::new(2, 2, vec![1.0; 3]).is_err());
    }
}
