//! Synthetic sessions with exact ground truth: a flat ground plane carrying
//! a straight sidewalk strip, upright plate-shaped objects, and a camera
//! walking north along the strip.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use super::{FrameBundle, GroundTruth, Session, SessionError, TruthObject};
use crate::exec::Exec;
use crate::geo::{
    haversine_distance, spherical_destination, DepthMap, GeoPoint, GpsFix, Intrinsics, PlanarDelta,
    Pose,
};
use crate::mask::{FeatureClass, SegMask};

/// Upright flat shapes in a vertical plane of constant northing (facing south).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ObjectShape {
    Plate {
        half_width_m: f64,
        bottom_m: f64,
        top_m: f64,
    },
    Diamond {
        half_diagonal_m: f64,
        center_height_m: f64,
    },
}

impl ObjectShape {
    fn contains(&self, dx: f64, z: f64) -> bool {
        match *self {
            ObjectShape::Plate {
                half_width_m,
                bottom_m,
                top_m,
            } => dx.abs() <= half_width_m && z >= bottom_m && z <= top_m,
            ObjectShape::Diamond {
                half_diagonal_m,
                center_height_m,
            } => dx.abs() + (z - center_height_m).abs() <= half_diagonal_m,
        }
    }

    fn is_sound(&self) -> bool {
        match *self {
            ObjectShape::Plate {
                half_width_m,
                bottom_m,
                top_m,
            } => half_width_m > 0.0 && bottom_m >= 0.0 && top_m > bottom_m,
            ObjectShape::Diamond {
                half_diagonal_m,
                center_height_m,
            } => half_diagonal_m > 0.0 && center_height_m - half_diagonal_m >= 0.0,
        }
    }
}

// `flatten` rules out deny_unknown_fields here
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: FeatureClass,
    pub east_m: f64,
    pub north_m: f64,
    #[serde(flatten)]
    pub shape: ObjectShape,
}

/// Sidewalk running due north, centered on `center_east_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidewalkStrip {
    pub center_east_m: f64,
    pub width_m: f64,
}

/// Evenly spaced capture stations along a northbound line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub captures: usize,
    pub start_north_m: f64,
    pub end_north_m: f64,
    pub east_m: f64,
    pub camera_height_m: f64,
    pub heading_deg: f64,
    pub pitch_deg: f64,
    /// Magnitude of the hand-held roll; the sign alternates between stations.
    pub roll_deg: f64,
    /// Frames per capture, the captured frame included.
    pub frames_per_capture: usize,
    pub frame_interval_s: f64,
    pub capture_interval_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub session_id: String,
    pub origin: GeoPoint,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Depth returns beyond this range are dropouts (zero).
    pub max_range_m: f64,
    pub sidewalk: Option<SidewalkStrip>,
    pub objects: Vec<SceneObject>,
    pub class_selection: Vec<FeatureClass>,
    pub trajectory: TrajectorySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub seed: u64,
    /// Horizontal RMS of the per-frame GPS error (each axis gets σ/√2).
    pub gps_sigma_m: f64,
    pub depth_sigma_m: f64,
    /// Std-dev of a random rotation applied to each preceding frame.
    pub rotation_jitter_deg: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            seed: 0,
            gps_sigma_m: 0.0,
            depth_sigma_m: 0.0,
            rotation_jitter_deg: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        for (name, v) in [
            ("gps_sigma_m", self.gps_sigma_m),
            ("depth_sigma_m", self.depth_sigma_m),
            ("rotation_jitter_deg", self.rotation_jitter_deg),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SessionError::DegenerateScene(format!(
                    "{name} = {v} must be ≥ 0"
                )));
            }
        }
        Ok(())
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::none()
    }
}

/// One capture station: true pose, true device fix and capture time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Station {
    pub pose: Pose,
    pub gps: GpsFix,
    pub timestamp: f64,
}

impl Default for SceneSpec {
    /// Five poles, three signs and a 2 m sidewalk on a 60 m block.
    fn default() -> Self {
        let pole = |north_m| SceneObject {
            class: FeatureClass::Pole,
            east_m: 1.7,
            north_m,
            shape: ObjectShape::Plate {
                half_width_m: 0.06,
                bottom_m: 0.0,
                top_m: 3.0,
            },
        };
        let sign = |north_m| SceneObject {
            class: FeatureClass::TrafficSign,
            east_m: -1.9,
            north_m,
            shape: ObjectShape::Diamond {
                half_diagonal_m: 0.45,
                center_height_m: 1.9,
            },
        };
        let mut objects: Vec<_> = [12.0, 23.0, 34.0, 45.0, 56.0]
            .into_iter()
            .map(pole)
            .collect();
        objects.extend([17.5, 39.0, 51.0].into_iter().map(sign));
        Self {
            session_id: "synthetic".into(),
            origin: GeoPoint::new(47.6062, -122.3321).expect("valid origin"),
            width: 960,
            height: 720,
            fx: 750.0,
            fy: 750.0,
            cx: 480.0,
            cy: 360.0,
            max_range_m: 12.0,
            sidewalk: Some(SidewalkStrip {
                center_east_m: 0.0,
                width_m: 2.0,
            }),
            objects,
            class_selection: vec![
                FeatureClass::Sidewalk,
                FeatureClass::TrafficSign,
                FeatureClass::Pole,
            ],
            trajectory: TrajectorySpec {
                captures: 50,
                start_north_m: 0.0,
                end_north_m: 52.0,
                east_m: 0.0,
                camera_height_m: 1.4,
                heading_deg: 0.0,
                pitch_deg: 0.0,
                roll_deg: 2.0,
                frames_per_capture: 5,
                frame_interval_s: 1.0 / 30.0,
                capture_interval_s: 2.0,
            },
        }
    }
}

impl SceneSpec {
    pub fn intrinsics(&self) -> Result<Intrinsics, SessionError> {
        Intrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
            .map_err(|e| SessionError::DegenerateScene(e.to_string()))
    }

    /// Scales the image size and intrinsics by `factor`, keeping the field of view.
    pub fn with_resolution_scale(mut self, factor: f64) -> Self {
        self.width = (self.width as f64 * factor).round() as u32;
        self.height = (self.height as f64 * factor).round() as u32;
        self.fx *= factor;
        self.fy *= factor;
        self.cx *= factor;
        self.cy *= factor;
        self
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: String| Err(SessionError::DegenerateScene(m));
        self.intrinsics()?;
        let t = &self.trajectory;
        if !(t.camera_height_m > 0.0 && t.camera_height_m.is_finite()) {
            return bad(format!(
                "camera height {} is not above the ground",
                t.camera_height_m
            ));
        }
        if t.captures == 0 || t.frames_per_capture == 0 {
            return bad("trajectory needs at least one capture and one frame".into());
        }
        if !(t.frame_interval_s > 0.0
            && t.capture_interval_s > (t.frames_per_capture - 1) as f64 * t.frame_interval_s)
        {
            return bad("frame timing would not be strictly increasing".into());
        }
        let finite = [
            t.start_north_m,
            t.end_north_m,
            t.east_m,
            t.heading_deg,
            t.pitch_deg,
            t.roll_deg,
        ];
        if finite.iter().any(|v| !v.is_finite()) || t.pitch_deg.abs() >= 89.0 {
            return bad("trajectory angles and positions must be finite, |pitch| < 89°".into());
        }
        if !(self.max_range_m > 0.0) {
            return bad(format!("max range {}", self.max_range_m));
        }
        if let Some(s) = &self.sidewalk {
            if !(s.width_m > 0.0 && s.width_m.is_finite() && s.center_east_m.is_finite()) {
                return bad(format!("sidewalk width {}", s.width_m));
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !o.shape.is_sound() || !o.east_m.is_finite() || !o.north_m.is_finite() {
                return bad(format!("object {i} has an invalid shape or position"));
            }
            if matches!(o.class, FeatureClass::Background | FeatureClass::Sidewalk) {
                return bad(format!("object {i} cannot have class {}", o.class));
            }
        }
        if self.class_selection.is_empty() {
            return bad("class selection is empty".into());
        }
        Ok(())
    }

    fn origin_fix(&self) -> GpsFix {
        self.origin.as_fix(0.0)
    }

    /// Geographic position of a local east/north offset from the origin.
    pub fn geo_of(&self, east_m: f64, north_m: f64) -> GeoPoint {
        spherical_destination(&self.origin_fix(), &PlanarDelta::new(north_m, east_m))
    }

    pub fn stations(&self) -> Vec<Station> {
        let t = &self.trajectory;
        let lead = (t.frames_per_capture.max(1) - 1) as f64 * t.frame_interval_s;
        (0..t.captures)
            .map(|i| {
                let f = if t.captures > 1 {
                    i as f64 / (t.captures - 1) as f64
                } else {
                    0.0
                };
                let north = t.start_north_m + (t.end_north_m - t.start_north_m) * f;
                let roll = if i % 2 == 0 { t.roll_deg } else { -t.roll_deg };
                let pose = Pose::from_heading_pitch_roll(
                    t.heading_deg,
                    t.pitch_deg,
                    roll,
                    Vector3::new(t.east_m, north, t.camera_height_m),
                );
                Station {
                    pose,
                    gps: self.geo_of(t.east_m, north).as_fix(0.0),
                    timestamp: lead + i as f64 * t.capture_interval_s,
                }
            })
            .collect()
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            origin: self.origin,
            objects: self
                .objects
                .iter()
                .enumerate()
                .map(|(i, o)| TruthObject {
                    id: i as u32,
                    class: o.class,
                    location: self.geo_of(o.east_m, o.north_m),
                    east_m: o.east_m,
                    north_m: o.north_m,
                })
                .collect(),
            sidewalk_width_m: self.sidewalk.as_ref().map(|s| s.width_m),
            camera_positions: BTreeMap::new(),
        }
    }
}

/// Nearest hit along the ray through pixel `(u, v)`: class and z-depth
/// (zero when nothing is hit within range).
fn trace(scene: &SceneSpec, k: &Intrinsics, pose: &Pose, u: f64, v: f64) -> (FeatureClass, f32) {
    // camera-frame direction with unit z, so the ray parameter is the z-depth
    let cam = Vector3::new((u - k.cx()) / k.fx(), (v - k.cy()) / k.fy(), 1.0);
    let dir = pose.rotation() * cam;
    let origin = pose.translation();
    let mut best = (FeatureClass::Background, f64::INFINITY);

    if dir.z < -1e-12 {
        let t = -origin.z / dir.z;
        let hit = origin + dir * t;
        let on_strip = scene
            .sidewalk
            .as_ref()
            .is_some_and(|s| (hit.x - s.center_east_m).abs() <= s.width_m / 2.0);
        best = (
            if on_strip {
                FeatureClass::Sidewalk
            } else {
                FeatureClass::Background
            },
            t,
        );
    }
    if dir.y.abs() > 1e-12 {
        for o in &scene.objects {
            let t = (o.north_m - origin.y) / dir.y;
            if t <= 0.0 || t >= best.1 {
                continue;
            }
            let hit = origin + dir * t;
            if o.shape.contains(hit.x - o.east_m, hit.z) {
                best = (o.class, t);
            }
        }
    }
    if !best.1.is_finite() {
        return (FeatureClass::Background, 0.0);
    }
    let range = (dir * best.1).norm();
    let depth = if range <= scene.max_range_m {
        best.1 as f32
    } else {
        0.0
    };
    (best.0, depth)
}

/// Ideal mask and depth for one camera pose.
pub fn render_frame(
    scene: &SceneSpec,
    pose: &Pose,
    exec: Exec,
) -> Result<(SegMask, DepthMap), SessionError> {
    let k = scene.intrinsics()?;
    let (w, h) = (scene.width as usize, scene.height as usize);
    let mut cells = vec![(0u8, 0f32); w * h];
    exec.fill_rows(&mut cells, w, |y, row| {
        for (x, cell) in row.iter_mut().enumerate() {
            let (c, d) = trace(scene, &k, pose, x as f64, y as f64);
            *cell = (c.code(), d);
        }
    });
    let (labels, depths): (Vec<u8>, Vec<f32>) = cells.into_iter().unzip();
    let mask = SegMask::new(scene.width, scene.height, labels)
        .map_err(|e| SessionError::DegenerateScene(e.to_string()))?;
    let depth = DepthMap::new(scene.width, scene.height, depths)
        .map_err(|e| SessionError::DegenerateScene(e.to_string()))?;
    Ok((mask, depth))
}

fn jittered(pose: &Pose, sigma_deg: f64, rng: &mut ChaCha8Rng) -> Pose {
    if sigma_deg == 0.0 {
        return *pose;
    }
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let angle = Normal::new(0.0, sigma_deg.to_radians())
        .expect("sigma validated")
        .sample(rng);
    pose.rotated_in_camera(Vector3::from(axis), angle)
}

fn noisy_depth(depth: &DepthMap, sigma: f64, rng: &mut ChaCha8Rng) -> DepthMap {
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut out = depth.clone();
    for d in out.values_mut() {
        if d.is_finite() && *d > 0.0 {
            // keep dropouts as dropouts and valid samples valid
            *d = (*d as f64 + normal.sample(rng)).max(1e-3) as f32;
        }
    }
    out
}

fn noisy_fix(truth: &GpsFix, sigma: f64, rng: &mut ChaCha8Rng) -> GpsFix {
    if sigma == 0.0 {
        return *truth;
    }
    let axis = Normal::new(0.0, sigma / std::f64::consts::SQRT_2).expect("sigma validated");
    let delta = PlanarDelta::new(axis.sample(rng), axis.sample(rng));
    spherical_destination(truth, &delta).as_fix(sigma)
}

/// Renders a session over `stations`. Each station yields
/// `frames_per_capture` frames, the last of which is the capture.
///
/// Every frame draws from its own ChaCha stream, so the output depends only
/// on the seed, not on evaluation order.
pub fn generate_synthetic(
    scene: &SceneSpec,
    stations: &[Station],
    noise: &NoiseSpec,
    exec: Exec,
) -> Result<Session, SessionError> {
    scene.validate()?;
    noise.validate()?;
    if stations.is_empty() {
        return Err(SessionError::DegenerateScene("no stations".into()));
    }
    if let Some(s) = stations.iter().find(|s| s.pose.translation().z <= 0.0) {
        return Err(SessionError::DegenerateScene(format!(
            "camera at height {} is not above the ground",
            s.pose.translation().z
        )));
    }
    let k = scene.intrinsics()?;
    let per = scene.trajectory.frames_per_capture;
    let dt = scene.trajectory.frame_interval_s;

    let mut frames = Vec::with_capacity(stations.len() * per);
    let mut captures = Vec::with_capacity(stations.len());
    let mut truth = scene.ground_truth();
    let mut last_t = f64::NEG_INFINITY;
    for (si, st) in stations.iter().enumerate() {
        let clean = render_frame(scene, &st.pose, exec)?;
        let clean = (Arc::new(clean.0), Arc::new(clean.1));
        for j in 0..per {
            let frame_id = (si * per + j) as u32;
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            rng.set_stream(frame_id as u64);
            let captured = j + 1 == per;
            let pose = if captured {
                st.pose
            } else {
                jittered(&st.pose, noise.rotation_jitter_deg, &mut rng)
            };
            let (mask, depth) = if pose == st.pose {
                clean.clone()
            } else {
                let (m, d) = render_frame(scene, &pose, exec)?;
                (Arc::new(m), Arc::new(d))
            };
            let depth = if noise.depth_sigma_m > 0.0 {
                Arc::new(noisy_depth(&depth, noise.depth_sigma_m, &mut rng))
            } else {
                depth
            };
            let gps = noisy_fix(&st.gps, noise.gps_sigma_m, &mut rng);
            let timestamp = st.timestamp - (per - 1 - j) as f64 * dt;
            if timestamp <= last_t {
                return Err(SessionError::DegenerateScene(
                    "station timestamps must increase by more than one capture burst".into(),
                ));
            }
            last_t = timestamp;
            frames.push(FrameBundle {
                frame_id,
                timestamp,
                mask,
                depth,
                intrinsics: k,
                pose,
                gps,
                homography_to_next: None,
            });
            if captured {
                captures.push(frame_id);
                truth.camera_positions.insert(frame_id, st.gps.point());
            }
        }
    }
    let session = Session {
        session_id: scene.session_id.clone(),
        frames,
        capture_indices: captures,
        class_selection: scene
            .class_selection
            .iter()
            .copied()
            .collect::<BTreeSet<_>>(),
        ground_truth: Some(truth),
    };
    session.validate()?;
    Ok(session)
}

/// Ground distance between each capture's reported and true device position.
pub fn injected_gps_errors(session: &Session) -> Vec<f64> {
    let Some(truth) = &session.ground_truth else {
        return Vec::new();
    };
    session
        .capture_indices
        .iter()
        .filter_map(|id| {
            let f = session.frame(*id)?;
            let t = truth.camera_positions.get(id)?;
            Some(haversine_distance(&f.gps.point(), t))
        })
        .collect()
}
