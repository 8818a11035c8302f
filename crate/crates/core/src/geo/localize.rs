//! Per-instance feature localization: sub-mask extraction, centroid, depth
//! averaging over a disc and the pixel → GPS chain.

use std::collections::HashSet;

use crate::mask::SegMask;
use crate::stabilize::Contour;

use super::{
    back_project, planar_delta, spherical_destination, to_world, CameraPoint, DepthMap, GeoError,
    GeoPoint, GpsFix, Intrinsics, PlanarDelta, Pose, WorldPoint,
};

/// Default radius (pixels) of the depth-averaging disc.
pub const DEFAULT_DEPTH_RADIUS_PX: f64 = 5.0;

/// Intermediate values of one localization, kept for provenance and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub centroid: (f64, f64),
    pub pixel_count: usize,
    pub centroid_depth: f64,
    pub camera: CameraPoint,
    pub world: WorldPoint,
    pub delta: PlanarDelta,
    pub location: GeoPoint,
}

/// Pixels of the contour's class lying on or inside the contour polygon, in
/// row-major order.
pub fn instance_pixels(mask: &SegMask, contour: &Contour) -> Vec<(u32, u32)> {
    let pts = contour.points();
    if pts.is_empty() {
        return Vec::new();
    }
    let code = contour.class().code();
    let boundary: HashSet<(u32, u32)> = pts.iter().copied().collect();
    let max_x = pts
        .iter()
        .map(|p| p.0)
        .max()
        .unwrap_or(0)
        .min(mask.width() - 1);
    let min_x = pts.iter().map(|p| p.0).min().unwrap_or(0);
    let max_y = pts
        .iter()
        .map(|p| p.1)
        .max()
        .unwrap_or(0)
        .min(mask.height() - 1);
    let min_y = pts.iter().map(|p| p.1).min().unwrap_or(0);

    let mut members = Vec::new();
    let mut crossings = Vec::new();
    for y in min_y..=max_y {
        let yf = y as f64;
        crossings.clear();
        for i in 0..pts.len() {
            let (x0, y0) = (pts[i].0 as f64, pts[i].1 as f64);
            let j = (i + 1) % pts.len();
            let (x1, y1) = (pts[j].0 as f64, pts[j].1 as f64);
            if (y0 > yf) != (y1 > yf) {
                crossings.push(x0 + (yf - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        crossings.sort_by(f64::total_cmp);
        let mut inside = vec![false; (max_x - min_x + 1) as usize];
        for pair in crossings.chunks_exact(2) {
            let lo = pair[0].ceil().max(min_x as f64) as u32;
            let hi = pair[1].floor().min(max_x as f64);
            if hi < lo as f64 {
                continue;
            }
            for x in lo..=hi as u32 {
                inside[(x - min_x) as usize] = true;
            }
        }
        for x in min_x..=max_x {
            if (inside[(x - min_x) as usize] || boundary.contains(&(x, y)))
                && mask.code_at(x, y) == code
            {
                members.push((x, y));
            }
        }
    }
    members
}

/// Mean pixel coordinate `(u, v)` of a non-empty pixel set.
pub fn pixel_centroid(pixels: &[(u32, u32)]) -> Option<(f64, f64)> {
    if pixels.is_empty() {
        return None;
    }
    let n = pixels.len() as f64;
    let (su, sv) = pixels.iter().fold((0.0, 0.0), |(su, sv), &(x, y)| {
        (su + x as f64, sv + y as f64)
    });
    Some((su / n, sv / n))
}

/// Mean of the valid depths of `members` within `radius` of `center`.
pub fn average_depth(
    depth: &DepthMap,
    members: &[(u32, u32)],
    center: (f64, f64),
    radius: f64,
) -> Result<f64, GeoError> {
    let r2 = radius * radius;
    let (sum, n) = members
        .iter()
        .filter(|&&(x, y)| {
            let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
            dx * dx + dy * dy <= r2
        })
        .filter_map(|&(x, y)| depth.valid_at(x, y))
        .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
    if n == 0 {
        Err(GeoError::NoValidDepth)
    } else {
        Ok(sum / n as f64)
    }
}

/// Full pixel → GPS chain for a single pixel with known z-depth.
pub fn localize_pixel(
    u: f64,
    v: f64,
    depth: f64,
    k: &Intrinsics,
    pose: &Pose,
    gps: &GpsFix,
) -> Result<GeoPoint, GeoError> {
    Ok(chain(u, v, depth, k, pose, gps)?.3)
}

fn chain(
    u: f64,
    v: f64,
    depth: f64,
    k: &Intrinsics,
    pose: &Pose,
    gps: &GpsFix,
) -> Result<(CameraPoint, WorldPoint, PlanarDelta, GeoPoint), GeoError> {
    let cam = back_project(u, v, depth, k)?;
    let world = to_world(&cam, pose);
    let delta = planar_delta(&world, pose.translation());
    let location = spherical_destination(gps, &delta);
    Ok((cam, world, delta, location))
}

fn nearest_member(members: &[(u32, u32)], p: (f64, f64)) -> (u32, u32) {
    let d2 = |&(x, y): &(u32, u32)| {
        let (dx, dy) = (x as f64 - p.0, y as f64 - p.1);
        dx * dx + dy * dy
    };
    // first minimum in row-major order
    let mut best = members[0];
    let mut best_d = d2(&best);
    for m in &members[1..] {
        let d = d2(m);
        if d < best_d {
            best = *m;
            best_d = d;
        }
    }
    best
}

/// Geolocates one contour-delimited instance.
pub fn localize_instance(
    mask: &SegMask,
    contour: &Contour,
    depth: &DepthMap,
    k: &Intrinsics,
    pose: &Pose,
    gps: &GpsFix,
    radius: f64,
) -> Result<GeoPoint, GeoError> {
    localize_instance_detailed(mask, contour, depth, k, pose, gps, radius).map(|l| l.location)
}

/// As [`localize_instance`], returning the intermediate quantities.
///
/// When the centroid of a non-convex instance falls outside it, the member
/// pixel nearest to the centroid becomes the center of the depth disc; the
/// back-projected ray still passes through the centroid.
pub fn localize_instance_detailed(
    mask: &SegMask,
    contour: &Contour,
    depth: &DepthMap,
    k: &Intrinsics,
    pose: &Pose,
    gps: &GpsFix,
    radius: f64,
) -> Result<Localization, GeoError> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(GeoError::InvalidCoordinate(format!("radius {radius}")));
    }
    if mask.width() != depth.width() || mask.height() != depth.height() {
        return Err(GeoError::DimensionMismatch(format!(
            "mask {}x{} vs depth {}x{}",
            mask.width(),
            mask.height(),
            depth.width(),
            depth.height()
        )));
    }
    if mask.width() != k.width() || mask.height() != k.height() {
        return Err(GeoError::DimensionMismatch(format!(
            "mask {}x{} vs intrinsics {}x{}",
            mask.width(),
            mask.height(),
            k.width(),
            k.height()
        )));
    }
    let members = instance_pixels(mask, contour);
    let centroid = pixel_centroid(&members).ok_or(GeoError::EmptyInstance)?;

    let rounded = (centroid.0.round() as u32, centroid.1.round() as u32);
    let center = if members
        .binary_search_by_key(&(rounded.1, rounded.0), |&(x, y)| (y, x))
        .is_ok()
    {
        centroid
    } else {
        let m = nearest_member(&members, centroid);
        (m.0 as f64, m.1 as f64)
    };
    let r2 = radius * radius;
    let mut disc: Vec<(u32, u32)> = members
        .iter()
        .copied()
        .filter(|&(x, y)| {
            let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
            dx * dx + dy * dy <= r2
        })
        .collect();
    if disc.is_empty() {
        disc.push(nearest_member(&members, center));
    }
    let centroid_depth = average_depth(depth, &disc, center, f64::INFINITY)?;

    let (camera, world, delta, location) =
        chain(centroid.0, centroid.1, centroid_depth, k, pose, gps)?;
    Ok(Localization {
        centroid,
        pixel_count: members.len(),
        centroid_depth,
        camera,
        world,
        delta,
        location,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::FeatureClass;
    use crate::stabilize::extract_instances;
    use nalgebra::Vector3;

    fn k() -> Intrinsics {
        Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn block(x0: u32, y0: u32, x1: u32, y1: u32) -> SegMask {
        SegMask::from_fn(640, 480, |x, y| {
            if (x0..x1).contains(&x) && (y0..y1).contains(&y) {
                FeatureClass::Pole
            } else {
                FeatureClass::Background
            }
        })
        .unwrap()
    }

    #[test]
    fn centered_object_lands_due_north() {
        let mask = block(310, 230, 331, 251);
        let contour = &extract_instances(&mask, &[FeatureClass::Pole], 1)[0];
        let depth = DepthMap::filled(640, 480, 2.0).unwrap();
        let pose = Pose::from_heading_pitch_roll(0.0, 0.0, 0.0, Vector3::zeros());
        let gps = GpsFix::new(47.0, -122.0, 0.0).unwrap();
        let loc =
            localize_instance_detailed(&mask, contour, &depth, &k(), &pose, &gps, 5.0).unwrap();
        assert_eq!(loc.centroid, (320.0, 240.0));
        assert_eq!(loc.pixel_count, 21 * 21);
        // due north on a sphere: Δφ = d / R, λ unchanged
        let dlat = (2.0 / 6_371_000.0f64).to_degrees();
        assert!((loc.location.latitude() - (47.0 + dlat)).abs() < 1e-9);
        assert!((loc.location.longitude() + 122.0).abs() < 1e-9);
    }

    #[test]
    fn empty_instance_and_missing_depth() {
        let mask = block(100, 100, 110, 110);
        let contour = &extract_instances(&mask, &[FeatureClass::Pole], 1)[0];
        let gps = GpsFix::new(47.0, -122.0, 0.0).unwrap();
        let pose = Pose::identity();

        let blank = SegMask::background(640, 480).unwrap();
        let depth = DepthMap::filled(640, 480, 2.0).unwrap();
        assert_eq!(
            localize_instance(&blank, contour, &depth, &k(), &pose, &gps, 5.0),
            Err(GeoError::EmptyInstance)
        );
        let mut holes = DepthMap::filled(640, 480, 2.0).unwrap();
        for y in 100..110 {
            for x in 100..110 {
                holes.set(x, y, if (x + y) % 2 == 0 { 0.0 } else { f32::NAN });
            }
        }
        assert_eq!(
            localize_instance(&mask, contour, &holes, &k(), &pose, &gps, 5.0),
            Err(GeoError::NoValidDepth)
        );
    }

    #[test]
    fn invalid_depths_are_skipped_not_averaged() {
        let mask = block(300, 220, 341, 261);
        let contour = &extract_instances(&mask, &[FeatureClass::Pole], 1)[0];
        let mut depth = DepthMap::filled(640, 480, 3.0).unwrap();
        depth.set(320, 240, 0.0);
        depth.set(321, 240, f32::INFINITY);
        let loc = localize_instance_detailed(
            &mask,
            contour,
            &depth,
            &k(),
            &Pose::identity(),
            &GpsFix::new(0.0, 0.0, 0.0).unwrap(),
            5.0,
        )
        .unwrap();
        assert_eq!(loc.centroid_depth, 3.0);
    }

    #[test]
    fn hollow_instance_samples_depth_on_the_object() {
        // a square ring: centroid sits in the hole
        let mask = SegMask::from_fn(640, 480, |x, y| {
            let outer = (280..361).contains(&x) && (200..281).contains(&y);
            let inner = (290..351).contains(&x) && (210..271).contains(&y);
            if outer && !inner {
                FeatureClass::Pole
            } else {
                FeatureClass::Background
            }
        })
        .unwrap();
        let contour = &extract_instances(&mask, &[FeatureClass::Pole], 1)[0];
        let depth = DepthMap::new(
            640,
            480,
            (0..640 * 480)
                .map(|i| {
                    if mask.labels()[i] == FeatureClass::Pole.code() {
                        4.0
                    } else {
                        9.0
                    }
                })
                .collect(),
        )
        .unwrap();
        let loc = localize_instance_detailed(
            &mask,
            contour,
            &depth,
            &k(),
            &Pose::identity(),
            &GpsFix::new(0.0, 0.0, 0.0).unwrap(),
            5.0,
        )
        .unwrap();
        assert_eq!(loc.centroid, (320.0, 240.0));
        assert_eq!(loc.centroid_depth, 4.0);
    }

    #[test]
    fn rotating_device_and_scene_together_changes_nothing() {
        let mask = block(200, 150, 231, 191);
        let contour = &extract_instances(&mask, &[FeatureClass::Pole], 1)[0];
        let depth = DepthMap::filled(640, 480, 6.0).unwrap();
        let gps = GpsFix::new(47.6, -122.3, 0.0).unwrap();
        let base = Pose::from_heading_pitch_roll(0.0, -5.0, 0.0, Vector3::new(0.0, 0.0, 1.4));
        let a = localize_instance_detailed(&mask, contour, &depth, &k(), &base, &gps, 5.0).unwrap();
        for heading in [17.0f64, 95.0, -140.0] {
            // about +z (up) a positive angle is counter-clockwise seen from above
            let turned = base.yawed_about(Vector3::zeros(), -heading.to_radians());
            let b = localize_instance_detailed(&mask, contour, &depth, &k(), &turned, &gps, 5.0)
                .unwrap();
            assert!((a.delta.distance() - b.delta.distance()).abs() < 1e-9);
            let turn = b.delta.bearing() - a.delta.bearing();
            let wrapped = (turn - heading.to_radians() + std::f64::consts::PI)
                .rem_euclid(std::f64::consts::TAU)
                - std::f64::consts::PI;
            assert!(
                wrapped.abs() < 1e-9,
                "heading {heading}: bearing moved {turn}"
            );
        }
    }
}
