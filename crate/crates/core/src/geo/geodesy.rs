use super::{GeoPoint, GpsFix, PlanarDelta};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Maps any finite longitude into (−180, 180].
pub fn normalize_longitude(lon: f64) -> f64 {
    let wrapped = lon - 360.0 * ((lon - 180.0) / 360.0).ceil();
    // ceil can land exactly on -180 through rounding
    if wrapped <= -180.0 {
        wrapped + 360.0
    } else {
        wrapped
    }
}

fn clamped_asin(x: f64) -> f64 {
    assert!(
        x.abs() <= 1.0 + 1e-12,
        "asin argument {x} is outside [-1, 1] beyond rounding"
    );
    x.clamp(-1.0, 1.0).asin()
}

/// Destination reached from `origin` after travelling `distance_m` along the
/// great circle with initial bearing `bearing_rad` (clockwise from north).
pub fn destination_by_bearing(origin: &GeoPoint, bearing_rad: f64, distance_m: f64) -> GeoPoint {
    let phi0 = origin.latitude().to_radians();
    let lambda0 = origin.longitude().to_radians();
    let delta = distance_m / EARTH_RADIUS_M;
    let (sin_phi0, cos_phi0) = phi0.sin_cos();
    let (sin_delta, cos_delta) = delta.sin_cos();

    let phi = clamped_asin(sin_phi0 * cos_delta + cos_phi0 * sin_delta * bearing_rad.cos());
    let lambda = lambda0
        + (bearing_rad.sin() * sin_delta * cos_phi0).atan2(cos_delta - sin_phi0 * phi.sin());

    GeoPoint::new(phi.to_degrees(), lambda.to_degrees())
        .expect("destination latitude is bounded by asin")
}

/// Spherical projection of a north/east offset from the device fix.
pub fn spherical_destination(origin: &GpsFix, delta: &PlanarDelta) -> GeoPoint {
    let distance = delta.distance();
    if distance == 0.0 {
        return origin.point();
    }
    destination_by_bearing(&origin.point(), delta.bearing(), distance)
}

/// Great-circle distance in meters (haversine formula).
pub fn haversine_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let phi1 = a.latitude().to_radians();
    let phi2 = b.latitude().to_radians();
    let dphi = phi2 - phi1;
    let dlambda = (b.longitude() - a.longitude()).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing from `a` to `b` in radians, clockwise from
/// north, in (−π, π].
pub fn initial_bearing(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let phi1 = a.latitude().to_radians();
    let phi2 = b.latitude().to_radians();
    let dlambda = (b.longitude() - a.longitude()).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    y.atan2(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // one degree of arc on the mean sphere is 111,194.926... m
    const ONE_DEGREE_M: f64 = 111_194.93;

    fn fix(lat: f64, lon: f64) -> GpsFix {
        GpsFix::new(lat, lon, 0.0).unwrap()
    }

    #[test]
    fn zero_delta_is_identity() {
        let o = fix(47.6, -122.3);
        assert_eq!(
            spherical_destination(&o, &PlanarDelta::new(0.0, 0.0)),
            o.point()
        );
    }

    #[test]
    fn one_degree_north_on_equator() {
        let p = spherical_destination(&fix(0.0, 0.0), &PlanarDelta::new(ONE_DEGREE_M, 0.0));
        assert!((p.latitude() - 1.0).abs() < 1e-6, "{p:?}");
        assert!(p.longitude().abs() < 1e-12);
    }

    #[test]
    fn one_degree_east_on_equator() {
        let p = spherical_destination(&fix(0.0, 0.0), &PlanarDelta::new(0.0, ONE_DEGREE_M));
        assert!(p.latitude().abs() < 1e-12);
        assert!((p.longitude() - 1.0).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn crosses_the_antimeridian() {
        let p = spherical_destination(&fix(0.0, 179.9999), &PlanarDelta::new(0.0, 100.0));
        assert!(p.longitude() < -179.0 && p.longitude() > -180.0, "{p:?}");
    }

    #[test]
    fn longitude_normalization() {
        assert_eq!(normalize_longitude(180.0), 180.0);
        assert_eq!(normalize_longitude(-180.0), 180.0);
        assert_eq!(normalize_longitude(190.0), -170.0);
        assert_eq!(normalize_longitude(-190.0), 170.0);
        assert_eq!(normalize_longitude(720.5), 0.5);
        assert_eq!(normalize_longitude(0.0), 0.0);
    }

    #[test]
    fn haversine_and_bearing_known_values() {
        let a = GeoPoint::new(0.0, 0.0).unwrap();
        let b = GeoPoint::new(0.0, 1.0).unwrap();
        assert!((haversine_distance(&a, &b) - 111_194.926_644_558_7).abs() < 1e-6);
        assert!((initial_bearing(&a, &b) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn zero_delta_identity_everywhere(lat in -90.0f64..=90.0, lon in -179.999f64..=180.0) {
            let o = fix(lat, lon);
            prop_assert_eq!(spherical_destination(&o, &PlanarDelta::default()), o.point());
        }
    }
}
