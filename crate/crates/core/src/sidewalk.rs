//! Sidewalk region-of-interest filtering, trapezoid extraction and width
//! measurement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{
    average_depth, haversine_distance, localize_pixel, DepthMap, GeoError, GeoPoint, GpsFix,
    Intrinsics, Pose,
};
use crate::mask::{FeatureClass, SegMask};

/// Default minimum sidewalk run, as a fraction of the ROI width, for a row to count.
pub const DEFAULT_MIN_RUN_FRACTION: f64 = 0.15;

/// Default ROI top edge as a fraction of image height.
pub const DEFAULT_ROI_TOP_FRACTION: f64 = 0.45;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SidewalkError {
    #[error("region of interest {0:?} does not fit a {1}x{2} mask")]
    RoiOutOfBounds(RegionOfInterest, u32, u32),
    #[error("no row meets the sidewalk run threshold")]
    NoSidewalk,
    #[error("corner ({0}, {1}) has no valid depth nearby")]
    NoValidDepth(u32, u32),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Half-open pixel rectangle `[row_min, row_max) × [col_min, col_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionOfInterest {
    pub row_min: u32,
    pub row_max: u32,
    pub col_min: u32,
    pub col_max: u32,
}

impl RegionOfInterest {
    pub fn full(width: u32, height: u32) -> Self {
        Self {
            row_min: 0,
            row_max: height,
            col_min: 0,
            col_max: width,
        }
    }

    /// Full width, rows from `top_fraction · height` to the bottom.
    pub fn lower_band(width: u32, height: u32, top_fraction: f64) -> Self {
        let top = ((top_fraction.clamp(0.0, 1.0) * height as f64).floor() as u32).min(height - 1);
        Self {
            row_min: top,
            row_max: height,
            col_min: 0,
            col_max: width,
        }
    }

    pub fn default_for(width: u32, height: u32) -> Self {
        Self::lower_band(width, height, DEFAULT_ROI_TOP_FRACTION)
    }

    pub fn validate(&self, width: u32, height: u32) -> Result<(), SidewalkError> {
        let ok = self.row_min < self.row_max
            && self.row_max <= height
            && self.col_min < self.col_max
            && self.col_max <= width;
        if ok {
            Ok(())
        } else {
            Err(SidewalkError::RoiOutOfBounds(*self, width, height))
        }
    }

    pub fn width(&self) -> u32 {
        self.col_max - self.col_min
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        (self.row_min..self.row_max).contains(&y) && (self.col_min..self.col_max).contains(&x)
    }
}

/// Sidewalk pixels outside `roi` become background; other classes are untouched.
pub fn apply_roi(mask: &SegMask, roi: &RegionOfInterest) -> Result<SegMask, SidewalkError> {
    roi.validate(mask.width(), mask.height())?;
    let mut out = mask.clone();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if !roi.contains(x, y) && mask.class_at(x, y) == FeatureClass::Sidewalk {
                out.set(x, y, FeatureClass::Background);
            }
        }
    }
    Ok(out)
}

/// Band of sidewalk rows; spans are half-open column runs.
///
/// `top_row == bottom_row` is a single-row band, whose top and bottom edges coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trapezoid {
    pub top_row: u32,
    pub bottom_row: u32,
    pub top_span: (u32, u32),
    pub bottom_span: (u32, u32),
}

impl Trapezoid {
    /// Pixel-center corners: top-left, top-right, bottom-right, bottom-left.
    pub fn corners(&self) -> [(u32, u32); 4] {
        [
            (self.top_span.0, self.top_row),
            (self.top_span.1 - 1, self.top_row),
            (self.bottom_span.1 - 1, self.bottom_row),
            (self.bottom_span.0, self.bottom_row),
        ]
    }

    /// Area centroid of the corner quadrilateral (vertex mean when it is degenerate).
    pub fn centroid(&self) -> (f64, f64) {
        let c = self.corners().map(|(x, y)| (x as f64, y as f64));
        let mut a2 = 0.0;
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..4 {
            let (x0, y0) = c[i];
            let (x1, y1) = c[(i + 1) % 4];
            let cross = x0 * y1 - x1 * y0;
            a2 += cross;
            cx += (x0 + x1) * cross;
            cy += (y0 + y1) * cross;
        }
        if a2.abs() < 1e-9 {
            let n = 4.0;
            return (
                c.iter().map(|p| p.0).sum::<f64>() / n,
                c.iter().map(|p| p.1).sum::<f64>() / n,
            );
        }
        (cx / (3.0 * a2), cy / (3.0 * a2))
    }
}

/// Longest run of sidewalk in row `y` within the ROI columns; ties keep the leftmost.
pub fn longest_run(mask: &SegMask, roi: &RegionOfInterest, y: u32) -> Option<(u32, u32)> {
    let mut best: Option<(u32, u32)> = None;
    let mut start: Option<u32> = None;
    for x in roi.col_min..=roi.col_max {
        let on = x < roi.col_max && mask.class_at(x, y) == FeatureClass::Sidewalk;
        match (on, start) {
            (true, None) => start = Some(x),
            (false, Some(s)) => {
                if best.map_or(true, |b| x - s > b.1 - b.0) {
                    best = Some((s, x));
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

/// Top-down scan for the maximal-area contiguous band of valid rows.
///
/// A row is valid when its longest sidewalk run is at least
/// `min_run_fraction × roi.width()`; the band area is the summed run lengths.
/// Equal areas resolve to the lower band.
pub fn extract_trapezoid(
    mask: &SegMask,
    roi: &RegionOfInterest,
    min_run_fraction: f64,
) -> Result<Trapezoid, SidewalkError> {
    roi.validate(mask.width(), mask.height())?;
    let min_len = (min_run_fraction * roi.width() as f64).max(1.0);
    let mut best: Option<(u64, u32, u32)> = None;
    let mut band: Option<(u64, u32)> = None;
    for y in roi.row_min..=roi.row_max {
        let run = if y < roi.row_max {
            longest_run(mask, roi, y).filter(|r| (r.1 - r.0) as f64 >= min_len)
        } else {
            None
        };
        match (run, band) {
            (Some(r), Some((area, top))) => band = Some((area + (r.1 - r.0) as u64, top)),
            (Some(r), None) => band = Some(((r.1 - r.0) as u64, y)),
            (None, Some((area, top))) => {
                // `>=` while scanning downward keeps the lower band on ties
                if best.map_or(true, |b| area >= b.0) {
                    best = Some((area, top, y - 1));
                }
                band = None;
            }
            (None, None) => {}
        }
    }
    let (_, top, bottom) = best.ok_or(SidewalkError::NoSidewalk)?;
    let span = |y| longest_run(mask, roi, y).expect("valid rows have a run");
    Ok(Trapezoid {
        top_row: top,
        bottom_row: bottom,
        top_span: span(top),
        bottom_span: span(bottom),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidewalkMeasurement {
    pub location: GeoPoint,
    pub width_m: f64,
    pub top_width_m: f64,
    pub bottom_width_m: f64,
}

/// Depth at `(x, y)`, or the mean of valid depths within `radius` px when the
/// pixel itself is invalid.
pub fn depth_with_fallback(depth: &DepthMap, x: u32, y: u32, radius: f64) -> Option<f64> {
    if let Some(d) = depth.valid_at(x, y) {
        return Some(d);
    }
    let r = radius.max(0.0).floor() as i64;
    let mut disc = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx >= 0 && ny >= 0 && nx < depth.width() as i64 && ny < depth.height() as i64 {
                disc.push((nx as u32, ny as u32));
            }
        }
    }
    average_depth(depth, &disc, (x as f64, y as f64), radius).ok()
}

/// Localizes the trapezoid's four corners and centroid. The width is the mean
/// of the geodesic lengths of the top and bottom edges.
pub fn measure_sidewalk(
    trap: &Trapezoid,
    depth: &DepthMap,
    k: &Intrinsics,
    pose: &Pose,
    gps: &GpsFix,
    radius: f64,
) -> Result<SidewalkMeasurement, SidewalkError> {
    let locate = |(x, y): (u32, u32)| -> Result<GeoPoint, SidewalkError> {
        let d =
            depth_with_fallback(depth, x, y, radius).ok_or(SidewalkError::NoValidDepth(x, y))?;
        Ok(localize_pixel(x as f64, y as f64, d, k, pose, gps)?)
    };
    let [tl, tr, br, bl] = trap.corners().map(locate);
    let (tl, tr, br, bl) = (tl?, tr?, br?, bl?);
    let top_width_m = haversine_distance(&tl, &tr);
    let bottom_width_m = haversine_distance(&bl, &br);

    let (cu, cv) = trap.centroid();
    let (px, py) = (cu.round() as u32, cv.round() as u32);
    let cd =
        depth_with_fallback(depth, px, py, radius).ok_or(SidewalkError::NoValidDepth(px, py))?;
    let location = localize_pixel(cu, cv, cd, k, pose, gps)?;
    Ok(SidewalkMeasurement {
        location,
        width_m: (top_width_m + bottom_width_m) / 2.0,
        top_width_m,
        bottom_width_m,
    })
}
