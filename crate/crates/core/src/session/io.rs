//! Session directory format:
//!
//! ```text
//! <session>/manifest.json     session metadata, class table, frame index
//! <session>/NNNN.meta.json    timestamp, intrinsics (9, row-major),
//!                             pose (16, row-major, camera-to-world), gps
//! <session>/NNNN.depth.f32    little-endian f32 depths, row-major
//! <session>/NNNN.mask.png     8-bit grayscale, value = class code
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use super::{FrameBundle, FrameId, GroundTruth, Session, SessionError};
use crate::geo::{DepthMap, GpsFix, Intrinsics, Pose};
use crate::mask::{FeatureClass, SegMask};
use crate::stabilize::Homography;

pub const FORMAT_NAME: &str = "gm-session";
pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    session_id: String,
    class_codes: BTreeMap<u8, String>,
    class_selection: Vec<FeatureClass>,
    capture_indices: Vec<FrameId>,
    frames: Vec<FrameEntry>,
    ground_truth: Option<GroundTruth>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameEntry {
    frame_id: FrameId,
    stem: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameMeta {
    frame_id: FrameId,
    timestamp: f64,
    width: u32,
    height: u32,
    intrinsics: [f64; 9],
    pose: [f64; 16],
    gps: GpsFix,
    homography_to_next: Option<[f64; 9]>,
}

fn class_table() -> BTreeMap<u8, String> {
    FeatureClass::ALL
        .iter()
        .map(|c| (c.code(), c.name().to_string()))
        .collect()
}

fn stem(id: FrameId) -> String {
    format!("{id:04}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SessionError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| SessionError::format(path.display().to_string(), "*", e))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(io_err(path))
}

fn write_frame(dir: &Path, f: &FrameBundle) -> Result<(), SessionError> {
    let s = stem(f.frame_id);
    let meta = FrameMeta {
        frame_id: f.frame_id,
        timestamp: f.timestamp,
        width: f.mask.width(),
        height: f.mask.height(),
        intrinsics: f.intrinsics.to_row_major(),
        pose: f.pose.to_row_major(),
        gps: f.gps,
        homography_to_next: f.homography_to_next.map(|h| h.to_row_major()),
    };
    write_json(&dir.join(format!("{s}.meta.json")), &meta)?;

    let depth_path = dir.join(format!("{s}.depth.f32"));
    let bytes: Vec<u8> = f
        .depth
        .values()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    fs::write(&depth_path, bytes).map_err(io_err(&depth_path))?;

    let mask_path = dir.join(format!("{s}.mask.png"));
    let file = fs::File::create(&mask_path).map_err(io_err(&mask_path))?;
    image::codecs::png::PngEncoder::new(std::io::BufWriter::new(file))
        .write_image(
            f.mask.labels(),
            f.mask.width(),
            f.mask.height(),
            ExtendedColorType::L8,
        )
        .map_err(|e| SessionError::format(mask_path.display().to_string(), "png", e))
}

/// Writes `session` to `path`, replacing any existing session there atomically.
pub fn write_session(session: &Session, path: &Path) -> Result<(), SessionError> {
    if session.frames.is_empty() {
        return Err(SessionError::format(
            MANIFEST,
            "frames",
            "at least one frame is required",
        ));
    }
    session.validate()?;
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(io_err(&parent))?;
    let staging = tempfile::Builder::new()
        .prefix(".gm-session-")
        .tempdir_in(&parent)
        .map_err(io_err(&parent))?;

    for f in &session.frames {
        write_frame(staging.path(), f)?;
    }
    let manifest = Manifest {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        session_id: session.session_id.clone(),
        class_codes: class_table(),
        class_selection: session.class_selection.iter().copied().collect(),
        capture_indices: session.capture_indices.clone(),
        frames: session
            .frames
            .iter()
            .map(|f| FrameEntry {
                frame_id: f.frame_id,
                stem: stem(f.frame_id),
            })
            .collect(),
        ground_truth: session.ground_truth.clone(),
    };
    write_json(&staging.path().join(MANIFEST), &manifest)?;

    let staged = staging.keep();
    if path.exists() {
        let old = tempfile::Builder::new()
            .prefix(".gm-session-old-")
            .tempdir_in(&parent)
            .map_err(io_err(&parent))?
            .keep();
        // rename onto an existing empty directory is allowed on unix
        fs::rename(path, &old).map_err(io_err(path))?;
        fs::rename(&staged, path).map_err(io_err(path))?;
        fs::remove_dir_all(&old).map_err(io_err(&old))?;
    } else {
        fs::rename(&staged, path).map_err(io_err(path))?;
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SessionError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| {
        let field = e.to_string();
        SessionError::format(path.display().to_string(), field_hint(&field), e)
    })
}

/// Pulls the backticked field name out of a serde error message, if any.
fn field_hint(msg: &str) -> String {
    msg.split('`').nth(1).unwrap_or("*").to_string()
}

fn read_frame(dir: &Path, entry: &FrameEntry) -> Result<FrameBundle, SessionError> {
    let meta_path = dir.join(format!("{}.meta.json", entry.stem));
    let meta: FrameMeta = read_json(&meta_path)?;
    let file = meta_path.display().to_string();
    if meta.frame_id != entry.frame_id {
        return Err(SessionError::format(
            &file,
            "frame_id",
            "disagrees with manifest",
        ));
    }
    let intrinsics = Intrinsics::from_row_major(&meta.intrinsics, meta.width, meta.height)
        .map_err(|e| SessionError::format(&file, "intrinsics", e))?;
    let pose =
        Pose::from_row_major(&meta.pose).map_err(|e| SessionError::format(&file, "pose", e))?;
    let homography_to_next = meta
        .homography_to_next
        .map(|h| Homography::from_row_major(&h))
        .transpose()
        .map_err(|e| SessionError::format(&file, "homography_to_next", e))?;

    let depth_path = dir.join(format!("{}.depth.f32", entry.stem));
    let bytes = fs::read(&depth_path).map_err(io_err(&depth_path))?;
    let depth_file = depth_path.display().to_string();
    if bytes.len() % 4 != 0 {
        return Err(SessionError::format(
            &depth_file,
            "values",
            "length is not a multiple of 4",
        ));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let expected = meta.width as usize * meta.height as usize;
    if values.len() != expected {
        return Err(SessionError::InvariantViolation(format!(
            "{depth_file}: {} depth values, expected {expected} for {}x{}",
            values.len(),
            meta.width,
            meta.height
        )));
    }
    let depth = DepthMap::new(meta.width, meta.height, values)
        .map_err(|e| SessionError::format(&depth_file, "values", e))?;

    let mask_path = dir.join(format!("{}.mask.png", entry.stem));
    let mask_file = mask_path.display().to_string();
    let img = image::open(&mask_path).map_err(|e| SessionError::format(&mask_file, "png", e))?;
    let image::DynamicImage::ImageLuma8(gray) = img else {
        return Err(SessionError::format(
            &mask_file,
            "png",
            "expected 8-bit single-channel image",
        ));
    };
    let (w, h) = gray.dimensions();
    if (w, h) != (meta.width, meta.height) {
        return Err(SessionError::InvariantViolation(format!(
            "{mask_file}: mask {w}x{h} vs depth {}x{}",
            meta.width, meta.height
        )));
    }
    let mask = SegMask::new(w, h, gray.into_raw())
        .map_err(|e| SessionError::format(&mask_file, "labels", e))?;

    Ok(FrameBundle {
        frame_id: meta.frame_id,
        timestamp: meta.timestamp,
        mask: Arc::new(mask),
        depth: Arc::new(depth),
        intrinsics,
        pose,
        gps: meta.gps,
        homography_to_next,
    })
}

/// Loads and fully validates a session directory.
pub fn read_session(path: &Path) -> Result<Session, SessionError> {
    let manifest_path = path.join(MANIFEST);
    let m: Manifest = read_json(&manifest_path)?;
    let file = manifest_path.display().to_string();
    if m.format != FORMAT_NAME {
        return Err(SessionError::format(
            &file,
            "format",
            format!("expected `{FORMAT_NAME}`"),
        ));
    }
    if m.version != FORMAT_VERSION {
        return Err(SessionError::format(
            &file,
            "version",
            format!("unsupported version {}", m.version),
        ));
    }
    if m.class_codes != class_table() {
        return Err(SessionError::format(
            &file,
            "class_codes",
            "class table differs from the fixed code table",
        ));
    }
    if m.frames.is_empty() {
        return Err(SessionError::format(
            &file,
            "frames",
            "at least one frame is required",
        ));
    }
    let frames = m
        .frames
        .iter()
        .map(|e| {
            if e.stem.contains(['/', '\\']) || e.stem.starts_with('.') {
                return Err(SessionError::format(
                    &file,
                    "frames.stem",
                    "must be a plain file stem",
                ));
            }
            read_frame(path, e)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let session = Session {
        session_id: m.session_id,
        frames,
        capture_indices: m.capture_indices,
        class_selection: m.class_selection.into_iter().collect(),
        ground_truth: m.ground_truth,
    };
    session.validate()?;
    Ok(session)
}
