//! Bundle directory reader and writer.
//!
//! Layout: `manifest.json`, `telemetry.jsonl`, `waypoints.jsonl`,
//! `detections.jsonl`, `headpose.jsonl` (optional), `roi.bin`, `flow.bin`
//! and optionally `groundtruth.json`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::model::*;
use super::BundleError;
use crate::types::GroundTruth;

pub const MANIFEST: &str = "manifest.json";
pub const TELEMETRY: &str = "telemetry.jsonl";
pub const WAYPOINTS: &str = "waypoints.jsonl";
pub const DETECTIONS: &str = "detections.jsonl";
pub const HEADPOSE: &str = "headpose.jsonl";
pub const ROI: &str = "roi.bin";
pub const FLOW: &str = "flow.bin";
pub const GROUNDTRUTH: &str = "groundtruth.json";

pub const ROI_MAGIC: &[u8; 4] = b"ROI1";
pub const FLOW_MAGIC: &[u8; 4] = b"FLW1";
pub const FLOW_COLS: usize = 12;
pub const FLOW_ROWS: usize = 4;

fn io_err(file: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io { file: file.to_path_buf(), source }
}

fn schema(file: &Path, index: Option<usize>, message: impl Into<String>) -> BundleError {
    BundleError::SchemaViolation { file: file.to_path_buf(), index, message: message.into() }
}

fn require(dir: &Path, name: &str) -> Result<PathBuf, BundleError> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(BundleError::MissingStream { file: path })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, BundleError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| schema(path, None, e.to_string()))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, BundleError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| schema(path, Some(index), e.to_string()))?);
    }
    Ok(out)
}

fn header_u32(bytes: &[u8], at: usize) -> usize {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]) as usize
}

fn read_roi(path: &Path, manifest: &Manifest) -> Result<RoiStack, BundleError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < 16 || &bytes[..4] != ROI_MAGIC {
        return Err(schema(path, None, "bad ROI header"));
    }
    let (frames, height, width) = (header_u32(&bytes, 4), header_u32(&bytes, 8), header_u32(&bytes, 12));
    if frames != manifest.frame_count {
        return Err(BundleError::FrameCountMismatch {
            file: path.to_path_buf(),
            expected: manifest.frame_count,
            found: frames,
        });
    }
    if height != manifest.roi_rect.height as usize || width != manifest.roi_rect.width as usize {
        return Err(schema(
            path,
            None,
            format!("ROI is {width}x{height}, manifest roi_rect is {}x{}", manifest.roi_rect.width, manifest.roi_rect.height),
        ));
    }
    let expected = frames * height * width;
    if bytes.len() - 16 != expected {
        return Err(schema(path, None, format!("expected {expected} pixel bytes, found {}", bytes.len() - 16)));
    }
    Ok(RoiStack { height, width, data: bytes[16..].to_vec() })
}

fn read_flow(path: &Path, manifest: &Manifest) -> Result<FlowStack, BundleError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < 16 || &bytes[..4] != FLOW_MAGIC {
        return Err(schema(path, None, "bad flow header"));
    }
    let (frames, cols, rows) = (header_u32(&bytes, 4), header_u32(&bytes, 8), header_u32(&bytes, 12));
    if frames != manifest.frame_count {
        return Err(BundleError::FrameCountMismatch {
            file: path.to_path_buf(),
            expected: manifest.frame_count,
            found: frames,
        });
    }
    if cols != FLOW_COLS || rows != FLOW_ROWS {
        return Err(schema(path, None, format!("flow grid is {cols}x{rows}, expected {FLOW_COLS}x{FLOW_ROWS}")));
    }
    let expected = frames * cols * rows * 4;
    if bytes.len() - 16 != expected {
        return Err(schema(path, None, format!("expected {expected} flow bytes, found {}", bytes.len() - 16)));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(FlowStack { cols, rows, data })
}

fn validate_telemetry(path: &Path, manifest: &Manifest, telemetry: &mut [TelemetryRecord]) -> Result<(), BundleError> {
    if telemetry.len() != manifest.frame_count {
        return Err(BundleError::FrameCountMismatch {
            file: path.to_path_buf(),
            expected: manifest.frame_count,
            found: telemetry.len(),
        });
    }
    for (i, rec) in telemetry.iter_mut().enumerate() {
        if rec.frame_idx != i {
            return Err(schema(path, Some(i), format!("frame_idx {} out of sequence", rec.frame_idx)));
        }
        if !(rec.speed >= 0.0) || !rec.speed.is_finite() {
            return Err(schema(path, Some(i), "speed must be finite and >= 0"));
        }
        if manifest.speed_unit == SpeedUnit::Mph {
            rec.speed *= MPH_TO_MPS;
        }
    }
    for i in 1..telemetry.len() {
        if !(telemetry[i].timestamp_ms > telemetry[i - 1].timestamp_ms) {
            return Err(BundleError::NonMonotonicTimestamps { file: path.to_path_buf(), index: i });
        }
    }
    Ok(())
}

fn validate_waypoints(path: &Path, waypoints: &[Waypoint]) -> Result<(), BundleError> {
    for (i, w) in waypoints.iter().enumerate() {
        if !(-90.0..=90.0).contains(&w.latitude) || !(-180.0..=180.0).contains(&w.longitude) {
            return Err(schema(path, Some(i), "latitude/longitude out of range"));
        }
        if i > 0 && !(w.timestamp_ms > waypoints[i - 1].timestamp_ms) {
            return Err(BundleError::NonMonotonicTimestamps { file: path.to_path_buf(), index: i });
        }
    }
    for pair in waypoints.windows(2) {
        let gap = pair[1].timestamp_ms - pair[0].timestamp_ms;
        if !(500.0..=8000.0).contains(&gap) {
            log::warn!("{}: waypoint gap of {gap} ms is far from the nominal ~2 s cadence", path.display());
            break;
        }
    }
    Ok(())
}

fn validate_detections(path: &Path, manifest: &Manifest, dets: &[DetectionBox]) -> Result<(), BundleError> {
    let (w, h) = (manifest.scene_width as f64, manifest.scene_height as f64);
    for (i, d) in dets.iter().enumerate() {
        if d.frame_idx >= manifest.frame_count {
            return Err(schema(path, Some(i), format!("frame_idx {} beyond frame_count", d.frame_idx)));
        }
        if !(0.0..=1.0).contains(&d.conf) {
            return Err(schema(path, Some(i), "confidence outside [0, 1]"));
        }
        if !(d.x >= 0.0 && d.y >= 0.0 && d.w >= 0.0 && d.h >= 0.0 && d.x + d.w <= w && d.y + d.h <= h) {
            return Err(schema(path, Some(i), "bounding box outside the frame"));
        }
    }
    Ok(())
}

fn validate_headpose(path: &Path, manifest: &Manifest, pose: &[HeadPoseRecord]) -> Result<(), BundleError> {
    for (i, p) in pose.iter().enumerate() {
        if p.frame_idx >= manifest.frame_count {
            return Err(schema(path, Some(i), format!("frame_idx {} beyond frame_count", p.frame_idx)));
        }
        if i > 0 && p.frame_idx <= pose[i - 1].frame_idx {
            return Err(schema(path, Some(i), "frame_idx not strictly increasing"));
        }
        let ok = |a: f64| (-180.0..=180.0).contains(&a);
        if !(ok(p.yaw) && ok(p.pitch) && ok(p.roll)) {
            return Err(schema(path, Some(i), "angle outside [-180, 180]"));
        }
    }
    Ok(())
}

/// Load and validate a bundle directory. Speeds given in mph are converted to
/// m/s and the in-memory manifest switches to `mps`.
pub fn load_bundle(dir: &Path) -> Result<SegmentBundle, BundleError> {
    let manifest_path = require(dir, MANIFEST)?;
    let mut manifest: Manifest = read_json(&manifest_path)?;
    manifest.validate().map_err(|m| schema(&manifest_path, None, m))?;

    let telemetry_path = require(dir, TELEMETRY)?;
    let mut telemetry: Vec<TelemetryRecord> = read_jsonl(&telemetry_path)?;
    validate_telemetry(&telemetry_path, &manifest, &mut telemetry)?;
    manifest.speed_unit = SpeedUnit::Mps;

    let waypoints_path = require(dir, WAYPOINTS)?;
    let waypoints: Vec<Waypoint> = read_jsonl(&waypoints_path)?;
    validate_waypoints(&waypoints_path, &waypoints)?;

    let detections_path = require(dir, DETECTIONS)?;
    let detections: Vec<DetectionBox> = read_jsonl(&detections_path)?;
    validate_detections(&detections_path, &manifest, &detections)?;

    let headpose_path = dir.join(HEADPOSE);
    let headpose = if headpose_path.is_file() {
        let pose: Vec<HeadPoseRecord> = read_jsonl(&headpose_path)?;
        validate_headpose(&headpose_path, &manifest, &pose)?;
        Some(pose)
    } else {
        None
    };

    let roi = read_roi(&require(dir, ROI)?, &manifest)?;
    let flow = read_flow(&require(dir, FLOW)?, &manifest)?;

    let gt_path = dir.join(GROUNDTRUTH);
    let groundtruth = if gt_path.is_file() {
        let gt: GroundTruth = read_json(&gt_path)?;
        gt.validate().map_err(|m| schema(&gt_path, None, m))?;
        Some(gt)
    } else {
        None
    };

    Ok(SegmentBundle { manifest, telemetry, waypoints, detections, headpose, roi, flow, groundtruth })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BundleError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| schema(path, None, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), BundleError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(|e| schema(path, None, e.to_string()))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_binary(path: &Path, magic: &[u8; 4], dims: [usize; 3], payload: impl FnOnce(&mut Vec<u8>)) -> Result<(), BundleError> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(magic);
    for d in dims {
        bytes.extend_from_slice(&(d as u32).to_le_bytes());
    }
    payload(&mut bytes);
    fs::write(path, bytes).map_err(io_err(path))
}

/// Write a bundle directory. Speeds are always written in m/s.
pub fn write_bundle(bundle: &SegmentBundle, dir: &Path) -> Result<(), BundleError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = bundle.manifest.clone();
    manifest.speed_unit = SpeedUnit::Mps;
    write_json(&dir.join(MANIFEST), &manifest)?;
    write_jsonl(&dir.join(TELEMETRY), &bundle.telemetry)?;
    write_jsonl(&dir.join(WAYPOINTS), &bundle.waypoints)?;
    write_jsonl(&dir.join(DETECTIONS), &bundle.detections)?;
    if let Some(pose) = &bundle.headpose {
        write_jsonl(&dir.join(HEADPOSE), pose)?;
    }
    let roi = &bundle.roi;
    write_binary(&dir.join(ROI), ROI_MAGIC, [roi.frame_count(), roi.height, roi.width], |b| {
        b.extend_from_slice(&roi.data)
    })?;
    let flow = &bundle.flow;
    write_binary(&dir.join(FLOW), FLOW_MAGIC, [flow.frame_count(), flow.cols, flow.rows], |b| {
        b.reserve(flow.data.len() * 4);
        for v in &flow.data {
            b.extend_from_slice(&v.to_le_bytes());
        }
    })?;
    if let Some(gt) = &bundle.groundtruth {
        write_json(&dir.join(GROUNDTRUTH), gt)?;
    }
    Ok(())
}
