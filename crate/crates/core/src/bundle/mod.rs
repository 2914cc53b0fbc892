//! Segment-bundle data model, directory I/O, stream alignment, distance
//! integration and ±radius clip extraction around a marked intersection.

mod align;
mod distance;
pub mod geo;
pub mod io;
mod model;

use std::path::PathBuf;

use thiserror::Error;

pub use align::{align_streams, DEFAULT_MAX_SKEW_MS};
pub use distance::{integrate_distance, DistanceProfile};
pub use io::{load_bundle, write_bundle};
pub use model::*;

/// Closest approach farther than this from the mark is rejected.
pub const MAX_MARK_DISTANCE_M: f64 = 200.0;
pub const DEFAULT_CLIP_RADIUS_M: f64 = 100.0;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("missing stream {}", file.display())]
    MissingStream { file: PathBuf },
    #[error("{}: expected {expected} frames, found {found}", file.display())]
    FrameCountMismatch { file: PathBuf, expected: usize, found: usize },
    #[error("{}: timestamps not strictly increasing at record {index}", file.display())]
    NonMonotonicTimestamps { file: PathBuf, index: usize },
    #[error("{}{}: {message}", file.display(), index.map(|i| format!(" record {i}")).unwrap_or_default())]
    SchemaViolation { file: PathBuf, index: Option<usize>, message: String },
    #[error("{}: {source}", file.display())]
    Io {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("telemetry stream is empty")]
    EmptyTelemetry,
    #[error("mark is {distance_m:.0} m from the nearest waypoint")]
    MarkOutsideTrip { distance_m: f64 },
}

/// Cut the frames within `radius_m` of travel distance on either side of the
/// closest approach to (`latitude`, `longitude`). All streams are re-based so
/// the clip starts at frame 0, time 0.
pub fn clip_segment(
    trip: &SegmentBundle,
    latitude: f64,
    longitude: f64,
    radius_m: f64,
) -> Result<SegmentBundle, BundleError> {
    let (nearest, gap) = trip
        .waypoints
        .iter()
        .map(|w| (w, geo::haversine_m(latitude, longitude, w.latitude, w.longitude)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(BundleError::MarkOutsideTrip { distance_m: f64::INFINITY })?;
    if gap > MAX_MARK_DISTANCE_M {
        return Err(BundleError::MarkOutsideTrip { distance_m: gap });
    }

    let timestamps = trip.timestamps_ms();
    let closest = nearest_index(&timestamps, nearest.timestamp_ms).ok_or(BundleError::EmptyTelemetry)?;
    let distance = integrate_distance(&trip.telemetry)?;
    let d = distance.as_slice();
    let center = d[closest];
    let lo = center - radius_m;
    let hi = center + radius_m;
    let start = d.partition_point(|&x| x < lo);
    let end = d.partition_point(|&x| x <= hi).saturating_sub(1).max(start);
    let truncated_start = d[0] > lo;
    let truncated_end = d[d.len() - 1] < hi;

    let t0 = timestamps[start];
    let t1 = timestamps[end];
    let frames = start..=end;
    let frame_count = end - start + 1;

    let telemetry = trip.telemetry[frames.clone()]
        .iter()
        .map(|r| TelemetryRecord {
            frame_idx: r.frame_idx - start,
            timestamp_ms: r.timestamp_ms - t0,
            speed: r.speed,
        })
        .collect();
    let waypoints = trip
        .waypoints
        .iter()
        .filter(|w| w.timestamp_ms >= t0 && w.timestamp_ms <= t1)
        .map(|w| Waypoint { timestamp_ms: w.timestamp_ms - t0, ..*w })
        .collect();
    let detections = trip
        .detections
        .iter()
        .filter(|b| frames.contains(&b.frame_idx))
        .map(|b| DetectionBox { frame_idx: b.frame_idx - start, ..*b })
        .collect();
    let headpose = trip.headpose.as_ref().map(|pose| {
        pose.iter()
            .filter(|p| frames.contains(&p.frame_idx))
            .map(|p| HeadPoseRecord { frame_idx: p.frame_idx - start, ..*p })
            .collect()
    });
    let roi_len = trip.roi.frame_len();
    let roi = RoiStack {
        height: trip.roi.height,
        width: trip.roi.width,
        data: trip.roi.data[start * roi_len..(end + 1) * roi_len].to_vec(),
    };
    let grid_len = trip.flow.grid_len();
    let flow = FlowStack {
        cols: trip.flow.cols,
        rows: trip.flow.rows,
        data: trip.flow.data[start * grid_len..(end + 1) * grid_len].to_vec(),
    };
    let groundtruth = trip.groundtruth.as_ref().and_then(|gt| {
        (frames.contains(&gt.entry_frame) && frames.contains(&gt.exit_frame)).then(|| {
            let mut gt = gt.clone();
            gt.entry_frame -= start;
            gt.exit_frame -= start;
            gt
        })
    });

    let mut manifest = trip.manifest.clone();
    manifest.segment_id = format!("{}-clip", trip.manifest.segment_id);
    manifest.frame_count = frame_count;
    manifest.clip = Some(ClipInfo {
        source_id: trip.manifest.segment_id.clone(),
        mark_latitude: latitude,
        mark_longitude: longitude,
        radius_m,
        source_start_frame: start,
        closest_frame: closest.clamp(start, end) - start,
        truncated_start,
        truncated_end,
    });
    Ok(SegmentBundle { manifest, telemetry, waypoints, detections, headpose, roi, flow, groundtruth })
}

fn nearest_index(sorted: &[f64], t: f64) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    let i = sorted.partition_point(|&x| x < t);
    if i == 0 {
        Some(0)
    } else if i == sorted.len() {
        Some(sorted.len() - 1)
    } else if (sorted[i] - t).abs() < (t - sorted[i - 1]).abs() {
        Some(i)
    } else {
        Some(i - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_index_ties_go_early() {
        let t = [0.0, 10.0, 20.0];
        assert_eq!(nearest_index(&t, 5.0), Some(0));
        assert_eq!(nearest_index(&t, 6.0), Some(1));
        assert_eq!(nearest_index(&t, 99.0), Some(2));
        assert_eq!(nearest_index(&[], 1.0), None);
    }
}
