//! Lateral head-scan episodes from a yaw time series, and their selection
//! relative to intersection bounds or an entry window.

use serde::{Deserialize, Serialize};

use crate::bundle::HeadPoseRecord;
use crate::types::Side;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanParams {
    /// Degrees of |yaw| that must be exceeded.
    pub threshold: f64,
    pub min_frames: usize,
    pub window_half_width_s: f64,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self { threshold: 20.0, min_frames: 5, window_half_width_s: 5.0 }
    }
}

impl ScanParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.threshold > 0.0) {
            return Err("scan threshold must be positive".into());
        }
        if self.min_frames == 0 {
            return Err("scan min_frames must be at least 1".into());
        }
        if !(self.window_half_width_s >= 0.0) {
            return Err("scan window half width must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadScan {
    pub direction: Side,
    pub start_frame: usize,
    pub end_frame: usize,
    pub peak_frame: usize,
    pub magnitude: f64,
}

/// Maximal runs of consecutive valid frames with |yaw| above the threshold
/// and a constant yaw sign. Positive yaw is a scan to the left.
///
/// Records must be sorted by frame; a gap in frame indices breaks a run just
/// like an invalid frame does.
pub fn detect_scans(pose: &[HeadPoseRecord], params: &ScanParams) -> Vec<HeadScan> {
    let mut scans = Vec::new();
    let mut run: Option<(usize, usize, f64)> = None; // (start idx, peak idx, sign)
    let flush = |run: &mut Option<(usize, usize, f64)>, end: usize, scans: &mut Vec<HeadScan>| {
        if let Some((start, peak, sign)) = run.take() {
            let first = pose[start].frame_idx;
            let last = pose[end].frame_idx;
            if last - first + 1 >= params.min_frames {
                scans.push(HeadScan {
                    direction: Side::from_sign(sign),
                    start_frame: first,
                    end_frame: last,
                    peak_frame: pose[peak].frame_idx,
                    magnitude: pose[peak].yaw.abs(),
                });
            }
        }
    };

    for (i, p) in pose.iter().enumerate() {
        let active = p.valid && p.yaw.abs() > params.threshold;
        let sign = p.yaw.signum();
        if let Some((_, peak, run_sign)) = run.as_mut() {
            let contiguous = p.frame_idx == pose[i - 1].frame_idx + 1;
            if active && contiguous && sign == *run_sign {
                if p.yaw.abs() > pose[*peak].yaw.abs() {
                    *peak = i;
                }
                continue;
            }
            flush(&mut run, i - 1, &mut scans);
        }
        if active {
            run = Some((i, i, sign));
        }
    }
    if !pose.is_empty() {
        flush(&mut run, pose.len() - 1, &mut scans);
    }
    scans
}

/// Scans whose peak lies in `[entry_frame, exit_frame]`.
pub fn scans_in_bounds(scans: &[HeadScan], entry_frame: usize, exit_frame: usize) -> Vec<HeadScan> {
    scans
        .iter()
        .filter(|s| s.peak_frame >= entry_frame && s.peak_frame <= exit_frame)
        .copied()
        .collect()
}

/// Inclusive frame window of `anchor ± half_width_s`, clamped to the clip.
pub fn window_frames(anchor_frame: usize, half_width_s: f64, frame_rate: f64, frame_count: usize) -> (usize, usize) {
    let half = (half_width_s * frame_rate).round() as usize;
    let last = frame_count.saturating_sub(1);
    (anchor_frame.saturating_sub(half).min(last), (anchor_frame + half).min(last))
}

pub fn scans_in_window(scans: &[HeadScan], anchor_frame: usize, half_width_s: f64, frame_rate: f64, frame_count: usize) -> usize {
    let (lo, hi) = window_frames(anchor_frame, half_width_s, frame_rate, frame_count);
    scans_in_bounds(scans, lo, hi).len()
}

/// CSV export: frame, time, direction, magnitude (one row per scan peak).
pub fn scans_to_csv(scans: &[HeadScan], timestamps_ms: &[f64]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["frame", "time_s", "direction", "magnitude_deg", "start_frame", "end_frame"])?;
    for s in scans {
        let t = timestamps_ms.get(s.peak_frame).copied().unwrap_or(f64::NAN) / 1000.0;
        w.write_record([
            s.peak_frame.to_string(),
            format!("{t:.3}"),
            s.direction.as_str().to_string(),
            format!("{:.2}", s.magnitude),
            s.start_frame.to_string(),
            s.end_frame.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
