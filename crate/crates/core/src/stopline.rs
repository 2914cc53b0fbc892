//! Stop-line detection from the per-frame ROI strip in front of the hood.
//!
//! Each frame is reduced to a row profile (mean intensity along slightly
//! tilted sampling lines), the tilt with the strongest contrast is kept, and
//! narrow bright peaks become line candidates. Candidates are linked across
//! consecutive frames; a real stop line enters near the top of the ROI and
//! moves down as the vehicle approaches. The last frame of a valid track, plus
//! a fixed travel buffer, is the crossing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{DistanceProfile, RoiStack};
use crate::signal::{find_peaks, normalize, NormalizeMode, PeakParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopLineConfig {
    pub peak: PeakParams,
    pub rotation_min_deg: i32,
    pub rotation_max_deg: i32,
    pub link_forward_rows: usize,
    pub link_backtrack_rows: usize,
    pub min_track_frames: usize,
    pub min_track_distance_m: f64,
    pub crossing_buffer_m: f64,
}

impl Default for StopLineConfig {
    fn default() -> Self {
        Self {
            peak: PeakParams {
                min_height: 0.5,
                min_prominence: 0.17,
                min_width: 2.5,
                max_width: Some(12.0),
                min_spacing: 0,
            },
            rotation_min_deg: -4,
            rotation_max_deg: 8,
            link_forward_rows: 8,
            link_backtrack_rows: 2,
            min_track_frames: 5,
            min_track_distance_m: 1.0,
            crossing_buffer_m: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineCandidate {
    pub frame_idx: usize,
    pub row: usize,
    pub strength: f64,
    pub rotation: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopLineTrack {
    pub candidates: Vec<LineCandidate>,
    pub first_frame: usize,
    pub last_frame: usize,
    pub distance_span: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub frame_idx: usize,
    /// Track-end distance plus the buffer (not clamped).
    pub distance: f64,
    pub track_end_frame: usize,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopLineEvidence {
    pub tracks: Vec<StopLineTrack>,
    pub crossings: Vec<CrossingEvent>,
}

/// Sampling geometry for one rotation: runs of consecutive columns sharing
/// the same row offset.
#[derive(Debug, Clone)]
pub struct RotationKernel {
    pub degrees: i32,
    runs: Vec<(i64, usize, usize)>,
}

impl RotationKernel {
    /// Positive degrees tilt the sampling line counter-clockwise: it rises
    /// (smaller row index) toward the right edge.
    pub fn new(degrees: i32, width: usize) -> Self {
        let mut runs: Vec<(i64, usize, usize)> = Vec::new();
        for x in 0..width {
            let dy = row_offset(degrees, x, width);
            match runs.last_mut() {
                Some(run) if run.0 == dy => run.2 = x,
                _ => runs.push((dy, x, x)),
            }
        }
        Self { degrees, runs }
    }
}

/// Row offset of column `x` on a sampling line tilted by `degrees`.
pub fn row_offset(degrees: i32, x: usize, width: usize) -> i64 {
    let cx = (width as f64 - 1.0) / 2.0;
    (-(x as f64 - cx) * (degrees as f64).to_radians().tan()).round() as i64
}

/// Row-wise prefix sums of a frame, `(width + 1)` entries per row.
fn prefix_rows(frame: &[u8], height: usize, width: usize) -> Vec<u32> {
    let mut out = vec![0u32; height * (width + 1)];
    for r in 0..height {
        let src = &frame[r * width..(r + 1) * width];
        let dst = &mut out[r * (width + 1)..(r + 1) * (width + 1)];
        let mut acc = 0u32;
        for (x, &v) in src.iter().enumerate() {
            acc += v as u32;
            dst[x + 1] = acc;
        }
    }
    out
}

fn raw_profile_with(prefix: &[u32], height: usize, width: usize, kernel: &RotationKernel) -> Vec<f64> {
    (0..height)
        .map(|r| {
            let mut sum = 0u64;
            let mut count = 0usize;
            for &(dy, x0, x1) in &kernel.runs {
                let y = r as i64 + dy;
                if y < 0 || y >= height as i64 {
                    continue;
                }
                let row = &prefix[y as usize * (width + 1)..];
                sum += (row[x1 + 1] - row[x0]) as u64;
                count += x1 + 1 - x0;
            }
            if count == 0 {
                0.0
            } else {
                sum as f64 * width as f64 / count as f64
            }
        })
        .collect()
}

/// Un-normalized row profile: intensity summed along the tilted line through
/// each row, scaled up by the fraction of samples that stayed inside the ROI.
pub fn raw_row_profile(frame: &[u8], height: usize, width: usize, rotation_deg: i32) -> Vec<f64> {
    let prefix = prefix_rows(frame, height, width);
    raw_profile_with(&prefix, height, width, &RotationKernel::new(rotation_deg, width))
}

/// Min-max normalized row profile.
pub fn row_profile(frame: &[u8], height: usize, width: usize, rotation_deg: i32) -> Vec<f64> {
    normalize(&raw_row_profile(frame, height, width, rotation_deg), NormalizeMode::MinMax)
}

/// Reusable per-ROI-geometry detector.
#[derive(Debug, Clone)]
pub struct LineDetector {
    height: usize,
    width: usize,
    kernels: Vec<RotationKernel>,
    peak: PeakParams,
}

impl LineDetector {
    pub fn new(height: usize, width: usize, cfg: &StopLineConfig) -> Self {
        let mut degrees: Vec<i32> = (cfg.rotation_min_deg..=cfg.rotation_max_deg).collect();
        // ties in contrast prefer the smallest tilt
        degrees.sort_by_key(|d| (d.abs(), *d));
        let kernels = degrees.into_iter().map(|d| RotationKernel::new(d, width)).collect();
        Self { height, width, kernels, peak: cfg.peak }
    }

    /// Pick the rotation with the highest profile contrast, then return the
    /// qualifying peaks of its normalized profile.
    pub fn detect(&self, frame_idx: usize, frame: &[u8]) -> Vec<LineCandidate> {
        let prefix = prefix_rows(frame, self.height, self.width);
        let mut best: Option<(f64, i32, Vec<f64>)> = None;
        for kernel in &self.kernels {
            let profile = raw_profile_with(&prefix, self.height, self.width, kernel);
            let (lo, hi) = profile
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let contrast = hi - lo;
            if best.as_ref().map_or(true, |b| contrast > b.0) {
                best = Some((contrast, kernel.degrees, profile));
            }
        }
        let Some((_, rotation, profile)) = best else {
            return Vec::new();
        };
        let profile = normalize(&profile, NormalizeMode::MinMax);
        find_peaks(&profile, &self.peak)
            .into_iter()
            .map(|p| LineCandidate { frame_idx, row: p.index, strength: p.height, rotation })
            .collect()
    }
}

/// Candidates for a single frame.
pub fn detect_candidates(frame: &[u8], height: usize, width: usize, cfg: &StopLineConfig) -> Vec<LineCandidate> {
    LineDetector::new(height, width, cfg).detect(0, frame)
}

/// Candidates for every frame of an ROI stack, indexed by frame.
pub fn detect_all_candidates(roi: &RoiStack, cfg: &StopLineConfig) -> Vec<Vec<LineCandidate>> {
    let detector = LineDetector::new(roi.height, roi.width, cfg);
    (0..roi.frame_count())
        .into_par_iter()
        .map(|f| detector.detect(f, roi.frame(f)))
        .collect()
}

/// Whether a track satisfies every stop-line validity criterion.
pub fn is_valid_track(track: &StopLineTrack, roi_height: usize, cfg: &StopLineConfig) -> bool {
    let (Some(first), Some(last)) = (track.candidates.first(), track.candidates.last()) else {
        return false;
    };
    let consecutive = track.candidates.windows(2).all(|w| w[1].frame_idx == w[0].frame_idx + 1);
    let no_backtrack = track
        .candidates
        .windows(2)
        .all(|w| w[1].row + cfg.link_backtrack_rows >= w[0].row);
    let half = roi_height / 2;
    consecutive
        && no_backtrack
        && track.candidates.len() >= cfg.min_track_frames
        && track.distance_span >= cfg.min_track_distance_m
        && first.row < half
        && last.row >= half
}

/// Greedy frame-to-frame linking. A candidate joins an open track when it is
/// at most `link_forward_rows` below and `link_backtrack_rows` above the
/// track's last row; the closest such candidate wins. A track that finds no
/// candidate in the next frame is closed.
pub fn track_lines(
    candidates: &[Vec<LineCandidate>],
    distance: &DistanceProfile,
    roi_height: usize,
    cfg: &StopLineConfig,
) -> Vec<StopLineTrack> {
    let mut open: Vec<Vec<LineCandidate>> = Vec::new();
    let mut closed: Vec<Vec<LineCandidate>> = Vec::new();
    for frame in candidates {
        let mut taken = vec![false; frame.len()];
        let mut still_open = Vec::with_capacity(open.len());
        for track in open.drain(..) {
            let last = track[track.len() - 1];
            let pick = frame
                .iter()
                .enumerate()
                .filter(|(k, c)| {
                    !taken[*k]
                        && c.frame_idx == last.frame_idx + 1
                        && c.row <= last.row + cfg.link_forward_rows
                        && c.row + cfg.link_backtrack_rows >= last.row
                })
                .min_by_key(|(_, c)| (c.row.abs_diff(last.row), c.row))
                .map(|(k, _)| k);
            match pick {
                Some(k) => {
                    taken[k] = true;
                    let mut track = track;
                    track.push(frame[k]);
                    still_open.push(track);
                }
                None => closed.push(track),
            }
        }
        for (k, c) in frame.iter().enumerate() {
            if !taken[k] {
                still_open.push(vec![*c]);
            }
        }
        open = still_open;
    }
    closed.extend(open);

    let mut tracks: Vec<StopLineTrack> = closed
        .into_iter()
        .map(|c| {
            let first_frame = c[0].frame_idx;
            let last_frame = c[c.len() - 1].frame_idx;
            StopLineTrack {
                distance_span: distance.at(last_frame) - distance.at(first_frame),
                candidates: c,
                first_frame,
                last_frame,
            }
        })
        .filter(|t| is_valid_track(t, roi_height, cfg))
        .collect();
    tracks.sort_by_key(|t| (t.last_frame, t.first_frame));
    tracks
}

/// The frame at which the vehicle has travelled `buffer_m` past the track's
/// final frame.
pub fn crossing_event(track: &StopLineTrack, distance: &DistanceProfile, buffer_m: f64) -> CrossingEvent {
    let target = distance.at(track.last_frame) + buffer_m;
    let (frame_idx, clamped) = distance.frame_at_distance(target);
    CrossingEvent { frame_idx, distance: target, track_end_frame: track.last_frame, clamped }
}

pub fn detect_stop_lines(roi: &RoiStack, distance: &DistanceProfile, cfg: &StopLineConfig) -> StopLineEvidence {
    let candidates = detect_all_candidates(roi, cfg);
    let tracks = track_lines(&candidates, distance, roi.height, cfg);
    let crossings = tracks
        .iter()
        .map(|t| crossing_event(t, distance, cfg.crossing_buffer_m))
        .collect();
    StopLineEvidence { tracks, crossings }
}
