//! Vehicle self-motion signals from the 12x4 block flow grid, turn detection
//! and halt detection.
//!
//! M1 is the median horizontal flow of the two central grid columns; it is
//! near zero while driving straight (radial flow cancels around the focus of
//! expansion) and peaks mid-turn. M2 is the median of mirrored column sums
//! (col1+col12, ..., col5+col8); it drops toward zero when the vehicle stops.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{DistanceProfile, FlowStack};
use crate::signal::{self, find_peaks, moving_median, normalize, NormalizeMode, Peak, PeakParams};
use crate::types::Side;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MotionError {
    #[error("flow grid is {cols}x{rows}, expected 12x4")]
    GridDimMismatch { cols: usize, rows: usize },
    #[error(transparent)]
    Signal(#[from] signal::SignalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionConfig {
    pub smoothing_window: usize,
    /// Used when the bundle is flagged as having noisy flow.
    pub noisy_smoothing_window: usize,
    pub turn_min_height: f64,
    pub turn_min_prominence: f64,
    /// Successive turn peaks must be strictly more than this far apart.
    pub turn_min_spacing_s: f64,
    pub min_turn_distance_m: f64,
    pub min_turn_speed_mps: f64,
    /// Peak of the smoothed M1 must exceed this multiple of the estimated
    /// per-frame M1 noise level. Zero disables the gate.
    pub min_turn_snr: f64,
    /// Turn extents stop this fraction of the prominence above the base.
    pub turn_extent_tolerance: f64,
    pub halt_max_speed_mps: f64,
    pub halt_m2_fraction: f64,
    pub halt_min_duration_s: f64,
    pub halt_merge_gap_s: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            smoothing_window: 15,
            noisy_smoothing_window: 31,
            turn_min_height: 0.25,
            turn_min_prominence: 0.175,
            turn_min_spacing_s: 3.0,
            min_turn_distance_m: 4.5,
            // 5 mph
            min_turn_speed_mps: 2.2352,
            min_turn_snr: 4.0,
            turn_extent_tolerance: 0.02,
            halt_max_speed_mps: 0.5,
            halt_m2_fraction: 0.1,
            halt_min_duration_s: 1.0,
            halt_merge_gap_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSignals {
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub raw_m1: Vec<f64>,
    pub raw_m2: Vec<f64>,
    pub smoothing_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnEvent {
    pub direction: Side,
    pub peak_frame: usize,
    pub start_frame: usize,
    pub end_frame: usize,
    /// Max-abs normalized M1 at the peak (signed).
    pub peak_value: f64,
    pub distance_span: f64,
    pub speed_at_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaltInterval {
    pub start_frame: usize,
    pub end_frame: usize,
    pub min_speed: f64,
}

const CENTRAL_COLS: [usize; 2] = [5, 6];
const MIRRORED_PAIRS: usize = 5;

/// Raw (unsmoothed) M1 and M2 for one grid.
pub fn grid_signals(grid: &[f32], cols: usize, rows: usize) -> (f64, f64) {
    let mut central = Vec::with_capacity(rows * CENTRAL_COLS.len());
    let mut mirrored = Vec::with_capacity(rows * MIRRORED_PAIRS);
    for r in 0..rows {
        let row = &grid[r * cols..(r + 1) * cols];
        for c in CENTRAL_COLS {
            central.push(row[c] as f64);
        }
        for i in 0..MIRRORED_PAIRS {
            mirrored.push(row[i] as f64 + row[cols - 1 - i] as f64);
        }
    }
    (signal::median_in_place(&mut central), signal::median_in_place(&mut mirrored))
}

pub fn compute_signals(flow: &FlowStack, noisy: bool, cfg: &MotionConfig) -> Result<MotionSignals, MotionError> {
    if flow.cols != 12 || flow.rows != 4 {
        return Err(MotionError::GridDimMismatch { cols: flow.cols, rows: flow.rows });
    }
    let (raw_m1, raw_m2): (Vec<f64>, Vec<f64>) = (0..flow.frame_count())
        .map(|f| grid_signals(flow.grid(f), flow.cols, flow.rows))
        .unzip();
    let window = if noisy { cfg.noisy_smoothing_window } else { cfg.smoothing_window };
    Ok(MotionSignals {
        m1: moving_median(&raw_m1, window)?,
        m2: moving_median(&raw_m2, window)?,
        raw_m1,
        raw_m2,
        smoothing_window: window,
    })
}

/// Robust per-frame noise estimate of a signal from the MAD of its first
/// differences. Smooth signal content contributes little to the differences.
pub fn noise_level(raw: &[f64]) -> f64 {
    if raw.len() < 3 {
        return 0.0;
    }
    let diffs: Vec<f64> = raw.windows(2).map(|w| w[1] - w[0]).collect();
    let med = signal::median(&diffs);
    let dev: Vec<f64> = diffs.iter().map(|d| (d - med).abs()).collect();
    1.4826 * signal::median(&dev) / std::f64::consts::SQRT_2
}

pub fn turn_peak_params(frame_rate: f64, cfg: &MotionConfig) -> PeakParams {
    PeakParams {
        min_height: cfg.turn_min_height,
        min_prominence: cfg.turn_min_prominence,
        min_width: 0.0,
        max_width: None,
        min_spacing: (cfg.turn_min_spacing_s * frame_rate).floor() as usize + 1,
    }
}

/// Turn candidates from the normalized M1 signal, pruned by distance covered
/// and speed at the peak. Positive M1 is a left turn.
pub fn detect_turns(
    signals: &MotionSignals,
    speeds: &[f64],
    distance: &DistanceProfile,
    frame_rate: f64,
    cfg: &MotionConfig,
) -> Vec<TurnEvent> {
    let normalized = normalize(&signals.m1, NormalizeMode::MaxAbs);
    let params = turn_peak_params(frame_rate, cfg);
    let flipped: Vec<f64> = normalized.iter().map(|v| -v).collect();

    let mut peaks: Vec<(Peak, f64)> = find_peaks(&normalized, &params).into_iter().map(|p| (p, 1.0)).collect();
    peaks.extend(find_peaks(&flipped, &params).into_iter().map(|p| (p, -1.0)));
    let merged = signal::enforce_spacing(
        peaks.iter().map(|(p, _)| *p).collect(),
        params.min_spacing,
        |p| p.height,
    );

    let noise = noise_level(&signals.raw_m1);
    merged
        .into_iter()
        .filter_map(|p| {
            let sign = peaks.iter().find(|(q, _)| q.index == p.index && q.height == p.height)?.1;
            let series = if sign > 0.0 { &normalized } else { &flipped };
            let (start, end) = signal::trimmed_extent(series, &p, cfg.turn_extent_tolerance);
            let event = TurnEvent {
                direction: Side::from_sign(sign),
                peak_frame: p.index,
                start_frame: start,
                end_frame: end,
                peak_value: sign * p.height,
                distance_span: distance.at(end) - distance.at(start),
                speed_at_peak: speeds[p.index],
            };
            let strong = signals.m1[p.index].abs() >= cfg.min_turn_snr * noise;
            (strong
                && event.distance_span >= cfg.min_turn_distance_m
                && event.speed_at_peak >= cfg.min_turn_speed_mps)
                .then_some(event)
        })
        .collect()
}

/// Maximal runs where the vehicle is slow and M2 is near its floor, merged
/// across short gaps and kept when they last long enough.
pub fn detect_halts(speeds: &[f64], signals: &MotionSignals, frame_rate: f64, cfg: &MotionConfig) -> Vec<HaltInterval> {
    let max_m2 = signals.m2.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let m2_limit = cfg.halt_m2_fraction * max_m2;
    let stopped: Vec<bool> = speeds
        .iter()
        .zip(&signals.m2)
        .map(|(&v, &m2)| v < cfg.halt_max_speed_mps && m2.abs() <= m2_limit)
        .collect();

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < stopped.len() {
        if stopped[i] {
            let start = i;
            while i + 1 < stopped.len() && stopped[i + 1] {
                i += 1;
            }
            runs.push((start, i));
        }
        i += 1;
    }

    let max_gap = cfg.halt_merge_gap_s * frame_rate;
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for run in runs {
        match merged.last_mut() {
            Some(last) if ((run.0 - last.1 - 1) as f64) < max_gap => last.1 = run.1,
            _ => merged.push(run),
        }
    }

    merged
        .into_iter()
        .filter(|(s, e)| (e - s + 1) as f64 / frame_rate >= cfg.halt_min_duration_s)
        .map(|(s, e)| HaltInterval {
            start_frame: s,
            end_frame: e,
            min_speed: speeds[s..=e].iter().cloned().fold(f64::INFINITY, f64::min),
        })
        .collect()
}
