//! Scene characterization from per-frame object detections: signage type,
//! sign/light density functions and passing frames, and traffic density.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{DetectionBox, Manifest, ObjectClass};
use crate::signal::{self, find_peaks, moving_mean, normalize, NormalizeMode, Peak, PeakParams};
use crate::types::Signage;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SceneError {
    #[error("no detections of the requested class")]
    EmptyStream,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// A signage class qualifies with strictly more frames than this.
    pub signage_min_frames: usize,
    pub stop_sign_max_height: f64,
    pub traffic_light_max_height: f64,
    /// Fraction of the frame width, centered, where lights are accepted.
    pub traffic_light_central_fraction: f64,
    pub density_smoothing_frames: usize,
    pub density_min_height: f64,
    pub density_min_prominence: f64,
    pub density_min_width_s: f64,
    pub density_min_spacing_s: f64,
    /// Window of the median filter used to locate the inter-peak minimum.
    pub passing_median_frames: usize,
    pub cluster_gap_s: f64,
    pub cross_traffic_aspect: f64,
    pub traffic_window_s: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            signage_min_frames: 20,
            stop_sign_max_height: 150.0,
            traffic_light_max_height: 85.0,
            traffic_light_central_fraction: 0.7,
            density_smoothing_frames: 15,
            density_min_height: 0.2,
            density_min_prominence: 0.1,
            density_min_width_s: 0.5,
            density_min_spacing_s: 2.0,
            passing_median_frames: 15,
            cluster_gap_s: 0.5,
            cross_traffic_aspect: 1.4,
            traffic_window_s: 1.0,
        }
    }
}

/// Detections that survived the per-class placement filters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilteredDetections {
    pub stop_signs: Vec<DetectionBox>,
    pub traffic_lights: Vec<DetectionBox>,
    pub vehicles: Vec<DetectionBox>,
    pub persons: Vec<DetectionBox>,
}

impl FilteredDetections {
    pub fn all(&self) -> Vec<DetectionBox> {
        let mut out: Vec<DetectionBox> = self
            .stop_signs
            .iter()
            .chain(&self.traffic_lights)
            .chain(&self.vehicles)
            .chain(&self.persons)
            .copied()
            .collect();
        out.sort_by(|a, b| a.frame_idx.cmp(&b.frame_idx).then(a.class.cmp(&b.class)));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEvidence {
    /// Smoothed, min-max normalized per-frame max box area.
    pub density: Vec<f64>,
    pub peaks: Vec<Peak>,
    pub passing_frame: usize,
    pub first_visible_frame: usize,
    pub last_visible_frame: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignageEvidence {
    pub signage: Signage,
    pub stop_sign_frames: usize,
    pub traffic_light_frames: usize,
    /// Frames supporting the chosen class (0 for `none`).
    pub qualifying_frames: usize,
    /// Both classes qualified; the one with more frames won.
    pub contested: bool,
    pub stop_sign: Option<DensityEvidence>,
    pub traffic_light: Option<DensityEvidence>,
}

impl SignageEvidence {
    /// Density evidence of the chosen class.
    pub fn chosen(&self) -> Option<&DensityEvidence> {
        match self.signage {
            Signage::StopSign => self.stop_sign.as_ref(),
            Signage::TrafficLight => self.traffic_light.as_ref(),
            Signage::None => None,
        }
    }

    pub fn passing_frame(&self) -> Option<usize> {
        self.chosen().map(|d| d.passing_frame)
    }

    pub fn array_count(&self) -> usize {
        match (self.signage, &self.traffic_light) {
            (Signage::TrafficLight, Some(d)) => d.peaks.len(),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficFeatures {
    pub density: Vec<f64>,
    pub cross_traffic_fraction: Vec<f64>,
}

pub fn filter_detections(raw: &[DetectionBox], manifest: &Manifest, cfg: &SceneConfig) -> FilteredDetections {
    let width = manifest.scene_width as f64;
    let margin = width * (1.0 - cfg.traffic_light_central_fraction) / 2.0;
    let mut out = FilteredDetections::default();
    for b in raw {
        match b.class {
            ObjectClass::StopSign => {
                if b.center_x() > width / 2.0 && b.h <= cfg.stop_sign_max_height {
                    out.stop_signs.push(*b);
                }
            }
            ObjectClass::TrafficLight => {
                let cx = b.center_x();
                if cx >= margin && cx <= width - margin && b.h <= cfg.traffic_light_max_height {
                    out.traffic_lights.push(*b);
                }
            }
            ObjectClass::Person => out.persons.push(*b),
            c if c.is_vehicle() => out.vehicles.push(*b),
            _ => {}
        }
    }
    out
}

fn distinct_frames(boxes: &[DetectionBox]) -> usize {
    boxes.iter().map(|b| b.frame_idx).collect::<BTreeSet<_>>().len()
}

/// Signage class by frame count: a class qualifies with more than
/// `signage_min_frames` frames; if both qualify the larger count wins and a
/// tie goes to traffic lights.
pub fn classify_signage(filtered: &FilteredDetections, cfg: &SceneConfig) -> (Signage, usize, usize) {
    let stop = distinct_frames(&filtered.stop_signs);
    let light = distinct_frames(&filtered.traffic_lights);
    let stop_ok = stop > cfg.signage_min_frames;
    let light_ok = light > cfg.signage_min_frames;
    let signage = match (stop_ok, light_ok) {
        (true, true) if stop > light => Signage::StopSign,
        (_, true) => Signage::TrafficLight,
        (true, false) => Signage::StopSign,
        (false, false) => Signage::None,
    };
    (signage, stop, light)
}

fn max_area_series(boxes: &[DetectionBox], frame_count: usize) -> Vec<f64> {
    let mut series = vec![0.0_f64; frame_count];
    for b in boxes {
        if b.frame_idx < frame_count {
            series[b.frame_idx] = series[b.frame_idx].max(b.area());
        }
    }
    series
}

/// Contiguous runs of visible frames, bridging gaps of at most `max_gap`
/// missing frames.
fn clusters(frames: &BTreeSet<usize>, max_gap: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &f in frames {
        match out.last_mut() {
            Some(last) if f - last.1 - 1 <= max_gap => last.1 = f,
            _ => out.push((f, f)),
        }
    }
    out
}

/// Density function of a sign or light class and the frame at which the
/// vehicle passes it.
///
/// Stop signs pass at the end of the longest appearance cluster. Lights with
/// one density peak pass at their last visible frame; with several peaks the
/// passing is the minimum between the two most prominent (the near array has left the
/// view while the far array is still small).
pub fn density_and_passing(
    boxes: &[DetectionBox],
    class: ObjectClass,
    frame_count: usize,
    frame_rate: f64,
    cfg: &SceneConfig,
) -> Result<DensityEvidence, SceneError> {
    let boxes: Vec<DetectionBox> = boxes.iter().filter(|b| b.class == class).copied().collect();
    let frames: BTreeSet<usize> = boxes.iter().map(|b| b.frame_idx).filter(|&f| f < frame_count).collect();
    let (Some(&first_visible_frame), Some(&last_visible_frame)) = (frames.first(), frames.last()) else {
        return Err(SceneError::EmptyStream);
    };
    let raw = max_area_series(&boxes, frame_count);
    let density = normalize(&moving_mean(&raw, cfg.density_smoothing_frames), NormalizeMode::MinMax);
    let params = PeakParams {
        min_height: cfg.density_min_height,
        min_prominence: cfg.density_min_prominence,
        min_width: cfg.density_min_width_s * frame_rate,
        max_width: None,
        min_spacing: (cfg.density_min_spacing_s * frame_rate).round() as usize,
    };
    let peaks = find_peaks(&density, &params);

    let passing_frame = match class {
        ObjectClass::StopSign => {
            let gap = (cfg.cluster_gap_s * frame_rate).round() as usize;
            let cl = clusters(&frames, gap);
            // longest cluster; ties go to the later one (closer to the intersection)
            cl.iter()
                .max_by_key(|(s, e)| (e - s, *s))
                .map(|c| c.1)
                .unwrap_or(last_visible_frame)
        }
        _ if peaks.len() >= 2 => {
            // the two most prominent peaks, in time order
            let mut top: Vec<&Peak> = peaks.iter().collect();
            top.sort_by(|p, q| q.prominence.total_cmp(&p.prominence).then(p.index.cmp(&q.index)));
            let (a, b) = (top[0].index.min(top[1].index), top[0].index.max(top[1].index));
            let window = cfg.passing_median_frames.max(1) | 1;
            let filtered = signal::moving_median(&raw, window).unwrap_or_else(|_| raw.clone());
            let mut best = a;
            for i in a..=b {
                if filtered[i] < filtered[best] {
                    best = i;
                }
            }
            best
        }
        _ => last_visible_frame,
    };

    Ok(DensityEvidence { density, peaks, passing_frame, first_visible_frame, last_visible_frame })
}

pub fn signage_evidence(filtered: &FilteredDetections, frame_count: usize, frame_rate: f64, cfg: &SceneConfig) -> SignageEvidence {
    let (signage, stop_frames, light_frames) = classify_signage(filtered, cfg);
    let stop_sign = density_and_passing(&filtered.stop_signs, ObjectClass::StopSign, frame_count, frame_rate, cfg).ok();
    let traffic_light =
        density_and_passing(&filtered.traffic_lights, ObjectClass::TrafficLight, frame_count, frame_rate, cfg).ok();
    let qualifying_frames = match signage {
        Signage::StopSign => stop_frames,
        Signage::TrafficLight => light_frames,
        Signage::None => 0,
    };
    SignageEvidence {
        signage,
        stop_sign_frames: stop_frames,
        traffic_light_frames: light_frames,
        qualifying_frames,
        contested: stop_frames > cfg.signage_min_frames && light_frames > cfg.signage_min_frames,
        stop_sign,
        traffic_light,
    }
}

/// Per-frame vehicle count averaged over a one-second window, and the share
/// of wide (cross-traffic) boxes per frame.
pub fn traffic_features(vehicles: &[DetectionBox], frame_count: usize, frame_rate: f64, cfg: &SceneConfig) -> TrafficFeatures {
    let mut counts = vec![0.0_f64; frame_count];
    let mut wide = vec![0.0; frame_count];
    for b in vehicles.iter().filter(|b| b.frame_idx < frame_count) {
        counts[b.frame_idx] += 1.0;
        if b.h > 0.0 && b.w / b.h >= cfg.cross_traffic_aspect {
            wide[b.frame_idx] += 1.0;
        }
    }
    let window = (cfg.traffic_window_s * frame_rate).round().max(1.0) as usize;
    let cross_traffic_fraction = counts
        .iter()
        .zip(&wide)
        .map(|(&n, &w)| if n > 0.0 { w / n } else { 0.0 })
        .collect();
    TrafficFeatures { density: moving_mean(&counts, window), cross_traffic_fraction }
}
