//! One-dimensional signal utilities shared by the stop-line, motion and scene
//! stages: moving median/mean smoothing, normalization and constrained peak
//! detection.
//!
//! Peak prominence follows the topographic definition: the height of a peak
//! above the higher of the two lowest points separating it from strictly
//! higher terrain (or from the signal edge).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignalError {
    #[error("moving median window must be odd and >= 1, got {0}")]
    EvenWindow(usize),
}

/// Constraints applied by [`find_peaks`]. Widths are measured at half
/// prominence and may be fractional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakParams {
    pub min_height: f64,
    pub min_prominence: f64,
    pub min_width: f64,
    /// `None` means unbounded.
    pub max_width: Option<f64>,
    /// Minimum index distance between two kept peaks.
    pub min_spacing: usize,
}

impl Default for PeakParams {
    fn default() -> Self {
        Self::unconstrained()
    }
}

impl PeakParams {
    pub const fn unconstrained() -> Self {
        Self {
            min_height: f64::NEG_INFINITY,
            min_prominence: 0.0,
            min_width: 0.0,
            max_width: None,
            min_spacing: 0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.min_prominence >= 0.0
            && self.min_width >= 0.0
            && self.max_width.map_or(true, |w| w >= self.min_width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub height: f64,
    pub prominence: f64,
    /// Width at half prominence, in samples.
    pub width: f64,
    /// Samples where the signal crosses `height - prominence` on each side.
    pub extent: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    MaxAbs,
    MinMax,
}

/// Centered moving median. Windows are truncated at the signal edges, so edge
/// samples may see an even number of values; those medians average the two
/// middle values.
pub fn moving_median(signal: &[f64], window: usize) -> Result<Vec<f64>, SignalError> {
    if window == 0 || window % 2 == 0 {
        return Err(SignalError::EvenWindow(window));
    }
    let half = window / 2;
    let n = signal.len();
    let mut scratch = Vec::with_capacity(window);
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            scratch.clear();
            scratch.extend_from_slice(&signal[lo..=hi]);
            median_in_place(&mut scratch)
        })
        .collect())
}

/// Centered moving mean over `window` samples, truncated at the edges. For an
/// even window the span is `[i - window/2, i + window/2 - 1]`.
pub fn moving_mean(signal: &[f64], window: usize) -> Vec<f64> {
    let n = signal.len();
    if n == 0 || window <= 1 {
        return signal.to_vec();
    }
    let back = window / 2;
    let fwd = window - 1 - back;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in signal {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        })
        .collect()
}

/// Median of a non-empty slice (reorders it). Even lengths average the two
/// middle values.
pub fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    debug_assert!(n > 0);
    values.sort_by(f64::total_cmp);
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    median_in_place(&mut v)
}

pub fn normalize(signal: &[f64], mode: NormalizeMode) -> Vec<f64> {
    match mode {
        NormalizeMode::MaxAbs => {
            let scale = signal.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if scale == 0.0 {
                signal.to_vec()
            } else {
                signal.iter().map(|v| v / scale).collect()
            }
        }
        NormalizeMode::MinMax => {
            let (lo, hi) = signal
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let range = hi - lo;
            if !(range > 0.0) {
                vec![0.0; signal.len()]
            } else {
                signal.iter().map(|v| (v - lo) / range).collect()
            }
        }
    }
}

/// Indices of local maxima. A plateau counts when both of its neighbours are
/// strictly lower; its reported index is the floor of the plateau center.
pub fn local_maxima(signal: &[f64]) -> Vec<usize> {
    let n = signal.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i < n - 1 {
        if signal[i - 1] < signal[i] {
            let mut ahead = i + 1;
            while ahead < n - 1 && signal[ahead] == signal[i] {
                ahead += 1;
            }
            if signal[ahead] < signal[i] {
                out.push((i + ahead - 1) / 2);
                i = ahead;
            }
        }
        i += 1;
    }
    out
}

struct Bases {
    prominence: f64,
    left: usize,
    right: usize,
}

fn prominence_at(signal: &[f64], peak: usize) -> Bases {
    let h = signal[peak];
    let mut left = peak;
    let mut left_min = h;
    let mut i = peak;
    loop {
        if signal[i] > h {
            break;
        }
        if signal[i] < left_min {
            left_min = signal[i];
            left = i;
        }
        if i == 0 {
            break;
        }
        i -= 1;
    }
    let mut right = peak;
    let mut right_min = h;
    for (j, &v) in signal.iter().enumerate().skip(peak) {
        if v > h {
            break;
        }
        if v < right_min {
            right_min = v;
            right = j;
        }
    }
    Bases {
        prominence: h - left_min.max(right_min),
        left,
        right,
    }
}

/// Interpolated positions where the signal falls to `level` on either side of
/// `peak`, searching no further than the bases.
fn crossings(signal: &[f64], peak: usize, level: f64, left: usize, right: usize) -> (f64, f64) {
    let mut i = peak;
    while i > left && signal[i] > level {
        i -= 1;
    }
    let mut left_ip = i as f64;
    if signal[i] < level {
        left_ip += (level - signal[i]) / (signal[i + 1] - signal[i]);
    }
    let mut j = peak;
    while j < right && signal[j] > level {
        j += 1;
    }
    let mut right_ip = j as f64;
    if signal[j] < level {
        right_ip -= (level - signal[j]) / (signal[j - 1] - signal[j]);
    }
    (left_ip, right_ip)
}

fn extent(signal: &[f64], peak: usize, level: f64, left: usize, right: usize) -> (usize, usize) {
    let mut i = peak;
    while i > left && signal[i] > level {
        i -= 1;
    }
    let mut j = peak;
    while j < right && signal[j] > level {
        j += 1;
    }
    (i, j)
}

/// Extent of `peak` walked down only to `tolerance * prominence` above its
/// base level, so a noisy floor near the base cannot stretch it. Never wider
/// than `peak.extent`.
pub fn trimmed_extent(signal: &[f64], peak: &Peak, tolerance: f64) -> (usize, usize) {
    let level = peak.height - peak.prominence + tolerance * peak.prominence;
    extent(signal, peak.index, level, peak.extent.0, peak.extent.1)
}

/// Measure a single local maximum without applying any constraint.
pub fn measure_peak(signal: &[f64], index: usize) -> Peak {
    let bases = prominence_at(signal, index);
    let height = signal[index];
    let (l, r) = crossings(signal, index, height - bases.prominence / 2.0, bases.left, bases.right);
    Peak {
        index,
        height,
        prominence: bases.prominence,
        width: r - l,
        extent: extent(signal, index, height - bases.prominence, bases.left, bases.right),
    }
}

/// Find local maxima that satisfy every constraint in `params`, then enforce
/// `min_spacing` by keeping the higher peak of any conflicting pair (earlier
/// index on ties). Output is sorted by index.
pub fn find_peaks(signal: &[f64], params: &PeakParams) -> Vec<Peak> {
    let candidates: Vec<Peak> = local_maxima(signal)
        .into_iter()
        .map(|i| measure_peak(signal, i))
        .filter(|p| {
            p.height >= params.min_height
                && p.prominence >= params.min_prominence
                && p.width >= params.min_width
                && params.max_width.map_or(true, |w| p.width <= w)
        })
        .collect();
    enforce_spacing(candidates, params.min_spacing, |p| p.height)
}

/// Keep the strongest items (by `strength`, ties to the earlier index) such
/// that no two kept items are closer than `min_spacing` samples.
pub fn enforce_spacing<F>(mut peaks: Vec<Peak>, min_spacing: usize, strength: F) -> Vec<Peak>
where
    F: Fn(&Peak) -> f64,
{
    if min_spacing <= 1 || peaks.len() < 2 {
        peaks.sort_by_key(|p| p.index);
        return peaks;
    }
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| {
        strength(&peaks[b])
            .total_cmp(&strength(&peaks[a]))
            .then(peaks[a].index.cmp(&peaks[b].index))
    });
    let mut kept: Vec<usize> = Vec::new();
    for idx in order {
        let p = peaks[idx].index;
        if kept.iter().all(|&k| peaks[k].index.abs_diff(p) >= min_spacing) {
            kept.push(idx);
        }
    }
    kept.sort_by_key(|&k| peaks[k].index);
    let mut out = Vec::with_capacity(kept.len());
    for k in kept {
        out.push(std::mem::replace(
            &mut peaks[k],
            Peak { index: 0, height: 0.0, prominence: 0.0, width: 0.0, extent: (0, 0) },
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_median_truncates_edges() {
        let out = moving_median(&[1.0, 9.0, 1.0, 9.0, 1.0], 3).unwrap();
        assert_eq!(out, vec![5.0, 1.0, 9.0, 1.0, 5.0]);
    }

    #[test]
    fn moving_median_window_one_and_constant() {
        let x = [3.0, -1.0, 7.5, 2.0];
        assert_eq!(moving_median(&x, 1).unwrap(), x.to_vec());
        assert_eq!(moving_median(&[4.0; 9], 5).unwrap(), vec![4.0; 9]);
    }

    #[test]
    fn moving_median_rejects_even_window() {
        assert_eq!(moving_median(&[1.0, 2.0], 4), Err(SignalError::EvenWindow(4)));
        assert_eq!(moving_median(&[1.0, 2.0], 0), Err(SignalError::EvenWindow(0)));
    }

    #[test]
    fn moving_mean_alternating() {
        let x: Vec<f64> = (0..120).map(|i| if i % 2 == 0 { 2.0 } else { 4.0 }).collect();
        let m = moving_mean(&x, 30);
        for v in &m[15..105] {
            assert!((v - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_modes() {
        assert_eq!(normalize(&[-4.0, 2.0], NormalizeMode::MaxAbs), vec![-1.0, 0.5]);
        assert_eq!(normalize(&[2.0, 2.0, 2.0], NormalizeMode::MinMax), vec![0.0; 3]);
        assert_eq!(normalize(&[0.0, 5.0, 10.0], NormalizeMode::MinMax), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize(&[0.0, 0.0], NormalizeMode::MaxAbs), vec![0.0, 0.0]);
    }

    #[test]
    fn single_triangle_peak() {
        let peaks = find_peaks(&[0.0, 1.0, 0.0], &PeakParams::unconstrained());
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].index, 1);
        assert_eq!(peaks[0].height, 1.0);
        assert_eq!(peaks[0].prominence, 1.0);
        assert_eq!(peaks[0].extent, (0, 2));
        assert!((peaks[0].width - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_peaks_with_saddle() {
        let peaks = find_peaks(&[0.0, 3.0, 1.0, 2.0, 0.0], &PeakParams::unconstrained());
        let summary: Vec<_> = peaks.iter().map(|p| (p.index, p.height, p.prominence)).collect();
        assert_eq!(summary, vec![(1, 3.0, 3.0), (3, 2.0, 1.0)]);
    }

    #[test]
    fn monotone_has_no_peaks() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        assert!(find_peaks(&x, &PeakParams::unconstrained()).is_empty());
    }

    #[test]
    fn plateau_uses_floor_center() {
        let x = [0.0, 2.0, 2.0, 2.0, 2.0, 0.0];
        assert_eq!(local_maxima(&x), vec![2]);
        // plateau touching the edge is not a peak
        assert!(local_maxima(&[0.0, 1.0, 1.0]).is_empty());
    }

    #[test]
    fn spacing_keeps_higher_then_earlier() {
        let x = [0.0, 2.0, 0.0, 3.0, 0.0, 3.0, 0.0];
        let params = PeakParams { min_spacing: 3, ..PeakParams::unconstrained() };
        let idx: Vec<_> = find_peaks(&x, &params).iter().map(|p| p.index).collect();
        assert_eq!(idx, vec![3]);
    }

    #[test]
    fn width_filter_rejects_wide_blob() {
        let mut x = vec![0.0; 60];
        for v in &mut x[10..40] {
            *v = 1.0;
        }
        let params = PeakParams { min_width: 2.5, max_width: Some(12.0), ..PeakParams::unconstrained() };
        assert!(find_peaks(&x, &params).is_empty());
        let mut y = vec![0.0; 60];
        for v in &mut y[20..24] {
            *v = 1.0;
        }
        let p = find_peaks(&y, &params);
        assert_eq!(p.len(), 1);
        assert!((p[0].width - 4.0).abs() < 1e-12);
    }
}
