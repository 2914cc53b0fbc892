use serde::{Deserialize, Serialize};

use super::model::TelemetryRecord;
use super::BundleError;

/// Cumulative distance in meters from the first frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistanceProfile(pub Vec<f64>);

impl DistanceProfile {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn at(&self, frame: usize) -> f64 {
        self.0[frame.min(self.0.len() - 1)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// First frame whose distance is at least `target`, or `None` if the clip
    /// ends first.
    pub fn first_frame_at_or_beyond(&self, target: f64) -> Option<usize> {
        let idx = self.0.partition_point(|&d| d < target);
        (idx < self.0.len()).then_some(idx)
    }

    /// Like [`first_frame_at_or_beyond`](Self::first_frame_at_or_beyond) but
    /// clamps to the last frame; the flag reports whether clamping happened.
    pub fn frame_at_distance(&self, target: f64) -> (usize, bool) {
        match self.first_frame_at_or_beyond(target) {
            Some(f) => (f, false),
            None => (self.0.len() - 1, true),
        }
    }
}

/// Trapezoidal integration of speed over the inter-frame intervals.
pub fn integrate_distance(telemetry: &[TelemetryRecord]) -> Result<DistanceProfile, BundleError> {
    if telemetry.is_empty() {
        return Err(BundleError::EmptyTelemetry);
    }
    let mut out = Vec::with_capacity(telemetry.len());
    let mut acc = 0.0;
    out.push(acc);
    for pair in telemetry.windows(2) {
        let dt = (pair[1].timestamp_ms - pair[0].timestamp_ms) / 1000.0;
        acc += 0.5 * (pair[0].speed + pair[1].speed) * dt;
        out.push(acc);
    }
    Ok(DistanceProfile(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn telemetry(speeds: impl IntoIterator<Item = f64>) -> Vec<TelemetryRecord> {
        speeds
            .into_iter()
            .enumerate()
            .map(|(i, speed)| TelemetryRecord {
                frame_idx: i,
                timestamp_ms: i as f64 * 1000.0 / 30.0,
                speed,
            })
            .collect()
    }

    #[test]
    fn constant_speed() {
        let d = integrate_distance(&telemetry(std::iter::repeat(10.0).take(60))).unwrap();
        assert!((d.0[59] - 59.0 / 3.0).abs() < 1e-9);
        assert!((d.0[59] - 19.667).abs() < 1e-3);
    }

    #[test]
    fn zero_speed() {
        let d = integrate_distance(&telemetry(vec![0.0; 10])).unwrap();
        assert!(d.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn linear_ramp_is_exact() {
        let d = integrate_distance(&telemetry((0..=300).map(|i| i as f64 / 30.0))).unwrap();
        assert!((d.0[300] - 50.0).abs() < 1e-6);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(integrate_distance(&[]), Err(BundleError::EmptyTelemetry)));
    }

    #[test]
    fn frame_lookup() {
        let d = DistanceProfile(vec![0.0, 1.0, 1.0, 2.5, 4.0]);
        assert_eq!(d.first_frame_at_or_beyond(1.0), Some(1));
        assert_eq!(d.first_frame_at_or_beyond(2.0), Some(3));
        assert_eq!(d.frame_at_distance(9.0), (4, true));
    }
}
