mod oracles;

use proptest::prelude::*;

use crossroads::evaluate::{dice, dice_frames, Summary};
use crossroads::headscan::{detect_scans, ScanParams};
use crossroads::signal::{find_peaks, local_maxima, moving_median, normalize, NormalizeMode, PeakParams};
use crossroads::bundle::HeadPoseRecord;

fn coarse_signal() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..8).prop_map(|v| v as f64 * 0.25), 0..120)
}

fn peak_params() -> impl Strategy<Value = PeakParams> {
    (
        prop::option::of(0.0..2.0f64),
        0.0..1.5f64,
        0.0..3.0f64,
        prop::option::of(3.0..15.0f64),
        0usize..15,
    )
        .prop_map(|(h, p, w, mw, s)| PeakParams {
            min_height: h.unwrap_or(f64::NEG_INFINITY),
            min_prominence: p,
            min_width: w,
            max_width: mw,
            min_spacing: s,
        })
}

proptest! {
    #[test]
    fn peaks_match_brute_force(x in coarse_signal(), p in peak_params()) {
        prop_assert_eq!(find_peaks(&x, &p), oracles::brute_peaks(&x, &p));
    }

    #[test]
    fn unconstrained_peaks_are_the_local_maxima(x in coarse_signal()) {
        let idx: Vec<usize> = find_peaks(&x, &PeakParams::unconstrained()).iter().map(|p| p.index).collect();
        prop_assert_eq!(idx, local_maxima(&x));
    }

    #[test]
    fn peak_measurements_are_consistent(x in coarse_signal()) {
        for p in find_peaks(&x, &PeakParams::unconstrained()) {
            prop_assert!(p.prominence > 0.0);
            prop_assert!(p.width >= 0.0);
            prop_assert!(p.extent.0 <= p.index && p.index <= p.extent.1);
            prop_assert!(p.width <= (p.extent.1 - p.extent.0) as f64);
        }
    }

    #[test]
    fn moving_median_stays_within_window_range(x in prop::collection::vec(-50.0..50.0f64, 1..80), half in 0usize..6) {
        let w = 2 * half + 1;
        let m = moving_median(&x, w).unwrap();
        prop_assert_eq!(m.len(), x.len());
        for (i, v) in m.iter().enumerate() {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(x.len() - 1);
            let min = x[lo..=hi].iter().copied().fold(f64::INFINITY, f64::min);
            let max = x[lo..=hi].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(*v >= min && *v <= max);
        }
    }

    #[test]
    fn moving_median_keeps_monotone_signals(start in -10.0..10.0f64, steps in prop::collection::vec(0.0..3.0f64, 1..60), half in 0usize..5) {
        let x: Vec<f64> = steps.iter().scan(start, |acc, s| { *acc += s; Some(*acc) }).collect();
        let m = moving_median(&x, 2 * half + 1).unwrap();
        for i in half..x.len().saturating_sub(half) {
            prop_assert_eq!(m[i], x[i]);
        }
    }

    #[test]
    fn normalize_ranges(x in prop::collection::vec(-100.0..100.0f64, 0..60)) {
        for v in normalize(&x, NormalizeMode::MaxAbs) {
            prop_assert!(v.abs() <= 1.0 + 1e-12);
        }
        let mm = normalize(&x, NormalizeMode::MinMax);
        prop_assert_eq!(mm.len(), x.len());
        for v in &mm {
            prop_assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn dice_is_symmetric_and_bounded(a0 in 0.0..100.0f64, la in 0.1..50.0f64, b0 in 0.0..100.0f64, lb in 0.1..50.0f64) {
        let d1 = dice((a0, a0 + la), (b0, b0 + lb)).unwrap();
        let d2 = dice((b0, b0 + lb), (a0, a0 + la)).unwrap();
        prop_assert_eq!(d1, d2);
        prop_assert!((0.0..=1.0).contains(&d1));
        prop_assert_eq!(dice((a0, a0 + la), (a0, a0 + la)).unwrap(), 1.0);
    }

    #[test]
    fn frame_dice_counts_frames(a0 in 0usize..200, la in 0usize..60, b0 in 0usize..200, lb in 0usize..60) {
        let a = (a0, a0 + la);
        let b = (b0, b0 + lb);
        prop_assert!((dice_frames(a, b).unwrap() - oracles::frame_set_dice(a, b)).abs() < 1e-12);
    }

    #[test]
    fn summary_matches_sorted_quantiles(v in prop::collection::vec(-1e3..1e3f64, 1..50)) {
        let s = Summary::of(&v).unwrap();
        prop_assert!(s.q25 <= s.median && s.median <= s.q75);
        prop_assert_eq!(s.median, oracles::sorted_quantile(&v, 0.5));
    }

    #[test]
    fn scans_match_brute_force(
        yaws in prop::collection::vec((-60.0..60.0f64, prop::bool::weighted(0.9), 1usize..3), 0..150),
        threshold in 5.0..40.0f64,
        min_frames in 1usize..8,
    ) {
        let mut frame = 0;
        let pose: Vec<HeadPoseRecord> = yaws
            .iter()
            .map(|&(yaw, valid, step)| {
                frame += step;
                HeadPoseRecord { frame_idx: frame, yaw, pitch: 0.0, roll: 0.0, valid }
            })
            .collect();
        let params = ScanParams { threshold, min_frames, window_half_width_s: 5.0 };
        let scans = detect_scans(&pose, &params);
        prop_assert_eq!(&scans, &oracles::brute_scans(&pose, &params));
        for s in &scans {
            prop_assert!(s.magnitude > threshold);
            prop_assert!(s.start_frame <= s.peak_frame && s.peak_frame <= s.end_frame);
        }
    }
}
