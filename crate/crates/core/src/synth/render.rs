use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ConstructionLog, Scenario, FRAME_RATE, PRNG_NAME};
use crate::bounds::{BoundsError, EntryRule, ExitRule};
use crate::bundle::{
    geo, integrate_distance, DetectionBox, DistanceProfile, FlowStack, GeneratorInfo, HeadPoseRecord, Manifest,
    ObjectClass, RoiRect, RoiStack, SegmentBundle, SpeedUnit, TelemetryRecord, Waypoint,
};
use crate::types::{GroundTruth, Maneuver, Signage};

pub const ROI_WIDTH: usize = 320;
pub const ROI_HEIGHT: usize = 100;
const SCENE_WIDTH: u32 = 1920;
const SCENE_HEIGHT: u32 = 1080;

/// Painted markings are visible between these distances ahead.
const MARK_NEAR_M: f64 = 1.0;
const MARK_FAR_M: f64 = 9.0;
const MARK_TOP_ROW: f64 = 2.0;
const MARK_BOTTOM_ROW: f64 = 94.0;
const BAND_HALF_ROWS: f64 = 3.0;
const MARK_LEVEL: f64 = 220.0;
const ARROW_HALF_WIDTH: usize = 30;
const ARROW_LENGTH_M: f64 = 3.0;

const RADIAL_GAIN: f64 = 0.08;
const PERIPHERAL_BIAS: f64 = 0.15;
const FOCAL_PX: f64 = 1000.0;

const BRAKE_MPS2: f64 = 2.5;
const ACCEL_MPS2: f64 = 2.0;
const RESUME_MPS: f64 = 1.0;

const STOP_SIGN_RANGE_M: f64 = 60.0;
const LIGHT_RANGE_M: f64 = 150.0;

/// Road positions (meters from clip start) of everything the renderer draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub entry_m: f64,
    pub stop_line_m: Option<f64>,
    pub crosswalks_m: Vec<f64>,
    /// Near and far ends of each arrow.
    pub arrows_m: Vec<(f64, f64)>,
    /// (start, end, signed peak heading rate in rad/m); positive turns left.
    pub turn: Option<(f64, f64, f64)>,
    pub curve: Option<(f64, f64, f64)>,
    pub halt_m: Option<f64>,
    pub stop_sign_leave_m: Option<f64>,
    pub light_leave_m: Vec<f64>,
    /// Exit distance of a straight crossing.
    pub straight_exit_m: f64,
    /// Slow zone `[start, end]` for crawling through the turn.
    pub crawl_zone_m: Option<(f64, f64)>,
}

fn pulse_rate(angle: f64, start: f64, end: f64, sign: f64) -> (f64, f64, f64) {
    (start, end, sign * angle * PI / (2.0 * (end - start)))
}

impl Layout {
    pub fn for_scenario(sc: &Scenario) -> Layout {
        let e = sc.clip_length_m / 2.0 - 10.0;
        let beyond = sc.clip_length_m + 20.0;
        let turn = match sc.maneuver {
            Maneuver::Right => Some(pulse_rate(PI / 2.0, e + 2.0, e + 14.0, -1.0)),
            Maneuver::Left => Some(pulse_rate(PI / 2.0, e + 8.0, e + 30.0, 1.0)),
            Maneuver::Straight => None,
        };
        let curve = sc.distractors.curve_instead_of_turn.then(|| pulse_rate(20f64.to_radians(), 5.0, 45.0, 1.0));
        let (stop_sign_leave_m, light_leave_m, straight_exit_m) = match sc.signage {
            Signage::StopSign => (Some(if sc.signage_leaves_view { e } else { beyond }), vec![], e + 30.0),
            Signage::TrafficLight if sc.light_arrays >= 2 => {
                let far = e + (2.5 * sc.approach_speed).max(22.5);
                let leaves = if sc.signage_leaves_view { vec![e, far] } else { vec![beyond, beyond + 20.0] };
                (None, leaves, far + 2.5)
            }
            Signage::TrafficLight => {
                let leave = if sc.signage_leaves_view { e + 15.0 } else { beyond };
                (None, vec![leave], e + 30.0)
            }
            Signage::None => (None, vec![], e + 30.0),
        };
        Layout {
            entry_m: e,
            stop_line_m: sc.stop_line_present.then_some(e),
            crosswalks_m: (0..sc.distractors.crosswalk_lines).map(|i| e - 30.0 - 2.5 * i as f64).collect(),
            arrows_m: (0..sc.distractors.road_arrows)
                .map(|i| {
                    let near = e - 7.0 - 6.0 * i as f64;
                    (near, near + ARROW_LENGTH_M)
                })
                .collect(),
            turn,
            curve,
            halt_m: sc.halt.map(|h| e - h.at_distance_before_line),
            stop_sign_leave_m,
            light_leave_m,
            straight_exit_m,
            crawl_zone_m: match (sc.turn_speed, turn) {
                (Some(_), Some((s, t, _))) => Some((s - 5.0, t)),
                _ => None,
            },
        }
    }

    /// Heading rate (rad/m) at road position `s`.
    fn heading_rate(&self, s: f64) -> f64 {
        [self.turn, self.curve]
            .iter()
            .flatten()
            .filter(|(a, b, _)| s > *a && s < *b)
            .map(|(a, b, peak)| peak * (PI * (s - a) / (b - a)).sin())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCase {
    pub scenario: Scenario,
    pub layout: Layout,
    pub bundle: SegmentBundle,
    pub truth: GroundTruth,
    pub construction: ConstructionLog,
}

struct Kinematics {
    speeds: Vec<f64>,
    halt_frames: Option<(usize, usize)>,
}

fn simulate(sc: &Scenario, layout: &Layout) -> Kinematics {
    let dt = 1.0 / FRAME_RATE;
    let cruise = sc.approach_speed;
    let mut speeds = vec![cruise];
    let mut s = 0.0;
    let mut halt_pending = layout.halt_m;
    let mut halted: Option<(usize, usize)> = None; // (first frame, frames remaining)
    let mut halt_frames = None;
    let hold_frames = sc.halt.map(|h| (h.duration_s * FRAME_RATE).round() as usize).unwrap_or(0);
    let mut k = 0usize;
    while s < sc.clip_length_m - 1e-6 {
        k += 1;
        let prev = speeds[k - 1];
        let v = if let Some((first, remaining)) = halted {
            if remaining > 0 {
                halted = Some((first, remaining - 1));
                0.0
            } else {
                halted = None;
                halt_frames = Some((first, k - 1));
                RESUME_MPS.min(cruise)
            }
        } else if let Some(h) = halt_pending.filter(|h| h - s <= 0.02) {
            let _ = h;
            halt_pending = None;
            halted = Some((k, hold_frames.saturating_sub(1)));
            0.0
        } else {
            let mut v = cruise.min(prev + ACCEL_MPS2 * dt);
            if let Some(h) = halt_pending {
                v = v.min((2.0 * BRAKE_MPS2 * (h - s).max(0.0)).sqrt());
            }
            if let (Some((zs, ze)), Some(slow)) = (layout.crawl_zone_m, sc.turn_speed) {
                if s < zs {
                    v = v.min((slow * slow + 2.0 * BRAKE_MPS2 * (zs - s)).sqrt());
                } else if s <= ze {
                    v = v.min(slow);
                }
            }
            v
        };
        s += (prev + v) / 2.0 * dt;
        speeds.push(v);
    }
    if let Some((first, _)) = halted {
        halt_frames = Some((first, speeds.len() - 1));
    }
    Kinematics { speeds, halt_frames }
}

fn frame_at_or_beyond(d: &DistanceProfile, target: f64) -> usize {
    d.frame_at_distance(target).0
}

/// Last frame at or before `target`.
fn frame_at_or_before(d: &DistanceProfile, target: f64) -> usize {
    d.as_slice().partition_point(|&x| x <= target).saturating_sub(1)
}

fn mark_row(gap: f64) -> f64 {
    MARK_TOP_ROW + (MARK_FAR_M - gap) / (MARK_FAR_M - MARK_NEAR_M) * (MARK_BOTTOM_ROW - MARK_TOP_ROW)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn render_roi(sc: &Scenario, layout: &Layout, d: &DistanceProfile) -> RoiStack {
    let n = d.len();
    let mut roi = RoiStack::new(n, ROI_HEIGHT, ROI_WIDTH);
    let mut rng = rng_for(sc.seed, 1);
    let noise = (sc.noise.roi_sigma > 0.0).then(|| Normal::new(0.0, sc.noise.roi_sigma).expect("finite sigma"));
    let cx = (ROI_WIDTH as f64 - 1.0) / 2.0;
    let slope = -sc.line_tilt_deg.to_radians().tan();
    let lines: Vec<f64> = layout.stop_line_m.iter().chain(&layout.crosswalks_m).copied().collect();
    let mut canvas = vec![0.0f64; ROI_HEIGHT * ROI_WIDTH];
    for f in 0..n {
        let s = d.at(f);
        for r in 0..ROI_HEIGHT {
            canvas[r * ROI_WIDTH..(r + 1) * ROI_WIDTH].fill(80.0 + 0.3 * r as f64);
        }
        for &line in &lines {
            let gap = line - s;
            if !(MARK_NEAR_M..=MARK_FAR_M).contains(&gap) {
                continue;
            }
            let center = mark_row(gap);
            for x in 0..ROI_WIDTH {
                // triangular cross-section so the brightest row is unambiguous
                let c = center + (x as f64 - cx) * slope;
                let lo = (c - BAND_HALF_ROWS).ceil().max(0.0) as usize;
                let hi = ((c + BAND_HALF_ROWS).floor() as usize + 1).min(ROI_HEIGHT);
                for r in lo..hi {
                    let weight = 1.0 - (r as f64 - c).abs() / BAND_HALF_ROWS;
                    let px = &mut canvas[r * ROI_WIDTH + x];
                    *px = px.max(*px + weight * (MARK_LEVEL - *px));
                }
            }
        }
        for &(near, far) in &layout.arrows_m {
            let (g0, g1) = ((near - s).max(MARK_NEAR_M), (far - s).min(MARK_FAR_M));
            if g0 >= g1 {
                continue;
            }
            let top = mark_row(g1).round().max(0.0) as usize;
            let bottom = (mark_row(g0).round() as usize).min(ROI_HEIGHT - 1);
            let mid = ROI_WIDTH / 2;
            for r in top..=bottom {
                for x in mid - ARROW_HALF_WIDTH..mid + ARROW_HALF_WIDTH {
                    canvas[r * ROI_WIDTH + x] = MARK_LEVEL;
                }
            }
        }
        let frame = roi.frame_mut(f);
        for (px, &v) in frame.iter_mut().zip(&canvas) {
            let v = match &noise {
                Some(nd) => v + nd.sample(&mut rng),
                None => v,
            };
            *px = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    roi
}

fn render_flow(sc: &Scenario, layout: &Layout, speeds: &[f64], d: &DistanceProfile) -> FlowStack {
    let (cols, rows) = (12usize, 4usize);
    let mut flow = FlowStack::new(speeds.len(), cols, rows);
    let mut rng = rng_for(sc.seed, 2);
    let noise = (sc.noise.flow_sigma > 0.0).then(|| Normal::new(0.0, sc.noise.flow_sigma).expect("finite sigma"));
    for (f, &v) in speeds.iter().enumerate() {
        let rotation = FOCAL_PX * layout.heading_rate(d.at(f)) * v / FRAME_RATE;
        let grid = flow.grid_mut(f);
        for r in 0..rows {
            for c in 0..cols {
                let radial = (c as f64 - 5.5) * RADIAL_GAIN * v;
                let bias = if c == 5 || c == 6 { 0.0 } else { PERIPHERAL_BIAS * v };
                let mut u = radial + bias + rotation;
                if let Some(nd) = &noise {
                    u += nd.sample(&mut rng);
                }
                grid[r * cols + c] = u as f32;
            }
        }
    }
    flow
}

fn scaled(gap: f64, reference: f64) -> f64 {
    reference / (gap + reference)
}

fn render_detections(sc: &Scenario, layout: &Layout, d: &DistanceProfile) -> Vec<DetectionBox> {
    let mut rng = rng_for(sc.seed, 3);
    let mut out = Vec::new();
    let (w_max, h_max) = (SCENE_WIDTH as f64, SCENE_HEIGHT as f64);
    let e = layout.entry_m;
    for f in 0..d.len() {
        let s = d.at(f);
        let mut frame: Vec<(ObjectClass, f64, f64, f64, f64)> = Vec::new();
        if let Some(leave) = layout.stop_sign_leave_m {
            let gap = leave - s;
            if gap > 0.0 && gap <= STOP_SIGN_RANGE_M {
                let k = scaled(gap, 6.0);
                let h = 140.0 * k;
                frame.push((ObjectClass::StopSign, 1400.0 + 300.0 * k - h / 2.0, 450.0 - 250.0 * k, h, h));
            }
        }
        for (j, &leave) in layout.light_leave_m.iter().enumerate() {
            let gap = leave - s;
            if gap > 0.0 && gap <= LIGHT_RANGE_M {
                let k = scaled(gap, 25.0);
                let h = 80.0 * k;
                let cx = if j == 0 { 920.0 } else { 1000.0 };
                frame.push((ObjectClass::TrafficLight, cx - 0.2 * h, 300.0 - 200.0 * k, 0.4 * h, h));
            }
        }
        frame.push((ObjectClass::Car, 860.0, 600.0, 180.0, 150.0));
        if (e - 40.0..e - 15.0).contains(&s) {
            let progress = (s - (e - 40.0)) / 25.0;
            frame.push((ObjectClass::Car, 200.0 + 1200.0 * progress, 560.0, 300.0, 110.0));
        }
        for (class, x, y, w, h) in frame {
            if sc.noise.detection_dropout_rate > 0.0 && rng.gen::<f64>() < sc.noise.detection_dropout_rate {
                continue;
            }
            let j = sc.noise.detection_jitter_px;
            let mut jit = |v: f64| if j > 0.0 { v + rng.gen_range(-j..=j) } else { v };
            let (x, y, w, h) = (jit(x), jit(y), jit(w), jit(h));
            let (w, h) = (w.max(1.0), h.max(1.0));
            let x = x.clamp(0.0, w_max - w);
            let y = y.clamp(0.0, h_max - h);
            out.push(DetectionBox { frame_idx: f, class, conf: 0.85, x, y, w, h });
        }
    }
    out
}

fn render_headpose(sc: &Scenario, d: &DistanceProfile) -> Vec<HeadPoseRecord> {
    let n = d.len();
    let mut yaw = vec![0.0; n];
    for scan in &sc.scans {
        let start = frame_at_or_beyond(d, scan.at_distance);
        let len = scan.duration_frames as f64;
        for k in 0..scan.duration_frames {
            if let Some(y) = yaw.get_mut(start + k) {
                *y += scan.direction.sign() * scan.magnitude_deg * (PI * (k as f64 + 0.5) / len).sin();
            }
        }
    }
    let mut rng = rng_for(sc.seed, 4);
    let noise = (sc.pose_sigma_deg > 0.0).then(|| Normal::new(0.0, sc.pose_sigma_deg).expect("finite sigma"));
    yaw.iter()
        .enumerate()
        .map(|(f, &y)| {
            let y = match &noise {
                Some(nd) => y + nd.sample(&mut rng),
                None => y,
            };
            HeadPoseRecord { frame_idx: f, yaw: y.clamp(-180.0, 180.0), pitch: -5.0, roll: 0.0, valid: true }
        })
        .collect()
}

fn waypoints(sc: &Scenario, timestamps: &[f64], d: &DistanceProfile) -> Vec<Waypoint> {
    let (lat0, lon0) = (42.3601, -71.0589);
    let heading = (sc.seed % 360) as f64 * PI / 180.0;
    let step = (2.0 * FRAME_RATE) as usize;
    (0..timestamps.len())
        .step_by(step)
        .map(|f| {
            let (lat, lon) = geo::offset(lat0, lon0, heading, d.at(f));
            Waypoint { timestamp_ms: timestamps[f], latitude: lat, longitude: lon }
        })
        .collect()
}

fn construct_truth(sc: &Scenario, layout: &Layout, kin: &Kinematics, d: &DistanceProfile) -> (GroundTruth, ConstructionLog) {
    let last = d.len() - 1;
    let entry_line = frame_at_or_beyond(d, layout.entry_m);
    let mut notes = Vec::new();
    let mut failure = None;
    let turn_frames = layout.turn.map(|(a, b, _)| (frame_at_or_before(d, a), frame_at_or_beyond(d, b)));

    let (entry, entry_rule) = match sc.signage {
        Signage::StopSign => (entry_line, EntryRule::StopSignLeaveView),
        Signage::TrafficLight => {
            let past_line_halt = sc.halt.filter(|h| h.at_distance_before_line <= 0.0);
            match (sc.stop_line_present, past_line_halt, kin.halt_frames) {
                (true, Some(_), Some((_, end))) => {
                    notes.push("halts just past the stop line: entry at the end of the halt".into());
                    (end, EntryRule::HaltAfterStopLine)
                }
                (true, _, _) => (entry_line, EntryRule::StopLineCrossing),
                (false, _, _) if sc.light_arrays >= 2 => (entry_line, EntryRule::MultiArrayMinimum),
                (false, _, _) => (entry_line, EntryRule::SingleArrayFallback),
            }
        }
        Signage::None => {
            let (start, _) = turn_frames.expect("validated: no signage implies a turn");
            (start, EntryRule::TurnStart)
        }
    };
    let (exit, exit_rule) = match (turn_frames, sc.signage) {
        (Some((_, end)), _) => (end, ExitRule::TurnEnd),
        (None, Signage::StopSign) => (frame_at_or_beyond(d, d.at(entry) + 30.0), ExitRule::StopSignDistance),
        (None, Signage::TrafficLight) if sc.light_arrays >= 2 => {
            (frame_at_or_beyond(d, layout.straight_exit_m), ExitRule::MultiArrayOffset)
        }
        (None, _) => (frame_at_or_beyond(d, layout.straight_exit_m), ExitRule::SingleArrayOffset),
    };

    if sc.signage == Signage::TrafficLight && !sc.stop_line_present && !sc.signage_leaves_view {
        notes.push("lights never leave the view and there is no stop line".into());
        failure = Some(BoundsError::MissingEvidence);
    }
    if let Some(v) = sc.turn_speed {
        if v < crate::motion::MotionConfig::default().min_turn_speed_mps && sc.signage == Signage::None {
            notes.push("turn driven below the minimum turn speed: seen as going straight without signage".into());
            failure = Some(BoundsError::Unsupported);
        }
    }
    if !layout.crosswalks_m.is_empty() {
        notes.push(format!("{} crosswalk line(s) before the stop line", layout.crosswalks_m.len()));
    }
    if !layout.arrows_m.is_empty() {
        notes.push(format!("{} road arrow(s) before the stop line", layout.arrows_m.len()));
    }
    if layout.curve.is_some() {
        notes.push("road curve early in the clip".into());
    }

    let exit = exit.min(last).max(entry + 1);
    let truth = GroundTruth {
        segment_id: sc.id.clone(),
        entry_frame: entry,
        exit_frame: exit,
        signage: sc.signage,
        maneuver: sc.maneuver,
        geometry: sc.geometry,
    };
    let log = ConstructionLog {
        expected_entry_rule: failure.is_none().then_some(entry_rule),
        expected_exit_rule: failure.is_none().then_some(exit_rule),
        expected_failure: failure,
        notes,
    };
    (truth, log)
}

pub(super) fn render(sc: &Scenario) -> GeneratedCase {
    let layout = Layout::for_scenario(sc);
    let kin = simulate(sc, &layout);
    let n = kin.speeds.len();
    let timestamps: Vec<f64> = (0..n).map(|k| k as f64 * 1000.0 / FRAME_RATE).collect();
    let telemetry: Vec<TelemetryRecord> = kin
        .speeds
        .iter()
        .enumerate()
        .map(|(k, &speed)| TelemetryRecord { frame_idx: k, timestamp_ms: timestamps[k], speed })
        .collect();
    let d = integrate_distance(&telemetry).expect("non-empty telemetry");

    let (truth, construction) = construct_truth(sc, &layout, &kin, &d);
    let manifest = Manifest {
        segment_id: sc.id.clone(),
        vehicle_id: "synthetic".into(),
        frame_rate: FRAME_RATE,
        frame_count: n,
        scene_width: SCENE_WIDTH,
        scene_height: SCENE_HEIGHT,
        roi_rect: RoiRect { x: 800, y: 700, width: ROI_WIDTH as u32, height: ROI_HEIGHT as u32 },
        speed_unit: SpeedUnit::Mps,
        created_at: "2024-01-01T00:00:00Z".into(),
        noisy_flow: sc.noise.flow_sigma > 0.0,
        clip: None,
        generator: Some(GeneratorInfo { prng: PRNG_NAME.into(), seed: sc.seed, scenario_id: sc.id.clone() }),
    };
    let bundle = SegmentBundle {
        waypoints: waypoints(sc, &timestamps, &d),
        detections: render_detections(sc, &layout, &d),
        headpose: Some(render_headpose(sc, &d)),
        roi: render_roi(sc, &layout, &d),
        flow: render_flow(sc, &layout, &kin.speeds, &d),
        telemetry,
        groundtruth: Some(truth.clone()),
        manifest,
    };
    GeneratedCase { scenario: sc.clone(), layout, bundle, truth, construction }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{Distractors, HaltSpec, NoiseSpec, Tier};
    use crate::types::Geometry;

    fn base(signage: Signage, maneuver: Maneuver) -> Scenario {
        Scenario {
            id: "t".into(),
            seed: 7,
            tier: Tier::Clean,
            signage,
            maneuver,
            geometry: Geometry::FourWay,
            approach_speed: 8.0,
            halt: None,
            stop_line_present: true,
            light_arrays: 1,
            clip_length_m: 200.0,
            distractors: Distractors::default(),
            noise: NoiseSpec::default(),
            scans: vec![],
            turn_speed: None,
            signage_leaves_view: true,
            line_tilt_deg: 0.0,
            pose_sigma_deg: 0.0,
        }
    }

    #[test]
    fn constant_speed_clip() {
        let case = render(&base(Signage::StopSign, Maneuver::Straight));
        let d = integrate_distance(&case.bundle.telemetry).unwrap();
        assert!(d.as_slice().last().unwrap() >= &199.99);
        assert_eq!(case.bundle.frame_count(), 751);
        // 90 m at 8 m/s is frame 337.5
        assert_eq!(case.truth.entry_frame, 338);
        assert_eq!(case.truth.exit_frame, frame_at_or_beyond(&d, d.at(338) + 30.0));
    }

    #[test]
    fn halt_stops_at_position() {
        let mut sc = base(Signage::TrafficLight, Maneuver::Straight);
        sc.halt = Some(HaltSpec { at_distance_before_line: -1.0, duration_s: 6.0 });
        let layout = Layout::for_scenario(&sc);
        let kin = simulate(&sc, &layout);
        let (a, b) = kin.halt_frames.unwrap();
        assert_eq!(b - a + 1, 180);
        assert!(kin.speeds[a..=b].iter().all(|&v| v == 0.0));
        assert_eq!(kin.speeds[b + 1], RESUME_MPS);
        let case = render(&sc);
        let d = integrate_distance(&case.bundle.telemetry).unwrap();
        assert!((d.at(a) - 91.0).abs() < 0.05);
        assert_eq!(case.truth.entry_frame, b);
        assert_eq!(case.construction.expected_entry_rule, Some(EntryRule::HaltAfterStopLine));
    }

    #[test]
    fn band_rows_follow_gap() {
        assert_eq!(mark_row(9.0), 2.0);
        assert_eq!(mark_row(1.0), 94.0);
        let sc = base(Signage::TrafficLight, Maneuver::Straight);
        let case = render(&sc);
        let d = integrate_distance(&case.bundle.telemetry).unwrap();
        let f = frame_at_or_beyond(&d, 85.0);
        let gap = 90.0 - d.at(f);
        let centre = mark_row(gap);
        let frame = case.bundle.roi.frame(f);
        let column: Vec<u8> = (0..ROI_HEIGHT).map(|r| frame[r * ROI_WIDTH + 10]).collect();
        let brightest = (0..ROI_HEIGHT).max_by_key(|&r| column[r]).unwrap();
        assert!((brightest as f64 - centre).abs() <= 0.5);
        assert!(column[brightest] >= 200);
        assert!(column[centre.round() as usize + 10] < 120);
    }

    #[test]
    fn turn_flow_sign() {
        let case = render(&base(Signage::None, Maneuver::Left));
        let (a, b, _) = case.layout.turn.unwrap();
        let d = integrate_distance(&case.bundle.telemetry).unwrap();
        let mid = frame_at_or_beyond(&d, (a + b) / 2.0);
        let g = case.bundle.flow.grid(mid);
        assert!(g[5] > 0.0 && g[6] > 0.0);
        let flat = case.bundle.flow.grid(10);
        assert_eq!(flat[5] + flat[6], 0.0);
    }

    #[test]
    fn crawl_slows_in_zone() {
        let mut sc = base(Signage::None, Maneuver::Right);
        sc.turn_speed = Some(1.8);
        let case = render(&sc);
        let (zs, ze) = case.layout.crawl_zone_m.unwrap();
        let d = integrate_distance(&case.bundle.telemetry).unwrap();
        for (f, r) in case.bundle.telemetry.iter().enumerate() {
            if d.at(f) >= zs + 0.5 && d.at(f) <= ze {
                assert!(r.speed <= 1.8 + 1e-9);
            }
        }
        assert_eq!(case.construction.expected_failure, Some(BoundsError::Unsupported));
    }
}
