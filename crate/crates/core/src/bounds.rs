//! Rule-based fusion: associates stop-line crossings and turns with the
//! intersection and derives entry/exit bounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::DistanceProfile;
use crate::motion::{HaltInterval, TurnEvent};
use crate::scene::{SignageEvidence, TrafficFeatures};
use crate::stopline::CrossingEvent;
use crate::types::{Maneuver, Signage};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsError {
    #[error("no signage and no turn: straight crossings without signage are not supported")]
    Unsupported,
    #[error("traffic light without stop-line crossing or density peak")]
    MissingEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub single_array_entry_offset: f64,
    pub multi_array_exit_offset: f64,
    pub single_array_exit_offset: f64,
    pub stop_sign_straight_exit: f64,
    pub halt_near_line_window: f64,
    pub association_window_s: f64,
    /// A crossing up to this long after the anchor still counts as "before" it.
    pub crossing_anchor_slack_s: f64,
    /// Approach span included in the scene summary, before entry.
    pub scene_context_window_s: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            single_array_entry_offset: 15.0,
            multi_array_exit_offset: 2.5,
            single_array_exit_offset: 15.0,
            stop_sign_straight_exit: 30.0,
            halt_near_line_window: 5.0,
            association_window_s: 10.0,
            crossing_anchor_slack_s: 1.0,
            scene_context_window_s: 5.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("single_array_entry_offset", self.single_array_entry_offset),
            ("multi_array_exit_offset", self.multi_array_exit_offset),
            ("single_array_exit_offset", self.single_array_exit_offset),
            ("stop_sign_straight_exit", self.stop_sign_straight_exit),
            ("halt_near_line_window", self.halt_near_line_window),
            ("association_window_s", self.association_window_s),
        ];
        for (name, v) in fields {
            if !(v > 0.0) {
                return Err(format!("fusion.{name} must be positive"));
            }
        }
        if !(self.crossing_anchor_slack_s >= 0.0) || !(self.scene_context_window_s >= 0.0) {
            return Err("fusion slack and context windows must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryRule {
    StopSignLeaveView,
    StopLineCrossing,
    HaltAfterStopLine,
    SingleArrayFallback,
    MultiArrayMinimum,
    TurnStart,
}

impl EntryRule {
    pub const ALL: [EntryRule; 6] = [
        EntryRule::StopSignLeaveView,
        EntryRule::StopLineCrossing,
        EntryRule::HaltAfterStopLine,
        EntryRule::SingleArrayFallback,
        EntryRule::MultiArrayMinimum,
        EntryRule::TurnStart,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitRule {
    TurnEnd,
    StopSignDistance,
    MultiArrayOffset,
    SingleArrayOffset,
}

impl ExitRule {
    pub const ALL: [ExitRule; 4] =
        [ExitRule::TurnEnd, ExitRule::StopSignDistance, ExitRule::MultiArrayOffset, ExitRule::SingleArrayOffset];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub start_frame: usize,
    pub end_frame: usize,
    pub mean_traffic_density: f64,
    pub max_traffic_density: f64,
    pub mean_cross_traffic_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionResult {
    pub signage: Signage,
    pub maneuver: Maneuver,
    pub entry_frame: usize,
    pub exit_frame: usize,
    pub entry_distance: f64,
    pub exit_distance: f64,
    pub entry_rule: EntryRule,
    pub exit_rule: ExitRule,
    pub anchor_frame: usize,
    pub associated_crossing: Option<CrossingEvent>,
    pub associated_turn: Option<TurnEvent>,
    pub halts: Vec<HaltInterval>,
    /// A bound ran past the clip and was clamped.
    pub truncated: bool,
    pub scene: Option<SceneSummary>,
}

/// Everything the rule table reads. Built from detector output or from a
/// serialized results document, which makes bounds replayable.
#[derive(Debug, Clone, Copy)]
pub struct FusionInput<'a> {
    pub signage: &'a SignageEvidence,
    pub crossings: &'a [CrossingEvent],
    pub turns: &'a [TurnEvent],
    pub halts: &'a [HaltInterval],
    pub distance: &'a DistanceProfile,
    pub timestamps_ms: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    pub anchor_frame: usize,
    pub crossing: Option<CrossingEvent>,
    pub turn: Option<TurnEvent>,
}

fn seconds_between(ts: &[f64], a: usize, b: usize) -> f64 {
    let last = ts.len().saturating_sub(1);
    (ts[b.min(last)] - ts[a.min(last)]) / 1000.0
}

/// Without signage the anchor is the frame at half the clip's travel distance.
fn midpoint_frame(distance: &DistanceProfile) -> usize {
    let total = distance.as_slice().last().copied().unwrap_or(0.0);
    distance.first_frame_at_or_beyond(total / 2.0).unwrap_or(0)
}

pub fn associate(input: &FusionInput<'_>, cfg: &FusionConfig) -> Association {
    let ts = input.timestamps_ms;
    let anchor_frame = input.signage.passing_frame().unwrap_or_else(|| midpoint_frame(input.distance));

    let crossing = input
        .crossings
        .iter()
        .filter(|c| {
            let dt = seconds_between(ts, anchor_frame, c.frame_idx);
            dt <= cfg.crossing_anchor_slack_s && -dt <= cfg.association_window_s
        })
        .max_by_key(|c| (c.frame_idx, std::cmp::Reverse(c.track_end_frame)))
        .copied();

    let turn = input
        .turns
        .iter()
        .map(|t| (seconds_between(ts, anchor_frame, t.start_frame).abs(), t))
        .filter(|(gap, _)| *gap <= cfg.association_window_s)
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.start_frame.cmp(&b.1.start_frame)))
        .map(|(_, t)| t.clone());

    Association { anchor_frame, crossing, turn }
}

/// Apply the rule table. See [`EntryRule`] and [`ExitRule`] for the branches.
pub fn infer_bounds(input: &FusionInput<'_>, cfg: &FusionConfig) -> Result<IntersectionResult, BoundsError> {
    let assoc = associate(input, cfg);
    let d = input.distance;
    let last = d.len().saturating_sub(1);
    let clamped = std::cell::Cell::new(false);
    let frame_at = |target: f64| {
        let (f, c) = d.frame_at_distance(target);
        clamped.set(clamped.get() | c);
        f
    };

    let signage = input.signage.signage;
    let (entry_frame, entry_rule) = match signage {
        Signage::StopSign => {
            let passing = assoc.anchor_frame;
            if passing >= last {
                clamped.set(true);
            }
            ((passing + 1).min(last), EntryRule::StopSignLeaveView)
        }
        Signage::TrafficLight => {
            let lights = input.signage.traffic_light.as_ref();
            if let Some(c) = assoc.crossing {
                let halt_end = input
                    .halts
                    .iter()
                    .filter(|h| (d.at(h.end_frame) - c.distance).abs() <= cfg.halt_near_line_window)
                    .map(|h| h.end_frame)
                    .max();
                match halt_end {
                    Some(h) if h > c.frame_idx => (h, EntryRule::HaltAfterStopLine),
                    _ => (c.frame_idx, EntryRule::StopLineCrossing),
                }
            } else {
                match lights {
                    Some(l) if l.peaks.len() >= 2 => (l.passing_frame, EntryRule::MultiArrayMinimum),
                    Some(l) if l.peaks.len() == 1 => {
                        (frame_at(d.at(l.passing_frame) - cfg.single_array_entry_offset), EntryRule::SingleArrayFallback)
                    }
                    _ => return Err(BoundsError::MissingEvidence),
                }
            }
        }
        Signage::None => match &assoc.turn {
            Some(t) => (t.start_frame, EntryRule::TurnStart),
            None => return Err(BoundsError::Unsupported),
        },
    };

    let (exit_frame, exit_rule) = match (&assoc.turn, signage) {
        (Some(t), _) => (t.end_frame, ExitRule::TurnEnd),
        (None, Signage::StopSign) => (frame_at(d.at(entry_frame) + cfg.stop_sign_straight_exit), ExitRule::StopSignDistance),
        (None, Signage::TrafficLight) => match input.signage.traffic_light.as_ref() {
            Some(l) if l.peaks.len() >= 2 => {
                (frame_at(d.at(l.last_visible_frame) + cfg.multi_array_exit_offset), ExitRule::MultiArrayOffset)
            }
            Some(l) => (frame_at(d.at(l.passing_frame) + cfg.single_array_exit_offset), ExitRule::SingleArrayOffset),
            None => (frame_at(d.at(entry_frame) + cfg.single_array_exit_offset), ExitRule::SingleArrayOffset),
        },
        (None, Signage::None) => unreachable!("handled by the entry branch"),
    };

    let mut truncated = clamped.get();
    let (entry_frame, exit_frame) = if exit_frame > entry_frame {
        (entry_frame, exit_frame)
    } else if entry_frame < last {
        truncated |= exit_frame < entry_frame || entry_frame + 1 == last;
        (entry_frame, entry_frame + 1)
    } else {
        truncated = true;
        (last.saturating_sub(1), last)
    };

    Ok(IntersectionResult {
        signage,
        maneuver: assoc.turn.as_ref().map(|t| t.direction.into()).unwrap_or(Maneuver::Straight),
        entry_frame,
        exit_frame,
        entry_distance: d.at(entry_frame),
        exit_distance: d.at(exit_frame),
        entry_rule,
        exit_rule,
        anchor_frame: assoc.anchor_frame,
        associated_crossing: assoc.crossing,
        associated_turn: assoc.turn,
        halts: input.halts.to_vec(),
        truncated,
        scene: None,
    })
}

/// Traffic features averaged over the approach window and the intersection.
pub fn select_scene_context(result: &IntersectionResult, traffic: &TrafficFeatures, frame_rate: f64, cfg: &FusionConfig) -> SceneSummary {
    let n = traffic.density.len();
    let back = (cfg.scene_context_window_s * frame_rate).round() as usize;
    let start_frame = result.entry_frame.saturating_sub(back);
    let end_frame = result.exit_frame.min(n.saturating_sub(1));
    if n == 0 || start_frame > end_frame {
        return SceneSummary {
            start_frame,
            end_frame,
            mean_traffic_density: 0.0,
            max_traffic_density: 0.0,
            mean_cross_traffic_fraction: 0.0,
        };
    }
    let span = &traffic.density[start_frame..=end_frame];
    let cross = &traffic.cross_traffic_fraction[start_frame..=end_frame];
    let len = span.len() as f64;
    SceneSummary {
        start_frame,
        end_frame,
        mean_traffic_density: span.iter().sum::<f64>() / len,
        max_traffic_density: span.iter().copied().fold(0.0, f64::max),
        mean_cross_traffic_fraction: cross.iter().sum::<f64>() / len,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::DensityEvidence;
    use crate::signal::Peak;
    use crate::types::Side;

    const FPS: f64 = 30.0;

    fn ts(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 * 1000.0 / FPS).collect()
    }

    /// Constant speed, metres per frame.
    fn dist(n: usize, mpf: f64) -> DistanceProfile {
        DistanceProfile((0..n).map(|i| i as f64 * mpf).collect())
    }

    fn density(passing: usize, last_visible: usize, peaks: usize) -> DensityEvidence {
        let peak = Peak { index: passing, height: 1.0, prominence: 1.0, width: 10.0, extent: (0, passing) };
        DensityEvidence {
            density: vec![],
            peaks: vec![peak; peaks],
            passing_frame: passing,
            first_visible_frame: 0,
            last_visible_frame: last_visible,
        }
    }

    fn evidence(signage: Signage, d: Option<DensityEvidence>) -> SignageEvidence {
        let (stop_sign, traffic_light) = match signage {
            Signage::StopSign => (d, None),
            _ => (None, d),
        };
        SignageEvidence {
            signage,
            stop_sign_frames: 0,
            traffic_light_frames: 0,
            qualifying_frames: 0,
            contested: false,
            stop_sign,
            traffic_light,
        }
    }

    fn crossing(frame: usize, d: &DistanceProfile) -> CrossingEvent {
        CrossingEvent { frame_idx: frame, distance: d.at(frame), track_end_frame: frame.saturating_sub(3), clamped: false }
    }

    fn turn(start: usize, end: usize, dir: Side) -> TurnEvent {
        TurnEvent {
            direction: dir,
            peak_frame: (start + end) / 2,
            start_frame: start,
            end_frame: end,
            peak_value: dir.sign(),
            distance_span: 20.0,
            speed_at_peak: 8.0,
        }
    }

    struct Case {
        signage: SignageEvidence,
        crossings: Vec<CrossingEvent>,
        turns: Vec<TurnEvent>,
        halts: Vec<HaltInterval>,
        distance: DistanceProfile,
        ts: Vec<f64>,
    }

    impl Case {
        fn new(signage: SignageEvidence, n: usize, mpf: f64) -> Self {
            Self { signage, crossings: vec![], turns: vec![], halts: vec![], distance: dist(n, mpf), ts: ts(n) }
        }
        fn run(&self) -> Result<IntersectionResult, BoundsError> {
            let input = FusionInput {
                signage: &self.signage,
                crossings: &self.crossings,
                turns: &self.turns,
                halts: &self.halts,
                distance: &self.distance,
                timestamps_ms: &self.ts,
            };
            infer_bounds(&input, &FusionConfig::default())
        }
    }

    #[test]
    fn stop_sign_straight() {
        // 30 m at 0.1 m/frame is 300 frames
        let c = Case::new(evidence(Signage::StopSign, Some(density(420, 420, 1))), 1200, 0.1);
        let r = c.run().unwrap();
        assert_eq!((r.entry_frame, r.exit_frame), (421, 721));
        assert_eq!((r.entry_rule, r.exit_rule), (EntryRule::StopSignLeaveView, ExitRule::StopSignDistance));
        assert_eq!(r.maneuver, Maneuver::Straight);
    }

    #[test]
    fn stop_sign_with_turn() {
        let mut c = Case::new(evidence(Signage::StopSign, Some(density(420, 420, 1))), 1200, 0.3);
        c.turns = vec![turn(450, 560, Side::Right)];
        let r = c.run().unwrap();
        assert_eq!((r.entry_frame, r.exit_frame, r.maneuver), (421, 560, Maneuver::Right));
        assert_eq!(r.exit_rule, ExitRule::TurnEnd);
    }

    #[test]
    fn halt_past_line_wins() {
        let mut c = Case::new(evidence(Signage::TrafficLight, Some(density(320, 500, 1))), 900, 0.3);
        c.distance = DistanceProfile(
            (0..900)
                .map(|i| match i {
                    0..=300 => i as f64 * 0.3,
                    301..=450 => 90.0 + 2.0,
                    _ => 92.0 + (i - 450) as f64 * 0.3,
                })
                .collect(),
        );
        c.crossings = vec![CrossingEvent { frame_idx: 300, distance: 90.0, track_end_frame: 296, clamped: false }];
        c.halts = vec![HaltInterval { start_frame: 301, end_frame: 450, min_speed: 0.0 }];
        let r = c.run().unwrap();
        assert_eq!(r.entry_frame, 450);
        assert_eq!(r.entry_rule, EntryRule::HaltAfterStopLine);
    }

    #[test]
    fn halt_far_from_line_ignored() {
        let mut c = Case::new(evidence(Signage::TrafficLight, Some(density(320, 500, 1))), 900, 0.3);
        c.crossings = vec![crossing(300, &c.distance)];
        c.halts = vec![HaltInterval { start_frame: 100, end_frame: 150, min_speed: 0.0 }];
        let r = c.run().unwrap();
        assert_eq!((r.entry_frame, r.entry_rule), (300, EntryRule::StopLineCrossing));
        // single array: passing + 15 m at 0.3 m/frame
        assert_eq!((r.exit_frame, r.exit_rule), (370, ExitRule::SingleArrayOffset));
    }

    #[test]
    fn nearest_crossing_before_anchor() {
        let mut c = Case::new(evidence(Signage::TrafficLight, Some(density(360, 500, 1))), 900, 0.3);
        c.crossings = vec![crossing(120, &c.distance), crossing(330, &c.distance)];
        assert_eq!(c.run().unwrap().entry_frame, 330);
    }

    #[test]
    fn crossing_outside_window_ignored() {
        let mut c = Case::new(evidence(Signage::TrafficLight, Some(density(700, 700, 1))), 900, 0.3);
        c.crossings = vec![crossing(100, &c.distance)];
        let r = c.run().unwrap();
        assert_eq!(r.entry_rule, EntryRule::SingleArrayFallback);
        assert_eq!(r.entry_frame, 650);
    }

    #[test]
    fn multi_array_without_crossing() {
        let c = Case::new(evidence(Signage::TrafficLight, Some(density(400, 480, 2))), 900, 0.25);
        let r = c.run().unwrap();
        assert_eq!((r.entry_frame, r.entry_rule), (400, EntryRule::MultiArrayMinimum));
        assert_eq!((r.exit_frame, r.exit_rule), (490, ExitRule::MultiArrayOffset));
    }

    #[test]
    fn missing_light_evidence() {
        let c = Case::new(evidence(Signage::TrafficLight, Some(density(400, 480, 0))), 900, 0.25);
        assert_eq!(c.run(), Err(BoundsError::MissingEvidence));
    }

    #[test]
    fn signage_none() {
        let mut c = Case::new(evidence(Signage::None, None), 1000, 0.2);
        assert_eq!(c.run(), Err(BoundsError::Unsupported));
        c.turns = vec![turn(510, 640, Side::Left)];
        let r = c.run().unwrap();
        assert_eq!((r.entry_frame, r.exit_frame, r.maneuver), (510, 640, Maneuver::Left));
        assert_eq!((r.entry_rule, r.exit_rule), (EntryRule::TurnStart, ExitRule::TurnEnd));
    }

    #[test]
    fn turn_association_window() {
        let mut c = Case::new(evidence(Signage::StopSign, Some(density(420, 420, 1))), 2000, 0.1);
        c.turns = vec![turn(420 + 60, 600, Side::Left)];
        assert_eq!(c.run().unwrap().maneuver, Maneuver::Left);
        c.turns = vec![turn(1400, 1500, Side::Left)];
        assert_eq!(c.run().unwrap().maneuver, Maneuver::Straight);
    }

    #[test]
    fn exit_clamped_at_clip_end() {
        let c = Case::new(evidence(Signage::StopSign, Some(density(420, 420, 1))), 500, 0.1);
        let r = c.run().unwrap();
        assert!(r.truncated);
        assert_eq!(r.exit_frame, 499);
        assert!(r.entry_frame < r.exit_frame);
    }

    #[test]
    fn scene_summary() {
        let c = Case::new(evidence(Signage::StopSign, Some(density(420, 420, 1))), 1200, 0.1);
        let r = c.run().unwrap();
        let flat = TrafficFeatures { density: vec![3.0; 1200], cross_traffic_fraction: vec![0.5; 1200] };
        let s = select_scene_context(&r, &flat, FPS, &FusionConfig::default());
        assert_eq!(s.mean_traffic_density, 3.0);
        assert_eq!(s.start_frame, 271);
        let empty = TrafficFeatures { density: vec![0.0; 1200], cross_traffic_fraction: vec![0.0; 1200] };
        assert_eq!(select_scene_context(&r, &empty, FPS, &FusionConfig::default()).max_traffic_density, 0.0);
        let ramp = TrafficFeatures { density: (0..1200).map(|i| i as f64).collect(), cross_traffic_fraction: vec![0.0; 1200] };
        let s = select_scene_context(&r, &ramp, FPS, &FusionConfig::default());
        assert_eq!(s.mean_traffic_density, (271 + 721) as f64 / 2.0);
    }
}
