//! Deterministic scenario generator: renders segment bundles whose ground
//! truth follows analytically from the construction parameters.

mod catalog;
mod render;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{standard_scenarios, standard_suite, Tier};
pub use render::{GeneratedCase, Layout};

use crate::bounds::{BoundsError, EntryRule, ExitRule};
use crate::types::{Geometry, Maneuver, Side, Signage};

pub const PRNG_NAME: &str = "chacha8";
pub const FRAME_RATE: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid scenario {id}: {reason}")]
pub struct InvalidScenario {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaltSpec {
    /// Where the vehicle stops, measured back from the intersection entry
    /// line; negative values stop past the line.
    pub at_distance_before_line: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Distractors {
    pub crosswalk_lines: u32,
    pub road_arrows: u32,
    /// A gentle road curve early in the clip.
    pub curve_instead_of_turn: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Gaussian sigma per flow cell, pixels/frame.
    pub flow_sigma: f64,
    /// Gaussian sigma per ROI pixel, gray levels.
    pub roi_sigma: f64,
    pub detection_dropout_rate: f64,
    /// Uniform +- jitter on box coordinates, pixels.
    pub detection_jitter_px: f64,
}

impl NoiseSpec {
    pub fn is_zero(&self) -> bool {
        *self == NoiseSpec::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub at_distance: f64,
    pub direction: Side,
    pub magnitude_deg: f64,
    pub duration_frames: usize,
}

fn default_clip_length() -> f64 {
    200.0
}

fn default_arrays() -> u8 {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub seed: u64,
    #[serde(default)]
    pub tier: Tier,
    pub signage: Signage,
    pub maneuver: Maneuver,
    #[serde(default = "default_geometry")]
    pub geometry: Geometry,
    /// Cruise speed, m/s.
    pub approach_speed: f64,
    #[serde(default)]
    pub halt: Option<HaltSpec>,
    pub stop_line_present: bool,
    #[serde(default = "default_arrays")]
    pub light_arrays: u8,
    #[serde(default = "default_clip_length")]
    pub clip_length_m: f64,
    #[serde(default)]
    pub distractors: Distractors,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub scans: Vec<ScanSpec>,
    /// Slow down to this speed through the turn.
    #[serde(default)]
    pub turn_speed: Option<f64>,
    /// The sign or lights leave the camera view before the clip ends.
    #[serde(default = "default_true")]
    pub signage_leaves_view: bool,
    /// Tilt of painted lines in the ROI, degrees (counter-clockwise positive).
    #[serde(default)]
    pub line_tilt_deg: f64,
    /// Gaussian yaw noise on head pose, degrees.
    #[serde(default)]
    pub pose_sigma_deg: f64,
}

fn default_geometry() -> Geometry {
    Geometry::FourWay
}

impl Scenario {
    pub fn validate(&self) -> Result<(), InvalidScenario> {
        let fail = |reason: &str| Err(InvalidScenario { id: self.id.clone(), reason: reason.to_string() });
        if self.signage == Signage::None && self.maneuver == Maneuver::Straight {
            return fail("no signage with a straight maneuver is not supported");
        }
        if !(2.0..=20.0).contains(&self.approach_speed) {
            return fail("approach_speed must be within [2, 20] m/s");
        }
        if !(150.0..=400.0).contains(&self.clip_length_m) {
            return fail("clip_length_m must be within [150, 400]");
        }
        if self.signage == Signage::TrafficLight && !(1..=2).contains(&self.light_arrays) {
            return fail("light_arrays must be 1 or 2");
        }
        if let Some(h) = self.halt {
            if !(h.duration_s >= 1.5 && h.duration_s <= 30.0) {
                return fail("halt duration must be within [1.5, 30] s");
            }
            if !(-3.0..=20.0).contains(&h.at_distance_before_line) {
                return fail("halt position must be within 3 m past to 20 m before the line");
            }
        }
        if let Some(v) = self.turn_speed {
            if self.maneuver == Maneuver::Straight || !(v > 0.5 && v <= self.approach_speed) {
                return fail("turn_speed needs a turn and must be within (0.5, approach_speed]");
            }
        }
        if self.distractors.crosswalk_lines > 0 && !self.stop_line_present {
            return fail("crosswalk distractors need a stop line");
        }
        if self.distractors.crosswalk_lines > 3 || self.distractors.road_arrows > 2 {
            return fail("at most 3 crosswalk lines and 2 road arrows");
        }
        if self.distractors.curve_instead_of_turn && self.maneuver == Maneuver::Straight && self.approach_speed > 7.5 {
            return fail("a curve on a straight crossing must be driven at <= 7.5 m/s to stay outside the association window");
        }
        if self.line_tilt_deg.abs() > 4.0 {
            return fail("line tilt must be within +-4 degrees");
        }
        let n = &self.noise;
        if [n.flow_sigma, n.roi_sigma, n.detection_jitter_px, self.pose_sigma_deg].iter().any(|v| !(*v >= 0.0))
            || !(0.0..0.5).contains(&n.detection_dropout_rate)
        {
            return fail("noise parameters must be non-negative and dropout below 0.5");
        }
        for s in &self.scans {
            if !(s.magnitude_deg > 0.0 && s.magnitude_deg <= 135.0) || s.duration_frames == 0 {
                return fail("scan magnitude must be within (0, 135] degrees with a positive duration");
            }
            if !(0.0..self.clip_length_m).contains(&s.at_distance) {
                return fail("scan position outside the clip");
            }
        }
        Ok(())
    }
}

/// What the scenario is built to exercise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionLog {
    pub expected_entry_rule: Option<EntryRule>,
    pub expected_exit_rule: Option<ExitRule>,
    pub expected_failure: Option<BoundsError>,
    pub notes: Vec<String>,
}

pub fn generate(scenario: &Scenario) -> Result<GeneratedCase, InvalidScenario> {
    scenario.validate()?;
    Ok(render::render(scenario))
}
