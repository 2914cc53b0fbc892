//! Small vocabulary types shared across pipeline stages.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signage {
    None,
    StopSign,
    TrafficLight,
}

impl Signage {
    pub const ALL: [Signage; 3] = [Signage::None, Signage::StopSign, Signage::TrafficLight];

    pub fn as_str(self) -> &'static str {
        match self {
            Signage::None => "none",
            Signage::StopSign => "stop_sign",
            Signage::TrafficLight => "traffic_light",
        }
    }
}

impl fmt::Display for Signage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maneuver {
    Left,
    Right,
    Straight,
}

impl Maneuver {
    pub const ALL: [Maneuver; 3] = [Maneuver::Left, Maneuver::Right, Maneuver::Straight];

    pub fn as_str(self) -> &'static str {
        match self {
            Maneuver::Left => "left",
            Maneuver::Right => "right",
            Maneuver::Straight => "straight",
        }
    }
}

impl fmt::Display for Maneuver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lateral side, used for turn direction and head-scan direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// Positive values map to the driver's left.
    pub fn from_sign(value: f64) -> Side {
        if value > 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl From<Side> for Maneuver {
    fn from(side: Side) -> Self {
        match side {
            Side::Left => Maneuver::Left,
            Side::Right => Maneuver::Right,
        }
    }
}

/// Intersection shape. Annotation metadata only; never derived by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    FourWay,
    T,
    Y,
}

/// Manually annotated intersection bounds for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub segment_id: String,
    pub entry_frame: usize,
    pub exit_frame: usize,
    pub signage: Signage,
    pub maneuver: Maneuver,
    pub geometry: Geometry,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<(), String> {
        if self.entry_frame >= self.exit_frame {
            return Err(format!(
                "entry_frame ({}) must be before exit_frame ({})",
                self.entry_frame, self.exit_frame
            ));
        }
        Ok(())
    }
}
