use serde::{Deserialize, Serialize};

use crate::types::GroundTruth;

/// Exact miles-per-hour to meters-per-second factor.
pub const MPH_TO_MPS: f64 = 0.44704;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedUnit {
    Mps,
    Mph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

/// Records how a generated bundle was produced, so it can be regenerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub prng: String,
    pub seed: u64,
    pub scenario_id: String,
}

/// Provenance of a clipped segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipInfo {
    pub source_id: String,
    pub mark_latitude: f64,
    pub mark_longitude: f64,
    pub radius_m: f64,
    /// Frame of the source trip that became frame 0.
    pub source_start_frame: usize,
    /// Frame of closest approach to the mark, in clip coordinates.
    pub closest_frame: usize,
    pub truncated_start: bool,
    pub truncated_end: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub segment_id: String,
    pub vehicle_id: String,
    pub frame_rate: f64,
    pub frame_count: usize,
    pub scene_width: u32,
    pub scene_height: u32,
    pub roi_rect: RoiRect,
    pub speed_unit: SpeedUnit,
    pub created_at: String,
    /// Flow is known to be noisy (e.g. wipers on); selects the longer
    /// motion smoothing window.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub noisy_flow: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<ClipInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
}

impl Manifest {
    pub fn validate(&self) -> Result<(), String> {
        if self.frame_count == 0 {
            return Err("frame_count must be > 0".into());
        }
        if !(self.frame_rate > 0.0) {
            return Err("frame_rate must be > 0".into());
        }
        let r = &self.roi_rect;
        if r.width == 0 || r.height == 0 {
            return Err("roi_rect must be non-empty".into());
        }
        if r.x as u64 + r.width as u64 > self.scene_width as u64
            || r.y as u64 + r.height as u64 > self.scene_height as u64
        {
            return Err("roi_rect does not fit inside the scene".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub frame_idx: usize,
    pub timestamp_ms: f64,
    /// Meters per second once loaded.
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub timestamp_ms: f64,
    pub latitude: f64,
    pub longitude: f64,
}

/// Head orientation relative to straight ahead. Positive yaw turns toward
/// the driver's left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPoseRecord {
    pub frame_idx: usize,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Car,
    Truck,
    Bus,
    Bicycle,
    Motorcycle,
    StopSign,
    TrafficLight,
    Person,
}

impl ObjectClass {
    pub fn is_vehicle(self) -> bool {
        matches!(
            self,
            ObjectClass::Car
                | ObjectClass::Truck
                | ObjectClass::Bus
                | ObjectClass::Bicycle
                | ObjectClass::Motorcycle
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionBox {
    pub frame_idx: usize,
    pub class: ObjectClass,
    pub conf: f64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl DetectionBox {
    pub fn center_x(&self) -> f64 {
        self.x + self.w / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Per-frame grayscale ROI strips, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiStack {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl RoiStack {
    pub fn new(frame_count: usize, height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0; frame_count * height * width] }
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width
    }

    pub fn frame_count(&self) -> usize {
        if self.frame_len() == 0 {
            0
        } else {
            self.data.len() / self.frame_len()
        }
    }

    pub fn frame(&self, idx: usize) -> &[u8] {
        let n = self.frame_len();
        &self.data[idx * n..(idx + 1) * n]
    }

    pub fn frame_mut(&mut self, idx: usize) -> &mut [u8] {
        let n = self.frame_len();
        &mut self.data[idx * n..(idx + 1) * n]
    }
}

/// Per-frame grids of mean horizontal image motion (pixels/frame), row-major
/// `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowStack {
    pub cols: usize,
    pub rows: usize,
    pub data: Vec<f32>,
}

impl FlowStack {
    pub fn new(frame_count: usize, cols: usize, rows: usize) -> Self {
        Self { cols, rows, data: vec![0.0; frame_count * cols * rows] }
    }

    pub fn grid_len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn frame_count(&self) -> usize {
        if self.grid_len() == 0 {
            0
        } else {
            self.data.len() / self.grid_len()
        }
    }

    pub fn grid(&self, idx: usize) -> &[f32] {
        let n = self.grid_len();
        &self.data[idx * n..(idx + 1) * n]
    }

    pub fn grid_mut(&mut self, idx: usize) -> &mut [f32] {
        let n = self.grid_len();
        &mut self.data[idx * n..(idx + 1) * n]
    }
}

/// All synchronized feature streams for one intersection clip (or a whole
/// trip, before clipping).
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentBundle {
    pub manifest: Manifest,
    pub telemetry: Vec<TelemetryRecord>,
    pub waypoints: Vec<Waypoint>,
    pub detections: Vec<DetectionBox>,
    pub headpose: Option<Vec<HeadPoseRecord>>,
    pub roi: RoiStack,
    pub flow: FlowStack,
    pub groundtruth: Option<GroundTruth>,
}

impl SegmentBundle {
    pub fn frame_count(&self) -> usize {
        self.manifest.frame_count
    }

    pub fn timestamps_ms(&self) -> Vec<f64> {
        self.telemetry.iter().map(|t| t.timestamp_ms).collect()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.telemetry.iter().map(|t| t.speed).collect()
    }
}
