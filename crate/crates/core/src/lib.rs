//! Intersection detection toolkit for naturalistic-driving feature streams.
//!
//! A segment bundle (telemetry, detections, ROI strips, optical-flow grids,
//! head pose) runs through stop-line, motion and scene stages, a rule-based
//! fusion step that yields intersection entry/exit bounds, and head-scan
//! extraction. [`evaluate`] compares results with annotated ground truth and
//! [`synth`] generates scenario bundles with exact truth.

pub mod bounds;
pub mod bundle;
pub mod config;
pub mod evaluate;
pub mod headscan;
pub mod motion;
pub mod pipeline;
pub mod scene;
pub mod service;
pub mod signal;
pub mod stopline;
pub mod synth;
pub mod types;

pub use bounds::{EntryRule, ExitRule, FusionConfig, IntersectionResult};
pub use bundle::{load_bundle, write_bundle, SegmentBundle};
pub use config::PipelineConfig;
pub use pipeline::{process_bundle, Outcome, ResultsDoc};
pub use types::{Geometry, GroundTruth, Maneuver, Side, Signage};
