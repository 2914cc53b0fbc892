//! Runs every stage on one bundle and packages the outcome with all
//! intermediate evidence into a versioned results document.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{infer_bounds, select_scene_context, BoundsError, FusionInput, IntersectionResult};
use crate::bundle::{integrate_distance, BundleError, DistanceProfile, SegmentBundle};
use crate::config::PipelineConfig;
use crate::headscan::{detect_scans, HeadScan};
use crate::motion::{compute_signals, detect_halts, detect_turns, HaltInterval, MotionError, MotionSignals, TurnEvent};
use crate::scene::{filter_detections, signage_evidence, traffic_features, SignageEvidence, TrafficFeatures};
use crate::stopline::{detect_stop_lines, StopLineEvidence};
use crate::types::Signage;

pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const RESULTS_FILE: &str = "results.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Detected { result: IntersectionResult },
    Failed { failure: BoundsError, signage: Signage },
}

impl Outcome {
    pub fn result(&self) -> Option<&IntersectionResult> {
        match self {
            Outcome::Detected { result } => Some(result),
            Outcome::Failed { .. } => None,
        }
    }

    pub fn signage(&self) -> Signage {
        match self {
            Outcome::Detected { result } => result.signage,
            Outcome::Failed { signage, .. } => *signage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub timestamps_ms: Vec<f64>,
    pub speeds_mps: Vec<f64>,
    pub distance_m: DistanceProfile,
    pub motion: MotionSignals,
    pub turns: Vec<TurnEvent>,
    pub halts: Vec<HaltInterval>,
    pub stop_lines: StopLineEvidence,
    pub signage: SignageEvidence,
    pub traffic: TrafficFeatures,
    pub scans: Vec<HeadScan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDoc {
    pub schema_version: u32,
    pub segment_id: String,
    pub frame_rate: f64,
    pub frame_count: usize,
    pub outcome: Outcome,
    pub evidence: Evidence,
}

impl ResultsDoc {
    pub fn fusion_input(&self) -> FusionInput<'_> {
        FusionInput {
            signage: &self.evidence.signage,
            crossings: &self.evidence.stop_lines.crossings,
            turns: &self.evidence.turns,
            halts: &self.evidence.halts,
            distance: &self.evidence.distance_m,
            timestamps_ms: &self.evidence.timestamps_ms,
        }
    }

    /// Re-run the rule table on the serialized evidence.
    pub fn replay(&self, cfg: &PipelineConfig) -> Outcome {
        decide(&self.fusion_input(), &self.evidence.traffic, self.frame_rate, cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }
}

fn decide(input: &FusionInput<'_>, traffic: &TrafficFeatures, frame_rate: f64, cfg: &PipelineConfig) -> Outcome {
    match infer_bounds(input, &cfg.fusion) {
        Ok(mut result) => {
            result.scene = Some(select_scene_context(&result, traffic, frame_rate, &cfg.fusion));
            Outcome::Detected { result }
        }
        Err(failure) => Outcome::Failed { failure, signage: input.signage.signage },
    }
}

pub fn process_bundle(bundle: &SegmentBundle, cfg: &PipelineConfig) -> Result<ResultsDoc, PipelineError> {
    let manifest = &bundle.manifest;
    let frame_rate = manifest.frame_rate;
    let frame_count = bundle.frame_count();
    let timestamps_ms = bundle.timestamps_ms();
    let speeds = bundle.speeds();
    let distance = integrate_distance(&bundle.telemetry)?;

    let stop_lines = detect_stop_lines(&bundle.roi, &distance, &cfg.stopline);
    let motion = compute_signals(&bundle.flow, manifest.noisy_flow, &cfg.motion)?;
    let turns = detect_turns(&motion, &speeds, &distance, frame_rate, &cfg.motion);
    let halts = detect_halts(&speeds, &motion, frame_rate, &cfg.motion);

    let filtered = filter_detections(&bundle.detections, manifest, &cfg.scene);
    let signage = signage_evidence(&filtered, frame_count, frame_rate, &cfg.scene);
    let traffic = traffic_features(&filtered.vehicles, frame_count, frame_rate, &cfg.scene);
    let scans = bundle.headpose.as_deref().map(|p| detect_scans(p, &cfg.headscan)).unwrap_or_default();

    let evidence = Evidence {
        timestamps_ms,
        speeds_mps: speeds,
        distance_m: distance,
        motion,
        turns,
        halts,
        stop_lines,
        signage,
        traffic,
        scans,
    };
    let mut doc = ResultsDoc {
        schema_version: RESULTS_SCHEMA_VERSION,
        segment_id: manifest.segment_id.clone(),
        frame_rate,
        frame_count,
        outcome: Outcome::Failed { failure: BoundsError::Unsupported, signage: Signage::None },
        evidence,
    };
    doc.outcome = doc.replay(cfg);
    Ok(doc)
}
