//! Comparison of pipeline results with ground-truth annotations, and the
//! aggregate report (medians with interquartile ranges, RMSE, rates).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::headscan::{scans_in_bounds, scans_in_window, ScanParams};
use crate::pipeline::{Outcome, ResultsDoc, RESULTS_SCHEMA_VERSION};
use crate::types::{Geometry, GroundTruth, Maneuver, Signage};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("degenerate interval [{0}, {1}]")]
    DegenerateInterval(f64, f64),
    #[error("results are for {results}, ground truth for {truth}")]
    SegmentMismatch { results: String, truth: String },
    #[error("results schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("ground truth frames outside the clip of {0} frames")]
    TruthOutOfRange(usize),
    #[error("no cases to aggregate")]
    EmptyCases,
}

/// Dice coefficient of two continuous intervals `[start, end]`.
pub fn dice(a: (f64, f64), b: (f64, f64)) -> Result<f64, EvalError> {
    for &(s, e) in &[a, b] {
        if !(e > s) {
            return Err(EvalError::DegenerateInterval(s, e));
        }
    }
    let overlap = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    Ok(2.0 * overlap / ((a.1 - a.0) + (b.1 - b.0)))
}

/// Dice of inclusive frame intervals; frame `f` covers `[f, f + 1)`.
pub fn dice_frames(a: (usize, usize), b: (usize, usize)) -> Result<f64, EvalError> {
    dice((a.0 as f64, a.1 as f64 + 1.0), (b.0 as f64, b.1 as f64 + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Unsupported,
    MissingEvidence,
    NoDetection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub segment_id: String,
    pub truth_signage: Signage,
    pub truth_maneuver: Maneuver,
    pub geometry: Geometry,
    pub failure: Option<FailureKind>,
    pub estimated_signage: Option<Signage>,
    pub estimated_maneuver: Option<Maneuver>,
    pub entry_time_error: Option<f64>,
    /// Estimated minus true entry time; positive when late.
    pub signed_entry_time_error: Option<f64>,
    pub entry_distance_error: Option<f64>,
    pub dice: Option<f64>,
    pub signage_match: Option<bool>,
    pub maneuver_match: Option<bool>,
    pub scan_count_diff_bounds: Option<u64>,
    pub scan_count_diff_window: Option<u64>,
}

impl CaseMetrics {
    fn failed(gt: &GroundTruth, kind: FailureKind, signage: Option<Signage>) -> Self {
        CaseMetrics {
            segment_id: gt.segment_id.clone(),
            truth_signage: gt.signage,
            truth_maneuver: gt.maneuver,
            geometry: gt.geometry,
            failure: Some(kind),
            estimated_signage: signage,
            estimated_maneuver: None,
            entry_time_error: None,
            signed_entry_time_error: None,
            entry_distance_error: None,
            dice: None,
            signage_match: None,
            maneuver_match: None,
            scan_count_diff_bounds: None,
            scan_count_diff_window: None,
        }
    }

    /// A case for ground truth with no results document.
    pub fn no_detection(gt: &GroundTruth) -> Self {
        Self::failed(gt, FailureKind::NoDetection, None)
    }
}

pub fn compare(doc: &ResultsDoc, gt: &GroundTruth, scan_params: &ScanParams) -> Result<CaseMetrics, EvalError> {
    if doc.schema_version != RESULTS_SCHEMA_VERSION {
        return Err(EvalError::SchemaVersion { found: doc.schema_version, expected: RESULTS_SCHEMA_VERSION });
    }
    if doc.segment_id != gt.segment_id {
        return Err(EvalError::SegmentMismatch { results: doc.segment_id.clone(), truth: gt.segment_id.clone() });
    }
    if gt.exit_frame >= doc.frame_count {
        return Err(EvalError::TruthOutOfRange(doc.frame_count));
    }
    let result = match &doc.outcome {
        Outcome::Detected { result } => result,
        Outcome::Failed { failure, signage } => {
            let kind = match failure {
                crate::bounds::BoundsError::Unsupported => FailureKind::Unsupported,
                crate::bounds::BoundsError::MissingEvidence => FailureKind::MissingEvidence,
            };
            return Ok(CaseMetrics::failed(gt, kind, Some(*signage)));
        }
    };
    let ev = &doc.evidence;
    let t = |f: usize| ev.timestamps_ms[f] / 1000.0;
    let signed = t(result.entry_frame) - t(gt.entry_frame);
    let distance_error = (ev.distance_m.at(result.entry_frame) - ev.distance_m.at(gt.entry_frame)).abs();
    let overlap = dice_frames((result.entry_frame, result.exit_frame), (gt.entry_frame, gt.exit_frame))?;

    let in_bounds = |a, b| scans_in_bounds(&ev.scans, a, b).len() as i64;
    let in_window = |anchor| {
        scans_in_window(&ev.scans, anchor, scan_params.window_half_width_s, doc.frame_rate, doc.frame_count) as i64
    };
    let diff_bounds = in_bounds(result.entry_frame, result.exit_frame) - in_bounds(gt.entry_frame, gt.exit_frame);
    let diff_window = in_window(result.entry_frame) - in_window(gt.entry_frame);

    Ok(CaseMetrics {
        segment_id: gt.segment_id.clone(),
        truth_signage: gt.signage,
        truth_maneuver: gt.maneuver,
        geometry: gt.geometry,
        failure: None,
        estimated_signage: Some(result.signage),
        estimated_maneuver: Some(result.maneuver),
        entry_time_error: Some(signed.abs()),
        signed_entry_time_error: Some(signed),
        entry_distance_error: Some(distance_error),
        dice: Some(overlap),
        signage_match: Some(result.signage == gt.signage),
        maneuver_match: Some(result.maneuver == gt.maneuver),
        scan_count_diff_bounds: Some(diff_bounds.unsigned_abs()),
        scan_count_diff_window: Some(diff_window.unsigned_abs()),
    })
}

/// Percentile with linear interpolation between closest ranks
/// (position `p * (n - 1)` in the sorted data). `sorted` must be ascending.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Summary { median: percentile(&v, 0.5), q25: percentile(&v, 0.25), q75: percentile(&v, 0.75) })
    }
}

pub fn rmse(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some((v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    None,
    Signage,
    Maneuver,
    /// Both signage and maneuver groups, as in the published table.
    #[default]
    Table,
}

impl std::str::FromStr for GroupBy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(GroupBy::None),
            "signage" => Ok(GroupBy::Signage),
            "maneuver" => Ok(GroupBy::Maneuver),
            "table" => Ok(GroupBy::Table),
            other => Err(format!("unknown grouping {other:?} (none, signage, maneuver, table)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub variable: String,
    pub category: String,
    pub count: usize,
    pub detected: usize,
    pub failures: BTreeMap<FailureKind, usize>,
    pub detection_rate: f64,
    pub entry_time_error: Option<Summary>,
    pub entry_distance_error: Option<Summary>,
    pub dice: Option<Summary>,
    pub signed_entry_time_error: Option<Summary>,
    pub rmse_entry_time: Option<f64>,
    pub rmse_entry_distance: Option<f64>,
    pub pct_entry_time_within_1s: Option<f64>,
    pub pct_entry_distance_within_10m: Option<f64>,
    pub pct_dice_above_075: Option<f64>,
    pub pct_dice_above_05: Option<f64>,
    pub signage_accuracy: Option<f64>,
    pub maneuver_accuracy: Option<f64>,
    pub scan_diff_bounds_histogram: BTreeMap<u64, usize>,
    pub scan_diff_window_histogram: BTreeMap<u64, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub group_by: GroupBy,
    pub overall: GroupReport,
    pub groups: Vec<GroupReport>,
    pub cases: Vec<CaseMetrics>,
}

fn pct(hits: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| 100.0 * hits as f64 / n as f64)
}

pub fn summarize_group(variable: &str, category: &str, cases: &[&CaseMetrics]) -> GroupReport {
    let ok: Vec<&CaseMetrics> = cases.iter().copied().filter(|c| c.failure.is_none()).collect();
    let col = |f: fn(&CaseMetrics) -> Option<f64>| ok.iter().filter_map(|c| f(c)).collect::<Vec<f64>>();
    let time = col(|c| c.entry_time_error);
    let dist = col(|c| c.entry_distance_error);
    let dice = col(|c| c.dice);
    let signed = col(|c| c.signed_entry_time_error);
    let mut failures = BTreeMap::new();
    for c in cases {
        if let Some(k) = c.failure {
            *failures.entry(k).or_insert(0) += 1;
        }
    }
    let hist = |f: fn(&CaseMetrics) -> Option<u64>| {
        let mut h = BTreeMap::new();
        for v in ok.iter().filter_map(|c| f(c)) {
            *h.entry(v).or_insert(0) += 1;
        }
        h
    };
    let n = ok.len();
    GroupReport {
        variable: variable.to_string(),
        category: category.to_string(),
        count: cases.len(),
        detected: n,
        failures,
        detection_rate: if cases.is_empty() { 0.0 } else { 100.0 * n as f64 / cases.len() as f64 },
        entry_time_error: Summary::of(&time),
        entry_distance_error: Summary::of(&dist),
        dice: Summary::of(&dice),
        signed_entry_time_error: Summary::of(&signed),
        rmse_entry_time: rmse(&time),
        rmse_entry_distance: rmse(&dist),
        pct_entry_time_within_1s: pct(time.iter().filter(|&&v| v <= 1.0).count(), n),
        pct_entry_distance_within_10m: pct(dist.iter().filter(|&&v| v <= 10.0).count(), n),
        pct_dice_above_075: pct(dice.iter().filter(|&&v| v > 0.75).count(), n),
        pct_dice_above_05: pct(dice.iter().filter(|&&v| v > 0.5).count(), n),
        signage_accuracy: pct(ok.iter().filter(|c| c.signage_match == Some(true)).count(), n),
        maneuver_accuracy: pct(ok.iter().filter(|c| c.maneuver_match == Some(true)).count(), n),
        scan_diff_bounds_histogram: hist(|c| c.scan_count_diff_bounds),
        scan_diff_window_histogram: hist(|c| c.scan_count_diff_window),
    }
}

pub const SIGNAGE_VARIABLE: &str = "Signage type";
pub const MANEUVER_VARIABLE: &str = "Maneuver performed";

pub fn signage_label(s: Signage) -> &'static str {
    match s {
        Signage::None => "None",
        Signage::StopSign => "Stop sign",
        Signage::TrafficLight => "Traffic light",
    }
}

pub fn maneuver_label(m: Maneuver) -> &'static str {
    match m {
        Maneuver::Left => "Left",
        Maneuver::Right => "Right",
        Maneuver::Straight => "Straight",
    }
}

/// Aggregate per-case metrics. Cases are sorted by segment id first, so the
/// report does not depend on input order.
pub fn aggregate(cases: &[CaseMetrics], group_by: GroupBy) -> Result<Report, EvalError> {
    if cases.is_empty() {
        return Err(EvalError::EmptyCases);
    }
    let mut cases = cases.to_vec();
    cases.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
    let all: Vec<&CaseMetrics> = cases.iter().collect();
    let overall = summarize_group("All", "All", &all);

    let mut groups = Vec::new();
    if matches!(group_by, GroupBy::Signage | GroupBy::Table) {
        for s in Signage::ALL {
            let members: Vec<&CaseMetrics> = all.iter().copied().filter(|c| c.truth_signage == s).collect();
            groups.push(summarize_group(SIGNAGE_VARIABLE, signage_label(s), &members));
        }
    }
    if matches!(group_by, GroupBy::Maneuver | GroupBy::Table) {
        for m in Maneuver::ALL {
            let members: Vec<&CaseMetrics> = all.iter().copied().filter(|c| c.truth_maneuver == m).collect();
            groups.push(summarize_group(MANEUVER_VARIABLE, maneuver_label(m), &members));
        }
    }
    if group_by == GroupBy::None {
        groups.push(overall.clone());
    }
    Ok(Report { schema_version: REPORT_SCHEMA_VERSION, group_by, overall, groups, cases })
}

pub const TABLE_COLUMNS: [&str; 6] = [
    "Variable",
    "Categories",
    "Count",
    "Entry point time error (seconds)",
    "Entry point distance error (meters)",
    "Intersection segment overlap",
];

/// `median [q25 – q75]` with the given number of decimals, or `NA`.
pub fn format_cell(summary: Option<Summary>, decimals: usize) -> String {
    match summary {
        Some(s) => format!("{:.d$} [{:.d$} \u{2013} {:.d$}]", s.median, s.q25, s.q75, d = decimals),
        None => "NA".to_string(),
    }
}

/// Table-style CSV: one row per group, the variable name only on the first
/// row of each variable block.
pub fn report_csv(report: &Report) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_COLUMNS)?;
    let mut previous: Option<&str> = None;
    for g in &report.groups {
        let variable = if previous == Some(g.variable.as_str()) { "" } else { g.variable.as_str() };
        previous = Some(g.variable.as_str());
        w.write_record([
            variable.to_string(),
            g.category.clone(),
            g.count.to_string(),
            format_cell(g.entry_time_error, 2),
            format_cell(g.entry_distance_error, 1),
            format_cell(g.dice, 2),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn report_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}
