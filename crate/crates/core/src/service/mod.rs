//! Directory-level drivers shared by the CLI and the HTTP service: bundle
//! discovery, batch processing, pairing results with ground truth, and
//! suite generation. Both front ends call only these functions.

pub mod http;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::io::{read_json, write_json, GROUNDTRUTH, MANIFEST};
use crate::bundle::{load_bundle, write_bundle, BundleError};
use crate::config::PipelineConfig;
use crate::evaluate::{aggregate, compare, report_csv, report_json, CaseMetrics, EvalError, GroupBy, Report};
use crate::headscan::scans_to_csv;
use crate::pipeline::{process_bundle, PipelineError, ResultsDoc, RESULTS_FILE};
use crate::synth::{generate, InvalidScenario, Scenario};
use crate::types::GroundTruth;

pub const FAILURES_FILE: &str = "failures.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const CONSTRUCTION_FILE: &str = "construction.json";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{segment_id}: {source}")]
    Eval {
        segment_id: String,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Aggregate(EvalError),
    #[error("no ground truth found under {}", .0.display())]
    NoPairsFound(PathBuf),
    #[error(transparent)]
    InvalidScenario(#[from] InvalidScenario),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ServiceError + '_ {
    move |source| ServiceError::Io { path: path.to_path_buf(), source }
}

/// `input` itself when it is a bundle, otherwise its immediate subdirectories
/// that hold a manifest, sorted by path.
pub fn discover_bundles(input: &Path) -> Result<Vec<PathBuf>, ServiceError> {
    if input.join(MANIFEST).is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(input)
        .map_err(io_err(input))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Load, process and write `out_root/<segment_id>/results.json`.
pub fn process_dir(bundle_dir: &Path, out_root: &Path, cfg: &PipelineConfig, force_noisy_flow: bool) -> Result<ResultsDoc, ServiceError> {
    let mut bundle = load_bundle(bundle_dir)?;
    bundle.manifest.noisy_flow |= force_noisy_flow;
    let doc = process_bundle(&bundle, cfg)?;
    write_results(&doc, &out_root.join(&doc.segment_id))?;
    Ok(doc)
}

pub fn write_results(doc: &ResultsDoc, dir: &Path) -> Result<PathBuf, ServiceError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(RESULTS_FILE);
    fs::write(&path, doc.to_json()).map_err(io_err(&path))?;
    Ok(path)
}

pub fn load_results(path: &Path) -> Result<ResultsDoc, ServiceError> {
    Ok(read_json(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessFailure {
    pub bundle: String,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct ProcessSummary {
    pub processed: Vec<String>,
    pub failures: Vec<ProcessFailure>,
}

fn pool(workers: Option<usize>) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .expect("thread pool")
}

/// Process every bundle under `input` on a pool of `workers` threads
/// (default: logical cores). A bundle that fails to load or process is
/// recorded and the rest continue; failures also go to `failures.json`.
pub fn process_all(
    input: &Path,
    output: &Path,
    cfg: &PipelineConfig,
    force_noisy_flow: bool,
    workers: Option<usize>,
) -> Result<ProcessSummary, ServiceError> {
    let dirs = discover_bundles(input)?;
    fs::create_dir_all(output).map_err(io_err(output))?;
    let outcomes: Vec<(String, Result<ResultsDoc, ServiceError>)> = pool(workers).install(|| {
        dirs.par_iter()
            .map(|d| {
                let name = d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                (name, process_dir(d, output, cfg, force_noisy_flow))
            })
            .collect()
    });
    let mut summary = ProcessSummary::default();
    for (name, outcome) in outcomes {
        match outcome {
            Ok(doc) => summary.processed.push(doc.segment_id),
            Err(e) => {
                log::error!("{name}: {e}");
                summary.failures.push(ProcessFailure { bundle: name, error: e.to_string() });
            }
        }
    }
    let failures_path = output.join(FAILURES_FILE);
    if summary.failures.is_empty() {
        if failures_path.is_file() {
            fs::remove_file(&failures_path).map_err(io_err(&failures_path))?;
        }
    } else {
        write_json(&failures_path, &summary.failures)?;
    }
    Ok(summary)
}

/// Ground truth files at `dir/groundtruth.json` or `dir/*/groundtruth.json`,
/// sorted by segment id.
pub fn discover_truth(dir: &Path) -> Result<Vec<GroundTruth>, ServiceError> {
    let mut paths = Vec::new();
    if dir.join(GROUNDTRUTH).is_file() {
        paths.push(dir.join(GROUNDTRUTH));
    }
    if dir.is_dir() {
        for entry in fs::read_dir(dir).map_err(io_err(dir))? {
            let p = entry.map_err(io_err(dir))?.path().join(GROUNDTRUTH);
            if p.is_file() {
                paths.push(p);
            }
        }
    }
    let mut truths = paths.iter().map(|p| read_json::<GroundTruth>(p)).collect::<Result<Vec<_>, _>>()?;
    truths.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
    Ok(truths)
}

/// Pair each ground truth with `results_dir/<segment_id>/results.json`; a
/// missing results file counts as a case with no detection.
pub fn collect_cases(results_dir: &Path, truths: &[GroundTruth], cfg: &PipelineConfig) -> Result<Vec<CaseMetrics>, ServiceError> {
    truths
        .par_iter()
        .map(|gt| {
            let path = results_dir.join(&gt.segment_id).join(RESULTS_FILE);
            if !path.is_file() {
                return Ok(CaseMetrics::no_detection(gt));
            }
            let doc = load_results(&path)?;
            compare(&doc, gt, &cfg.headscan).map_err(|source| ServiceError::Eval { segment_id: gt.segment_id.clone(), source })
        })
        .collect()
}

pub fn evaluate_dirs(results_dir: &Path, truth_dir: &Path, group_by: GroupBy, cfg: &PipelineConfig) -> Result<Report, ServiceError> {
    let truths = discover_truth(truth_dir)?;
    if truths.is_empty() {
        return Err(ServiceError::NoPairsFound(truth_dir.to_path_buf()));
    }
    let cases = collect_cases(results_dir, &truths, cfg)?;
    aggregate(&cases, group_by).map_err(ServiceError::Aggregate)
}

/// Write `report.json` and `report.csv` into `out_dir`.
pub fn write_report(report: &Report, out_dir: &Path) -> Result<(), ServiceError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let json = out_dir.join(REPORT_JSON);
    fs::write(&json, report_json(report)).map_err(io_err(&json))?;
    let csv_path = out_dir.join(REPORT_CSV);
    fs::write(&csv_path, report_csv(report)?).map_err(io_err(&csv_path))?;
    Ok(())
}

/// Scan table of one results document as CSV.
pub fn export_scans(results_path: &Path) -> Result<String, ServiceError> {
    let doc = load_results(results_path)?;
    Ok(scans_to_csv(&doc.evidence.scans, &doc.evidence.timestamps_ms)?)
}

/// Render scenarios into `out_dir/<id>/` bundle directories, each with its
/// ground truth and a `construction.json` describing the intended rules.
pub fn generate_scenarios(scenarios: &[Scenario], out_dir: &Path) -> Result<Vec<String>, ServiceError> {
    for s in scenarios {
        s.validate()?;
    }
    scenarios
        .par_iter()
        .map(|s| {
            let case = generate(s)?;
            let dir = out_dir.join(&s.id);
            write_bundle(&case.bundle, &dir)?;
            write_json(&dir.join(CONSTRUCTION_FILE), &case.construction)?;
            Ok(s.id.clone())
        })
        .collect()
}

/// Scenario catalog JSON: either a bare array or `{"scenarios": [...]}`.
pub fn load_catalog(path: &Path) -> Result<Vec<Scenario>, ServiceError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Catalog {
        Bare(Vec<Scenario>),
        Wrapped { scenarios: Vec<Scenario> },
    }
    let catalog: Catalog = read_json(path)?;
    Ok(match catalog {
        Catalog::Bare(s) | Catalog::Wrapped { scenarios: s } => s,
    })
}
