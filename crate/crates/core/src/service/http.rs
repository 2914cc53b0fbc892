//! Local HTTP service backing the marking, review and annotation workbench.
//!
//! Layout under the data root:
//! `trips/<id>/` full-trip bundles, `segments/<id>/` clipped bundles,
//! `results/<id>/results.json`, `annotations/<id>/groundtruth.json`.
//! Inputs under `trips/` and `segments/` are never modified after creation.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use super::{collect_cases, process_dir, ServiceError};
use crate::bundle::io::{read_json, write_json, GROUNDTRUTH, MANIFEST, ROI, ROI_MAGIC};
use crate::bundle::{clip_segment, load_bundle, write_bundle, BundleError, Manifest, DEFAULT_CLIP_RADIUS_M};
use crate::config::PipelineConfig;
use crate::evaluate::{aggregate, GroupBy};
use crate::pipeline::RESULTS_FILE;
use crate::types::GroundTruth;

pub const API_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub segment_id: String,
    pub state: JobState,
    /// Unix milliseconds.
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
    pub error: Option<String>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl JobRecord {
    pub fn new(segment_id: &str) -> Self {
        JobRecord { segment_id: segment_id.to_string(), state: JobState::Pending, started_at: None, finished_at: None, error: None }
    }

    pub fn is_active(&self) -> bool {
        matches!(self.state, JobState::Pending | JobState::Running)
    }

    /// Move to `next`; states only move forward and finished jobs stay put.
    pub fn advance(&mut self, next: JobState) -> bool {
        if next <= self.state || !self.is_active() {
            return false;
        }
        match next {
            JobState::Running => self.started_at = Some(now_ms()),
            JobState::Done | JobState::Failed => self.finished_at = Some(now_ms()),
            JobState::Pending => {}
        }
        self.state = next;
        true
    }
}

pub struct AppState {
    pub data_root: PathBuf,
    pub config: PipelineConfig,
    jobs: Mutex<BTreeMap<String, JobRecord>>,
    workers: Semaphore,
    marks: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(data_root: PathBuf, config: PipelineConfig, workers: usize) -> Arc<Self> {
        Arc::new(AppState {
            data_root,
            config,
            jobs: Mutex::new(BTreeMap::new()),
            workers: Semaphore::new(workers.max(1)),
            marks: tokio::sync::Mutex::new(()),
        })
    }

    pub fn trips_dir(&self) -> PathBuf {
        self.data_root.join("trips")
    }

    pub fn segments_dir(&self) -> PathBuf {
        self.data_root.join("segments")
    }

    pub fn results_dir(&self) -> PathBuf {
        self.data_root.join("results")
    }

    pub fn annotations_dir(&self) -> PathBuf {
        self.data_root.join("annotations")
    }

    fn segment(&self, id: &str) -> Result<PathBuf, ApiError> {
        let dir = self.segments_dir().join(checked_id(id)?);
        if dir.join(MANIFEST).is_file() {
            Ok(dir)
        } else {
            Err(ApiError::not_found(format!("segment {id}")))
        }
    }

    fn trip(&self, id: &str) -> Result<PathBuf, ApiError> {
        let dir = self.trips_dir().join(checked_id(id)?);
        if dir.join(MANIFEST).is_file() {
            Ok(dir)
        } else {
            Err(ApiError::not_found(format!("trip {id}")))
        }
    }

    /// Annotated ground truth, falling back to the one shipped in the bundle.
    fn truth_for(&self, id: &str) -> Result<Option<GroundTruth>, ServiceError> {
        for p in [self.annotations_dir().join(id).join(GROUNDTRUTH), self.segments_dir().join(id).join(GROUNDTRUTH)] {
            if p.is_file() {
                return Ok(Some(read_json(&p)?));
            }
        }
        Ok(None)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{} not found", what.into()))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_failed", message)
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Bundle(BundleError::MarkOutsideTrip { .. }) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "mark_outside_trip", e.to_string())
            }
            ServiceError::Bundle(_) | ServiceError::Pipeline(_) | ServiceError::Eval { .. } => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", e.to_string())
            }
            ServiceError::NoPairsFound(_) | ServiceError::Aggregate(_) => {
                Self::new(StatusCode::NOT_FOUND, "no_pairs_found", e.to_string())
            }
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
        }
    }
}

impl From<BundleError> for ApiError {
    fn from(e: BundleError) -> Self {
        ServiceError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "schema_version": API_VERSION,
            "error": { "code": self.code, "message": self.message },
        });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Ids become directory names; keep them to a safe character set.
fn checked_id(id: &str) -> ApiResult<&str> {
    let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')) && !id.starts_with('.');
    if ok {
        Ok(id)
    } else {
        Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_id", format!("invalid id {id:?}")))
    }
}

fn versioned(mut value: Value) -> Json<Value> {
    if let Value::Object(map) = &mut value {
        map.insert("schema_version".into(), json!(API_VERSION));
    }
    Json(value)
}

fn list_ids(dir: &Path) -> Vec<String> {
    let mut ids: Vec<String> = fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .filter(|e| e.path().join(MANIFEST).is_file())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default();
    ids.sort();
    ids
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
}

async fn list_trips(State(st): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let dir = st.trips_dir();
    let trips = blocking(move || {
        list_ids(&dir)
            .into_iter()
            .filter_map(|id| {
                let m: Manifest = read_json(&dir.join(&id).join(MANIFEST)).ok()?;
                Some(json!({ "trip_id": id, "frame_count": m.frame_count, "frame_rate": m.frame_rate }))
            })
            .collect::<Vec<_>>()
    })
    .await?;
    Ok(versioned(json!({ "trips": trips })))
}

async fn trip_waypoints(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let dir = st.trip(&id)?;
    let bundle = blocking(move || load_bundle(&dir)).await??;
    Ok(versioned(json!({ "trip_id": id, "waypoints": bundle.waypoints })))
}

#[derive(Debug, Deserialize)]
struct MarkRequest {
    latitude: f64,
    longitude: f64,
    #[serde(default)]
    radius_m: Option<f64>,
}

async fn create_mark(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<MarkRequest>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let trip_dir = st.trip(&id)?;
    if !(req.latitude.abs() <= 90.0 && req.longitude.abs() <= 180.0) {
        return Err(ApiError::invalid("latitude/longitude out of range"));
    }
    let radius = req.radius_m.unwrap_or(DEFAULT_CLIP_RADIUS_M);
    if !(radius > 0.0) {
        return Err(ApiError::invalid("radius_m must be positive"));
    }
    let _guard = st.marks.lock().await;
    let segments = st.segments_dir();
    let segment_id = blocking(move || -> Result<String, ServiceError> {
        let trip = load_bundle(&trip_dir)?;
        let mut clip = clip_segment(&trip, req.latitude, req.longitude, radius)?;
        let n = (1..).find(|n| !segments.join(format!("{id}-m{n}")).exists()).expect("unbounded");
        let segment_id = format!("{id}-m{n}");
        clip.manifest.segment_id = segment_id.clone();
        if let Some(gt) = clip.groundtruth.as_mut() {
            gt.segment_id = segment_id.clone();
        }
        write_bundle(&clip, &segments.join(&segment_id))?;
        Ok(segment_id)
    })
    .await??;
    Ok((StatusCode::CREATED, versioned(json!({ "segment_id": segment_id }))))
}

async fn list_segments(State(st): State<Arc<AppState>>) -> Json<Value> {
    let ids = list_ids(&st.segments_dir());
    let jobs = st.jobs.lock().expect("jobs lock").clone();
    let segments: Vec<Value> = ids
        .into_iter()
        .map(|id| {
            let processed = st.results_dir().join(&id).join(RESULTS_FILE).is_file();
            let job = jobs.get(&id).cloned();
            json!({ "segment_id": id, "processed": processed, "job": job })
        })
        .collect();
    versioned(json!({ "segments": segments }))
}

async fn process_segment(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let dir = st.segment(&id)?;
    {
        let mut jobs = st.jobs.lock().expect("jobs lock");
        if jobs.get(&id).is_some_and(|j| j.is_active()) {
            return Err(ApiError::new(StatusCode::CONFLICT, "conflict", format!("segment {id} is already being processed")));
        }
        jobs.insert(id.clone(), JobRecord::new(&id));
    }
    let set = |state: JobState, error: Option<String>| {
        let mut jobs = st.jobs.lock().expect("jobs lock");
        let job = jobs.get_mut(&id).expect("job registered");
        job.advance(state);
        if error.is_some() {
            job.error = error;
        }
        job.clone()
    };
    let permit = st.workers.acquire().await.expect("semaphore open");
    set(JobState::Running, None);
    let (results, cfg) = (st.results_dir(), st.config.clone());
    let outcome = tokio::task::spawn_blocking(move || process_dir(&dir, &results, &cfg, false)).await;
    drop(permit);
    match outcome {
        Ok(Ok(doc)) => {
            let job = set(JobState::Done, None);
            Ok(versioned(json!({ "job": job, "outcome": doc.outcome })))
        }
        Ok(Err(e)) => {
            set(JobState::Failed, Some(e.to_string()));
            Err(e.into())
        }
        Err(e) => {
            set(JobState::Failed, Some(e.to_string()));
            Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
        }
    }
}

async fn segment_job(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    st.segment(&id)?;
    let job = st.jobs.lock().expect("jobs lock").get(&id).cloned();
    match job {
        Some(job) => Ok(versioned(json!({ "job": job }))),
        None => Err(ApiError::not_found(format!("job for {id}"))),
    }
}

async fn segment_results(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    st.segment(&id)?;
    let path = st.results_dir().join(&id).join(RESULTS_FILE);
    match tokio::fs::read(&path).await {
        // results documents carry their own schema_version
        Ok(bytes) => Ok(([(axum::http::header::CONTENT_TYPE, "application/json")], bytes).into_response()),
        Err(_) => Err(ApiError::not_found(format!("results for {id}"))),
    }
}

async fn get_groundtruth(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    st.segment(&id)?;
    match st.truth_for(&id)? {
        Some(gt) => Ok(versioned(json!({ "groundtruth": gt }))),
        None => Err(ApiError::not_found(format!("ground truth for {id}"))),
    }
}

async fn put_groundtruth(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(gt): Json<GroundTruth>,
) -> ApiResult<Json<Value>> {
    let dir = st.segment(&id)?;
    gt.validate().map_err(ApiError::invalid)?;
    if gt.segment_id != id {
        return Err(ApiError::invalid(format!("segment_id {} does not match {id}", gt.segment_id)));
    }
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    if gt.exit_frame >= manifest.frame_count {
        return Err(ApiError::invalid(format!("exit_frame beyond the {} frames of the segment", manifest.frame_count)));
    }
    let out = st.annotations_dir().join(&id);
    fs::create_dir_all(&out).map_err(|source| ServiceError::Io { path: out.clone(), source })?;
    write_json(&out.join(GROUNDTRUTH), &gt)?;
    Ok(versioned(json!({ "groundtruth": gt })))
}

#[derive(Debug, Deserialize)]
struct EvalQuery {
    group_by: Option<String>,
}

async fn evaluation(State(st): State<Arc<AppState>>, Query(q): Query<EvalQuery>) -> ApiResult<Json<Value>> {
    let group_by: GroupBy = match q.group_by.as_deref() {
        Some(s) => s.parse().map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e))?,
        None => GroupBy::default(),
    };
    let state = st.clone();
    let report = blocking(move || -> Result<_, ServiceError> {
        let mut truths = Vec::new();
        for id in list_ids(&state.segments_dir()) {
            if let Some(gt) = state.truth_for(&id)? {
                truths.push(gt);
            }
        }
        if truths.is_empty() {
            return Err(ServiceError::NoPairsFound(state.segments_dir()));
        }
        let cases = collect_cases(&state.results_dir(), &truths, &state.config)?;
        aggregate(&cases, group_by).map_err(ServiceError::Aggregate)
    })
    .await??;
    Ok(Json(serde_json::to_value(report).expect("report serializes")))
}

/// One ROI frame read straight from `roi.bin` without loading the bundle.
pub fn read_roi_frame(bundle_dir: &Path, frame: usize) -> Result<Option<(usize, usize, Vec<u8>)>, ServiceError> {
    let path = bundle_dir.join(ROI);
    let io = |source| ServiceError::Io { path: path.clone(), source };
    let mut f = fs::File::open(&path).map_err(io)?;
    let mut header = [0u8; 16];
    f.read_exact(&mut header).map_err(io)?;
    if &header[..4] != ROI_MAGIC {
        return Err(BundleError::SchemaViolation { file: path.clone(), index: None, message: "bad magic".into() }.into());
    }
    let dim = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
    let (frames, height, width) = (dim(0), dim(1), dim(2));
    if frame >= frames {
        return Ok(None);
    }
    let len = height * width;
    f.seek(SeekFrom::Start(16 + (frame * len) as u64)).map_err(io)?;
    let mut pixels = vec![0u8; len];
    f.read_exact(&mut pixels).map_err(io)?;
    Ok(Some((height, width, pixels)))
}

async fn roi_frame(State(st): State<Arc<AppState>>, UrlPath((id, n)): UrlPath<(String, usize)>) -> ApiResult<Json<Value>> {
    let dir = st.segment(&id)?;
    match blocking(move || read_roi_frame(&dir, n)).await?? {
        Some((height, width, pixels)) => Ok(versioned(json!({
            "segment_id": id,
            "frame": n,
            "height": height,
            "width": width,
            "encoding": "base64-u8-row-major",
            "pixels": base64::engine::general_purpose::STANDARD.encode(pixels),
        }))),
        None => Err(ApiError::not_found(format!("frame {n} of {id}"))),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/trips", get(list_trips))
        .route("/trips/{id}/waypoints", get(trip_waypoints))
        .route("/trips/{id}/marks", post(create_mark))
        .route("/segments", get(list_segments))
        .route("/segments/{id}/process", post(process_segment))
        .route("/segments/{id}/job", get(segment_job))
        .route("/segments/{id}/results", get(segment_results))
        .route("/segments/{id}/groundtruth", get(get_groundtruth).put(put_groundtruth))
        .route("/segments/{id}/frames/{n}/roi", get(roi_frame))
        .route("/evaluation", get(evaluation))
        .with_state(state)
}

pub async fn serve(addr: std::net::SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
