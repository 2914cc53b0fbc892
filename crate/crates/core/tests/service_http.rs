use std::fs;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use crossroads::bundle::write_bundle;
use crossroads::config::PipelineConfig;
use crossroads::pipeline::RESULTS_FILE;
use crossroads::service::http::{router, AppState};
use crossroads::service::process_all;
use crossroads::synth::{generate, standard_scenarios, Scenario, Tier};

struct Fixture {
    _dir: tempfile::TempDir,
    state: Arc<AppState>,
}

fn scenario(i: usize) -> Scenario {
    standard_scenarios(Tier::Clean).remove(i)
}

/// One long trip plus two ready-made segments.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut trip = scenario(0);
    trip.id = "trip1".into();
    trip.clip_length_m = 400.0;
    write_bundle(&generate(&trip).unwrap().bundle, &root.join("trips/trip1")).unwrap();
    for i in [1, 2] {
        let s = scenario(i);
        write_bundle(&generate(&s).unwrap().bundle, &root.join("segments").join(&s.id)).unwrap();
    }
    let state = AppState::new(root.to_path_buf(), PipelineConfig::default(), 2);
    Fixture { _dir: dir, state }
}

async fn call(state: &Arc<AppState>, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = router(state.clone()).oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(state: &Arc<AppState>, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(state, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn error_code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap_or("")
}

#[tokio::test]
async fn trips_and_marks() {
    let fx = fixture();
    let st = &fx.state;
    let (status, trips) = call_json(st, Method::GET, "/trips", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(trips["schema_version"], 1);
    assert_eq!(trips["trips"][0]["trip_id"], "trip1");

    let (status, wp) = call_json(st, Method::GET, "/trips/trip1/waypoints", None).await;
    assert_eq!(status, StatusCode::OK);
    let points = wp["waypoints"].as_array().unwrap();
    let mid = &points[points.len() / 2];
    let mark = json!({ "latitude": mid["latitude"], "longitude": mid["longitude"], "radius_m": 80.0 });

    let (status, made) = call_json(st, Method::POST, "/trips/trip1/marks", Some(mark.clone())).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(made["segment_id"], "trip1-m1");
    let (_, again) = call_json(st, Method::POST, "/trips/trip1/marks", Some(mark)).await;
    assert_eq!(again["segment_id"], "trip1-m2");

    let (_, gt) = call_json(st, Method::GET, "/segments/trip1-m1/groundtruth", None).await;
    assert_eq!(gt["groundtruth"]["segment_id"], "trip1-m1");

    // about 5 km north of the route
    let far = json!({ "latitude": mid["latitude"].as_f64().unwrap() + 0.045, "longitude": mid["longitude"] });
    let (status, err) = call_json(st, Method::POST, "/trips/trip1/marks", Some(far)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_code(&err), "mark_outside_trip");

    let (status, _) = call_json(st, Method::POST, "/trips/nope/marks", Some(json!({"latitude": 0.0, "longitude": 0.0}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, err) = call_json(st, Method::GET, "/trips/..%2Fx/waypoints", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&err), "bad_id");
}

#[tokio::test]
async fn processing_results_and_jobs() {
    let fx = fixture();
    let st = &fx.state;
    let id = scenario(1).id;

    let (status, err) = call_json(st, Method::GET, &format!("/segments/{id}/results"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["schema_version"], 1);
    let (status, _) = call_json(st, Method::GET, &format!("/segments/{id}/job"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, done) = call_json(st, Method::POST, &format!("/segments/{id}/process"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(done["job"]["state"], "done");
    assert_eq!(done["outcome"]["status"], "detected");

    let (status, results) = call_json(st, Method::GET, &format!("/segments/{id}/results"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(results["segment_id"], id.as_str());
    let (_, job) = call_json(st, Method::GET, &format!("/segments/{id}/job"), None).await;
    assert_eq!(job["job"]["state"], "done");
    assert!(job["job"]["finished_at"].as_u64() >= job["job"]["started_at"].as_u64());

    let (_, list) = call_json(st, Method::GET, "/segments", None).await;
    let entries = list["segments"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries.iter().filter(|e| e["processed"] == true).count(), 1);
}

#[tokio::test]
async fn second_request_while_processing_conflicts() {
    let fx = fixture();
    let uri = format!("/segments/{}/process", scenario(2).id);
    let (a, b) = tokio::join!(call_json(&fx.state, Method::POST, &uri, None), call_json(&fx.state, Method::POST, &uri, None));
    let mut statuses = [a.0, b.0];
    statuses.sort();
    assert_eq!(statuses, [StatusCode::OK, StatusCode::CONFLICT]);
    let loser = if a.0 == StatusCode::CONFLICT { a.1 } else { b.1 };
    assert_eq!(error_code(&loser), "conflict");
    // once finished, the segment can be processed again
    let (status, _) = call_json(&fx.state, Method::POST, &uri, None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn annotations_are_validated_and_override_the_bundle() {
    let fx = fixture();
    let st = &fx.state;
    let id = scenario(1).id;
    let uri = format!("/segments/{id}/groundtruth");
    let (_, shipped) = call_json(st, Method::GET, &uri, None).await;
    let mut gt = shipped["groundtruth"].clone();

    let mut bad = gt.clone();
    bad["exit_frame"] = bad["entry_frame"].clone();
    let (status, err) = call_json(st, Method::PUT, &uri, Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_code(&err), "validation_failed");

    let mut wrong_id = gt.clone();
    wrong_id["segment_id"] = json!("other");
    assert_eq!(call_json(st, Method::PUT, &uri, Some(wrong_id)).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let mut beyond = gt.clone();
    beyond["exit_frame"] = json!(1_000_000);
    assert_eq!(call_json(st, Method::PUT, &uri, Some(beyond)).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    gt["entry_frame"] = json!(gt["entry_frame"].as_u64().unwrap() + 3);
    let (status, _) = call_json(st, Method::PUT, &uri, Some(gt.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let (_, now) = call_json(st, Method::GET, &uri, None).await;
    assert_eq!(now["groundtruth"], gt);
    assert!(st.annotations_dir().join(&id).join("groundtruth.json").is_file());
    // the segment itself is untouched
    let original: Value = serde_json::from_slice(&fs::read(st.segments_dir().join(&id).join("groundtruth.json")).unwrap()).unwrap();
    assert_eq!(original, shipped["groundtruth"]);
}

#[tokio::test]
async fn roi_frames_and_evaluation() {
    let fx = fixture();
    let st = &fx.state;
    let id = scenario(1).id;

    let (status, frame) = call_json(st, Method::GET, &format!("/segments/{id}/frames/5/roi"), None).await;
    assert_eq!(status, StatusCode::OK);
    let (h, w) = (frame["height"].as_u64().unwrap() as usize, frame["width"].as_u64().unwrap() as usize);
    use base64::Engine;
    let pixels = base64::engine::general_purpose::STANDARD.decode(frame["pixels"].as_str().unwrap()).unwrap();
    assert_eq!(pixels.len(), h * w);
    let bundle = crossroads::bundle::load_bundle(&st.segments_dir().join(&id)).unwrap();
    assert_eq!(pixels, bundle.roi.frame(5));
    let (status, _) = call_json(st, Method::GET, &format!("/segments/{id}/frames/999999/roi"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    call_json(st, Method::POST, &format!("/segments/{id}/process"), None).await;
    let (status, report) = call_json(st, Method::GET, "/evaluation?group_by=signage", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["overall"]["count"], 2);
    assert_eq!(report["overall"]["detected"], 1);
    assert_eq!(report["groups"].as_array().unwrap().len(), 3);
    let (status, _) = call_json(st, Method::GET, "/evaluation?group_by=weather", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn service_and_batch_results_are_identical() {
    let fx = fixture();
    let st = &fx.state;
    let id = scenario(2).id;
    call_json(st, Method::POST, &format!("/segments/{id}/process"), None).await;
    let (_, served) = call(st, Method::GET, &format!("/segments/{id}/results"), None).await;

    let out = tempfile::tempdir().unwrap();
    let input = st.segments_dir().join(&id);
    let summary = process_all(&input, out.path(), &st.config, false, Some(1)).unwrap();
    assert!(summary.failures.is_empty());
    let batch = fs::read(out.path().join(&id).join(RESULTS_FILE)).unwrap();
    assert_eq!(served, batch);
    assert!(!Path::new(&out.path().join("failures.json")).exists());
}
