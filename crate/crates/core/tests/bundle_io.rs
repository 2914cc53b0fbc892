use std::fs;

use crossroads::bundle::io::{MANIFEST, TELEMETRY};
use crossroads::bundle::{clip_segment, load_bundle, write_bundle, BundleError};
use crossroads::config::PipelineConfig;
use crossroads::synth::{generate, standard_scenarios, standard_suite, Tier};

fn first_clean() -> crossroads::synth::GeneratedCase {
    let scenario = standard_scenarios(Tier::Clean).into_iter().next().unwrap();
    generate(&scenario).unwrap()
}

#[test]
fn bundle_round_trips_through_disk() {
    let case = first_clean();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&case.bundle, dir.path()).unwrap();
    let back = load_bundle(dir.path()).unwrap();
    assert_eq!(back.manifest, case.bundle.manifest);
    assert_eq!(back.roi, case.bundle.roi);
    assert_eq!(back.flow, case.bundle.flow);
    assert_eq!(back.groundtruth, case.bundle.groundtruth);
    assert_eq!(back.telemetry.len(), case.bundle.telemetry.len());
    for (a, b) in back.telemetry.iter().zip(&case.bundle.telemetry) {
        assert_eq!(a.frame_idx, b.frame_idx);
        assert!((a.timestamp_ms - b.timestamp_ms).abs() < 1e-9);
        assert!((a.speed - b.speed).abs() < 1e-9);
    }
    assert_eq!(back.detections.len(), case.bundle.detections.len());
    assert_eq!(back.headpose.map(|p| p.len()), case.bundle.headpose.map(|p| p.len()));

    // writing what was read gives the same files
    let again = tempfile::tempdir().unwrap();
    write_bundle(&load_bundle(dir.path()).unwrap(), again.path()).unwrap();
    for name in [MANIFEST, TELEMETRY, "roi.bin", "flow.bin"] {
        assert_eq!(fs::read(dir.path().join(name)).unwrap(), fs::read(again.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn missing_and_corrupt_files_are_reported() {
    let case = first_clean();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&case.bundle, dir.path()).unwrap();

    fs::remove_file(dir.path().join(TELEMETRY)).unwrap();
    assert!(matches!(load_bundle(dir.path()), Err(BundleError::MissingStream { .. })));

    write_bundle(&case.bundle, dir.path()).unwrap();
    let roi = dir.path().join("roi.bin");
    let bytes = fs::read(&roi).unwrap();
    fs::write(&roi, &bytes[..bytes.len() - 7]).unwrap();
    assert!(load_bundle(dir.path()).is_err());

    write_bundle(&case.bundle, dir.path()).unwrap();
    fs::write(dir.path().join(MANIFEST), "{ not json").unwrap();
    assert!(load_bundle(dir.path()).is_err());
}

#[test]
fn clipping_rebases_every_stream() {
    let case = first_clean();
    let trip = &case.bundle;
    let mid = &trip.waypoints[trip.waypoints.len() / 2];
    let clip = clip_segment(trip, mid.latitude, mid.longitude, 50.0).unwrap();
    assert_eq!(clip.telemetry[0].frame_idx, 0);
    assert_eq!(clip.telemetry[0].timestamp_ms, 0.0);
    assert_eq!(clip.roi.frame_count(), clip.manifest.frame_count);
    assert_eq!(clip.flow.frame_count(), clip.manifest.frame_count);
    assert!(clip.manifest.frame_count < trip.manifest.frame_count);
    assert!(clip.detections.iter().all(|d| d.frame_idx < clip.manifest.frame_count));

    let far = crossroads::bundle::geo::offset(mid.latitude, mid.longitude, 0.0, 5000.0);
    assert!(matches!(clip_segment(trip, far.0, far.1, 50.0), Err(BundleError::MarkOutsideTrip { .. })));
}

#[test]
fn shipped_default_config_matches_the_defaults() {
    let text = include_str!("../config/default.toml");
    assert_eq!(PipelineConfig::from_toml_str(text).unwrap(), PipelineConfig::default());
    let partial = PipelineConfig::from_toml_str("[motion]\nturn_extent_tolerance = 0.1\n").unwrap();
    assert_eq!(partial.motion.turn_extent_tolerance, 0.1);
    assert_eq!(partial.stopline, PipelineConfig::default().stopline);
    assert!(PipelineConfig::from_toml_str("[motion]\nturn_extent_tolerance = 1.5\n").is_err());
    assert!(PipelineConfig::from_toml_str("[nonsense]\n").is_err());
}

#[test]
fn shipped_catalog_matches_the_builtin_suite() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::copy(concat!(env!("CARGO_MANIFEST_DIR"), "/catalog/standard_suite.json"), &path).unwrap();
    assert_eq!(crossroads::service::load_catalog(&path).unwrap(), standard_suite());
}
