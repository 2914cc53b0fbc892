use crossroads::config::PipelineConfig;
use crossroads::evaluate::compare;
use crossroads::pipeline::{process_bundle, Outcome, ResultsDoc};
use crossroads::synth::{generate, standard_scenarios, Tier};

#[test]
fn replaying_serialized_evidence_gives_the_same_outcome() {
    let cfg = PipelineConfig::default();
    for s in standard_scenarios(Tier::Moderate).into_iter().step_by(4) {
        let case = generate(&s).unwrap();
        let doc = process_bundle(&case.bundle, &cfg).unwrap();
        let parsed: ResultsDoc = serde_json::from_str(&doc.to_json()).unwrap();
        assert_eq!(parsed, doc, "{}", s.id);
        assert_eq!(parsed.replay(&cfg), doc.outcome, "{}", s.id);
    }
}

#[test]
fn generation_is_a_function_of_the_scenario() {
    let s = standard_scenarios(Tier::Moderate).remove(3);
    let a = generate(&s).unwrap();
    let b = generate(&s).unwrap();
    assert_eq!(a.bundle, b.bundle);
    assert_eq!(a.truth, b.truth);

    let mut other = s.clone();
    other.seed += 1;
    assert_ne!(generate(&other).unwrap().bundle.flow, a.bundle.flow);
}

#[test]
fn zero_noise_outcome_ignores_the_seed() {
    let cfg = PipelineConfig::default();
    let s = standard_scenarios(Tier::Clean).remove(0);
    let base = process_bundle(&generate(&s).unwrap().bundle, &cfg).unwrap();
    for seed in [1, 77, 4242] {
        let mut t = s.clone();
        t.seed = seed;
        let doc = process_bundle(&generate(&t).unwrap().bundle, &cfg).unwrap();
        assert_eq!(doc.outcome, base.outcome, "seed {seed}");
    }
}

#[test]
fn expected_failures_surface_as_failed_outcomes() {
    let cfg = PipelineConfig::default();
    let mut seen = 0;
    for s in standard_scenarios(Tier::Clean) {
        let case = generate(&s).unwrap();
        let Some(expected) = case.construction.expected_failure else { continue };
        seen += 1;
        let doc = process_bundle(&case.bundle, &cfg).unwrap();
        match doc.outcome {
            Outcome::Failed { failure, signage } => {
                assert_eq!(failure, expected, "{}", s.id);
                assert_eq!(signage, s.signage, "{}", s.id);
            }
            Outcome::Detected { .. } => panic!("{} should fail with {expected:?}", s.id),
        }
        let m = compare(&doc, &case.truth, &cfg.headscan).unwrap();
        assert!(m.failure.is_some() && m.dice.is_none());
    }
    assert!(seen >= 4);
}

#[test]
fn detected_bounds_are_ordered_and_inside_the_clip() {
    let cfg = PipelineConfig::default();
    for s in standard_scenarios(Tier::Low) {
        let case = generate(&s).unwrap();
        let doc = process_bundle(&case.bundle, &cfg).unwrap();
        if let Some(r) = doc.outcome.result() {
            assert!(r.entry_frame < r.exit_frame, "{}", s.id);
            assert!(r.exit_frame < doc.frame_count, "{}", s.id);
            assert_eq!(r.signage, s.signage, "{}", s.id);
        }
    }
}

#[test]
fn noisy_flow_flag_keeps_the_signage() {
    let mut cfg = PipelineConfig::default();
    let mut case = generate(&standard_scenarios(Tier::Clean)[0]).unwrap();
    let plain = process_bundle(&case.bundle, &cfg).unwrap();
    case.bundle.manifest.noisy_flow = true;
    let noisy = process_bundle(&case.bundle, &cfg).unwrap();
    assert_eq!(plain.outcome.signage(), noisy.outcome.signage());
    cfg.motion.turn_extent_tolerance = 0.0;
    assert!(process_bundle(&case.bundle, &cfg).is_ok());
}
