//! The standard scenario catalog: a zero-noise base set plus low- and
//! moderate-noise copies with their own seeds.

use serde::{Deserialize, Serialize};

use super::{Distractors, HaltSpec, NoiseSpec, ScanSpec, Scenario};
use crate::types::{Geometry, Maneuver, Side, Signage};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    #[default]
    Clean,
    Low,
    Moderate,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Clean, Tier::Low, Tier::Moderate];

    pub fn noise(self) -> NoiseSpec {
        match self {
            Tier::Clean => NoiseSpec::default(),
            Tier::Low => NoiseSpec { flow_sigma: 0.3, roi_sigma: 2.0, detection_dropout_rate: 0.02, detection_jitter_px: 1.0 },
            Tier::Moderate => {
                NoiseSpec { flow_sigma: 1.0, roi_sigma: 6.0, detection_dropout_rate: 0.05, detection_jitter_px: 2.0 }
            }
        }
    }

    fn pose_sigma_deg(self) -> f64 {
        match self {
            Tier::Clean => 0.0,
            Tier::Low => 1.0,
            Tier::Moderate => 2.0,
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Tier::Clean => "",
            Tier::Low => "low-",
            Tier::Moderate => "mod-",
        }
    }

    fn seed_base(self) -> u64 {
        match self {
            Tier::Clean => 1000,
            Tier::Low => 9000,
            Tier::Moderate => 5000,
        }
    }
}

fn sc(id: &str, signage: Signage, maneuver: Maneuver, speed: f64) -> Scenario {
    Scenario {
        id: id.to_string(),
        seed: 0,
        tier: Tier::Clean,
        signage,
        maneuver,
        geometry: Geometry::FourWay,
        approach_speed: speed,
        halt: None,
        stop_line_present: signage != Signage::None,
        light_arrays: 1,
        clip_length_m: 200.0,
        distractors: Distractors::default(),
        noise: NoiseSpec::default(),
        scans: vec![],
        turn_speed: None,
        signage_leaves_view: true,
        line_tilt_deg: 0.0,
        pose_sigma_deg: 0.0,
    }
}

fn halt(before_line: f64, seconds: f64) -> Option<HaltSpec> {
    Some(HaltSpec { at_distance_before_line: before_line, duration_s: seconds })
}

fn with(mut s: Scenario, f: impl FnOnce(&mut Scenario)) -> Scenario {
    f(&mut s);
    s
}

fn base_scenarios() -> Vec<Scenario> {
    use Maneuver::{Left, Right, Straight};
    use Signage::{None as NoSign, StopSign as Ss, TrafficLight as Tl};
    let multi = |s: &mut Scenario| {
        s.light_arrays = 2;
        s.stop_line_present = false;
    };
    let no_line = |s: &mut Scenario| s.stop_line_present = false;
    vec![
        // stop signs
        with(sc("ss-straight-v8", Ss, Straight, 8.0), |s| s.halt = halt(2.0, 2.0)),
        sc("ss-straight-v10", Ss, Straight, 10.0),
        with(sc("ss-straight-v6-crosswalk", Ss, Straight, 6.0), |s| s.distractors.crosswalk_lines = 2),
        with(sc("ss-left-v8", Ss, Left, 8.0), |s| s.halt = halt(1.5, 3.0)),
        with(sc("ss-right-v7", Ss, Right, 7.0), |s| s.halt = halt(2.5, 2.0)),
        sc("ss-left-v12", Ss, Left, 12.0),
        with(sc("ss-right-v9-arrow", Ss, Right, 9.0), |s| s.distractors.road_arrows = 1),
        with(sc("ss-straight-v12-tilt", Ss, Straight, 12.0), |s| s.line_tilt_deg = 3.0),
        with(sc("ss-straight-v5-curve", Ss, Straight, 5.0), |s| s.distractors.curve_instead_of_turn = true),
        with(sc("ss-left-v10-t", Ss, Left, 10.0), |s| s.geometry = Geometry::T),
        with(sc("ss-right-v11-crosswalk", Ss, Right, 11.0), |s| s.distractors.crosswalk_lines = 1),
        sc("ss-straight-v14", Ss, Straight, 14.0),
        with(sc("ss-left-v6-halt", Ss, Left, 6.0), |s| s.halt = halt(3.0, 3.0)),
        // lights, single array, painted line
        sc("tl1-straight-v8", Tl, Straight, 8.0),
        sc("tl1-straight-v12", Tl, Straight, 12.0),
        sc("tl1-straight-v15", Tl, Straight, 15.0),
        sc("tl1-left-v10", Tl, Left, 10.0),
        sc("tl1-right-v9", Tl, Right, 9.0),
        sc("tl1-right-v13", Tl, Right, 13.0),
        with(sc("tl1-straight-v11-crosswalk", Tl, Straight, 11.0), |s| s.distractors.crosswalk_lines = 3),
        with(sc("tl1-straight-v9-arrows", Tl, Straight, 9.0), |s| s.distractors.road_arrows = 2),
        with(sc("tl1-straight-v10-tilt", Tl, Straight, 10.0), |s| s.line_tilt_deg = -3.0),
        with(sc("tl1-straight-v10-red", Tl, Straight, 10.0), |s| s.halt = halt(3.0, 4.0)),
        with(sc("tl1-left-v9-red", Tl, Left, 9.0), |s| s.halt = halt(2.0, 5.0)),
        with(sc("tl1-straight-v7-red", Tl, Straight, 7.0), |s| s.halt = halt(2.0, 6.0)),
        with(sc("tl1-left-v12-crosswalk", Tl, Left, 12.0), |s| s.distractors.crosswalk_lines = 2),
        with(sc("tl1-straight-v10-y", Tl, Straight, 10.0), |s| s.geometry = Geometry::Y),
        // halting just past the line
        with(sc("tl1-straight-v9-overrun", Tl, Straight, 9.0), |s| s.halt = halt(-1.5, 5.0)),
        with(sc("tl1-left-v8-overrun", Tl, Left, 8.0), |s| s.halt = halt(-2.0, 4.0)),
        with(sc("tl1-straight-v12-overrun", Tl, Straight, 12.0), |s| s.halt = halt(-1.0, 3.0)),
        with(sc("tl1-right-v10-overrun", Tl, Right, 10.0), |s| s.halt = halt(-1.0, 4.0)),
        // single array, no line
        with(sc("tl1n-straight-v8", Tl, Straight, 8.0), no_line),
        with(sc("tl1n-straight-v11", Tl, Straight, 11.0), no_line),
        with(sc("tl1n-straight-v14", Tl, Straight, 14.0), no_line),
        with(sc("tl1n-left-v9", Tl, Left, 9.0), no_line),
        with(sc("tl1n-right-v10", Tl, Right, 10.0), no_line),
        with(sc("tl1n-left-v12", Tl, Left, 12.0), no_line),
        with(sc("tl1n-right-v7", Tl, Right, 7.0), no_line),
        // two arrays, no line
        with(sc("tl2-straight-v8", Tl, Straight, 8.0), multi),
        with(sc("tl2-straight-v10", Tl, Straight, 10.0), multi),
        with(sc("tl2-straight-v12", Tl, Straight, 12.0), multi),
        with(sc("tl2-straight-v14", Tl, Straight, 14.0), multi),
        with(sc("tl2-left-v9", Tl, Left, 9.0), multi),
        with(sc("tl2-right-v11", Tl, Right, 11.0), multi),
        with(sc("tl2-left-v13", Tl, Left, 13.0), multi),
        with(sc("tl2-straight-v9-y", Tl, Straight, 9.0), |s| {
            multi(s);
            s.geometry = Geometry::Y;
        }),
        // no signage
        sc("none-left-v8", NoSign, Left, 8.0),
        sc("none-left-v10", NoSign, Left, 10.0),
        sc("none-left-v12", NoSign, Left, 12.0),
        sc("none-right-v7", NoSign, Right, 7.0),
        sc("none-right-v9", NoSign, Right, 9.0),
        sc("none-right-v11", NoSign, Right, 11.0),
        sc("none-right-v13", NoSign, Right, 13.0),
        with(sc("none-left-v8-curve", NoSign, Left, 8.0), |s| s.distractors.curve_instead_of_turn = true),
        with(sc("none-left-v14-t", NoSign, Left, 14.0), |s| s.geometry = Geometry::T),
        // turns too slow to count as turns
        with(sc("none-left-crawl", NoSign, Left, 8.0), |s| s.turn_speed = Some(1.8)),
        with(sc("none-right-crawl", NoSign, Right, 9.0), |s| s.turn_speed = Some(1.5)),
        // lights that never leave the view and no painted line
        with(sc("tl1n-straight-v10-stuck", Tl, Straight, 10.0), |s| {
            no_line(s);
            s.signage_leaves_view = false;
        }),
        with(sc("tl2-left-v9-stuck", Tl, Left, 9.0), |s| {
            multi(s);
            s.signage_leaves_view = false;
        }),
    ]
}

/// Head scans on roughly a third of the scenarios, a few seconds before entry.
fn add_scans(s: &mut Scenario, idx: usize) {
    if idx % 3 != 0 {
        return;
    }
    let e = s.clip_length_m / 2.0 - 10.0;
    let gap = 3.0 * s.approach_speed;
    s.scans = vec![
        ScanSpec { at_distance: e - 2.0 * gap, direction: Side::Left, magnitude_deg: 45.0, duration_frames: 30 },
        ScanSpec { at_distance: e - gap, direction: Side::Right, magnitude_deg: 40.0, duration_frames: 24 },
    ];
}

/// Low-noise tier covers every fifth base scenario.
fn in_tier(tier: Tier, idx: usize) -> bool {
    tier != Tier::Low || idx % 5 == 0
}

/// Scenarios of one noise tier.
pub fn standard_scenarios(tier: Tier) -> Vec<Scenario> {
    base_scenarios()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| in_tier(tier, *i))
        .map(|(i, mut s)| {
            add_scans(&mut s, i);
            s.id = format!("{}{}", tier.prefix(), s.id);
            s.seed = tier.seed_base() + i as u64;
            s.tier = tier;
            s.noise = tier.noise();
            s.pose_sigma_deg = tier.pose_sigma_deg();
            s
        })
        .collect()
}

/// Every tier, clean first.
pub fn standard_suite() -> Vec<Scenario> {
    Tier::ALL.iter().flat_map(|&t| standard_scenarios(t)).collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    #[test]
    fn catalog_is_valid_and_unique() {
        let all = standard_suite();
        let ids: BTreeSet<_> = all.iter().map(|s| s.id.clone()).collect();
        assert_eq!(ids.len(), all.len());
        let seeds: BTreeSet<_> = all.iter().map(|s| s.seed).collect();
        assert_eq!(seeds.len(), all.len());
        for s in &all {
            s.validate().unwrap();
        }
        assert!(standard_scenarios(Tier::Clean).len() >= 50);
        assert!(standard_scenarios(Tier::Clean).iter().all(|s| s.noise.is_zero()));
    }
}
