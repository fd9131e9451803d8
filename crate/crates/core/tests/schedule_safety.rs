use cmat::graph::{build_scenario, ConflictGraph, GeometryParams, ScenarioKind};
use cmat::model::{build_m1, build_m2, MovementDemand};
use cmat::params::CmatParameters;
use cmat::schedule::{
    check_prop1, extract_incumbent, extract_schedule, inject_headway_fault, rlt_residuals, verify_safety, Controller,
    OccupancyTimeline, Prop1Check, SafetyViolation, ScheduleFile,
};
use cmat::solver::{solve, MilpStatus, SolveOptions};
use proptest::prelude::*;

fn scenario(kind: ScenarioKind) -> ConflictGraph {
    build_scenario(kind, &GeometryParams::default()).unwrap()
}

fn solved(g: &ConflictGraph, d: &MovementDemand, p: &CmatParameters) -> Option<cmat::schedule::CyclicSchedule> {
    let inst = build_m1(g, d, p).unwrap();
    let sol = solve(&inst, &SolveOptions::default()).unwrap();
    if sol.status != MilpStatus::Optimal {
        return None;
    }
    let x = sol.values.as_ref().unwrap();
    assert!(rlt_residuals(&inst, x).iter().all(|r| r.1 <= 1e-6));
    Some(extract_schedule(&inst, &sol).unwrap())
}

#[test]
fn staggered_t_timeline_alternates() {
    let g = scenario(ScenarioKind::StaggeredT);
    let p = CmatParameters::default();
    let d = MovementDemand::from_classes(&g, &[900.0, 600.0, 400.0], 1.0).unwrap();
    let s = solved(&g, &d, &p).unwrap();
    for n in &s.nodes {
        let tl = OccupancyTimeline::build(&s, n, 5);
        assert!(tl.intervals.len() >= 10);
        for w in tl.intervals.windows(2) {
            assert_ne!(w[0].movement, w[1].movement);
            assert!(w[1].start - w[0].end >= p.flow.tau_c - 1e-9);
        }
    }
}

#[test]
fn m2_schedule_is_safe_and_bounded() {
    let g = scenario(ScenarioKind::SingleConflict);
    let p = CmatParameters::default();
    let d = MovementDemand::from_vph([("EB", 3000.0), ("NB", 2500.0)]).unwrap();
    let inst = build_m2(&g, &d, &p).unwrap();
    let sol = solve(&inst, &SolveOptions::default()).unwrap();
    let s = extract_incumbent(&inst, &sol).unwrap();
    assert!(s.cycle <= p.c_max + 1e-9);
    assert_eq!(s.platoon_sizes().iter().sum::<u32>(), 94);
    assert!(verify_safety(&s, 5).is_empty());
}

#[test]
fn broken_cycle_fails_prop1() {
    let g = scenario(ScenarioKind::SingleConflict);
    let p = CmatParameters::default();
    let d = MovementDemand::from_classes(&g, &[1800.0, 100.0], 1.0).unwrap();
    let mut s = solved(&g, &d, &p).unwrap();
    assert!(check_prop1(&s, &d, &p).holds());
    s.cycle = 9.0;
    assert!(matches!(check_prop1(&s, &d, &p), Prop1Check::Counterexample { .. }));
    assert!(verify_safety(&s, 5).violations.iter().any(|v| matches!(v, SafetyViolation::Invariant(_))));
}

#[test]
fn corrupted_file_names_the_field() {
    let g = scenario(ScenarioKind::SingleConflict);
    let p = CmatParameters::default();
    let d = MovementDemand::from_classes(&g, &[1000.0, 1000.0], 1.0).unwrap();
    let s = solved(&g, &d, &p).unwrap();
    let file = ScheduleFile {
        scenario: Some(ScenarioKind::SingleConflict),
        geometry: None,
        beta: Some(1.0),
        controller: Controller::Cyclic { schedule: s },
    };
    let mut v: serde_json::Value = serde_json::from_str(&file.to_json()).unwrap();
    v["controller"]["cyclic"]["schedule"]["movements"][1]["platoon_size"] = serde_json::json!(-2);
    let text = v.to_string();
    let err = ScheduleFile::from_json(&text, "t.json").unwrap_err().to_string();
    assert!(err.contains("movements[1].platoon_size"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn m1_schedules_are_safe(eb in 100.0f64..2700.0, nb in 100.0f64..2700.0) {
        let g = scenario(ScenarioKind::SingleConflict);
        let p = CmatParameters::default();
        let d = MovementDemand::from_vph([("EB", eb), ("NB", nb)]).unwrap();
        if let Some(s) = solved(&g, &d, &p) {
            prop_assert!(verify_safety(&s, 5).is_empty());
            prop_assert!(check_prop1(&s, &d, &p).holds());
            let back = ScheduleFile::from_json(
                &ScheduleFile { scenario: None, geometry: None, beta: None, controller: Controller::Cyclic { schedule: s.clone() } }.to_json(),
                "mem",
            ).unwrap();
            prop_assert_eq!(back.controller, Controller::Cyclic { schedule: s });
        }
    }

    #[test]
    fn shrinking_any_headway_is_caught(a in 200.0f64..1500.0, b in 200.0f64..1500.0, c in 200.0f64..1500.0, cut in 0.05f64..1.9) {
        let g = scenario(ScenarioKind::StaggeredT);
        let p = CmatParameters::default();
        let d = MovementDemand::from_classes(&g, &[a, b, c], 1.0).unwrap();
        if let Some(s) = solved(&g, &d, &p) {
            for n in &s.nodes {
                let mut broken = s.clone();
                inject_headway_fault(&mut broken, &n.node, cut);
                prop_assert!(!verify_safety(&broken, 5).is_empty());
            }
        }
    }
}
