use cmat::baselines::{rc_schedule, shared_lanes, webster_plan, webster_plan_clamped, BaselineError, TscConfig};
use cmat::graph::{build_scenario, GeometryParams, ScenarioKind};
use cmat::model::MovementDemand;
use cmat::params::CmatParameters;
use cmat::schedule::verify_safety;
use cmat::solver::SolveOptions;
use proptest::prelude::*;

#[test]
fn rc_on_every_layout_is_unit_and_safe() {
    for kind in [ScenarioKind::SingleConflict, ScenarioKind::StaggeredT, ScenarioKind::FourLegDedicated] {
        let g = build_scenario(kind, &GeometryParams::default()).unwrap();
        let s = rc_schedule(&g, &CmatParameters::default(), &SolveOptions::default()).unwrap();
        assert!(s.platoon_sizes().iter().all(|&l| l == 1), "{kind}");
        assert!(verify_safety(&s, 5).is_empty(), "{kind}");
    }
}

#[test]
fn custom_phase_groups_must_cover_movements() {
    let g = build_scenario(ScenarioKind::SingleConflict, &GeometryParams::default()).unwrap();
    let d = MovementDemand::from_vph([("EB", 500.0), ("NB", 500.0)]).unwrap();
    let cfg = TscConfig {
        phase_groups: Some(vec![vec!["EB".into()]]),
        ..Default::default()
    };
    assert!(matches!(
        webster_plan(&g, &d, &CmatParameters::default(), &cfg),
        Err(BaselineError::Unserved(m)) if m == "NB"
    ));
}

#[test]
fn dedicated_layout_has_no_shared_lanes() {
    let g = build_scenario(ScenarioKind::FourLegDedicated, &GeometryParams::default()).unwrap();
    assert!(shared_lanes(&g, &g.intersections[0]).iter().all(|l| l.len() == 1));
}

proptest! {
    #[test]
    fn plans_fill_the_cycle(beta in 0.05f64..2.0, split in 0.05f64..0.95) {
        let g = build_scenario(ScenarioKind::FourLegShared, &GeometryParams::default()).unwrap();
        let p = CmatParameters::default();
        let d = MovementDemand::from_classes(&g, &[450.0, 1800.0 * split, 1800.0, 900.0], beta).unwrap();
        let plan = webster_plan_clamped(&g, &d, &p, &TscConfig::default()).unwrap();
        prop_assert!(plan.invariant_failures().is_empty());
        prop_assert!(plan.cycle <= p.c_max + 1e-9);
        let y = plan.intersections[0].critical_ratio;
        prop_assert_eq!(plan.feasible, y < 1.0);
        if plan.feasible {
            prop_assert_eq!(webster_plan(&g, &d, &p, &TscConfig::default()).unwrap(), plan);
        }
    }
}
