use cmat::graph::{build_scenario, ConflictGraph, GeometryParams, ScenarioKind};
use cmat::model::{build_m1, build_m2, build_unit_platoon, ModelKind, MovementDemand};
use cmat::params::CmatParameters;
use cmat::solver::{enumerate_oracle, solve, Backend, MilpStatus, SolveOptions};
use proptest::prelude::*;

fn scenario(kind: ScenarioKind) -> ConflictGraph {
    build_scenario(kind, &GeometryParams::default()).unwrap()
}

fn check(g: &ConflictGraph, d: &MovementDemand, p: &CmatParameters, kind: ModelKind, backend: Backend) {
    let inst = match kind {
        ModelKind::M1 => build_m1(g, d, p).unwrap(),
        ModelKind::M2 => build_m2(g, d, p).unwrap(),
        ModelKind::UnitPlatoon => build_unit_platoon(g, p).unwrap(),
    };
    let sol = solve(&inst, &SolveOptions::default().with_backend(backend)).unwrap();
    let oracle = enumerate_oracle(g, Some(d), p, kind).unwrap();
    assert_eq!(sol.status, oracle.status, "{kind} {d:?}");
    if let (Some(a), Some(b)) = (sol.objective, oracle.objective) {
        assert!((a - b).abs() <= 1e-6, "{kind} {backend}: solver {a} vs oracle {b} for {d:?}");
        let v = sol.values.as_ref().unwrap();
        assert!(inst.problem.violations(v, 1e-6).is_empty());
    }
}

#[test]
fn single_conflict_balanced_m1() {
    let g = scenario(ScenarioKind::SingleConflict);
    let d = MovementDemand::from_classes(&g, &[1000.0, 1000.0], 1.0).unwrap();
    let inst = build_m1(&g, &d, &CmatParameters::default()).unwrap();
    let sol = solve(&inst, &SolveOptions::default().with_backend(Backend::Native)).unwrap();
    assert_eq!(sol.status, MilpStatus::Optimal);
    assert!((sol.value(inst.roles.cycle).unwrap() - 7.2).abs() < 1e-6);
    assert!((sol.objective.unwrap() - 6.08).abs() < 1e-6);
    for m in &inst.roles.movements {
        assert!((sol.value(m.platoon_size).unwrap() - 2.0).abs() < 1e-6);
    }
}

#[test]
fn saturated_m1_is_infeasible() {
    let g = scenario(ScenarioKind::SingleConflict);
    let d = MovementDemand::from_classes(&g, &[2880.0, 2880.0], 1.0).unwrap();
    let inst = build_m1(&g, &d, &CmatParameters::default()).unwrap();
    for b in [Backend::Native, Backend::Highs] {
        let sol = solve(&inst, &SolveOptions::default().with_backend(b)).unwrap();
        assert_eq!(sol.status, MilpStatus::Infeasible, "{b}");
    }
}

#[test]
fn unit_platoon_cycle() {
    let g = scenario(ScenarioKind::SingleConflict);
    let p = CmatParameters::default();
    let inst = build_unit_platoon(&g, &p).unwrap();
    let sol = solve(&inst, &SolveOptions::default()).unwrap();
    assert!((sol.objective.unwrap() - 4.5).abs() < 1e-6);
}

#[test]
fn staggered_t_grid_against_oracle() {
    let g = scenario(ScenarioKind::StaggeredT);
    let p = CmatParameters::default();
    for base in [[900.0, 600.0, 100.0], [1200.0, 400.0, 800.0], [300.0, 300.0, 300.0], [1800.0, 900.0, 450.0]] {
        let d = MovementDemand::from_classes(&g, &base, 1.0).unwrap();
        for b in [Backend::Native, Backend::Highs] {
            check(&g, &d, &p, ModelKind::M1, b);
        }
    }
}

#[test]
fn m2_against_oracle_with_short_cycle_bound() {
    let p = CmatParameters {
        c_max: 15.0,
        tau_star: 3.0,
        ..Default::default()
    };
    for kind in [ScenarioKind::SingleConflict, ScenarioKind::StaggeredT] {
        let g = scenario(kind);
        let base = vec![1500.0, 900.0, 1200.0];
        let d = MovementDemand::from_classes(&g, &base[..kind.demand_classes()], 1.0).unwrap();
        for b in [Backend::Native, Backend::Highs] {
            check(&g, &d, &p, ModelKind::M2, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn native_matches_oracle_on_single_conflict(k1 in 1u32..40, k2 in 1u32..40) {
        // rates on a 90 veh/h grid keep common cycles within the bound
        let g = scenario(ScenarioKind::SingleConflict);
        let d = MovementDemand::from_classes(&g, &[90.0 * k1 as f64, 90.0 * k2 as f64], 1.0).unwrap();
        check(&g, &d, &CmatParameters::default(), ModelKind::M1, Backend::Native);
    }
}
