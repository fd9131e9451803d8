//! Replay a schedule over several cycles, then break one headway and watch the audit catch it.

use cmat::graph::{build_scenario, GeometryParams, ScenarioKind};
use cmat::model::{build_m1, MovementDemand};
use cmat::params::CmatParameters;
use cmat::schedule::{check_prop1, extract_schedule, inject_headway_fault, rlt_residuals, verify_safety};
use cmat::solver::{solve, SolveOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = build_scenario(ScenarioKind::StaggeredT, &GeometryParams::default())?;
    let p = CmatParameters::default();
    let d = MovementDemand::from_classes(&g, &[900.0, 600.0, 400.0], 1.0)?;
    let inst = build_m1(&g, &d, &p)?;
    let sol = solve(&inst, &SolveOptions::default())?;
    let s = extract_schedule(&inst, &sol)?;
    println!("cycle {:.3} s, platoons {:?}", s.cycle, s.platoon_sizes());
    println!("prop1: {:?}", check_prop1(&s, &d, &p));
    let worst = rlt_residuals(&inst, sol.values.as_deref().unwrap_or_default())
        .into_iter()
        .map(|r| r.1)
        .fold(0.0, f64::max);
    println!("largest linearization residual {worst:.2e}");
    println!("violations over 5 cycles: {}", verify_safety(&s, 5).violations.len());

    let mut broken = s.clone();
    let node = broken.nodes[0].node.clone();
    inject_headway_fault(&mut broken, &node, 0.5);
    let report = verify_safety(&broken, 5);
    println!("after shrinking the headway at {node}:");
    for v in report.violations.iter().take(5) {
        println!("  {v}");
    }
    Ok(())
}
