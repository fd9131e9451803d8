//! Write a model in CPLEX LP text, read it back and solve the parsed copy.

use cmat::graph::{build_scenario, GeometryParams, ScenarioKind};
use cmat::milp::lp_format::{parse_lp, write_lp};
use cmat::model::{build_m1, MovementDemand};
use cmat::params::CmatParameters;
use cmat::solver::{solve, SolveOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = build_scenario(ScenarioKind::StaggeredT, &GeometryParams::default())?;
    let p = CmatParameters::default();
    let d = MovementDemand::from_classes(&g, &[900.0, 600.0, 400.0], 1.0)?;
    let inst = build_m1(&g, &d, &p)?;
    let text = write_lp(&inst.problem);
    println!("{text}");
    let parsed = parse_lp(&text)?;
    let a = solve(&inst, &SolveOptions::default())?;
    let b = solve(&parsed, &SolveOptions::default())?;
    println!("original {:?}, parsed {:?}", a.objective, b.objective);
    if let Some(out) = std::env::args().nth(1) {
        std::fs::write(&out, text)?;
        println!("wrote {out}");
    }
    Ok(())
}
