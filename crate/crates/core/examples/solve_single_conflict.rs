//! Queue-clearing and throughput models on one crossing, with the timing table.
//!
//! `cargo run --example solve_single_conflict [eb_vph] [nb_vph]`

use cmat::graph::{build_scenario, GeometryParams, ScenarioKind};
use cmat::model::{build_m1, build_m2, MovementDemand};
use cmat::params::CmatParameters;
use cmat::schedule::{explain, extract_schedule};
use cmat::solver::{solve, MilpStatus, SolveOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>());
    let eb = args.next().transpose()?.unwrap_or(1000.0);
    let nb = args.next().transpose()?.unwrap_or(1000.0);
    let g = build_scenario(ScenarioKind::SingleConflict, &GeometryParams::default())?;
    let p = CmatParameters::default();
    let d = MovementDemand::from_vph([("EB", eb), ("NB", nb)])?;
    let opts = SolveOptions::default();

    let m1 = build_m1(&g, &d, &p)?;
    let sol = solve(&m1, &opts)?;
    println!("M1: {} in {} nodes", sol.status, sol.stats.nodes);
    let (inst, sol) = if sol.status == MilpStatus::Optimal {
        (m1, sol)
    } else {
        let m2 = build_m2(&g, &d, &p)?;
        let s = solve(&m2, &opts)?;
        println!("M2: {}", s.status);
        (m2, s)
    };
    let s = extract_schedule(&inst, &sol)?;
    print!("{}", explain(&s));
    println!("service rate {:.0} veh/h", s.service_vph());
    Ok(())
}
