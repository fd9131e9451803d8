//! The two comparison controllers: unit-platoon alternation and a fixed-time signal plan.

use cmat::baselines::{rc_schedule, webster_plan, webster_plan_clamped, TscConfig};
use cmat::bench::explain_plan;
use cmat::graph::{build_scenario, GeometryParams, ScenarioKind};
use cmat::model::MovementDemand;
use cmat::params::CmatParameters;
use cmat::schedule::explain;
use cmat::solver::SolveOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = CmatParameters::default();
    let single = build_scenario(ScenarioKind::SingleConflict, &GeometryParams::default())?;
    let rc = rc_schedule(&single, &p, &SolveOptions::default())?;
    print!("{}", explain(&rc));
    println!("alternation capacity {:.0} veh/h\n", rc.service_vph());

    let four = build_scenario(ScenarioKind::FourLegDedicated, &GeometryParams::default())?;
    let cfg = TscConfig::default();
    for beta in [0.5, 0.8, 1.2] {
        let d = MovementDemand::from_classes(&four, &[1100.0, 1100.0, 500.0], beta)?;
        match webster_plan(&four, &d, &p, &cfg) {
            Ok(plan) => print!("beta {beta}\n{}", explain_plan(&plan)),
            Err(e) => {
                println!("beta {beta}: {e}");
                let plan = webster_plan_clamped(&four, &d, &p, &cfg)?;
                print!("running the bounded plan instead\n{}", explain_plan(&plan));
            }
        }
    }
    Ok(())
}
