//! Drive one crossing with the optimized schedule and with unit platoons, under Poisson arrivals.

use cmat::baselines::rc_schedule;
use cmat::graph::{build_scenario, GeometryParams, ScenarioKind};
use cmat::model::{build_m1, MovementDemand};
use cmat::params::CmatParameters;
use cmat::schedule::{extract_schedule, Controller};
use cmat::sim::{simulate, ArrivalModel, SimConfig};
use cmat::solver::{solve, SolveOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = build_scenario(ScenarioKind::SingleConflict, &GeometryParams::default())?;
    let p = CmatParameters::default();
    let d = MovementDemand::from_vph([("EB", 1000.0), ("NB", 1000.0)])?;
    let opts = SolveOptions::default();
    let inst = build_m1(&g, &d, &p)?;
    let cmat = Controller::Cyclic {
        schedule: extract_schedule(&inst, &solve(&inst, &opts)?)?,
    };
    let rc = Controller::Cyclic {
        schedule: rc_schedule(&g, &p, &opts)?,
    };
    for (name, c) in [("cmat", &cmat), ("rc", &rc)] {
        for arrivals in [ArrivalModel::Deterministic, ArrivalModel::Poisson { seed: 11 }] {
            let cfg = SimConfig {
                arrivals,
                ..SimConfig::default()
            };
            let m = simulate(c, &g, &d, &p.flow, &cfg)?;
            println!(
                "{name:<5} {arrivals:<28} {:>7.1} veh/h  delay {:>7.2} s  residual queue {}",
                m.throughput_vph,
                m.mean_delay,
                m.residual_queue,
                arrivals = format!("{arrivals:?}")
            );
        }
    }
    Ok(())
}
