//! Sweep the demand multiplier on one crossing and print the throughput of each controller.

use cmat::baselines::TscConfig;
use cmat::graph::{build_scenario, GeometryParams, ScenarioKind};
use cmat::model::MovementDemand;
use cmat::params::CmatParameters;
use cmat::sim::{capacity_sweep, CmatFactory, ControllerFactory, RcFactory, SimConfig, TscFactory};
use cmat::solver::SolveOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = build_scenario(ScenarioKind::SingleConflict, &GeometryParams::default())?;
    let p = CmatParameters::default();
    let base = MovementDemand::from_classes(&g, &[1000.0, 1000.0], 1.0)?;
    let betas: Vec<f64> = (1..=12).map(|k| k as f64 * 0.25).collect();
    let factories: Vec<Box<dyn ControllerFactory>> = vec![
        Box::new(CmatFactory::new(g.clone(), p, SolveOptions::default())),
        Box::new(RcFactory::new(g.clone(), p, SolveOptions::default())),
        Box::new(TscFactory {
            graph: g.clone(),
            params: p,
            config: TscConfig::default(),
        }),
    ];
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    for f in &factories {
        println!("{}", f.name());
        for row in capacity_sweep(f.as_ref(), &g, &base, &betas, &p, &SimConfig::default(), workers)? {
            match row.result {
                Ok(pt) => println!(
                    "  beta {:>5.2}  {:>7.1} veh/h  cycle {:>6.2}  {}",
                    row.beta, pt.metrics.throughput_vph, pt.built.cycle, pt.built.model_used
                ),
                Err(e) => println!("  beta {:>5.2}  failed: {e}", row.beta),
            }
        }
    }
    Ok(())
}
