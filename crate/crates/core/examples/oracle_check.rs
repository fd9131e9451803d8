//! Branch-and-bound against exhaustive enumeration on small layouts.

use cmat::graph::{build_scenario, GeometryParams, ScenarioKind};
use cmat::model::{build_m1, build_m2, ModelKind, MovementDemand};
use cmat::params::CmatParameters;
use cmat::solver::{enumerate_oracle, solve, Backend, SolveOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = build_scenario(ScenarioKind::StaggeredT, &GeometryParams::default())?;
    let p = CmatParameters::default();
    // the throughput model is only enumerable when the cycle bound keeps platoons small
    let short = CmatParameters { c_max: 15.0, ..p };
    let opts = SolveOptions::default().with_backend(Backend::Native);
    println!("{:>24} {:>6} {:>12} {:>12}", "demand (veh/h)", "model", "solver", "oracle");
    for base in [[400.0, 400.0, 400.0], [900.0, 600.0, 400.0], [1500.0, 1200.0, 800.0], [3000.0, 3000.0, 3000.0]] {
        let d = MovementDemand::from_classes(&g, &base, 1.0)?;
        for kind in [ModelKind::M1, ModelKind::M2] {
            let (inst, params) = match kind {
                ModelKind::M1 => (build_m1(&g, &d, &p)?, &p),
                _ => (build_m2(&g, &d, &short)?, &short),
            };
            let s = solve(&inst, &opts)?;
            let o = enumerate_oracle(&g, Some(&d), params, kind)?;
            let fmt = |v: Option<f64>| v.map_or("infeasible".to_string(), |x| format!("{x:.6}"));
            println!("{:>24} {:>6} {:>12} {:>12}", format!("{base:?}"), kind, fmt(s.objective), fmt(o.objective));
        }
    }
    Ok(())
}
