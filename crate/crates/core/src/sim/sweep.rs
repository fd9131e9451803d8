use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate, SimConfig, SimError, SimMetrics};
use crate::baselines::{rc_schedule, webster_plan_clamped, TscConfig};
use crate::graph::ConflictGraph;
use crate::model::{build_m1, build_m2, muted_set, MilpInstance, MovementDemand};
use crate::params::CmatParameters;
use crate::schedule::{check_prop1, extract_incumbent, rlt_residuals, verify_safety, Controller, CyclicSchedule, DEFAULT_SAFETY_CYCLES};
use crate::solver::{feasible_start, phase_order_start, solve, MilpSolution, MilpStatus, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelUsed {
    M1,
    M2,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl fmt::Display for ModelUsed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelUsed::M1 => "M1",
            ModelUsed::M2 => "M2",
            ModelUsed::NotApplicable => "n/a",
        })
    }
}

/// A controller built for one demand level, with the checks run on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltController {
    pub controller: Controller,
    pub model_used: ModelUsed,
    pub cycle: f64,
    pub platoon_sizes: Vec<u32>,
    pub tsc_feasible: Option<bool>,
    pub safety_ok: bool,
    /// Whether the solver proved optimality; `None` for controllers that are not solved per row.
    pub proven_optimal: Option<bool>,
    pub prop1_ok: Option<bool>,
    pub rlt_residual: Option<f64>,
}

pub trait ControllerFactory: Sync {
    fn name(&self) -> &'static str;
    fn build(&self, demands: &MovementDemand) -> Result<BuiltController, String>;
}

fn cyclic(
    s: CyclicSchedule,
    model_used: ModelUsed,
    proven_optimal: Option<bool>,
    prop1_ok: Option<bool>,
    rlt_residual: Option<f64>,
) -> BuiltController {
    let safety_ok = verify_safety(&s, DEFAULT_SAFETY_CYCLES).is_empty();
    BuiltController {
        cycle: s.cycle,
        platoon_sizes: s.platoon_sizes(),
        controller: Controller::Cyclic { schedule: s },
        model_used,
        tsc_feasible: None,
        safety_ok,
        proven_optimal,
        prop1_ok,
        rlt_residual,
    }
}

type M2Result = Result<(MilpInstance, MilpSolution), String>;

/// Solves the queue-clearing model and falls back to the throughput model when it is infeasible.
///
/// The throughput model sees demand only through the set of muted movements, so its solutions
/// are cached per muted set and shared by every demand level of a sweep.
pub struct CmatFactory {
    pub graph: ConflictGraph,
    pub params: CmatParameters,
    pub solve: SolveOptions,
    m2_cache: Mutex<HashMap<BTreeSet<String>, Arc<OnceLock<M2Result>>>>,
}

impl CmatFactory {
    pub fn new(graph: ConflictGraph, params: CmatParameters, solve: SolveOptions) -> Self {
        CmatFactory {
            graph,
            params,
            solve,
            m2_cache: Mutex::new(HashMap::new()),
        }
    }

    fn cached_m2(&self, demands: &MovementDemand) -> M2Result {
        let key = muted_set(demands, &self.params);
        let cell = {
            let mut cache = self.m2_cache.lock().expect("cache lock");
            cache.entry(key).or_default().clone()
        };
        cell.get_or_init(|| self.solve_m2(demands)).clone()
    }

    fn solve_m2(&self, demands: &MovementDemand) -> M2Result {
        let inst = build_m2(&self.graph, demands, &self.params).map_err(|e| e.to_string())?;
        let start = if self.graph.intersections.iter().any(|i| i.phases.len() > 1) {
            phase_order_start(&inst, &self.graph, &self.solve)
        } else {
            None
        };
        let start = start.or_else(|| match feasible_start(&inst, demands) {
            Ok(x) => Some(x),
            Err(e) => {
                log::debug!("no constructive start: {e}");
                None
            }
        });
        let mut opts = self.solve.clone();
        opts.initial = start;
        let sol = solve(&inst, &opts).map_err(|e| e.to_string())?;
        Ok((inst, sol))
    }
}

fn rlt_max(inst: &MilpInstance, sol: &MilpSolution) -> Option<f64> {
    let x = sol.values.as_ref()?;
    Some(rlt_residuals(inst, x).into_iter().map(|r| r.1).fold(0.0, f64::max))
}

impl ControllerFactory for CmatFactory {
    fn name(&self) -> &'static str {
        "cmat"
    }

    fn build(&self, demands: &MovementDemand) -> Result<BuiltController, String> {
        let inst = build_m1(&self.graph, demands, &self.params).map_err(|e| e.to_string())?;
        let sol = solve(&inst, &self.solve).map_err(|e| e.to_string())?;
        let (inst, sol, used) = match sol.status {
            MilpStatus::Optimal => (inst, sol, ModelUsed::M1),
            MilpStatus::LimitReached if sol.has_incumbent() => (inst, sol, ModelUsed::M1),
            status => {
                if status == MilpStatus::LimitReached {
                    log::warn!("M1 stopped at a limit without a schedule, using M2");
                }
                let (inst, sol) = self.cached_m2(demands)?;
                (inst, sol, ModelUsed::M2)
            }
        };
        if !sol.has_incumbent() {
            return Err(format!("{used} returned {} without a schedule", sol.status));
        }
        let s = extract_incumbent(&inst, &sol).map_err(|e| e.to_string())?;
        let prop1 = (used == ModelUsed::M1).then(|| check_prop1(&s, demands, &self.params).holds());
        let rlt = rlt_max(&inst, &sol);
        Ok(cyclic(s, used, Some(sol.status == MilpStatus::Optimal), prop1, rlt))
    }
}

/// Unit-platoon schedule, solved once and reused for every demand level.
pub struct RcFactory {
    pub graph: ConflictGraph,
    pub params: CmatParameters,
    pub solve: SolveOptions,
    cached: OnceLock<Result<BuiltController, String>>,
}

impl RcFactory {
    pub fn new(graph: ConflictGraph, params: CmatParameters, solve: SolveOptions) -> Self {
        RcFactory {
            graph,
            params,
            solve,
            cached: OnceLock::new(),
        }
    }
}

impl ControllerFactory for RcFactory {
    fn name(&self) -> &'static str {
        "rc"
    }

    fn build(&self, _demands: &MovementDemand) -> Result<BuiltController, String> {
        self.cached
            .get_or_init(|| {
                let s = rc_schedule(&self.graph, &self.params, &self.solve).map_err(|e| e.to_string())?;
                Ok(cyclic(s, ModelUsed::NotApplicable, Some(true), None, None))
            })
            .clone()
    }
}

/// Fixed-time plan per demand level; oversaturated levels run the cycle-bounded plan.
pub struct TscFactory {
    pub graph: ConflictGraph,
    pub params: CmatParameters,
    pub config: TscConfig,
}

impl ControllerFactory for TscFactory {
    fn name(&self) -> &'static str {
        "tsc"
    }

    fn build(&self, demands: &MovementDemand) -> Result<BuiltController, String> {
        let plan = webster_plan_clamped(&self.graph, demands, &self.params, &self.config).map_err(|e| e.to_string())?;
        Ok(BuiltController {
            cycle: plan.cycle,
            platoon_sizes: Vec::new(),
            tsc_feasible: Some(plan.feasible),
            safety_ok: plan.invariant_failures().is_empty(),
            controller: Controller::Signal { plan },
            model_used: ModelUsed::NotApplicable,
            proven_optimal: None,
            prop1_ok: None,
            rlt_residual: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub built: BuiltController,
    pub metrics: SimMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub demand_total_vph: f64,
    pub result: Result<SweepPoint, String>,
}

/// Build and simulate one controller per demand multiplier. Rows run on `workers` threads
/// and come back in the order of `betas`; a failing row does not stop the others.
pub fn capacity_sweep(
    factory: &dyn ControllerFactory,
    g: &ConflictGraph,
    base: &MovementDemand,
    betas: &[f64],
    params: &CmatParameters,
    cfg: &SimConfig,
    workers: usize,
) -> Result<Vec<SweepRow>, SimError> {
    cfg.validate()?;
    if betas.windows(2).any(|w| w[0] > w[1]) {
        return Err(SimError::Mismatch("demand multipliers must be sorted ascending".into()));
    }
    let row = |&beta: &f64| {
        let demands = base.scaled(beta);
        let result = factory.build(&demands).and_then(|built| {
            let metrics = simulate(&built.controller, g, &demands, &params.flow, cfg).map_err(|e| e.to_string())?;
            Ok(SweepPoint { built, metrics })
        });
        if let Err(e) = &result {
            log::warn!("{} at beta {beta}: {e}", factory.name());
        }
        SweepRow {
            beta,
            demand_total_vph: demands.total_vph(),
            result,
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::Mismatch(format!("worker pool: {e}")))?;
    Ok(pool.install(|| betas.par_iter().map(row).collect()))
}
