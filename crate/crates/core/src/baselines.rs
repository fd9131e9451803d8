//! Comparison controllers: unit-platoon cyclic schedules and fixed-time signal plans.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ConflictGraph, ConflictKind, Intersection};
use crate::model::{build_unit_platoon, ModelError, MovementDemand};
use crate::params::CmatParameters;
use crate::schedule::{extract_schedule, CyclicSchedule, ScheduleError};
use crate::solver::{solve, SolveOptions, SolverError};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("intersection `{intersection}` is oversaturated: critical flow ratio {y:.3} >= 1")]
    Oversaturated { intersection: String, y: f64 },
    #[error("intersection `{intersection}` has no phases")]
    NoPhases { intersection: String },
    #[error("movement `{0}` is not served by any phase")]
    Unserved(String),
    #[error("demand missing for movement `{0}`")]
    MissingDemand(String),
}

/// Unit platoons alternating at the crossing gap, with the shortest feasible cycle.
pub fn rc_schedule(g: &ConflictGraph, params: &CmatParameters, opts: &SolveOptions) -> Result<CyclicSchedule, BaselineError> {
    let inst = build_unit_platoon(g, params)?;
    let sol = solve(&inst, opts)?;
    Ok(extract_schedule(&inst, &sol)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub movements: Vec<String>,
    pub green: f64,
    pub lost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionPlan {
    pub intersection: String,
    pub offset: f64,
    pub critical_ratio: f64,
    pub phases: Vec<Phase>,
}

impl IntersectionPlan {
    /// Start of the green of the phase serving `movement`, relative to the cycle start, and its length.
    pub fn green_window(&self, movement: &str) -> Option<(f64, f64)> {
        let mut t = self.offset;
        for ph in &self.phases {
            if ph.movements.iter().any(|m| m == movement) {
                return Some((t, ph.green));
            }
            t += ph.green + ph.lost;
        }
        None
    }
}

/// Fixed-time plan sharing one cycle across intersections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalPlan {
    pub cycle: f64,
    pub intersections: Vec<IntersectionPlan>,
    /// False when the plan was stretched to the cycle bound for an oversaturated demand.
    pub feasible: bool,
}

impl SignalPlan {
    pub fn invariant_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for ip in &self.intersections {
            let total: f64 = ip.phases.iter().map(|p| p.green + p.lost).sum();
            if (total - self.cycle).abs() > 1e-6 {
                out.push(format!("{}: phases sum to {total}, cycle is {}", ip.intersection, self.cycle));
            }
            if let Some(p) = ip.phases.iter().find(|p| p.green < 0.0) {
                out.push(format!("{}: negative green {}", ip.intersection, p.green));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TscConfig {
    pub lost_per_phase: f64,
    /// Replaces the graph's phase groups for every intersection when set.
    pub phase_groups: Option<Vec<Vec<String>>>,
}

impl Default for TscConfig {
    fn default() -> Self {
        TscConfig {
            lost_per_phase: 4.0,
            phase_groups: None,
        }
    }
}

/// Minimum-cycle fixed-time plan: `(1.5 TL + 5) / (1 - Y)`, greens split by critical flow ratio.
pub fn webster_plan(
    g: &ConflictGraph,
    demands: &MovementDemand,
    params: &CmatParameters,
    cfg: &TscConfig,
) -> Result<SignalPlan, BaselineError> {
    let plan = plan_inner(g, demands, params, cfg)?;
    if let Some((intersection, y)) = plan.saturated {
        return Err(BaselineError::Oversaturated { intersection, y });
    }
    Ok(plan.plan)
}

/// Like [`webster_plan`], but an oversaturated intersection gets the bounded cycle with greens
/// still split by flow ratio, and the plan is marked infeasible.
pub fn webster_plan_clamped(
    g: &ConflictGraph,
    demands: &MovementDemand,
    params: &CmatParameters,
    cfg: &TscConfig,
) -> Result<SignalPlan, BaselineError> {
    Ok(plan_inner(g, demands, params, cfg)?.plan)
}

struct Draft {
    plan: SignalPlan,
    saturated: Option<(String, f64)>,
}

fn plan_inner(
    g: &ConflictGraph,
    demands: &MovementDemand,
    params: &CmatParameters,
    cfg: &TscConfig,
) -> Result<Draft, BaselineError> {
    let qmax = params.q_max();
    let mut drafts = Vec::new();
    let mut saturated = None;
    let mut cycle: f64 = 0.0;
    for isec in &g.intersections {
        let groups = cfg.phase_groups.as_ref().unwrap_or(&isec.phases);
        let groups: Vec<&Vec<String>> = groups
            .iter()
            .filter(|grp| grp.iter().any(|m| g.movement(m).is_some_and(|mv| mv.nodes.iter().any(|n| isec.nodes.contains(n)))))
            .collect();
        if groups.is_empty() {
            return Err(BaselineError::NoPhases {
                intersection: isec.id.clone(),
            });
        }
        let lanes = shared_lanes(g, isec);
        let mut ratios = Vec::new();
        for grp in &groups {
            let mut y: f64 = 0.0;
            for m in grp.iter() {
                // movements sharing a lane discharge one after the other
                let mut q = 0.0;
                for other in lane_of(&lanes, m) {
                    if grp.contains(other) {
                        q += demands.get(other).ok_or_else(|| BaselineError::MissingDemand(other.clone()))?;
                    }
                }
                y = y.max(q / qmax);
            }
            ratios.push(y);
        }
        let big_y: f64 = ratios.iter().sum();
        let lost = cfg.lost_per_phase * groups.len() as f64;
        let c = if big_y < 1.0 {
            (1.5 * lost + 5.0) / (1.0 - big_y)
        } else {
            if saturated.is_none() {
                saturated = Some((isec.id.clone(), big_y));
            }
            f64::INFINITY
        };
        cycle = cycle.max(c);
        drafts.push((isec, groups, ratios, big_y, lost));
    }
    for p in &g.movements {
        let served = drafts
            .iter()
            .any(|(_, groups, ..)| groups.iter().any(|grp| grp.contains(&p.id)));
        if !served {
            return Err(BaselineError::Unserved(p.id.clone()));
        }
    }
    let cycle = cycle.min(params.c_max);
    let intersections = drafts
        .into_iter()
        .enumerate()
        .map(|(k, (isec, groups, ratios, big_y, lost))| {
            let n = groups.len() as f64;
            let phases = groups
                .iter()
                .zip(&ratios)
                .map(|(grp, &y)| Phase {
                    movements: grp.to_vec(),
                    // an idle intersection splits its green evenly
                    green: if big_y > 0.0 { y / big_y } else { 1.0 / n } * (cycle - lost).max(0.0),
                    lost: cfg.lost_per_phase,
                })
                .collect();
            IntersectionPlan {
                intersection: isec.id.clone(),
                offset: if k == 0 { 0.0 } else { link_offset(g, &g.intersections[0].nodes, &isec.nodes, params) },
                critical_ratio: big_y,
                phases,
            }
        })
        .collect();
    Ok(Draft {
        plan: SignalPlan {
            cycle,
            intersections,
            feasible: saturated.is_none(),
        },
        saturated,
    })
}

/// Movements entering `isec` on one lane: those joined by a diverge point of the intersection.
/// Every movement with a node there appears in exactly one group.
pub fn shared_lanes(g: &ConflictGraph, isec: &Intersection) -> Vec<Vec<String>> {
    let mut lanes: Vec<Vec<String>> = g
        .movements
        .iter()
        .filter(|p| p.nodes.iter().any(|n| isec.nodes.contains(n)))
        .map(|p| vec![p.id.clone()])
        .collect();
    for pt in g.nodes.iter().filter(|n| n.kind == ConflictKind::Diverge && isec.nodes.contains(&n.id)) {
        let members: Vec<String> = g.movements_at(&pt.id).iter().map(|p| p.id.clone()).collect();
        let mut merged = Vec::new();
        lanes.retain(|lane| {
            if lane.iter().any(|m| members.contains(m)) {
                merged.extend(lane.iter().cloned());
                false
            } else {
                true
            }
        });
        if !merged.is_empty() {
            merged.sort();
            lanes.push(merged);
        }
    }
    lanes.sort();
    lanes
}

fn lane_of<'a>(lanes: &'a [Vec<String>], movement: &str) -> &'a [String] {
    lanes
        .iter()
        .find(|l| l.iter().any(|m| m == movement))
        .map_or(&[], Vec::as_slice)
}

/// Free-flow time over the link joining two intersections, zero if they are not linked.
fn link_offset(g: &ConflictGraph, a: &[String], b: &[String], params: &CmatParameters) -> f64 {
    g.arcs
        .iter()
        .find(|arc| (a.contains(&arc.from) && b.contains(&arc.to)) || (b.contains(&arc.from) && a.contains(&arc.to)))
        .map_or(0.0, |arc| arc.length_m / params.flow.v_f)
}
