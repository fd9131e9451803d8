//! Constructive feasible point for the throughput model under its existence precondition.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use itertools::Itertools;

use super::{solve, MilpStatus, SolveOptions};
use crate::graph::ConflictGraph;
use crate::milp::Violation;
use crate::model::{check_m2_precondition, reference_cycle, MilpInstance, ModelKind, MovementDemand, PreconditionCheck};

#[derive(Debug, Error)]
pub enum WarmStartError {
    #[error("precondition violated: {0}")]
    Precondition(PreconditionCheck),
    #[error("the construction applies to the M2 model, got {0}")]
    WrongModel(ModelKind),
    #[error("offset equations disagree around a cycle through `{node}` by {residual:.3e} s")]
    InconsistentOffsets { node: String, residual: f64 },
    #[error("constructed point violates the model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Violated(Vec<Violation>),
}

/// Unit platoons at saturation rate, every node ordered by movement id with the first gap at its
/// minimum, and the reference cycle. Offsets come from propagating the per-node equalities over
/// the movement-pair graph, which only has a solution when that graph has no contradictory cycle.
pub fn feasible_start(
    inst: &MilpInstance,
    demands: &MovementDemand,
) -> Result<Vec<f64>, WarmStartError> {
    if inst.kind != ModelKind::M2 {
        return Err(WarmStartError::WrongModel(inst.kind));
    }
    let params = &inst.params;
    // only the cycle bound matters to the construction, the substitution check below covers the rest
    match check_m2_precondition(demands, params) {
        PreconditionCheck::Ok => {}
        PreconditionCheck::MuteThreshold { .. } => log::debug!("mute threshold above the limit, constructing anyway"),
        bad @ PreconditionCheck::CycleBound { .. } => return Err(WarmStartError::Precondition(bad)),
    }
    let fp = params.flow;
    let body = fp.body_time();
    let c = reference_cycle(demands, params);
    let green = 1.0 / params.q_max();
    let red = c - green;
    let roles = &inst.roles;

    // t_off[second] - t_off[first] = l/v_f + tau_c + tt_first - tt_second
    let mut adj: BTreeMap<&str, Vec<(&str, f64, &str)>> = BTreeMap::new();
    for n in &roles.nodes {
        let ta = roles.arrival(&n.first, &n.node).expect("arrival").travel_time;
        let tb = roles.arrival(&n.second, &n.node).expect("arrival").travel_time;
        let delta = body + fp.tau_c + ta - tb;
        adj.entry(&n.first).or_default().push((&n.second, delta, &n.node));
        adj.entry(&n.second).or_default().push((&n.first, -delta, &n.node));
    }
    let mut offset: BTreeMap<&str, f64> = BTreeMap::new();
    for m in &roles.movements {
        let root = m.movement.as_str();
        if offset.contains_key(root) {
            continue;
        }
        let mut component = vec![root];
        offset.insert(root, 0.0);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let ou = offset[u];
            for &(v, delta, node) in adj.get(u).map(Vec::as_slice).unwrap_or(&[]) {
                match offset.get(v) {
                    Some(&ov) => {
                        let residual = ov - (ou + delta);
                        if residual.abs() > 1e-9 {
                            return Err(WarmStartError::InconsistentOffsets {
                                node: node.to_string(),
                                residual,
                            });
                        }
                    }
                    None => {
                        offset.insert(v, ou + delta);
                        component.push(v);
                        queue.push_back(v);
                    }
                }
            }
        }
        let shift = component.iter().map(|v| offset[v]).fold(f64::INFINITY, f64::min);
        for v in component {
            *offset.get_mut(v).expect("set") -= shift;
        }
    }

    let p = &inst.problem;
    let mut x = vec![0.0; p.variables.len()];
    x[roles.cycle.0] = c;
    let occupancy = fp.platoon_time(1);
    for m in &roles.movements {
        x[m.red.0] = red;
        x[m.green.0] = green;
        x[m.platoon_size.0] = 1.0;
        x[m.offset.0] = offset[m.movement.as_str()];
        x[m.occupancy.0] = occupancy;
    }
    for a in &roles.arrivals {
        x[a.var.0] = offset[a.movement.as_str()] + red + a.travel_time;
    }
    for n in &roles.nodes {
        let ta = roles.arrival(&n.first, &n.node).expect("arrival").var;
        let tb = roles.arrival(&n.second, &n.node).expect("arrival").var;
        x[n.order.0] = 1.0;
        x[n.first_headway.0] = x[tb.0] - x[ta.0] - occupancy;
        x[n.second_headway.0] = c - x[n.first_headway.0] - 2.0 * occupancy;
        x[n.x_lower.0] = x[ta.0];
        x[n.x_upper.0] = x[tb.0];
        x[n.y_lower.0] = occupancy;
        x[n.y_upper.0] = occupancy;
    }
    let bad = p.violations(&x, 1e-6);
    if !bad.is_empty() {
        return Err(WarmStartError::Violated(bad));
    }
    Ok(x)
}

/// Cyclic phase sequences tried per intersection before giving up on enumeration.
const MAX_SEQUENCES: usize = 64;

/// Best point found by fixing node orders to those of a cyclic phase sequence.
///
/// Each intersection's phases are visited in every cyclic order (first phase pinned). Two
/// movements in different phases are ordered by their phases, pairs within one phase keep a
/// free order bit. The remaining model has few binaries and solves quickly.
pub fn phase_order_start(inst: &MilpInstance, g: &ConflictGraph, opts: &SolveOptions) -> Option<Vec<f64>> {
    let per_intersection: Vec<Vec<Vec<usize>>> = g
        .intersections
        .iter()
        .map(|i| {
            let k = i.phases.len();
            if k < 2 {
                return vec![(0..k).collect()];
            }
            (1..k)
                .permutations(k - 1)
                .map(|rest| std::iter::once(0).chain(rest).collect())
                .collect()
        })
        .collect();
    if per_intersection.is_empty() {
        return None;
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (tried, combo) in per_intersection.iter().multi_cartesian_product().enumerate() {
        if tried == MAX_SEQUENCES {
            break;
        }
        let mut p = inst.problem.clone();
        for n in &inst.roles.nodes {
            let Some((k, isec)) = g.intersections.iter().find_position(|i| i.nodes.contains(&n.node)) else {
                continue;
            };
            let rank = |m: &str| {
                let phase = isec.phases.iter().position(|ph| ph.iter().any(|x| x == m))?;
                combo[k].iter().position(|&q| q == phase)
            };
            if let (Some(a), Some(b)) = (rank(&n.first), rank(&n.second)) {
                if a != b {
                    let z = if a < b { 1.0 } else { 0.0 };
                    p.variables[n.order.0].lower = z;
                    p.variables[n.order.0].upper = z;
                }
            }
        }
        let Ok(sol) = solve(&p, opts) else { continue };
        if let (MilpStatus::Optimal | MilpStatus::LimitReached, Some(obj), Some(x)) = (sol.status, sol.objective, sol.values) {
            log::debug!("phase sequence {combo:?}: objective {obj}");
            if best.as_ref().map_or(true, |b| obj < b.0 - 1e-9) {
                best = Some((obj, x));
            }
        }
    }
    best.map(|b| b.1)
}
