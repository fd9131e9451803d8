//! The cyclic platoon scheduling models as MILP instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{travel_time, validate_graph, ConflictGraph, GraphError, ValidationReport};
use crate::milp::{Problem, ProblemError, Sense, VarId, VarKind};
use crate::params::{vph_to_vps, vps_to_vph, CmatParameters, ParamError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid conflict graph: {0}")]
    InvalidGraph(ValidationReport),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("no demand given for movement `{0}`")]
    MissingDemand(String),
    #[error("demand for movement `{movement}` must be finite and non-negative, got {value}")]
    BadDemand { movement: String, value: f64 },
    #[error("demand vector has {got} entries, the scenario needs {expected}")]
    DemandClasses { expected: usize, got: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Arrival rate per movement in veh/s.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MovementDemand {
    rates: BTreeMap<String, f64>,
}

impl MovementDemand {
    pub fn from_vps<I, S>(rates: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut out = BTreeMap::new();
        for (id, q) in rates {
            let id = id.into();
            if !(q.is_finite() && q >= 0.0) {
                return Err(ModelError::BadDemand { movement: id, value: q });
            }
            out.insert(id, q);
        }
        Ok(MovementDemand { rates: out })
    }

    pub fn from_vph<I, S>(rates: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self::from_vps(rates.into_iter().map(|(id, v)| (id, vph_to_vps(v))))
    }

    /// Demand from a per-class vector in veh/h scaled by `beta`, using each movement's demand class.
    pub fn from_classes(g: &ConflictGraph, base_vph: &[f64], beta: f64) -> Result<Self, ModelError> {
        let needed = g.movements.iter().map(|p| p.demand_class + 1).max().unwrap_or(0);
        if base_vph.len() < needed {
            return Err(ModelError::DemandClasses {
                expected: needed,
                got: base_vph.len(),
            });
        }
        Self::from_vph(g.movements.iter().map(|p| (p.id.clone(), beta * base_vph[p.demand_class])))
    }

    pub fn get(&self, movement: &str) -> Option<f64> {
        self.rates.get(movement).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.rates.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn total_vps(&self) -> f64 {
        self.rates.values().sum()
    }

    pub fn total_vph(&self) -> f64 {
        vps_to_vph(self.total_vps())
    }

    pub fn scaled(&self, beta: f64) -> Self {
        MovementDemand {
            rates: self.rates.iter().map(|(k, v)| (k.clone(), v * beta)).collect(),
        }
    }

    fn require(&self, g: &ConflictGraph) -> Result<(), ModelError> {
        for p in &g.movements {
            if !self.rates.contains_key(&p.id) {
                return Err(ModelError::MissingDemand(p.id.clone()));
            }
        }
        Ok(())
    }

    /// Rate used by the models: demand above saturation is clamped.
    pub fn effective(&self, movement: &str, params: &CmatParameters) -> Option<f64> {
        let q = self.get(movement)?;
        let qmax = params.q_max();
        if q > qmax {
            log::warn!("demand of `{movement}` ({:.1} veh/h) exceeds saturation, clamped", vps_to_vph(q));
            Some(qmax)
        } else {
            Some(q)
        }
    }
}

/// Movements whose arrival headway exceeds the mute threshold.
pub fn muted_set(demands: &MovementDemand, params: &CmatParameters) -> BTreeSet<String> {
    demands
        .iter()
        .filter(|(_, q)| 1.0 / q > params.tau_star)
        .map(|(id, _)| id.to_string())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    /// Queue-clearing model.
    M1,
    /// Throughput-maximizing relaxation.
    M2,
    /// Unit platoons, minimal cycle.
    UnitPlatoon,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::M1 => "M1",
            ModelKind::M2 => "M2",
            ModelKind::UnitPlatoon => "RC",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableBounds {
    pub platoon_time_lb: f64,
    pub platoon_time_ub: f64,
    pub arrival_lb: f64,
    /// Upper bound of an arrival time before adding the travel time to the node.
    pub arrival_ub_base: f64,
}

impl VariableBounds {
    pub fn arrival_ub(&self, travel: f64) -> f64 {
        self.arrival_ub_base + travel
    }
}

pub fn variable_bounds(g: &ConflictGraph, params: &CmatParameters) -> VariableBounds {
    let lmax = params.max_platoon();
    VariableBounds {
        platoon_time_lb: params.flow.body_time(),
        platoon_time_ub: params.flow.platoon_time(lmax),
        arrival_lb: 0.0,
        arrival_ub_base: g.movements.len() as f64 * params.c_max - 1.0 / params.q_max(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementRoles {
    pub movement: String,
    pub red: VarId,
    pub green: VarId,
    pub platoon_size: VarId,
    pub offset: VarId,
    pub occupancy: VarId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRoles {
    pub node: String,
    pub first: String,
    pub second: String,
    pub first_headway: VarId,
    pub second_headway: VarId,
    /// 1 when `first` crosses before `second` within a cycle.
    pub order: VarId,
    pub x_lower: VarId,
    pub x_upper: VarId,
    pub y_lower: VarId,
    pub y_upper: VarId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRole {
    pub movement: String,
    pub node: String,
    pub var: VarId,
    pub travel_time: f64,
}

/// Maps every model symbol to its variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleIndex {
    pub cycle: VarId,
    pub movements: Vec<MovementRoles>,
    pub nodes: Vec<NodeRoles>,
    pub arrivals: Vec<ArrivalRole>,
}

impl RoleIndex {
    pub fn movement(&self, id: &str) -> Option<&MovementRoles> {
        self.movements.iter().find(|m| m.movement == id)
    }

    pub fn arrival(&self, movement: &str, node: &str) -> Option<&ArrivalRole> {
        self.arrivals.iter().find(|a| a.movement == movement && a.node == node)
    }

    /// Every variable id, one entry per symbol.
    pub fn all(&self) -> Vec<VarId> {
        let mut v = vec![self.cycle];
        for m in &self.movements {
            v.extend([m.red, m.green, m.platoon_size, m.offset, m.occupancy]);
        }
        for n in &self.nodes {
            v.extend([n.first_headway, n.second_headway, n.order, n.x_lower, n.x_upper, n.y_lower, n.y_upper]);
        }
        v.extend(self.arrivals.iter().map(|a| a.var));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpInstance {
    pub kind: ModelKind,
    pub problem: Problem,
    pub roles: RoleIndex,
    pub muted: BTreeSet<String>,
    pub bounds: VariableBounds,
    pub params: CmatParameters,
}

impl AsRef<Problem> for MilpInstance {
    fn as_ref(&self) -> &Problem {
        &self.problem
    }
}

fn sanitize(s: &str) -> String {
    let mut out: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, '_');
    }
    out
}

struct Names {
    used: BTreeSet<String>,
}

impl Names {
    fn make(&mut self, base: String) -> String {
        let mut name = base.clone();
        let mut k = 1;
        while !self.used.insert(name.clone()) {
            k += 1;
            name = format!("{base}_{k}");
        }
        name
    }
}

pub fn build_m1(g: &ConflictGraph, demands: &MovementDemand, params: &CmatParameters) -> Result<MilpInstance, ModelError> {
    build(ModelKind::M1, g, Some(demands), params)
}

pub fn build_m2(g: &ConflictGraph, demands: &MovementDemand, params: &CmatParameters) -> Result<MilpInstance, ModelError> {
    build(ModelKind::M2, g, Some(demands), params)
}

/// Unit-platoon model: every L_p fixed to 1, minimizing the cycle.
pub fn build_unit_platoon(g: &ConflictGraph, params: &CmatParameters) -> Result<MilpInstance, ModelError> {
    build(ModelKind::UnitPlatoon, g, None, params)
}

fn build(
    kind: ModelKind,
    g: &ConflictGraph,
    demands: Option<&MovementDemand>,
    params: &CmatParameters,
) -> Result<MilpInstance, ModelError> {
    params.validate()?;
    let report = validate_graph(g);
    if !report.is_empty() {
        return Err(ModelError::InvalidGraph(report));
    }
    let mut rates = BTreeMap::new();
    let muted = match demands {
        Some(d) => {
            d.require(g)?;
            for p in &g.movements {
                rates.insert(p.id.clone(), d.effective(&p.id, params).expect("required"));
            }
            muted_set(d, params)
        }
        None => BTreeSet::new(),
    };

    let fp = params.flow;
    let qmax = params.q_max();
    let lmax = params.max_platoon() as f64;
    let bounds = variable_bounds(g, params);
    let cbar = params.c_max;
    let np = g.movements.len() as f64;
    let mut pr = Problem::new(format!("cmat_{}", kind).to_lowercase());
    let mut names = Names { used: BTreeSet::new() };

    let cycle = pr.add_var(names.make("C".into()), VarKind::Continuous, 0.0, cbar);
    let ids = g.movement_ids();
    let mut movements = Vec::new();
    let mut arrivals = Vec::new();
    for id in &ids {
        let s = sanitize(id);
        let unit = kind == ModelKind::UnitPlatoon || muted.contains(id);
        let red = pr.add_var(names.make(format!("r_{s}")), VarKind::Continuous, 0.0, cbar);
        let green = pr.add_var(names.make(format!("g_{s}")), VarKind::Continuous, 0.0, cbar);
        let size = pr.add_var(
            names.make(format!("L_{s}")),
            VarKind::Integer,
            1.0,
            if unit { 1.0 } else { lmax },
        );
        let offset = pr.add_var(names.make(format!("toff_{s}")), VarKind::Continuous, 0.0, (np - 1.0) * cbar);
        let occ = pr.add_var(
            names.make(format!("T_{s}")),
            VarKind::Continuous,
            bounds.platoon_time_lb,
            bounds.platoon_time_ub,
        );
        movements.push(MovementRoles {
            movement: id.clone(),
            red,
            green,
            platoon_size: size,
            offset,
            occupancy: occ,
        });
        let p = g.movement(id).expect("listed");
        for n in &p.nodes {
            let tt = travel_time(g, id, n, fp.v_f)?;
            let var = pr.add_var(
                names.make(format!("tarr_{s}_{}", sanitize(n))),
                VarKind::Continuous,
                bounds.arrival_lb,
                bounds.arrival_ub(tt),
            );
            arrivals.push(ArrivalRole {
                movement: id.clone(),
                node: n.clone(),
                var,
                travel_time: tt,
            });
        }
    }
    let mut nodes = Vec::new();
    for pair in g.node_pairs() {
        let s = sanitize(&pair.node);
        let ub1 = arrivals
            .iter()
            .find(|a| a.movement == pair.first && a.node == pair.node)
            .map(|a| bounds.arrival_ub(a.travel_time))
            .expect("arrival");
        let ub2 = arrivals
            .iter()
            .find(|a| a.movement == pair.second && a.node == pair.node)
            .map(|a| bounds.arrival_ub(a.travel_time))
            .expect("arrival");
        let first_headway = pr.add_var(names.make(format!("hlo_{s}")), VarKind::Continuous, fp.tau_c, cbar);
        let second_headway = pr.add_var(names.make(format!("hhi_{s}")), VarKind::Continuous, fp.tau_c, cbar);
        let order = pr.add_var(
            names.make(format!("z_{}_{}_{s}", sanitize(&pair.first), sanitize(&pair.second))),
            VarKind::Binary,
            0.0,
            1.0,
        );
        let x_lower = pr.add_var(names.make(format!("xlo_{s}")), VarKind::Continuous, 0.0, ub1);
        let x_upper = pr.add_var(names.make(format!("xhi_{s}")), VarKind::Continuous, 0.0, ub2);
        let y_lower = pr.add_var(names.make(format!("ylo_{s}")), VarKind::Continuous, 0.0, bounds.platoon_time_ub);
        let y_upper = pr.add_var(names.make(format!("yhi_{s}")), VarKind::Continuous, 0.0, bounds.platoon_time_ub);
        nodes.push(NodeRoles {
            node: pair.node,
            first: pair.first,
            second: pair.second,
            first_headway,
            second_headway,
            order,
            x_lower,
            x_upper,
            y_lower,
            y_upper,
        });
    }
    let roles = RoleIndex {
        cycle,
        movements,
        nodes,
        arrivals,
    };

    // rows
    let mv = |id: &str| roles.movement(id).expect("movement");
    for n in &roles.nodes {
        let (a, b) = (mv(&n.first), mv(&n.second));
        pr.add_row(
            format!("cycle_node_{}", sanitize(&n.node)),
            vec![
                (cycle, 1.0),
                (n.first_headway, -1.0),
                (n.second_headway, -1.0),
                (a.occupancy, -1.0),
                (b.occupancy, -1.0),
            ],
            Sense::Eq,
            0.0,
        );
    }
    for m in &roles.movements {
        let s = sanitize(&m.movement);
        pr.add_row(
            format!("cycle_move_{s}"),
            vec![(cycle, 1.0), (m.red, -1.0), (m.green, -1.0)],
            Sense::Eq,
            0.0,
        );
        if !muted.contains(&m.movement) {
            pr.add_row(
                format!("platoon_size_{s}"),
                vec![(m.platoon_size, 1.0), (m.green, -qmax)],
                Sense::Eq,
                0.0,
            );
            if kind == ModelKind::M1 {
                let q = rates[&m.movement];
                pr.add_row(
                    format!("clear_{s}"),
                    vec![(m.red, q), (m.green, q), (m.platoon_size, -1.0)],
                    Sense::Eq,
                    0.0,
                );
            }
        }
        pr.add_row(
            format!("platoon_time_{s}"),
            vec![(m.occupancy, 1.0), (m.platoon_size, -fp.discharge_headway())],
            Sense::Eq,
            -fp.tau_f,
        );
    }
    for a in &roles.arrivals {
        let m = mv(&a.movement);
        pr.add_row(
            format!("arrive_{}_{}", sanitize(&a.movement), sanitize(&a.node)),
            vec![(a.var, 1.0), (m.offset, -1.0), (m.red, -1.0)],
            Sense::Eq,
            a.travel_time,
        );
    }
    for n in &roles.nodes {
        let s = sanitize(&n.node);
        let (a, b) = (mv(&n.first), mv(&n.second));
        let ta = roles.arrival(&n.first, &n.node).expect("arrival");
        let tb = roles.arrival(&n.second, &n.node).expect("arrival");
        // lower headway: t1 - t2 - T2 + 2 x_hi - 2 x_lo - y_lo + y_hi
        pr.add_row(
            format!("headway_{s}"),
            vec![
                (n.first_headway, 1.0),
                (ta.var, -1.0),
                (tb.var, 1.0),
                (b.occupancy, 1.0),
                (n.x_upper, -2.0),
                (n.x_lower, 2.0),
                (n.y_lower, 1.0),
                (n.y_upper, -1.0),
            ],
            Sense::Eq,
            0.0,
        );
        let products = [
            ("xlo", n.x_lower, ta.var, 0.0, bounds.arrival_ub(ta.travel_time)),
            ("xhi", n.x_upper, tb.var, 0.0, bounds.arrival_ub(tb.travel_time)),
            ("ylo", n.y_lower, a.occupancy, bounds.platoon_time_lb, bounds.platoon_time_ub),
            ("yhi", n.y_upper, b.occupancy, bounds.platoon_time_lb, bounds.platoon_time_ub),
        ];
        for (tag, w, v, lo, hi) in products {
            let z = n.order;
            pr.add_row(format!("rlt_{tag}1_{s}"), vec![(w, 1.0), (z, -lo)], Sense::Ge, 0.0);
            pr.add_row(format!("rlt_{tag}2_{s}"), vec![(w, 1.0), (z, -hi)], Sense::Le, 0.0);
            pr.add_row(format!("rlt_{tag}3_{s}"), vec![(w, 1.0), (v, -1.0), (z, -lo)], Sense::Le, -lo);
            pr.add_row(format!("rlt_{tag}4_{s}"), vec![(w, 1.0), (v, -1.0), (z, -hi)], Sense::Ge, -hi);
        }
    }

    let lam = params.lambda;
    pr.objective = match kind {
        ModelKind::M1 => std::iter::once((cycle, lam))
            .chain(roles.movements.iter().map(|m| (m.platoon_size, -(1.0 - lam))))
            .collect(),
        ModelKind::M2 => std::iter::once((cycle, 1.0 - lam))
            .chain(roles.movements.iter().map(|m| (m.platoon_size, -lam)))
            .collect(),
        ModelKind::UnitPlatoon => vec![(cycle, 1.0)],
    };
    pr.validate()?;
    Ok(MilpInstance {
        kind,
        problem: pr,
        roles,
        muted,
        bounds,
        params: *params,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum PreconditionCheck {
    Ok,
    /// C̄ is below max{2τ_c + 2l/v_f, max 1/q_p}.
    CycleBound { c_max: f64, required: f64 },
    /// τ* exceeds that maximum minus 1/q_max.
    MuteThreshold { tau_star: f64, limit: f64 },
}

impl PreconditionCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, PreconditionCheck::Ok)
    }
}

impl fmt::Display for PreconditionCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreconditionCheck::Ok => write!(f, "ok"),
            PreconditionCheck::CycleBound { c_max, required } => {
                write!(f, "cycle bound {c_max} s is below the required {required} s")
            }
            PreconditionCheck::MuteThreshold { tau_star, limit } => {
                write!(f, "mute threshold {tau_star} s exceeds the limit {limit} s")
            }
        }
    }
}

/// The reference cycle max{2τ_c + 2l/v_f, max_p 1/q_p}.
pub fn reference_cycle(demands: &MovementDemand, params: &CmatParameters) -> f64 {
    let fp = params.flow;
    let slowest = demands.iter().map(|(_, q)| 1.0 / q).fold(0.0_f64, f64::max);
    (2.0 * fp.tau_c + 2.0 * fp.body_time()).max(slowest)
}

pub fn check_m2_precondition(demands: &MovementDemand, params: &CmatParameters) -> PreconditionCheck {
    let m = reference_cycle(demands, params);
    if params.c_max < m {
        return PreconditionCheck::CycleBound {
            c_max: params.c_max,
            required: m,
        };
    }
    let limit = m - 1.0 / params.q_max();
    if params.tau_star > limit {
        return PreconditionCheck::MuteThreshold {
            tau_star: params.tau_star,
            limit,
        };
    }
    PreconditionCheck::Ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_scenario, GeometryParams, ScenarioKind};

    fn single() -> ConflictGraph {
        build_scenario(ScenarioKind::SingleConflict, &GeometryParams::default()).unwrap()
    }

    #[test]
    fn mute_rule() {
        let p = CmatParameters::default();
        let d = MovementDemand::from_vph([("a", 100.0), ("b", 1000.0), ("c", 360.0)]).unwrap();
        let m = muted_set(&d, &p);
        assert!(m.contains("a"));
        assert!(!m.contains("b"));
        // exactly 1/q = tau_star stays unmuted
        assert!(!m.contains("c"));
    }

    #[test]
    fn bounds_from_defaults() {
        let p = CmatParameters::default();
        let b = variable_bounds(&single(), &p);
        assert!((b.platoon_time_ub - 119.0).abs() < 1e-9);
        assert!((b.platoon_time_lb - 0.25).abs() < 1e-12);
        assert!((b.arrival_ub(0.0) - 238.75).abs() < 1e-9);
    }

    #[test]
    fn role_index_is_total() {
        let g = build_scenario(ScenarioKind::StaggeredT, &GeometryParams::default()).unwrap();
        let d = MovementDemand::from_vph([("p1", 900.0), ("p2", 600.0), ("p3", 100.0)]).unwrap();
        let inst = build_m1(&g, &d, &CmatParameters::default()).unwrap();
        let mut ids: Vec<usize> = inst.roles.all().iter().map(|v| v.0).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..inst.problem.variables.len()).collect::<Vec<_>>());
        assert_eq!(inst.problem.variables.len(), 1 + 5 * 3 + 7 * 2 + 4);
        assert!(inst.muted.contains("p3"));
        let l3 = inst.roles.movement("p3").unwrap().platoon_size;
        assert_eq!(inst.problem.variables[l3.0].upper, 1.0);
    }

    #[test]
    fn m2_drops_clearance_rows() {
        let d = MovementDemand::from_vph([("EB", 1000.0), ("NB", 1000.0)]).unwrap();
        let p = CmatParameters::default();
        let m1 = build_m1(&single(), &d, &p).unwrap();
        let m2 = build_m2(&single(), &d, &p).unwrap();
        assert_eq!(m1.problem.constraints.len(), m2.problem.constraints.len() + 2);
        assert!(m2.problem.constraints.iter().all(|c| !c.name.starts_with("clear_")));
    }

    #[test]
    fn precondition_cases() {
        let p = CmatParameters::default();
        let d = MovementDemand::from_vps([("a", 0.02), ("b", 0.5)]).unwrap();
        assert!(check_m2_precondition(&d, &p).is_ok());
        let tight = CmatParameters { c_max: 3.0, ..p };
        assert!(matches!(check_m2_precondition(&d, &tight), PreconditionCheck::CycleBound { .. }));
        let lax = CmatParameters { tau_star: 60.0, ..p };
        match check_m2_precondition(&d, &lax) {
            PreconditionCheck::MuteThreshold { limit, .. } => assert!((limit - 48.75).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_demand_is_an_error() {
        let d = MovementDemand::from_vph([("EB", 1000.0)]).unwrap();
        assert!(matches!(
            build_m1(&single(), &d, &CmatParameters::default()),
            Err(ModelError::MissingDemand(m)) if m == "NB"
        ));
    }
}
