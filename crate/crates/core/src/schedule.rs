//! Periodic platoon schedules extracted from solved models, and their safety checks.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::SignalPlan;
use crate::graph::{GeometryParams, ScenarioKind};
use crate::model::{MilpInstance, ModelKind, MovementDemand};
use crate::params::CmatParameters;
use crate::solver::{MilpSolution, MilpStatus};

const TOL: f64 = 1e-6;
const GAP_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("solution status is {0}, an optimal solution is required")]
    NotOptimal(MilpStatus),
    #[error("solution carries no variable values")]
    NoValues,
    #[error("io error on `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid schedule file at `{path}`: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovementTiming {
    pub movement: String,
    pub red: f64,
    pub green: f64,
    pub platoon_size: u32,
    pub offset: f64,
    pub occupancy: f64,
    pub muted: bool,
}

impl MovementTiming {
    /// Time the platoon front reaches the movement's first conflict point in cycle 0.
    pub fn release(&self) -> f64 {
        self.offset + self.red
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeTiming {
    pub node: String,
    pub first: String,
    pub second: String,
    pub lower_headway: f64,
    pub upper_headway: f64,
    /// Whether `first` occupies the node before `second` in each cycle.
    pub first_leads: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalTiming {
    pub movement: String,
    pub node: String,
    pub time: f64,
    pub travel_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CyclicSchedule {
    pub model: ModelKind,
    pub cycle: f64,
    pub movements: Vec<MovementTiming>,
    pub nodes: Vec<NodeTiming>,
    pub arrivals: Vec<ArrivalTiming>,
    pub params: CmatParameters,
}

impl CyclicSchedule {
    pub fn movement(&self, id: &str) -> Option<&MovementTiming> {
        self.movements.iter().find(|m| m.movement == id)
    }

    pub fn arrival(&self, movement: &str, node: &str) -> Option<&ArrivalTiming> {
        self.arrivals.iter().find(|a| a.movement == movement && a.node == node)
    }

    pub fn platoon_sizes(&self) -> Vec<u32> {
        self.movements.iter().map(|m| m.platoon_size).collect()
    }

    /// Vehicles served per hour if every platoon is full.
    pub fn service_vph(&self) -> f64 {
        let per_cycle: u32 = self.platoon_sizes().iter().sum();
        per_cycle as f64 * 3600.0 / self.cycle
    }

    /// Per-movement and per-node identities the model imposes, as human-readable failures.
    pub fn invariant_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let fp = self.params.flow;
        for m in &self.movements {
            if (self.cycle - m.red - m.green).abs() > TOL {
                out.push(format!("{}: red + green = {} differs from the cycle", m.movement, m.red + m.green));
            }
            let t = fp.platoon_time(m.platoon_size);
            if (m.occupancy - t).abs() > TOL {
                out.push(format!("{}: occupancy {} differs from {t} for {} vehicles", m.movement, m.occupancy, m.platoon_size));
            }
        }
        for a in &self.arrivals {
            match self.movement(&a.movement) {
                Some(m) if (a.time - m.release() - a.travel_time).abs() > TOL => out.push(format!(
                    "{} at {}: arrival {} differs from offset + red + travel {}",
                    a.movement,
                    a.node,
                    a.time,
                    m.release() + a.travel_time
                )),
                Some(_) => {}
                None => out.push(format!("arrival for unknown movement {}", a.movement)),
            }
        }
        for n in &self.nodes {
            let (Some(a), Some(b)) = (self.movement(&n.first), self.movement(&n.second)) else {
                out.push(format!("{}: unknown movement", n.node));
                continue;
            };
            let total = n.lower_headway + n.upper_headway + a.occupancy + b.occupancy;
            if (total - self.cycle).abs() > TOL {
                out.push(format!("{}: headways and occupancies sum to {total}, not the cycle", n.node));
            }
            for (what, h) in [("lower", n.lower_headway), ("upper", n.upper_headway)] {
                if h < fp.tau_c - GAP_TOL {
                    out.push(format!("{}: {what} headway {h} below the safety gap", n.node));
                }
            }
        }
        out
    }
}

/// Read a schedule from a solved instance. The solution must be optimal.
pub fn extract_schedule(inst: &MilpInstance, sol: &MilpSolution) -> Result<CyclicSchedule, ScheduleError> {
    if sol.status != MilpStatus::Optimal {
        return Err(ScheduleError::NotOptimal(sol.status));
    }
    extract_incumbent(inst, sol)
}

/// Like [`extract_schedule`] but also accepts the incumbent of a limit-stopped search.
pub fn extract_incumbent(inst: &MilpInstance, sol: &MilpSolution) -> Result<CyclicSchedule, ScheduleError> {
    let x = sol.values.as_ref().ok_or(ScheduleError::NoValues)?;
    let r = &inst.roles;
    let fp = inst.params.flow;
    let cycle = x[r.cycle.0];
    let movements = r
        .movements
        .iter()
        .map(|m| {
            let size = x[m.platoon_size.0].round().max(1.0) as u32;
            MovementTiming {
                movement: m.movement.clone(),
                red: cycle - x[m.green.0],
                green: x[m.green.0],
                platoon_size: size,
                offset: x[m.offset.0],
                occupancy: fp.platoon_time(size),
                muted: inst.muted.contains(&m.movement),
            }
        })
        .collect::<Vec<_>>();
    let release = |id: &str| {
        movements
            .iter()
            .find(|m| m.movement == id)
            .map(MovementTiming::release)
            .expect("movement")
    };
    let arrivals: Vec<ArrivalTiming> = r
        .arrivals
        .iter()
        .map(|a| ArrivalTiming {
            movement: a.movement.clone(),
            node: a.node.clone(),
            time: release(&a.movement) + a.travel_time,
            travel_time: a.travel_time,
        })
        .collect();
    let nodes = r
        .nodes
        .iter()
        .map(|n| {
            let first_leads = x[n.order.0] > 0.5;
            let lower = x[n.first_headway.0];
            let occ = |id: &str| movements.iter().find(|m| m.movement == id).expect("movement").occupancy;
            NodeTiming {
                node: n.node.clone(),
                first: n.first.clone(),
                second: n.second.clone(),
                lower_headway: lower,
                upper_headway: cycle - lower - occ(&n.first) - occ(&n.second),
                first_leads,
            }
        })
        .collect();
    Ok(CyclicSchedule {
        model: inst.kind,
        cycle,
        movements,
        nodes,
        arrivals,
        params: inst.params,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub movement: String,
    pub start: f64,
    pub end: f64,
}

/// Occupancy intervals of one node over a window of `k` cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyTimeline {
    pub node: String,
    pub intervals: Vec<Occupancy>,
}

impl OccupancyTimeline {
    /// Intervals `[t_arr + mC, t_arr + mC + T]` of both movements. The window starts one cycle
    /// before the later base arrival so that both periodic sequences are fully interleaved.
    pub fn build(s: &CyclicSchedule, n: &NodeTiming, k: usize) -> Self {
        let c = s.cycle;
        let entries: Vec<(&str, f64, f64)> = [&n.first, &n.second]
            .into_iter()
            .filter_map(|id| {
                let t = s.arrival(id, &n.node)?.time;
                Some((id.as_str(), t, s.movement(id)?.occupancy))
            })
            .collect();
        let anchor = entries.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
        let mut intervals = Vec::new();
        for (id, t, occ) in entries {
            let m0 = ((anchor - c - t) / c).ceil();
            for m in 0..=k {
                let start = t + (m0 + m as f64) * c;
                intervals.push(Occupancy {
                    movement: id.to_string(),
                    start,
                    end: start + occ,
                });
            }
        }
        intervals.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.movement.cmp(&b.movement)));
        OccupancyTimeline {
            node: n.node.clone(),
            intervals,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SafetyViolation {
    /// Rear of one platoon to front of the next is shorter than the crossing gap.
    Gap { node: String, index: usize, gap: f64 },
    /// Two consecutive occupancies of a node belong to the same movement.
    Alternation { node: String, index: usize },
    /// The stored order bit or lower headway disagrees with the arrival times.
    Order { node: String, expected: f64, stored: f64 },
    /// Platoon occupancy does not match evenly spaced members.
    Spacing { movement: String, occupancy: f64, expected: f64 },
    Invariant(String),
}

impl fmt::Display for SafetyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SafetyViolation::Gap { node, index, gap } => write!(f, "node {node}, occupancy {index}: gap {gap:.6} s"),
            SafetyViolation::Alternation { node, index } => write!(f, "node {node}, occupancy {index}: same movement twice"),
            SafetyViolation::Order { node, expected, stored } => {
                write!(f, "node {node}: arrivals imply lower headway {expected:.6}, stored {stored:.6}")
            }
            SafetyViolation::Spacing { movement, occupancy, expected } => {
                write!(f, "movement {movement}: occupancy {occupancy:.6} s, members need {expected:.6} s")
            }
            SafetyViolation::Invariant(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub violations: Vec<SafetyViolation>,
}

impl SafetyReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const DEFAULT_SAFETY_CYCLES: usize = 5;

/// Expand every node over `k_cycles` and check crossing gaps, alternation and platoon spacing.
pub fn verify_safety(s: &CyclicSchedule, k_cycles: usize) -> SafetyReport {
    let fp = s.params.flow;
    let mut violations = Vec::new();
    for m in &s.movements {
        // members pass at equal front-to-front spacing, so the last rear clears after this long
        let expected = (m.platoon_size as f64 - 1.0) * fp.discharge_headway() + fp.body_time();
        if (m.occupancy - expected).abs() > TOL {
            violations.push(SafetyViolation::Spacing {
                movement: m.movement.clone(),
                occupancy: m.occupancy,
                expected,
            });
        }
    }
    for n in &s.nodes {
        let tl = OccupancyTimeline::build(s, n, k_cycles);
        for (i, w) in tl.intervals.windows(2).enumerate() {
            if w[0].movement == w[1].movement {
                violations.push(SafetyViolation::Alternation {
                    node: n.node.clone(),
                    index: i,
                });
                continue;
            }
            let gap = w[1].start - w[0].end;
            if gap < fp.tau_c - GAP_TOL {
                violations.push(SafetyViolation::Gap {
                    node: n.node.clone(),
                    index: i,
                    gap,
                });
            }
        }
        if let (Some(a), Some(b), Some(ma), Some(mb)) = (
            s.arrival(&n.first, &n.node),
            s.arrival(&n.second, &n.node),
            s.movement(&n.first),
            s.movement(&n.second),
        ) {
            let expected = if n.first_leads {
                b.time - a.time - ma.occupancy
            } else {
                a.time - b.time - mb.occupancy
            };
            if (expected - n.lower_headway).abs() > TOL {
                violations.push(SafetyViolation::Order {
                    node: n.node.clone(),
                    expected,
                    stored: n.lower_headway,
                });
            }
        }
    }
    violations.extend(s.invariant_failures().into_iter().map(SafetyViolation::Invariant));
    SafetyReport { violations }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prop1Check {
    Holds,
    Counterexample { movement: String, product: f64 },
}

impl Prop1Check {
    pub fn holds(&self) -> bool {
        matches!(self, Prop1Check::Holds)
    }
}

/// Whether the cycle is a whole number of arrival headways of every unmuted movement.
pub fn check_prop1(s: &CyclicSchedule, demands: &MovementDemand, params: &CmatParameters) -> Prop1Check {
    for m in &s.movements {
        let Some(q) = demands.effective(&m.movement, params) else {
            continue;
        };
        if 1.0 / q > params.tau_star {
            continue;
        }
        let product = s.cycle * q;
        if (product - product.round()).abs() > TOL || product.round() < 1.0 {
            return Prop1Check::Counterexample {
                movement: m.movement.clone(),
                product,
            };
        }
    }
    Prop1Check::Holds
}

/// Residuals of the product identities and of the conditional headway form on a raw solution.
pub fn rlt_residuals(inst: &MilpInstance, values: &[f64]) -> Vec<(String, f64)> {
    let r = &inst.roles;
    let mut out = Vec::new();
    for n in &r.nodes {
        let z = values[n.order.0].round();
        let a = r.arrival(&n.first, &n.node).expect("arrival");
        let b = r.arrival(&n.second, &n.node).expect("arrival");
        let ma = r.movement(&n.first).expect("movement");
        let mb = r.movement(&n.second).expect("movement");
        let (t1, t2) = (values[a.var.0], values[b.var.0]);
        let (o1, o2) = (values[ma.occupancy.0], values[mb.occupancy.0]);
        out.push((format!("xlo_{}", n.node), (values[n.x_lower.0] - z * t1).abs()));
        out.push((format!("xhi_{}", n.node), (values[n.x_upper.0] - z * t2).abs()));
        out.push((format!("ylo_{}", n.node), (values[n.y_lower.0] - z * o1).abs()));
        out.push((format!("yhi_{}", n.node), (values[n.y_upper.0] - z * o2).abs()));
        let conditional = if z > 0.5 { t2 - t1 - o1 } else { t1 - t2 - o2 };
        out.push((format!("headway_{}", n.node), (values[n.first_headway.0] - conditional).abs()));
    }
    out
}

/// Lower the first headway at `node` to `headway` by moving the later platoon's arrival there,
/// leaving everything else untouched. Used to exercise the safety checks.
pub fn inject_headway_fault(s: &mut CyclicSchedule, node: &str, headway: f64) {
    let Some(n) = s.nodes.iter_mut().find(|n| n.node == node) else {
        return;
    };
    let shift = n.lower_headway - headway;
    n.lower_headway = headway;
    n.upper_headway += shift;
    let later = if n.first_leads { n.second.clone() } else { n.first.clone() };
    if let Some(a) = s.arrivals.iter_mut().find(|a| a.movement == later && a.node == node) {
        a.time -= shift;
    }
}

/// Which controller a schedule file carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Controller {
    Cyclic { schedule: CyclicSchedule },
    Signal { plan: SignalPlan },
}

/// On-disk JSON form of a controller, with enough context to re-simulate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    pub scenario: Option<ScenarioKind>,
    #[serde(default)]
    pub geometry: Option<GeometryParams>,
    #[serde(default)]
    pub beta: Option<f64>,
    pub controller: Controller,
}

impl ScheduleFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, ScheduleError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ScheduleError::Parse {
            path: if e.path().to_string() == "." {
                origin.to_string()
            } else {
                e.path().to_string()
            },
            message: e.inner().to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), ScheduleError> {
        std::fs::write(path, self.to_json()).map_err(|source| ScheduleError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, ScheduleError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScheduleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }
}

/// Timing table for a cyclic schedule.
pub fn explain(s: &CyclicSchedule) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "model {}  cycle C = {:.4} s", s.model, s.cycle);
    let _ = writeln!(
        out,
        "{:<12} {:>9} {:>9} {:>4} {:>10} {:>9} {:>6}",
        "movement", "r (s)", "g (s)", "L", "t_off (s)", "T (s)", "muted"
    );
    for m in &s.movements {
        let _ = writeln!(
            out,
            "{:<12} {:>9.4} {:>9.4} {:>4} {:>10.4} {:>9.4} {:>6}",
            m.movement,
            m.red,
            m.green,
            m.platoon_size,
            m.offset,
            m.occupancy,
            if m.muted { "yes" } else { "no" }
        );
    }
    let _ = writeln!(out, "{:<8} {:<12} {:<12} {:>10} {:>10}", "node", "leads", "follows", "τ̲ (s)", "τ̄ (s)");
    for n in &s.nodes {
        let (lead, follow) = if n.first_leads { (&n.first, &n.second) } else { (&n.second, &n.first) };
        let _ = writeln!(
            out,
            "{:<8} {:<12} {:<12} {:>10.4} {:>10.4}",
            n.node, lead, follow, n.lower_headway, n.upper_headway
        );
    }
    out
}
