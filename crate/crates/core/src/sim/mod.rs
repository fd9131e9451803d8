//! Discrete-event simulation of arrivals, stop-line gating and traversal under any controller.

mod sweep;

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{travel_time, ConflictGraph};
use crate::model::MovementDemand;
use crate::params::{vps_to_vph, FlowParameters};
use crate::schedule::{Controller, CyclicSchedule};
use crate::baselines::{shared_lanes, SignalPlan};

pub use sweep::{
    capacity_sweep, BuiltController, CmatFactory, ControllerFactory, ModelUsed, RcFactory, SweepPoint, SweepRow,
    TscFactory,
};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("horizon {horizon} s must exceed warmup {warmup} s, and warmup must be non-negative")]
    Window { horizon: f64, warmup: f64 },
    #[error("controller does not match the graph: {0}")]
    Mismatch(String),
    #[error("no demand for movement `{0}`")]
    MissingDemand(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalModel {
    Deterministic,
    Poisson { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub warmup: f64,
    pub arrivals: ArrivalModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 3600.0,
            warmup: 120.0,
            arrivals: ArrivalModel::Deterministic,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.warmup >= 0.0 && self.horizon > self.warmup) {
            return Err(SimError::Window {
                horizon: self.horizon,
                warmup: self.warmup,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementMetrics {
    pub movement: String,
    /// Vehicles that arrived over the whole run.
    pub arrived: usize,
    /// Vehicles that cleared their last conflict point over the whole run.
    pub completed: usize,
    pub in_transit: usize,
    pub queued: usize,
    pub throughput_vph: f64,
    pub mean_delay: f64,
    pub max_queue: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    /// Completions inside the measured window per hour.
    pub throughput_vph: f64,
    /// Mean stop-line delay of vehicles completing inside the window.
    pub mean_delay: f64,
    pub max_queue: usize,
    /// Vehicles still queued at the horizon.
    pub residual_queue: usize,
    pub movements: Vec<MovementMetrics>,
}

/// Departure opportunities of one stop line: `count` slots at the discharge headway, once per period.
#[derive(Debug, Clone)]
struct Stage {
    /// Free-flow time from the movement's first conflict point to this stop line.
    travel: f64,
    first: f64,
    period: f64,
    count: u32,
}

impl Stage {
    fn slot_times(&self, headway: f64, horizon: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let m0 = (-self.first / self.period).ceil() - 1.0;
        let mut m = m0;
        loop {
            let base = self.first + m * self.period;
            if base > horizon {
                break;
            }
            for i in 0..self.count {
                let t = base + i as f64 * headway;
                if (0.0..=horizon).contains(&t) {
                    out.push(t);
                }
            }
            m += 1.0;
        }
        out
    }
}

struct Route {
    movement: String,
    stages: Vec<Stage>,
    /// Free-flow time from the first to the last conflict point.
    length: f64,
}

/// One stop-line queue and its departure slots, fed by one or more (route, stage) pairs.
struct Lane {
    stage: Stage,
    members: Vec<(usize, usize)>,
}

fn own_lanes(routes: &[Route]) -> Vec<Lane> {
    routes
        .iter()
        .enumerate()
        .flat_map(|(k, r)| {
            r.stages.iter().enumerate().map(move |(s, st)| Lane {
                stage: st.clone(),
                members: vec![(k, s)],
            })
        })
        .collect()
}

fn cyclic_routes(s: &CyclicSchedule, g: &ConflictGraph, fp: &FlowParameters) -> Result<Vec<Route>, SimError> {
    let mut routes = Vec::new();
    for p in &g.movements {
        let m = s
            .movement(&p.id)
            .ok_or_else(|| SimError::Mismatch(format!("schedule has no movement `{}`", p.id)))?;
        routes.push(Route {
            movement: p.id.clone(),
            stages: vec![Stage {
                travel: 0.0,
                first: m.release(),
                period: s.cycle,
                count: m.platoon_size,
            }],
            length: path_time(g, &p.id, fp)?,
        });
    }
    if s.movements.len() != g.movements.len() {
        return Err(SimError::Mismatch("schedule lists movements absent from the graph".into()));
    }
    Ok(routes)
}

fn signal_routes(plan: &SignalPlan, g: &ConflictGraph, fp: &FlowParameters) -> Result<(Vec<Route>, Vec<Lane>), SimError> {
    let mut routes = Vec::new();
    let mut stage_isec: Vec<Vec<String>> = Vec::new();
    for p in &g.movements {
        let mut stages: Vec<Stage> = Vec::new();
        let mut seen: Vec<&str> = Vec::new();
        for node in &p.nodes {
            let Some(isec) = g.intersection_of(node) else {
                return Err(SimError::Mismatch(format!("node `{node}` belongs to no intersection")));
            };
            if seen.contains(&isec.id.as_str()) {
                continue;
            }
            seen.push(&isec.id);
            let ip = plan
                .intersections
                .iter()
                .find(|i| i.intersection == isec.id)
                .ok_or_else(|| SimError::Mismatch(format!("plan has no intersection `{}`", isec.id)))?;
            let (start, green) = ip
                .green_window(&p.id)
                .ok_or_else(|| SimError::Mismatch(format!("`{}` has no green at `{}`", p.id, isec.id)))?;
            stages.push(Stage {
                travel: travel_time(g, &p.id, node, fp.v_f).map_err(|e| SimError::Mismatch(e.to_string()))?,
                first: start,
                period: plan.cycle,
                // slots strictly inside the green
                count: (green / fp.discharge_headway() - 1e-9).ceil().max(0.0) as u32,
            });
        }
        routes.push(Route {
            movement: p.id.clone(),
            stages,
            length: path_time(g, &p.id, fp)?,
        });
        stage_isec.push(seen.iter().map(|s| s.to_string()).collect());
    }

    let mut lanes = own_lanes(&routes);
    for isec in &g.intersections {
        for group in shared_lanes(g, isec).into_iter().filter(|l| l.len() > 1) {
            let members: Vec<(usize, usize)> = group
                .iter()
                .filter_map(|m| {
                    let k = routes.iter().position(|r| &r.movement == m)?;
                    let s = stage_isec[k].iter().position(|i| *i == isec.id)?;
                    Some((k, s))
                })
                .collect();
            let (k0, s0) = members[0];
            let st = &routes[k0].stages[s0];
            let same_green = members.iter().all(|&(k, s)| {
                let o = &routes[k].stages[s];
                (o.first - st.first).abs() < 1e-9 && o.count == st.count
            });
            if !same_green {
                log::debug!("lane {group:?} at {} spans phases, kept as separate queues", isec.id);
                continue;
            }
            let stage = st.clone();
            lanes.retain(|l| !members.contains(&l.members[0]));
            lanes.push(Lane { stage, members });
        }
    }
    Ok((routes, lanes))
}

fn path_time(g: &ConflictGraph, movement: &str, fp: &FlowParameters) -> Result<f64, SimError> {
    let p = g.movement(movement).expect("movement from graph");
    let last = p.nodes.last().ok_or_else(|| SimError::Mismatch(format!("`{movement}` has no nodes")))?;
    travel_time(g, movement, last, fp.v_f).map_err(|e| SimError::Mismatch(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    // departures sort first so a vehicle arriving on a slot waits for the next one
    Departure { lane: usize },
    Arrival { movement: usize, vehicle: usize, stage: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    kind: Kind,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.kind.cmp(&other.kind))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn arrival_times(q: f64, model: ArrivalModel, index: usize, horizon: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if q <= 0.0 {
        return out;
    }
    match model {
        ArrivalModel::Deterministic => {
            let mut i = 0usize;
            loop {
                let t = i as f64 / q;
                if t > horizon {
                    break;
                }
                out.push(t);
                i += 1;
            }
        }
        ArrivalModel::Poisson { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
            let exp = Exp::new(q).expect("positive rate");
            let mut t = 0.0;
            loop {
                t += exp.sample(&mut rng);
                if t > horizon {
                    break;
                }
                out.push(t);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
struct Vehicle {
    /// Arrival time at each stage, then departure time from it.
    stage_times: Vec<(f64, Option<f64>)>,
    completion: Option<f64>,
}

/// Run one controller against arrivals over `[0, horizon]`, measuring over `[warmup, horizon]`.
pub fn simulate(
    controller: &Controller,
    g: &ConflictGraph,
    demands: &MovementDemand,
    fp: &FlowParameters,
    cfg: &SimConfig,
) -> Result<SimMetrics, SimError> {
    cfg.validate()?;
    let (routes, lanes) = match controller {
        Controller::Cyclic { schedule } => {
            let routes = cyclic_routes(schedule, g, fp)?;
            let lanes = own_lanes(&routes);
            (routes, lanes)
        }
        Controller::Signal { plan } => signal_routes(plan, g, fp)?,
    };
    let mut lane_of: Vec<Vec<usize>> = routes.iter().map(|r| vec![0; r.stages.len()]).collect();
    for (i, lane) in lanes.iter().enumerate() {
        for &(k, s) in &lane.members {
            lane_of[k][s] = i;
        }
    }
    let h = fp.discharge_headway();
    let horizon = cfg.horizon;
    let mut heap = BinaryHeap::new();
    let mut vehicles: Vec<Vec<Vehicle>> = Vec::with_capacity(routes.len());
    for (k, r) in routes.iter().enumerate() {
        let q = demands.get(&r.movement).ok_or_else(|| SimError::MissingDemand(r.movement.clone()))?;
        let times = arrival_times(q, cfg.arrivals, k, horizon);
        vehicles.push(vec![Vehicle::default(); times.len()]);
        for (v, t) in times.into_iter().enumerate() {
            heap.push(Reverse(Event {
                time: t,
                kind: Kind::Arrival {
                    movement: k,
                    vehicle: v,
                    stage: 0,
                },
            }));
        }
    }
    for (i, lane) in lanes.iter().enumerate() {
        for t in lane.stage.slot_times(h, horizon) {
            heap.push(Reverse(Event {
                time: t,
                kind: Kind::Departure { lane: i },
            }));
        }
    }

    let mut queues: Vec<VecDeque<(usize, usize, usize)>> = vec![VecDeque::new(); lanes.len()];
    let mut waiting = vec![0usize; routes.len()];
    let mut max_queue = vec![0usize; routes.len()];
    while let Some(Reverse(ev)) = heap.pop() {
        match ev.kind {
            Kind::Arrival { movement, vehicle, stage } => {
                vehicles[movement][vehicle].stage_times.push((ev.time, None));
                let queue = &mut queues[lane_of[movement][stage]];
                queue.push_back((movement, vehicle, stage));
                waiting[movement] += 1;
                if ev.time >= cfg.warmup {
                    max_queue[movement] = max_queue[movement].max(waiting[movement]);
                }
            }
            Kind::Departure { lane } => {
                let Some((k, v, stage)) = queues[lane].pop_front() else { continue };
                waiting[k] -= 1;
                let r = &routes[k];
                let veh = &mut vehicles[k][v];
                veh.stage_times[stage].1 = Some(ev.time);
                let here = r.stages[stage].travel;
                match r.stages.get(stage + 1) {
                    Some(next) => {
                        let t = ev.time + next.travel - here;
                        if t <= horizon {
                            heap.push(Reverse(Event {
                                time: t,
                                kind: Kind::Arrival {
                                    movement: k,
                                    vehicle: v,
                                    stage: stage + 1,
                                },
                            }));
                        }
                    }
                    None => veh.completion = Some(ev.time + r.length - here + fp.body_time()),
                }
            }
        }
    }

    let window = horizon - cfg.warmup;
    let mut per = Vec::new();
    let (mut done, mut delay_sum) = (0usize, 0.0);
    let mut residual = 0usize;
    for (k, r) in routes.iter().enumerate() {
        let vs = &vehicles[k];
        let mut completed = 0;
        let mut in_window = 0usize;
        let mut delay = 0.0;
        for v in vs {
            match v.completion {
                Some(t) if t <= horizon => {
                    completed += 1;
                    if t >= cfg.warmup {
                        in_window += 1;
                        delay += v.stage_times.iter().map(|(a, d)| d.expect("departed") - a).sum::<f64>();
                    }
                }
                _ => {}
            }
        }
        let queued = waiting[k];
        let in_transit = vs.len() - completed - queued;
        residual += queued;
        done += in_window;
        delay_sum += delay;
        per.push(MovementMetrics {
            movement: r.movement.clone(),
            arrived: vs.len(),
            completed,
            in_transit,
            queued,
            throughput_vph: vps_to_vph(in_window as f64 / window),
            mean_delay: if in_window > 0 { delay / in_window as f64 } else { 0.0 },
            max_queue: max_queue[k],
        });
    }
    Ok(SimMetrics {
        throughput_vph: vps_to_vph(done as f64 / window),
        mean_delay: if done > 0 { delay_sum / done as f64 } else { 0.0 },
        max_queue: max_queue.iter().copied().max().unwrap_or(0),
        residual_queue: residual,
        movements: per,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{rc_schedule, webster_plan, TscConfig};
    use crate::graph::{build_scenario, GeometryParams, ScenarioKind};
    use crate::model::build_m1;
    use crate::params::CmatParameters;
    use crate::schedule::extract_schedule;
    use crate::solver::{solve, SolveOptions};

    fn single() -> ConflictGraph {
        build_scenario(ScenarioKind::SingleConflict, &GeometryParams::default()).unwrap()
    }

    fn m1_schedule(g: &ConflictGraph, d: &MovementDemand) -> Controller {
        let inst = build_m1(g, d, &CmatParameters::default()).unwrap();
        let sol = solve(&inst, &SolveOptions::default()).unwrap();
        Controller::Cyclic {
            schedule: extract_schedule(&inst, &sol).unwrap(),
        }
    }

    #[test]
    fn balanced_m1_serves_all_demand() {
        let g = single();
        let d = MovementDemand::from_classes(&g, &[1000.0, 1000.0], 1.0).unwrap();
        let m = simulate(&m1_schedule(&g, &d), &g, &d, &FlowParameters::default(), &SimConfig::default()).unwrap();
        assert!((m.throughput_vph - 2000.0).abs() <= 20.0, "{}", m.throughput_vph);
        assert!(m.mean_delay <= 7.2 + 1e-9, "{}", m.mean_delay);
        assert!(m.max_queue <= 2);
        for p in &m.movements {
            assert_eq!(p.arrived, p.completed + p.in_transit + p.queued);
        }
    }

    #[test]
    fn rc_saturates_at_unit_capacity() {
        let g = single();
        let d = MovementDemand::from_classes(&g, &[1800.0, 1800.0], 1.0).unwrap();
        let rc = rc_schedule(&g, &CmatParameters::default(), &SolveOptions::default()).unwrap();
        let m = simulate(&Controller::Cyclic { schedule: rc }, &g, &d, &FlowParameters::default(), &SimConfig::default())
            .unwrap();
        assert!((m.throughput_vph - 1600.0).abs() <= 32.0, "{}", m.throughput_vph);
        assert!(m.residual_queue > 0);
    }

    #[test]
    fn idle_movement_reports_zero() {
        let g = single();
        let d = MovementDemand::from_classes(&g, &[1000.0, 0.0], 1.0).unwrap();
        let m = simulate(&m1_schedule(&g, &d), &g, &d, &FlowParameters::default(), &SimConfig::default()).unwrap();
        let idle = m.movements.iter().find(|p| p.movement == "NB").unwrap();
        assert_eq!(idle.throughput_vph, 0.0);
        let busy = m.movements.iter().find(|p| p.movement == "EB").unwrap();
        assert!((busy.throughput_vph - 1000.0).abs() <= 10.0);
    }

    #[test]
    fn signal_plan_runs_and_conserves() {
        let g = single();
        let p = CmatParameters::default();
        let d = MovementDemand::from_classes(&g, &[700.0, 700.0], 1.0).unwrap();
        let plan = webster_plan(&g, &d, &p, &TscConfig::default()).unwrap();
        let cfg = SimConfig {
            arrivals: ArrivalModel::Poisson { seed: 3 },
            ..Default::default()
        };
        let m = simulate(&Controller::Signal { plan }, &g, &d, &p.flow, &cfg).unwrap();
        assert!(m.throughput_vph > 1200.0 && m.throughput_vph < 1600.0, "{}", m.throughput_vph);
        for mm in &m.movements {
            assert_eq!(mm.arrived, mm.completed + mm.in_transit + mm.queued);
        }
    }

    #[test]
    fn shared_lane_splits_one_green() {
        let g = build_scenario(ScenarioKind::FourLegShared, &GeometryParams::default()).unwrap();
        let p = CmatParameters::default();
        let d = MovementDemand::from_classes(&g, &[1500.0, 1500.0, 1500.0, 1500.0], 1.0).unwrap();
        let plan = crate::baselines::webster_plan_clamped(&g, &d, &p, &TscConfig::default()).unwrap();
        let m = simulate(&Controller::Signal { plan }, &g, &d, &p.flow, &SimConfig::default()).unwrap();
        let tp = |id: &str| m.movements.iter().find(|x| x.movement == id).unwrap().throughput_vph;
        // a through lane of its own and a through lane shared with the right turn get equal service
        let lane = tp("NB_T2") + tp("NB_R");
        assert!((lane - tp("NB_T1")).abs() <= 31.0, "{lane} vs {}", tp("NB_T1"));
    }

    #[test]
    fn window_is_validated() {
        let cfg = SimConfig {
            horizon: 10.0,
            warmup: 20.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
