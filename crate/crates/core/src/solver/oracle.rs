//! Brute-force ground truth for small instances.
//!
//! Orders and platoon sizes are enumerated. Once they and the cycle are fixed, every remaining
//! constraint bounds a difference of two release times `s_p = t_off_p + r_p` (or one release time
//! against the origin), so feasibility is a negative-cycle test on a difference-constraint graph.

use std::collections::BTreeMap;

use thiserror::Error;

use super::MilpStatus;
use crate::graph::{travel_time, ConflictGraph, GraphError};
use crate::model::{ModelKind, MovementDemand};
use crate::params::CmatParameters;

pub const MAX_NODES: usize = 3;
pub const MAX_PLATOON: u32 = 12;
const SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{nodes} conflict nodes exceed the oracle cap of {cap}")]
    TooManyNodes { nodes: usize, cap: usize },
    #[error("platoon sizes up to {max} exceed the oracle cap of {cap}")]
    PlatoonCap { max: u32, cap: u32 },
    #[error("no demand given for movement `{0}`")]
    MissingDemand(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub status: MilpStatus,
    pub objective: Option<f64>,
    pub cycle: Option<f64>,
    pub platoon_sizes: BTreeMap<String, u32>,
    /// Per node, whether the lexicographically smaller movement crosses first.
    pub first_before_second: BTreeMap<String, bool>,
}

struct Pair {
    node: String,
    a: usize,
    b: usize,
    /// Travel time of `a` minus that of `b` to the node.
    dtt: f64,
}

struct Instance<'a> {
    ids: Vec<String>,
    pairs: Vec<Pair>,
    /// Movements whose green is tied to their platoon size.
    sized: Vec<bool>,
    params: &'a CmatParameters,
}

impl Instance<'_> {
    fn platoon_time(&self, l: u32) -> f64 {
        self.params.flow.platoon_time(l)
    }

    fn feasible(&self, c: f64, sizes: &[u32], z: &[bool]) -> bool {
        let p = self.params;
        let np = self.ids.len();
        let qmax = p.q_max();
        let tau_c = p.flow.tau_c;
        let cbar = p.c_max;
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..np {
            let (lo, red_max) = if self.sized[i] {
                let g = sizes[i] as f64 / qmax;
                if g > c + SLACK {
                    return false;
                }
                ((c - g).max(0.0), (c - g).max(0.0))
            } else {
                (0.0, c)
            };
            let hi = ((np as f64 - 1.0) * cbar + red_max).min(np as f64 * cbar - 1.0 / qmax);
            if lo > hi + SLACK {
                return false;
            }
            // node 0 is the origin, node i + 1 is s_i
            edges.push((0, i + 1, hi));
            edges.push((i + 1, 0, -lo));
        }
        for (k, pr) in self.pairs.iter().enumerate() {
            let (ta, tb) = (self.platoon_time(sizes[pr.a]), self.platoon_time(sizes[pr.b]));
            // (lo, hi) bounds the arrival gap of the later movement after the earlier one
            let (first, second, t_first, t_second, shift) = if z[k] {
                (pr.a, pr.b, ta, tb, pr.dtt)
            } else {
                (pr.b, pr.a, tb, ta, -pr.dtt)
            };
            let lo = (t_first + tau_c).max(c - t_second - cbar);
            let hi = (t_first + cbar).min(c - t_second - tau_c);
            if lo > hi + SLACK {
                return false;
            }
            // s_second - s_first in [lo + shift, hi + shift]
            edges.push((first + 1, second + 1, hi + shift));
            edges.push((second + 1, first + 1, -(lo + shift)));
        }
        no_negative_cycle(np + 1, &edges)
    }

    /// Smallest feasible cycle in `[lo, c_max]`, by bisection on a feasibility test that is
    /// monotone in the cycle below the release-time ceilings.
    fn min_cycle(&self, lo: f64, sizes: &[u32], z: &[bool]) -> Option<f64> {
        let cbar = self.params.c_max;
        if lo > cbar || !self.feasible(cbar, sizes, z) {
            return None;
        }
        if self.feasible(lo, sizes, z) {
            return Some(lo);
        }
        let (mut a, mut b) = (lo, cbar);
        for _ in 0..64 {
            let mid = 0.5 * (a + b);
            if self.feasible(mid, sizes, z) {
                b = mid;
            } else {
                a = mid;
            }
            if b - a < 1e-11 {
                break;
            }
        }
        Some(b)
    }
}

fn no_negative_cycle(n: usize, edges: &[(usize, usize, f64)]) -> bool {
    let mut d = vec![0.0_f64; n];
    for _ in 0..n {
        let mut changed = false;
        for &(u, v, w) in edges {
            let cand = d[u] + w + SLACK;
            if cand < d[v] - 1e-12 {
                d[v] = cand;
                changed = true;
            }
        }
        if !changed {
            return true;
        }
    }
    edges.iter().all(|&(u, v, w)| d[u] + w + SLACK >= d[v] - 1e-7)
}

/// Enumerate every order and platoon size of a small instance and return the best objective.
/// `demands` may be `None` only for [`ModelKind::UnitPlatoon`].
pub fn enumerate_oracle(
    g: &ConflictGraph,
    demands: Option<&MovementDemand>,
    params: &CmatParameters,
    kind: ModelKind,
) -> Result<OracleSolution, OracleError> {
    let pairs_raw = g.node_pairs();
    if pairs_raw.len() > MAX_NODES {
        return Err(OracleError::TooManyNodes {
            nodes: pairs_raw.len(),
            cap: MAX_NODES,
        });
    }
    let ids = g.movement_ids();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let qmax = params.q_max();
    let mut rates = vec![0.0; ids.len()];
    if kind != ModelKind::UnitPlatoon {
        let d = demands.ok_or_else(|| OracleError::MissingDemand(ids.first().cloned().unwrap_or_default()))?;
        for (i, id) in ids.iter().enumerate() {
            let q = d.get(id).ok_or_else(|| OracleError::MissingDemand(id.clone()))?;
            rates[i] = q.min(qmax);
        }
    }
    let sized: Vec<bool> = match kind {
        ModelKind::UnitPlatoon => vec![true; ids.len()],
        _ => {
            let d = demands.expect("checked above");
            ids.iter()
                .map(|id| !(1.0 / d.get(id).expect("checked above") > params.tau_star))
                .collect()
        }
    };
    let mut pairs = Vec::new();
    for pr in &pairs_raw {
        let ta = travel_time(g, &pr.first, &pr.node, params.flow.v_f)?;
        let tb = travel_time(g, &pr.second, &pr.node, params.flow.v_f)?;
        pairs.push(Pair {
            node: pr.node.clone(),
            a: index[pr.first.as_str()],
            b: index[pr.second.as_str()],
            dtt: ta - tb,
        });
    }
    let inst = Instance {
        ids,
        pairs,
        sized,
        params,
    };
    let lmax = params.max_platoon();
    let lam = params.lambda;
    let np = inst.ids.len();
    let nz = inst.pairs.len();

    let mut best: Option<(f64, f64, Vec<u32>, Vec<bool>)> = None;
    let mut offer = |obj: f64, c: f64, sizes: &[u32], z: &[bool]| {
        if best.as_ref().map_or(true, |(b, ..)| obj < b - 1e-9) {
            best = Some((obj, c, sizes.to_vec(), z.to_vec()));
        }
    };
    let orders: Vec<Vec<bool>> = (0..1u32 << nz)
        .map(|mask| (0..nz).map(|k| mask >> k & 1 == 1).collect())
        .collect();
    let c_floor = |sizes: &[u32]| {
        (0..np)
            .filter(|&i| inst.sized[i])
            .map(|i| sizes[i] as f64 / qmax)
            .fold(0.0, f64::max)
    };

    match kind {
        ModelKind::UnitPlatoon => {
            let sizes = vec![1u32; np];
            for z in &orders {
                if let Some(c) = inst.min_cycle(c_floor(&sizes), &sizes, z) {
                    offer(c, c, &sizes, z);
                }
            }
        }
        ModelKind::M1 => {
            let unmuted: Vec<usize> = (0..np).filter(|&i| inst.sized[i]).collect();
            if unmuted.is_empty() {
                let sizes = vec![1u32; np];
                for z in &orders {
                    if let Some(c) = inst.min_cycle(0.0, &sizes, z) {
                        offer(lam * c - (1.0 - lam) * np as f64, c, &sizes, z);
                    }
                }
            } else {
                // the cycle must be a common multiple of every unmuted arrival headway
                let q0 = rates[unmuted[0]];
                let mut k = 1u32;
                loop {
                    let mut c = k as f64 / q0;
                    if c > params.c_max + 1e-9 {
                        break;
                    }
                    c = c.min(params.c_max);
                    k += 1;
                    let mut sizes = vec![1u32; np];
                    let mut ok = true;
                    for &i in &unmuted {
                        let l = rates[i] * c;
                        if (l - l.round()).abs() > 1e-6 || l.round() < 1.0 || l.round() > lmax as f64 {
                            ok = false;
                            break;
                        }
                        sizes[i] = l.round() as u32;
                    }
                    if !ok {
                        continue;
                    }
                    let total: u32 = sizes.iter().sum();
                    let obj = lam * c - (1.0 - lam) * total as f64;
                    for z in &orders {
                        if inst.feasible(c, &sizes, z) {
                            offer(obj, c, &sizes, z);
                        }
                    }
                }
            }
        }
        ModelKind::M2 => {
            let unmuted: Vec<usize> = (0..np).filter(|&i| inst.sized[i]).collect();
            let cap = lmax.min(MAX_PLATOON);
            if lmax > MAX_PLATOON && !unmuted.is_empty() {
                return Err(OracleError::PlatoonCap {
                    max: lmax,
                    cap: MAX_PLATOON,
                });
            }
            let mut sizes = vec![1u32; np];
            loop {
                let total: u32 = sizes.iter().sum();
                let floor = c_floor(&sizes);
                for z in &orders {
                    if let Some(c) = inst.min_cycle(floor, &sizes, z) {
                        offer((1.0 - lam) * c - lam * total as f64, c, &sizes, z);
                    }
                }
                // odometer over the unmuted sizes
                let mut carry = true;
                for &i in &unmuted {
                    if sizes[i] < cap {
                        sizes[i] += 1;
                        carry = false;
                        break;
                    }
                    sizes[i] = 1;
                }
                if carry {
                    break;
                }
            }
        }
    }

    Ok(match best {
        Some((obj, c, sizes, z)) => OracleSolution {
            status: MilpStatus::Optimal,
            objective: Some(obj),
            cycle: Some(c),
            platoon_sizes: inst.ids.iter().cloned().zip(sizes).collect(),
            first_before_second: inst.pairs.iter().map(|p| p.node.clone()).zip(z).collect(),
        },
        None => OracleSolution {
            status: MilpStatus::Infeasible,
            objective: None,
            cycle: None,
            platoon_sizes: BTreeMap::new(),
            first_before_second: BTreeMap::new(),
        },
    })
}
