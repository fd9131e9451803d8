//! Depth-first diving branch-and-bound with best-bound backtracking.

use std::time::Instant;

use super::simplex::{Basis, LpData, LpStatus, Tableau};
use super::{accept_point, MilpSolution, MilpStatus, SolveOptions, SolveStats};
use crate::milp::Problem;

struct Node {
    id: u64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Objective of the parent relaxation.
    bound: f64,
    basis: Option<Basis>,
}

struct Search<'a> {
    p: &'a Problem,
    data: LpData,
    ints: Vec<usize>,
    opts: &'a SolveOptions,
    max_iter: usize,
    incumbent: Option<(f64, Vec<f64>)>,
    stats: SolveStats,
}

impl Search<'_> {
    fn prunable(&self, bound: f64) -> bool {
        matches!(&self.incumbent, Some((inc, _)) if bound >= inc - self.opts.gap_tol)
    }

    fn offer(&mut self, values: Vec<f64>) {
        let obj = self.p.objective_value(&values);
        let better = match &self.incumbent {
            None => true,
            Some((inc, _)) => obj < inc - 1e-12,
        };
        if better {
            log::trace!("incumbent {obj:.6} after {} nodes", self.stats.nodes);
            self.stats.incumbent_history.push(obj);
            self.incumbent = Some((obj, values));
        }
    }

    /// Fix the integer part of `x` and re-solve the continuous part to shed round-off.
    fn polish(&mut self, lo: &[f64], hi: &[f64], x: &[f64]) -> Option<Vec<f64>> {
        let (mut lo, mut hi) = (lo.to_vec(), hi.to_vec());
        for &j in &self.ints {
            let v = x[j].round();
            lo[j] = v;
            hi[j] = v;
        }
        let mut t = Tableau::cold(&self.data, &lo, &hi);
        let st = t.solve(&self.data, self.max_iter);
        self.stats.lp_iterations += t.iterations;
        if st == LpStatus::Optimal {
            if let Some(v) = accept_point(self.p, &t.values(self.data.n), self.opts.feas_tol) {
                return Some(v);
            }
        }
        accept_point(self.p, x, self.opts.feas_tol)
    }

    fn solve_node(&mut self, node: &Node, warm: Option<Tableau>) -> (LpStatus, Tableau) {
        let mut tab = warm
            .or_else(|| {
                node.basis
                    .as_ref()
                    .and_then(|b| Tableau::from_basis(&self.data, &node.lo, &node.hi, b))
            })
            .unwrap_or_else(|| Tableau::cold(&self.data, &node.lo, &node.hi));
        tab.iterations = 0;
        let mut st = tab.solve(&self.data, self.max_iter);
        self.stats.lp_iterations += tab.iterations;
        if st == LpStatus::IterationLimit {
            tab = Tableau::cold(&self.data, &node.lo, &node.hi);
            st = tab.solve(&self.data, 4 * self.max_iter);
            self.stats.lp_iterations += tab.iterations;
        }
        (st, tab)
    }
}

pub(crate) fn branch_and_bound(p: &Problem, opts: &SolveOptions) -> MilpSolution {
    let start = Instant::now();
    let data = LpData::from_problem(p);
    let ints: Vec<usize> = p.integer_vars().collect();
    let mut lo: Vec<f64> = p.variables.iter().map(|v| v.lower).collect();
    let mut hi: Vec<f64> = p.variables.iter().map(|v| v.upper).collect();
    for &j in &ints {
        lo[j] = (lo[j] - opts.int_tol).ceil();
        hi[j] = (hi[j] + opts.int_tol).floor();
    }
    let max_iter = 50 * (data.m + data.n) + 1000;
    let mut s = Search {
        p,
        data,
        ints,
        opts,
        max_iter,
        incumbent: None,
        stats: SolveStats {
            backend: "native".into(),
            ..Default::default()
        },
    };
    if let Some(init) = &opts.initial {
        match accept_point(p, init, opts.feas_tol) {
            Some(v) => s.offer(v),
            None => log::debug!("initial point rejected"),
        }
    }

    let empty_box = lo.iter().zip(&hi).any(|(a, b)| a > b);
    let mut open: Vec<Node> = Vec::new();
    if !empty_box {
        open.push(Node {
            id: 0,
            lo,
            hi,
            bound: f64::NEG_INFINITY,
            basis: None,
        });
    }
    let mut next_id = 1u64;
    let mut dive: Option<(Node, Tableau)> = None;
    let mut limited = false;

    loop {
        let (node, warm) = match dive.take() {
            Some((n, t)) => (n, Some(t)),
            None => {
                let Some(idx) = open
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| a.bound.total_cmp(&b.bound).then(a.id.cmp(&b.id)))
                    .map(|(i, _)| i)
                else {
                    break;
                };
                (open.swap_remove(idx), None)
            }
        };
        if s.prunable(node.bound) {
            continue;
        }
        let over_nodes = opts.node_limit.is_some_and(|l| s.stats.nodes >= l);
        let over_time = opts.time_limit.is_some_and(|l| start.elapsed() >= l);
        if over_nodes || over_time {
            open.push(node);
            limited = true;
            break;
        }
        s.stats.nodes += 1;
        let (st, mut tab) = s.solve_node(&node, warm);
        match st {
            LpStatus::Infeasible => continue,
            LpStatus::IterationLimit => {
                log::warn!("node {} relaxation hit the iteration limit, dropping it", node.id);
                continue;
            }
            LpStatus::Optimal => {}
        }
        let obj = tab.objective();
        if s.prunable(obj) {
            continue;
        }
        let x = tab.values(s.data.n);
        let mut branch: Option<(usize, f64)> = None;
        for &j in &s.ints {
            let f = x[j] - x[j].floor();
            let dist = f.min(1.0 - f);
            if dist > opts.int_tol && branch.map_or(true, |(_, d)| dist > d + 1e-12) {
                branch = Some((j, dist));
            }
        }
        let Some((j, _)) = branch else {
            if let Some(v) = s.polish(&node.lo, &node.hi, &x) {
                s.offer(v);
            }
            continue;
        };
        let down = x[j].floor();
        let prefer_up = x[j] - down > 0.5;
        let snapshot = tab.snapshot();
        let mut down_node = Node {
            id: next_id,
            lo: node.lo.clone(),
            hi: node.hi.clone(),
            bound: obj,
            basis: None,
        };
        down_node.hi[j] = down;
        let mut up_node = Node {
            id: next_id + 1,
            lo: node.lo,
            hi: node.hi,
            bound: obj,
            basis: None,
        };
        up_node.lo[j] = down + 1.0;
        next_id += 2;
        let (mut keep, mut park) = if prefer_up { (up_node, down_node) } else { (down_node, up_node) };
        park.basis = Some(snapshot);
        tab.set_bounds(j, keep.lo[j], keep.hi[j]);
        keep.basis = None;
        open.push(park);
        dive = Some((keep, tab));
    }

    s.stats.wall_time = start.elapsed();
    let inc_obj = s.incumbent.as_ref().map(|(o, _)| *o);
    let frontier = open
        .iter()
        .map(|n| n.bound)
        .filter(|b| !s.prunable(*b))
        .fold(f64::INFINITY, f64::min);
    s.stats.best_bound = match inc_obj {
        Some(o) => o.min(frontier),
        None => frontier,
    };
    let status = if limited && open.iter().any(|n| !s.prunable(n.bound)) {
        MilpStatus::LimitReached
    } else if inc_obj.is_some() {
        MilpStatus::Optimal
    } else {
        MilpStatus::Infeasible
    };
    let (objective, values) = match s.incumbent {
        Some((o, v)) => (Some(o), Some(v)),
        None => (None, None),
    };
    MilpSolution {
        status,
        objective,
        values,
        stats: s.stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Sense, VarKind};

    fn knapsack() -> Problem {
        // max 5a + 4b + 3c st 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8, binaries
        let mut p = Problem::new("knap");
        let a = p.add_var("a", VarKind::Binary, 0.0, 1.0);
        let b = p.add_var("b", VarKind::Binary, 0.0, 1.0);
        let c = p.add_var("c", VarKind::Binary, 0.0, 1.0);
        p.objective = vec![(a, -5.0), (b, -4.0), (c, -3.0)];
        p.add_row("r1", vec![(a, 2.0), (b, 3.0), (c, 1.0)], Sense::Le, 5.0);
        p.add_row("r2", vec![(a, 4.0), (b, 1.0), (c, 2.0)], Sense::Le, 11.0);
        p.add_row("r3", vec![(a, 3.0), (b, 4.0), (c, 2.0)], Sense::Le, 8.0);
        p
    }

    #[test]
    fn solves_small_knapsack() {
        let sol = branch_and_bound(&knapsack(), &SolveOptions::default());
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.objective.unwrap() + 9.0).abs() < 1e-9);
        assert!((sol.stats.best_bound + 9.0).abs() < 1e-9);
    }

    #[test]
    fn general_integers_and_infeasibility() {
        let mut p = Problem::new("int");
        let x = p.add_var("x", VarKind::Integer, 0.0, 10.0);
        let y = p.add_var("y", VarKind::Integer, 0.0, 10.0);
        p.objective = vec![(x, -1.0), (y, -1.0)];
        p.add_row("a", vec![(x, 2.0), (y, 2.0)], Sense::Le, 7.0);
        let sol = branch_and_bound(&p, &SolveOptions::default());
        assert!((sol.objective.unwrap() + 3.0).abs() < 1e-9);

        p.add_row("b", vec![(x, 2.0), (y, 2.0)], Sense::Ge, 5.0);
        p.add_row("c", vec![(x, 2.0), (y, 2.0)], Sense::Le, 5.5);
        let sol = branch_and_bound(&p, &SolveOptions::default());
        assert_eq!(sol.status, MilpStatus::Infeasible);
    }

    #[test]
    fn node_limit_keeps_initial_incumbent() {
        let opts = SolveOptions {
            node_limit: Some(0),
            initial: Some(vec![1.0, 0.0, 1.0]),
            ..Default::default()
        };
        let sol = branch_and_bound(&knapsack(), &opts);
        assert_eq!(sol.status, MilpStatus::LimitReached);
        assert!((sol.objective.unwrap() + 8.0).abs() < 1e-9);
        assert!(sol.stats.best_bound <= -9.0 + 1e-9);
    }
}
