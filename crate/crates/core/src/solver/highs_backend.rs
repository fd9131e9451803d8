//! Adapter onto the HiGHS MIP solver.

use std::ops::Bound;
use std::time::Instant;

use highs::{HighsModelStatus, RowProblem, Sense as HSense};

use super::{accept_point, MilpSolution, MilpStatus, SolveOptions, SolveStats, SolverError};
use crate::milp::{Problem, Sense};

fn row_bounds(sense: Sense, rhs: f64) -> (Bound<f64>, Bound<f64>) {
    match sense {
        Sense::Le => (Bound::Unbounded, Bound::Included(rhs)),
        Sense::Ge => (Bound::Included(rhs), Bound::Unbounded),
        Sense::Eq => (Bound::Included(rhs), Bound::Included(rhs)),
    }
}

/// `fixed` pins columns to values, which turns the MILP into the LP over the rest.
fn build(p: &Problem, fixed: Option<&[f64]>) -> RowProblem {
    let mut cost = vec![0.0; p.variables.len()];
    for (v, c) in &p.objective {
        cost[v.0] += c;
    }
    let mut hp = RowProblem::default();
    let cols: Vec<_> = p
        .variables
        .iter()
        .enumerate()
        .map(|(j, v)| match fixed {
            Some(x) if v.kind.is_integral() => hp.add_column(cost[j], x[j]..=x[j]),
            Some(_) => hp.add_column(cost[j], v.lower..=v.upper),
            None => hp.add_column_with_integrality(cost[j], v.lower..=v.upper, v.kind.is_integral()),
        })
        .collect();
    for c in &p.constraints {
        let terms: Vec<_> = c.terms.iter().map(|(v, a)| (cols[v.0], *a)).collect();
        hp.add_row(row_bounds(c.sense, c.rhs), terms);
    }
    hp
}

fn run(hp: RowProblem, opts: &SolveOptions, initial: Option<&[f64]>) -> Result<highs::SolvedModel, SolverError> {
    let mut model = hp
        .try_optimise(HSense::Minimise)
        .map_err(|e| SolverError::Backend(format!("{e:?}")))?;
    model.make_quiet();
    model.set_option("threads", 1);
    model.set_option("random_seed", 0);
    model.set_option("mip_feasibility_tolerance", opts.int_tol.min(1e-6));
    model.set_option("primal_feasibility_tolerance", 1e-9);
    model.set_option("mip_abs_gap", opts.gap_tol);
    model.set_option("mip_rel_gap", 0.0);
    if let Some(n) = opts.node_limit {
        model.set_option("mip_max_nodes", n.min(i32::MAX as u64) as i32);
    }
    if let Some(t) = opts.time_limit {
        model.set_option("time_limit", t.as_secs_f64());
    }
    if let Some(x) = initial {
        model
            .try_set_solution(Some(x), None, None, None)
            .map_err(|e| SolverError::Backend(format!("{e:?}")))?;
    }
    model.try_solve().map_err(|e| SolverError::Backend(format!("{e:?}")))
}

fn node_count(solved: &highs::SolvedModel) -> u64 {
    let mut n: i64 = 0;
    // mip_node_count is int64-typed, which the safe getters do not cover.
    let status =
        unsafe { highs_sys::Highs_getInt64InfoValue(solved.as_ptr(), c"mip_node_count".as_ptr(), &mut n) };
    if status == highs_sys::STATUS_OK { n.max(0) as u64 } else { 0 }
}

pub(crate) fn solve(p: &Problem, opts: &SolveOptions) -> Result<MilpSolution, SolverError> {
    let start = Instant::now();
    let initial = opts.initial.as_deref().and_then(|x| accept_point(p, x, opts.feas_tol));
    let solved = run(build(p, None), opts, initial.as_deref())?;
    let hstatus = solved.status();
    let mut stats = SolveStats {
        backend: "highs".into(),
        nodes: node_count(&solved),
        lp_iterations: solved.simplex_iteration_count().max(0) as u64,
        ..Default::default()
    };
    let dual = solved.double_info_value(c"mip_dual_bound").unwrap_or(f64::NEG_INFINITY);
    let raw = solved.get_solution().columns().to_vec();

    let mut values = None;
    if matches!(
        hstatus,
        HighsModelStatus::Optimal
            | HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedMemoryLimit
    ) && raw.len() == p.variables.len()
    {
        values = polish(p, &raw, opts).or_else(|| accept_point(p, &raw, opts.feas_tol));
    }
    if values.is_none() {
        values = initial;
    }
    let objective = values.as_ref().map(|v| p.objective_value(v));
    if let Some(o) = objective {
        stats.incumbent_history.push(o);
    }
    let status = match hstatus {
        HighsModelStatus::Optimal if values.is_some() => MilpStatus::Optimal,
        HighsModelStatus::Optimal => {
            return Err(SolverError::Backend("optimal status without an acceptable point".into()))
        }
        HighsModelStatus::Infeasible => MilpStatus::Infeasible,
        HighsModelStatus::ReachedTimeLimit
        | HighsModelStatus::ReachedIterationLimit
        | HighsModelStatus::ReachedSolutionLimit
        | HighsModelStatus::ReachedInterrupt
        | HighsModelStatus::ReachedMemoryLimit => MilpStatus::LimitReached,
        other => return Err(SolverError::Backend(format!("unexpected model status {other:?}"))),
    };
    stats.best_bound = match (status, objective) {
        (MilpStatus::Optimal, Some(o)) => o.min(dual.max(o - opts.gap_tol)),
        (MilpStatus::Infeasible, _) => f64::INFINITY,
        (_, Some(o)) => dual.min(o),
        (_, None) => dual,
    };
    stats.wall_time = start.elapsed();
    Ok(MilpSolution {
        status,
        objective,
        values,
        stats,
    })
}

fn polish(p: &Problem, raw: &[f64], opts: &SolveOptions) -> Option<Vec<f64>> {
    let rounded: Vec<f64> = raw.to_vec();
    let solved = run(build(p, Some(&rounded.iter().map(|x| x.round()).collect::<Vec<_>>())), opts, None).ok()?;
    if solved.status() != HighsModelStatus::Optimal {
        return None;
    }
    accept_point(p, solved.get_solution().columns(), opts.feas_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::VarKind;

    #[test]
    fn agrees_on_a_tiny_integer_program() {
        let mut p = Problem::new("t");
        let x = p.add_var("x", VarKind::Integer, 0.0, 10.0);
        let y = p.add_var("y", VarKind::Continuous, 0.0, 10.0);
        p.objective = vec![(x, -1.0), (y, -0.5)];
        p.add_row("a", vec![(x, 2.0), (y, 1.0)], Sense::Le, 7.0);
        let sol = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.objective.unwrap() + 3.5).abs() < 1e-9);
    }
}
