//! Mixed-integer solving: a native branch-and-bound, an optional HiGHS backend and a brute-force oracle.

mod bnb;
#[cfg(feature = "highs")]
mod highs_backend;
pub mod oracle;
pub(crate) mod simplex;
pub mod warm_start;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{Problem, ProblemError, VarId};

pub use oracle::{enumerate_oracle, OracleError, OracleSolution};
pub use warm_start::{feasible_start, phase_order_start, WarmStartError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(#[from] ProblemError),
    #[error("backend `{0}` is not compiled in")]
    BackendUnavailable(&'static str),
    #[error("backend failure: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Native for small instances, HiGHS when available for the rest.
    #[default]
    Auto,
    Native,
    Highs,
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Backend::Auto),
            "native" => Ok(Backend::Native),
            "highs" => Ok(Backend::Highs),
            other => Err(format!("unknown backend `{other}`")),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Auto => "auto",
            Backend::Native => "native",
            Backend::Highs => "highs",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub backend: Backend,
    /// Row and bound tolerance used to accept an incumbent.
    pub feas_tol: f64,
    pub int_tol: f64,
    /// Absolute optimality gap at which a node is pruned.
    pub gap_tol: f64,
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    /// A candidate incumbent, ignored unless it passes the feasibility check.
    pub initial: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            backend: Backend::Auto,
            feas_tol: 1e-6,
            int_tol: 1e-6,
            gap_tol: 1e-6,
            node_limit: None,
            time_limit: None,
            initial: None,
        }
    }
}

impl SolveOptions {
    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_node_limit(mut self, limit: u64) -> Self {
        self.node_limit = Some(limit);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    /// A node or time limit stopped the search. An incumbent may still be present.
    LimitReached,
}

impl fmt::Display for MilpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MilpStatus::Optimal => "optimal",
            MilpStatus::Infeasible => "infeasible",
            MilpStatus::LimitReached => "limit_reached",
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub backend: String,
    pub nodes: u64,
    pub lp_iterations: u64,
    pub wall_time: Duration,
    /// Proven lower bound on the optimum.
    pub best_bound: f64,
    /// Objective of every accepted incumbent in order of discovery.
    pub incumbent_history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub objective: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub stats: SolveStats,
}

impl MilpSolution {
    pub fn value(&self, v: VarId) -> Option<f64> {
        self.values.as_ref().map(|x| x[v.0])
    }

    pub fn has_incumbent(&self) -> bool {
        self.values.is_some()
    }

    pub fn gap(&self) -> Option<f64> {
        self.objective.map(|o| o - self.stats.best_bound)
    }
}

fn auto_backend(p: &Problem) -> Backend {
    let ints = p.integer_vars().count();
    if cfg!(feature = "highs") && (ints > 24 || p.constraints.len() > 160) {
        Backend::Highs
    } else {
        Backend::Native
    }
}

/// Solve a minimization MILP.
pub fn solve(p: impl AsRef<Problem>, opts: &SolveOptions) -> Result<MilpSolution, SolverError> {
    let p = p.as_ref();
    p.validate()?;
    let backend = match opts.backend {
        Backend::Auto => auto_backend(p),
        b => b,
    };
    log::debug!(
        "solving {} ({} vars, {} rows) with {backend}",
        p.name,
        p.variables.len(),
        p.constraints.len()
    );
    match backend {
        Backend::Native | Backend::Auto => Ok(bnb::branch_and_bound(p, opts)),
        Backend::Highs => {
            #[cfg(feature = "highs")]
            {
                highs_backend::solve(p, opts)
            }
            #[cfg(not(feature = "highs"))]
            {
                Err(SolverError::BackendUnavailable("highs"))
            }
        }
    }
}

/// Check an externally produced point, rounding integer variables first.
pub(crate) fn accept_point(p: &Problem, values: &[f64], tol: f64) -> Option<Vec<f64>> {
    if values.len() != p.variables.len() {
        return None;
    }
    let mut x = values.to_vec();
    for j in p.integer_vars() {
        x[j] = x[j].round();
    }
    p.violations(&x, tol).is_empty().then_some(x)
}
