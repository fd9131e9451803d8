//! Solver-agnostic mixed-integer linear programs.

pub mod lp_format;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("constraint `{constraint}` references undeclared variable {var}")]
    UndeclaredVariable { constraint: String, var: usize },
    #[error("variable `{0}` has a non-finite or inverted bound")]
    BadBounds(String),
    #[error("binary variable `{0}` must have bounds within [0, 1]")]
    BinaryBounds(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
}

/// A minimization problem over bounded variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(VarId, f64)>,
}


impl AsRef<Problem> for Problem {
    fn as_ref(&self) -> &Problem {
        self
    }
}

impl Problem {
    pub fn new(name: impl Into<String>) -> Self {
        Problem {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_row(&mut self, name: impl Into<String>, terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|(v, c)| c * values[v.0]).sum()
    }

    pub fn integer_vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind.is_integral())
            .map(|(i, _)| i)
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let mut names = std::collections::HashSet::new();
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return Err(ProblemError::DuplicateName(v.name.clone()));
            }
            if !(v.lower.is_finite() && v.upper.is_finite() && v.lower <= v.upper) {
                return Err(ProblemError::BadBounds(v.name.clone()));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ProblemError::BinaryBounds(v.name.clone()));
            }
        }
        let n = self.variables.len();
        for c in &self.constraints {
            if let Some((v, _)) = c.terms.iter().find(|(v, _)| v.0 >= n) {
                return Err(ProblemError::UndeclaredVariable {
                    constraint: c.name.clone(),
                    var: v.0,
                });
            }
        }
        if let Some((v, _)) = self.objective.iter().find(|(v, _)| v.0 >= n) {
            return Err(ProblemError::UndeclaredVariable {
                constraint: "objective".into(),
                var: v.0,
            });
        }
        Ok(())
    }

    /// Every bound, row and integrality requirement violated by `values` beyond `tol`.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, v) in self.variables.iter().enumerate() {
            let x = values[i];
            if x < v.lower - tol || x > v.upper + tol || !x.is_finite() {
                out.push(Violation::Bound {
                    var: v.name.clone(),
                    value: x,
                });
            }
            if v.kind.is_integral() && (x - x.round()).abs() > tol {
                out.push(Violation::Integrality {
                    var: v.name.clone(),
                    value: x,
                });
            }
        }
        for c in &self.constraints {
            let e = c.violation(values);
            if e > tol {
                out.push(Violation::Row {
                    row: c.name.clone(),
                    excess: e,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Bound { var: String, value: f64 },
    Integrality { var: String, value: f64 },
    Row { row: String, excess: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Bound { var, value } => write!(f, "{var} = {value} is out of bounds"),
            Violation::Integrality { var, value } => write!(f, "{var} = {value} is not integral"),
            Violation::Row { row, excess } => write!(f, "row {row} violated by {excess:e}"),
        }
    }
}
