//! Self-contained dense LP and MILP core.
//!
//! [`LinearModel`] is the container every stage reformulation compiles to.
//! [`solve_lp`] runs a bounded-variable revised simplex and returns primal
//! values, row duals and reduced costs; [`solve_milp`] wraps it in a
//! deterministic best-bound branch-and-bound. [`write_lp_format`] dumps a
//! model in the CPLEX LP dialect for cross-checking with external solvers.

mod lpformat;
mod milp;
mod simplex;

pub use lpformat::write_lp_format;
pub use milp::{solve_milp, solve_milp_with, MipSolution, MipStatus};
pub use simplex::{solve_lp, solve_lp_with, LpSolution, LpStatus};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Solver failures that are not statuses (infeasible, unbounded and the
/// node limit are reported through the solution status instead).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("simplex iteration cap of {cap} exceeded (cycling or numerical trouble)")]
    NumericalFailure { cap: usize },
    #[error("basis matrix became singular during refactorization")]
    SingularBasis,
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Integrality class of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

/// Sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// A sparse constraint row `Σ coeffs · x (relation) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    /// `(column, coefficient)` pairs, sorted by column, no duplicates.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub name: String,
}

/// A mixed-integer linear minimization model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearModel {
    pub names: Vec<String>,
    pub objective: Vec<f64>,
    /// Constant added to the objective value.
    pub obj_constant: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub kind: Vec<VarKind>,
    /// Branching class; fractional columns with a higher value are branched
    /// on first.
    pub priority: Vec<u8>,
    pub rows: Vec<Row>,
}

impl LinearModel {
    /// Empty model.
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of columns.
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Number of constraint rows.
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends a column and returns its index. Binary columns have their
    /// bounds intersected with `[0, 1]`.
    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64, kind: VarKind, obj: f64) -> usize {
        let (lb, ub) = match kind {
            VarKind::Binary => (lb.max(0.0), ub.min(1.0)),
            _ => (lb, ub),
        };
        self.names.push(name.into());
        self.objective.push(obj);
        self.lower.push(lb);
        self.upper.push(ub);
        self.kind.push(kind);
        self.priority.push(0);
        self.objective.len() - 1
    }

    /// Appends a row; duplicate columns are merged and exact zeros dropped.
    pub fn add_row(&mut self, name: impl Into<String>, coeffs: &[(usize, f64)], relation: Relation, rhs: f64) -> usize {
        let mut c: Vec<(usize, f64)> = coeffs.to_vec();
        c.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(c.len());
        for (j, v) in c {
            match merged.last_mut() {
                Some((lj, lv)) if *lj == j => *lv += v,
                _ => merged.push((j, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        self.rows.push(Row { coeffs: merged, relation, rhs, name: name.into() });
        self.rows.len() - 1
    }

    /// Checks structural invariants: finite objective, no NaN, coherent
    /// bounds, column indices in range, binaries within `[0, 1]`.
    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars();
        let lens = [self.names.len(), self.lower.len(), self.upper.len(), self.kind.len(), self.priority.len()];
        if lens.iter().any(|&l| l != n) {
            return Err(SolverError::InvalidModel("column arrays have inconsistent lengths".into()));
        }
        for j in 0..n {
            if !self.objective[j].is_finite() {
                return Err(SolverError::InvalidModel(format!("objective of column {} is not finite", self.names[j])));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(SolverError::InvalidModel(format!("bad bounds on column {}", self.names[j])));
            }
            if self.kind[j] == VarKind::Binary && (self.lower[j] < 0.0 || self.upper[j] > 1.0) {
                return Err(SolverError::InvalidModel(format!("binary column {} has bounds outside [0,1]", self.names[j])));
            }
        }
        for r in &self.rows {
            if !r.rhs.is_finite() {
                return Err(SolverError::InvalidModel(format!("row {} has a non-finite right-hand side", r.name)));
            }
            for &(j, v) in &r.coeffs {
                if j >= n || !v.is_finite() {
                    return Err(SolverError::InvalidModel(format!("row {} has a bad entry", r.name)));
                }
            }
        }
        Ok(())
    }

    /// Objective value of a point, including the constant.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj_constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Left-hand side of row `r` at `x`.
    pub fn row_activity(&self, r: usize, x: &[f64]) -> f64 {
        self.rows[r].coeffs.iter().map(|&(j, v)| v * x[j]).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for (r, row) in self.rows.iter().enumerate() {
            let a = self.row_activity(r, x);
            let viol = match row.relation {
                Relation::Le => a - row.rhs,
                Relation::Ge => row.rhs - a,
                Relation::Eq => (a - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Index of the column with the given name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Centralized solver tolerances and limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Primal feasibility tolerance in the scaled space.
    pub primal_tol: f64,
    /// Reduced-cost optimality tolerance in the scaled space.
    pub dual_tol: f64,
    /// Smallest acceptable pivot magnitude.
    pub pivot_tol: f64,
    /// Integrality tolerance.
    pub int_tol: f64,
    /// Absolute optimality gap for branch-and-bound.
    pub mip_gap_abs: f64,
    /// Relative optimality gap for branch-and-bound.
    pub mip_gap_rel: f64,
    /// Maximum number of branch-and-bound nodes (LP solves).
    pub node_limit: usize,
    /// Iterations between recomputations of the basic solution.
    pub refresh_every: usize,
    /// Apply geometric row/column scaling before solving.
    pub scaling: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            primal_tol: 1e-9,
            dual_tol: 1e-9,
            pivot_tol: 1e-9,
            int_tol: 1e-6,
            mip_gap_abs: 1e-6,
            mip_gap_rel: 1e-9,
            node_limit: 200_000,
            refresh_every: 25,
            scaling: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_row_merges_duplicates() {
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, 1.0, VarKind::Continuous, 0.0);
        let y = m.add_var("y", 0.0, 1.0, VarKind::Continuous, 0.0);
        m.add_row("r", &[(y, 1.0), (x, 2.0), (y, -1.0), (x, 1.0)], Relation::Le, 1.0);
        assert_eq!(m.rows[0].coeffs, vec![(x, 3.0)]);
    }

    #[test]
    fn binary_bounds_clipped() {
        let mut m = LinearModel::new();
        let b = m.add_var("b", -3.0, 7.0, VarKind::Binary, 0.0);
        assert_eq!((m.lower[b], m.upper[b]), (0.0, 1.0));
        assert!(m.validate().is_ok());
        m.upper[b] = 2.0;
        assert!(m.validate().is_err());
    }
}
