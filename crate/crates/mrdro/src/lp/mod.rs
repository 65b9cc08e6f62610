//! Sparse linear programs in inequality form and a self-contained revised
//! simplex solver.
//!
//! Problems are stated as `minimize c'x` subject to rows `a'x {<=,=,>=} b`
//! and per-variable bounds. The solver is a bounded-variable two-phase
//! revised simplex with sparse column storage, an LU-factorized basis with
//! product-form updates, and Bland's rule as an anti-cycling fallback.

mod lu;
mod simplex;

use std::fmt::Write as _;

use thiserror::Error;

/// Absolute feasibility tolerance on constraint and bound residuals.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Smallest pivot magnitude the ratio test accepts without a retry.
pub const PIVOT_TOL: f64 = 1e-9;
/// Relative tolerance when comparing objective values.
pub const OBJECTIVE_REL_TOL: f64 = 1e-6;
/// Pivots below this magnitude signal numerical failure when they persist.
pub const TINY_PIVOT: f64 = 1e-11;

/// Row sense of a linear constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Terminal state of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub(crate) struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A sparse linear program. Objective is always minimized; variables default
/// to bounds `[0, +inf)`.
#[derive(Clone, Debug)]
pub struct LpProblem {
    num_vars: usize,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    pub(crate) rows: Vec<Row>,
}

/// Result of [`solve_lp`].
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: Status,
    /// Primal values per variable; empty unless `status == Optimal`.
    pub primal: Vec<f64>,
    /// Objective at the primal point; `NaN` unless `status == Optimal`.
    pub objective_value: f64,
    /// Simplex pivots performed across both phases.
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl LpProblem {
    pub fn new(num_vars: usize) -> Self {
        LpProblem {
            num_vars,
            objective: vec![0.0; num_vars],
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Sets the objective coefficient of `var` (minimization).
    pub fn set_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] = coef;
    }

    /// Sets the bounds of `var`. Use `-f64::INFINITY` / `f64::INFINITY`
    /// for free sides; `lower == upper` fixes the variable.
    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    /// Sparse entries, sense, and right-hand side of row `i`.
    pub fn row(&self, i: usize) -> (&[(usize, f64)], Sense, f64) {
        let r = &self.rows[i];
        (&r.coefs, r.sense, r.rhs)
    }

    pub fn objective_coef(&self, var: usize) -> f64 {
        self.objective[var]
    }

    /// Adds a constraint row and returns its index. Duplicate variable
    /// entries within one row are summed.
    pub fn add_constraint(&mut self, coefs: &[(usize, f64)], sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row {
            coefs: coefs.to_vec(),
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub(crate) fn validate(&self) -> Result<(), LpError> {
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::Invalid(format!("objective coef of x{j} is {c}")));
            }
        }
        for j in 0..self.num_vars {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() {
                return Err(LpError::Invalid(format!("bounds of x{j} contain NaN")));
            }
            if lo > hi {
                return Err(LpError::Invalid(format!(
                    "bounds of x{j} are crossed: [{lo}, {hi}]"
                )));
            }
            if lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::Invalid(format!("bounds of x{j} are empty")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::Invalid(format!("rhs of row {i} is {}", row.rhs)));
            }
            for &(j, a) in &row.coefs {
                if j >= self.num_vars {
                    return Err(LpError::Invalid(format!(
                        "row {i} references x{j} but the problem has {} variables",
                        self.num_vars
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::Invalid(format!("row {i} coef of x{j} is {a}")));
                }
            }
        }
        Ok(())
    }

    /// Plain-text dump for external cross-checking, one constraint per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let term = |buf: &mut String, first: &mut bool, a: f64, j: usize| {
            if *first {
                let _ = write!(buf, "{a} x{j}");
                *first = false;
            } else if a < 0.0 {
                let _ = write!(buf, " - {} x{j}", -a);
            } else {
                let _ = write!(buf, " + {a} x{j}");
            }
        };
        out.push_str("minimize ");
        let mut first = true;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                term(&mut out, &mut first, c, j);
            }
        }
        if first {
            out.push('0');
        }
        out.push_str("\nsubject to\n");
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "  r{i}:");
            let mut first = true;
            for &(j, a) in &row.coefs {
                if a != 0.0 {
                    out.push(' ');
                    if first {
                        let _ = write!(out, "{a} x{j}");
                        first = false;
                    } else if a < 0.0 {
                        let _ = write!(out, "- {} x{j}", -a);
                    } else {
                        let _ = write!(out, "+ {a} x{j}");
                    }
                }
            }
            if first {
                out.push_str(" 0");
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs);
        }
        out.push_str("bounds\n");
        for j in 0..self.num_vars {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                let _ = writeln!(out, "  x{j} free");
            } else {
                let _ = writeln!(out, "  {lo} <= x{j} <= {hi}");
            }
        }
        out
    }

    pub(crate) fn objective_slice(&self) -> &[f64] {
        &self.objective
    }

    pub(crate) fn lower_slice(&self) -> &[f64] {
        &self.lower
    }

    pub(crate) fn upper_slice(&self) -> &[f64] {
        &self.upper
    }
}

/// A suggested basic variable for one basis slot: either a structural
/// variable or the slack of an inequality row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisGuess {
    Structural(usize),
    Slack(usize),
}

/// Solves `p` to optimality or a proven infeasible/unbounded verdict.
///
/// Deterministic: identical input yields identical output. Returns
/// `LpError::Numerical` when pivots below [`TINY_PIVOT`] persist after
/// refactorization, as distinct from an infeasibility verdict.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LpError> {
    p.validate()?;
    simplex::solve(p, None)
}

/// Like [`solve_lp`], but tries `hint` (one basic variable per row) as the
/// starting basis. A hint that is singular, infeasible, or malformed is
/// discarded and the solve falls back to the ordinary two-phase start, so a
/// hint can speed a solve up but never change its result.
pub fn solve_lp_with_hint(p: &LpProblem, hint: &[BasisGuess]) -> Result<LpSolution, LpError> {
    p.validate()?;
    simplex::solve(p, Some(hint))
}

#[cfg(test)]
mod tests;
