//! Thin wrapper over the `microlp` simplex solver.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Relation {
    Le,
    Eq,
}

pub(crate) enum LpOutcome {
    Optimal { objective: f64, values: Vec<f64> },
    Infeasible,
    Unbounded,
}

/// Dense-row LP with box-bounded variables.
pub(crate) struct Lp {
    problem: Problem,
    vars: Vec<Variable>,
}

impl Lp {
    pub(crate) fn new(sense: Sense) -> Self {
        let dir = match sense {
            Sense::Minimize => OptimizationDirection::Minimize,
            Sense::Maximize => OptimizationDirection::Maximize,
        };
        Lp {
            problem: Problem::new(dir),
            vars: Vec::new(),
        }
    }

    /// Adds a variable with objective coefficient `cost` and bounds
    /// `[lo, hi]`; returns its index.
    pub(crate) fn var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.vars.push(self.problem.add_var(cost, (lo, hi)));
        self.vars.len() - 1
    }

    pub(crate) fn constraint(&mut self, terms: &[(usize, f64)], rel: Relation, rhs: f64) {
        let expr: Vec<(Variable, f64)> = terms
            .iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|&(i, c)| (self.vars[i], c))
            .collect();
        let op = match rel {
            Relation::Le => ComparisonOp::Le,
            Relation::Eq => ComparisonOp::Eq,
        };
        self.problem.add_constraint(expr.as_slice(), op, rhs);
    }

    pub(crate) fn solve(self) -> Result<LpOutcome> {
        match self.problem.solve() {
            Ok(sol) => Ok(LpOutcome::Optimal {
                objective: sol.objective(),
                values: self.vars.iter().map(|v| *sol.var_value(*v)).collect(),
            }),
            Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
            Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
            Err(microlp::Error::InternalError(msg)) => {
                Err(Error::numerical(format!("LP solver failure: {msg}")))
            }
        }
    }
}
