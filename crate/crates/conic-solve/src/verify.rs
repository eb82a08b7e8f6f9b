//! Residual recomputation for candidate solutions.

use crate::jacobi;
use crate::matrix::SymmetricMatrix;
use crate::problem::{Definiteness, LinearMatrixProblem, Objective, Sense};
use crate::{SolveReport, SolveStatus};

/// Smallest slack of every constraint family, in problem order.
#[derive(Clone, Debug, PartialEq)]
pub struct SlackBreakdown {
    pub constraints: Vec<f64>,
    pub sign: Vec<f64>,
    pub matrix_variables: Vec<f64>,
}

impl SlackBreakdown {
    pub fn min(&self) -> f64 {
        self.constraints
            .iter()
            .chain(&self.sign)
            .chain(&self.matrix_variables)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn slacks(problem: &LinearMatrixProblem, z: &[f64]) -> SlackBreakdown {
    let constraints = problem
        .constraints
        .iter()
        .map(|c| {
            let mut m = c.evaluate(z);
            if c.sense == Sense::NegativeSemidefinite {
                m.scale(-1.0);
            }
            jacobi::min_eigenvalue(&m)
        })
        .collect();
    let sign = problem.nonnegative.iter().map(|&v| z[v]).collect();
    let matrix_variables = problem
        .matrix_variables
        .iter()
        .filter(|mv| mv.requirement != Definiteness::Free)
        .map(|mv| {
            let x = SymmetricMatrix::from_dmatrix(&mv.value(z));
            let floor = match mv.requirement {
                Definiteness::Definite => problem.definite_margin,
                _ => 0.0,
            };
            jacobi::min_eigenvalue(&x) - floor
        })
        .collect();
    SlackBreakdown { constraints, sign, matrix_variables }
}

/// Checks a candidate assignment against every constraint.
///
/// Status is `Feasible` when the largest violation is at most `tol`,
/// otherwise `Infeasible`. Nothing from a previous solve is consulted.
pub fn verify(problem: &LinearMatrixProblem, z: &[f64], tol: f64) -> SolveReport {
    if z.len() != problem.num_vars || z.iter().any(|v| !v.is_finite()) {
        return SolveReport {
            status: SolveStatus::NumericalFailure,
            values: z.to_vec(),
            objective: None,
            max_violation: f64::INFINITY,
            min_slack_eigenvalue: f64::NEG_INFINITY,
            iterations: 0,
        };
    }
    let min_slack = slacks(problem, z).min();
    let min_slack = if min_slack.is_finite() { min_slack } else { f64::INFINITY };
    let max_violation = (-min_slack).max(0.0);
    let objective = match &problem.objective {
        Objective::Minimize(c) => Some(c.iter().zip(z).map(|(a, b)| a * b).sum()),
        Objective::Feasibility => None,
    };
    SolveReport {
        status: if max_violation <= tol { SolveStatus::Feasible } else { SolveStatus::Infeasible },
        values: z.to_vec(),
        objective,
        max_violation,
        min_slack_eigenvalue: min_slack,
        iterations: 0,
    }
}
