//! Small dense semidefinite programs with independent verification.
//!
//! Problems are stated as a [`LinearMatrixProblem`] and handed to [`solve`].
//! The solver runs a feasibility phase followed by an optimization phase, and
//! every returned assignment is re-checked by [`verify`] using a separate
//! eigenvalue routine before a status other than `NumericalFailure` or
//! `Infeasible` is reported.

mod ipm;
pub mod jacobi;
pub mod matrix;
pub mod problem;
pub mod verify;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use matrix::SymmetricMatrix;
pub use problem::{
    Definiteness, LinearMatrixProblem, LmiConstraint, LmiTerm, MatrixVariable, Objective, ProblemBuilder, Sense,
    DEFINITE_MARGIN,
};
pub use verify::{slacks, verify, SlackBreakdown};

use ipm::{Block, IpmSettings, IpmStatus};

#[derive(Debug, thiserror::Error)]
pub enum ConicError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// optimization phase converged and the point verifies
    Optimal,
    /// the point verifies but optimality was not certified
    Feasible,
    /// no point within tolerance exists (or none was found)
    Infeasible,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_feasible(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    pub objective: Option<f64>,
    /// largest negative slack eigenvalue magnitude (0 if none)
    pub max_violation: f64,
    pub min_slack_eigenvalue: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// feasibility tolerance on slack eigenvalues
    pub tol: f64,
    pub max_iters: usize,
    /// relative duality gap target for the optimization phase
    pub gap_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 150, gap_tol: 1e-9 }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Solves with default options and the given feasibility tolerance.
pub fn solve(problem: &LinearMatrixProblem, tol: f64) -> Result<SolveReport, ConicError> {
    solve_with(problem, &SolveOptions::with_tol(tol))
}

/// Lowers the problem to blocks `F_b(z) ⪰ 0`, each shifted by `relax · I`.
fn lower(problem: &LinearMatrixProblem, relax: f64) -> Vec<Block> {
    let mut blocks = Vec::new();
    for c in &problem.constraints {
        let sign = match c.sense {
            Sense::PositiveSemidefinite => 1.0,
            Sense::NegativeSemidefinite => -1.0,
        };
        let n = c.size();
        let mut constant = c.constant.to_dmatrix() * sign;
        for i in 0..n {
            constant[(i, i)] += relax;
        }
        let terms = c.terms.iter().map(|t| (t.var, t.coeff.to_dmatrix() * sign)).collect();
        blocks.push(Block::Dense { constant, terms });
    }
    for mv in &problem.matrix_variables {
        let floor = match mv.requirement {
            Definiteness::Free => continue,
            Definiteness::Semidefinite => 0.0,
            Definiteness::Definite => problem.definite_margin,
        };
        let n = mv.size;
        let constant = DMatrix::identity(n, n) * (relax - floor);
        let terms = mv.entries().map(|(k, i, j)| (k, mv.basis(i, j).to_dmatrix())).collect();
        blocks.push(Block::Dense { constant, terms });
    }
    if !problem.nonnegative.is_empty() {
        blocks.push(Block::Diag {
            constant: vec![relax; problem.nonnegative.len()],
            entries: problem.nonnegative.iter().map(|&v| vec![(v, 1.0)]).collect(),
        });
    }
    blocks
}

/// Appends `t · I` to every block and a diagonal block carrying `t + 1 ≥ 0`
/// and the trace cap `cap - Σ_b tr F_b(z) ≥ 0`.
fn phase_one_blocks(blocks: &[Block], num_vars: usize, cap: f64) -> Vec<Block> {
    let t = num_vars;
    let mut out: Vec<Block> = blocks
        .iter()
        .map(|b| match b {
            Block::Dense { constant, terms } => {
                let n = constant.nrows();
                let mut terms = terms.clone();
                terms.push((t, DMatrix::identity(n, n)));
                Block::Dense { constant: constant.clone(), terms }
            }
            Block::Diag { constant, entries } => Block::Diag {
                constant: constant.clone(),
                entries: entries
                    .iter()
                    .map(|e| {
                        let mut e = e.clone();
                        e.push((t, 1.0));
                        e
                    })
                    .collect(),
            },
        })
        .collect();
    out.push(trace_cap_block(blocks, num_vars, cap, Some(t)));
    out
}

fn trace_cap_block(blocks: &[Block], num_vars: usize, cap: f64, t: Option<usize>) -> Block {
    let mut traces = vec![0.0; num_vars];
    let mut tr0 = 0.0;
    for b in blocks {
        b.accumulate_term_traces(&mut traces);
        tr0 += b.trace_constant();
    }
    let cap_entry: Vec<(usize, f64)> =
        traces.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, -v)).collect();
    match t {
        Some(t) => Block::Diag { constant: vec![1.0, cap - tr0], entries: vec![vec![(t, 1.0)], cap_entry] },
        None => Block::Diag { constant: vec![cap - tr0], entries: vec![cap_entry] },
    }
}

fn finish(
    problem: &LinearMatrixProblem,
    z: &[f64],
    tol: f64,
    optimal: bool,
    iterations: usize,
) -> SolveReport {
    let mut report = verify(problem, z, tol);
    report.iterations = iterations;
    if report.status == SolveStatus::Feasible && optimal {
        report.status = SolveStatus::Optimal;
    }
    report
}

pub fn solve_with(problem: &LinearMatrixProblem, options: &SolveOptions) -> Result<SolveReport, ConicError> {
    problem.validate()?;
    let tol = options.tol.max(0.0);
    let n = problem.num_vars;
    let blocks = lower(problem, 0.0);
    let total_dim: usize = blocks.iter().map(Block::dim).sum();
    let tr0: f64 = blocks.iter().map(Block::trace_constant).sum();
    let f0_norm: f64 = blocks.iter().map(Block::constant_norm_sq).sum::<f64>().sqrt();
    let cap = 1e10 * (1.0 + tr0.abs() + f0_norm + total_dim as f64);

    // phase one: minimize t with F(z) + t I ⪰ 0
    let f_zero = ipm::evaluate(&blocks, &vec![0.0; n]);
    let lmin0 = ipm::min_eigenvalue(&f_zero);
    let t0 = if lmin0.is_finite() { (-lmin0).max(0.0) + 1.0 } else { 1.0 };
    let mut z1 = vec![0.0; n + 1];
    z1[n] = t0;
    let mut c1 = vec![0.0; n + 1];
    c1[n] = 1.0;
    let settings = IpmSettings {
        max_iters: options.max_iters,
        gap_tol: options.gap_tol,
        feas_tol: 1e-10,
    };
    let p1_blocks = phase_one_blocks(&blocks, n, cap);
    let p1 = ipm::solve(&p1_blocks, &c1, &z1, settings);
    let mut iterations = p1.iterations;
    let t_star = p1.z[n];
    let z_feas: Vec<f64> = p1.z[..n].to_vec();
    let slack = ipm::min_eigenvalue(&ipm::evaluate(&blocks, &z_feas));
    if !(slack >= -tol) {
        let status = if p1.status == IpmStatus::Converged && t_star > tol {
            SolveStatus::Infeasible
        } else if t_star > 10.0 * tol.max(1e-9) {
            // not converged, but far from feasibility
            SolveStatus::Infeasible
        } else {
            SolveStatus::NumericalFailure
        };
        let mut report = verify(problem, &z_feas, tol);
        report.iterations = iterations;
        if report.status != SolveStatus::Feasible {
            report.status = status;
        }
        return Ok(report);
    }

    let Objective::Minimize(c) = &problem.objective else {
        return Ok(finish(problem, &z_feas, tol, false, iterations));
    };

    // phase two from the phase-one point; relax only when there is no interior
    let interior = slack > 10.0 * tol.max(1e-12);
    let relax = if interior { 0.0 } else { (0.5 * tol).max(0.5 * (tol - slack)).min(tol) };
    let mut p2_blocks = lower(problem, relax);
    p2_blocks.push(trace_cap_block(&p2_blocks, n, cap, None));
    let p2 = ipm::solve(&p2_blocks, c, &z_feas, settings);
    iterations += p2.iterations;

    let candidate = verify(problem, &p2.z, tol);
    if candidate.status == SolveStatus::Feasible {
        let optimal = p2.status == IpmStatus::Converged;
        return Ok(finish(problem, &p2.z, tol, optimal, iterations));
    }
    // fall back to the phase-one point, which is feasible but not optimized
    Ok(finish(problem, &z_feas, tol, false, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowering_orients_negative_semidefinite_constraints() {
        let mut c = LmiConstraint::new("neg", Sense::NegativeSemidefinite, 1);
        c.constant = SymmetricMatrix::scaled_identity(1, 2.0);
        let p = LinearMatrixProblem {
            num_vars: 0,
            constraints: vec![c],
            nonnegative: vec![],
            matrix_variables: vec![],
            objective: Objective::Feasibility,
            definite_margin: DEFINITE_MARGIN,
        };
        let blocks = lower(&p, 0.0);
        let v = ipm::evaluate(&blocks, &[]);
        assert_eq!(ipm::min_eigenvalue(&v), -2.0);
    }
}
