//! The S-procedure program for `⋂ B(f_k, r_k) ⊆ ell(c, R)`.
//!
//! Block layout of the `(2n + 1)`-square constraint, which must be `⪯ 0`:
//!
//! ```text
//! [ p    q   -I ]     p = -Σ τ_k I
//! [ qᵀ   r   cᵀ ]     q =  Σ τ_k f_k
//! [ -I   c   -R ]     r = -1 - Σ τ_k (‖f_k‖² - r_k²)
//! ```

use conic_solve::{
    solve_with, Definiteness, LinearMatrixProblem, LmiConstraint, MatrixVariable, ProblemBuilder, Sense,
    SolveOptions, SolveReport, SolveStatus, SymmetricMatrix,
};
use lipset_core::{Execution, LipsetError, Result, SliceSet};
use serde::{Deserialize, Serialize};

use crate::audit::{containment_audit_with, AuditReport};
use crate::ellipsoid::Ellipsoid;

/// Variable handles of a program built by [`build_outer_sdp`].
#[derive(Clone, Debug)]
pub struct OuterSdp {
    pub problem: LinearMatrixProblem,
    pub tau: Vec<usize>,
    pub center: Vec<usize>,
    pub shape: MatrixVariable,
}

impl OuterSdp {
    pub fn ellipsoid(&self, z: &[f64]) -> Result<Ellipsoid> {
        let c = self.center.iter().map(|&i| z[i]).collect();
        Ellipsoid::new(c, SymmetricMatrix::from_dmatrix(&self.shape.value(z)))
    }
}

/// Builds the program from balls given as `(center, radius)`.
pub fn build_outer_sdp_from_balls(balls: &[(&[f64], f64)]) -> Result<OuterSdp> {
    let Some(first) = balls.first() else {
        return Err(LipsetError::InvalidInput("outer ellipsoid of an empty ball list".into()));
    };
    let n = first.0.len();
    if n == 0 {
        return Err(LipsetError::InvalidInput("zero-dimensional slice".into()));
    }
    if let Some(b) = balls.iter().find(|b| b.0.len() != n) {
        return Err(LipsetError::DimensionMismatch { expected: n, got: b.0.len() });
    }
    let size = 2 * n + 1;
    let mut pb = ProblemBuilder::new();
    let tau: Vec<usize> = balls.iter().map(|_| pb.nonnegative_scalar()).collect();
    let center: Vec<usize> = (0..n).map(|_| pb.scalar()).collect();
    let shape = pb.matrix("R", n, Definiteness::Definite);

    let mut lmi = LmiConstraint::new("s_procedure", Sense::NegativeSemidefinite, size);
    for i in 0..n {
        lmi.constant.set(i, n + 1 + i, -1.0);
    }
    lmi.constant.set(n, n, -1.0);
    for (&t, (f, r)) in tau.iter().zip(balls) {
        let mut coeff = SymmetricMatrix::zeros(size);
        for i in 0..n {
            coeff.set(i, i, -1.0);
            coeff.set(i, n, f[i]);
        }
        let ff: f64 = f.iter().map(|v| v * v).sum();
        coeff.set(n, n, -(ff - r * r));
        lmi.add_term(t, coeff);
    }
    for (i, &v) in center.iter().enumerate() {
        let mut coeff = SymmetricMatrix::zeros(size);
        coeff.set(n, n + 1 + i, 1.0);
        lmi.add_term(v, coeff);
    }
    for (k, i, j) in shape.entries() {
        let mut coeff = SymmetricMatrix::zeros(size);
        coeff.set(n + 1 + i, n + 1 + j, -1.0);
        lmi.add_term(k, coeff);
    }
    pb.add_constraint(lmi);
    pb.minimize_trace(&shape);
    Ok(OuterSdp { problem: pb.build(), tau, center, shape })
}

/// The minimum-trace program for a slice, in the slice's own coordinates.
pub fn build_outer_sdp(s: &SliceSet) -> Result<OuterSdp> {
    let balls: Vec<(&[f64], f64)> = s.balls.iter().map(|b| (b.center.as_slice(), b.radius)).collect();
    build_outer_sdp_from_balls(&balls)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterOptions {
    /// initial number of smallest balls handed to the program
    pub max_balls: usize,
    pub audit_samples: usize,
    pub seed: u64,
    pub solver_tol: f64,
    pub execution: Execution,
}

impl Default for OuterOptions {
    fn default() -> Self {
        Self { max_balls: 50, audit_samples: 10_000, seed: 0, solver_tol: 1e-8, execution: Execution::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterFit {
    pub ellipsoid: Ellipsoid,
    pub balls_used: usize,
    pub solver_status: SolveStatus,
    pub solver_iterations: usize,
    pub min_slack_eigenvalue: f64,
    pub audit: AuditReport,
}

/// Solves in coordinates `u = (y - c0) / s`, with `c0` the smallest ball's
/// center and `s` the largest selected radius, then maps back.
fn solve_normalized(s: &SliceSet, tol: f64) -> Result<(Ellipsoid, SolveReport)> {
    let smallest = s.smallest_ball().expect("nonempty slice");
    let c0: Vec<f64> = smallest.center.to_vec();
    let scale = s.balls.iter().map(|b| b.radius).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let normalized: Vec<(Vec<f64>, f64)> = s
        .balls
        .iter()
        .map(|b| (b.center.iter().zip(&c0).map(|(a, o)| (a - o) / scale).collect(), b.radius / scale))
        .collect();
    let refs: Vec<(&[f64], f64)> = normalized.iter().map(|(c, r)| (c.as_slice(), *r)).collect();
    let sdp = build_outer_sdp_from_balls(&refs)?;
    let report = solve_with(&sdp.problem, &SolveOptions::with_tol(tol))
        .map_err(|e| LipsetError::Solver(e.to_string()))?;
    match report.status {
        SolveStatus::Optimal | SolveStatus::Feasible => {}
        SolveStatus::Infeasible => {
            return Err(LipsetError::InconsistentData("outer ellipsoid program infeasible for a slice".into()))
        }
        SolveStatus::NumericalFailure => {
            return Err(LipsetError::Solver("outer ellipsoid program: numerical failure".into()))
        }
    }
    let unit = sdp.ellipsoid(&report.values)?;
    let c: Vec<f64> = unit.center.iter().zip(&c0).map(|(u, o)| o + scale * u).collect();
    let mut shape = unit.shape.clone();
    shape.scale(scale * scale);
    Ok((Ellipsoid::new(c, shape)?, report))
}

/// Minimum-trace outer ellipsoid with the default options.
pub fn outer_ellipsoid(s: &SliceSet) -> Result<Ellipsoid> {
    Ok(outer_ellipsoid_with(s, &OuterOptions::default())?.ellipsoid)
}

/// Solves over the `max_balls` smallest balls and audits against the whole
/// slice; on a failed audit the ball budget doubles and the solve repeats.
pub fn outer_ellipsoid_with(s: &SliceSet, opts: &OuterOptions) -> Result<OuterFit> {
    if s.balls.is_empty() {
        return Err(LipsetError::UnboundedSlice);
    }
    let mut k = opts.max_balls.max(1).min(s.balls.len());
    loop {
        let sub = s.smallest(k);
        let (ellipsoid, report) = solve_normalized(&sub, opts.solver_tol)?;
        let audit = containment_audit_with(&ellipsoid, s, opts.audit_samples.max(1), opts.seed, opts.execution)?;
        if audit.violations == 0 || k == s.balls.len() {
            return Ok(OuterFit {
                ellipsoid,
                balls_used: k,
                solver_status: report.status,
                solver_iterations: report.iterations,
                min_slack_eigenvalue: report.min_slack_eigenvalue,
                audit,
            });
        }
        k = (2 * k).min(s.balls.len());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn program_shape() {
        let c = [0.0, 1.0];
        let sdp = build_outer_sdp_from_balls(&[(&c, 1.0), (&c, 2.0)]).unwrap();
        assert_eq!(sdp.tau.len(), 2);
        assert_eq!(sdp.problem.constraints.len(), 1);
        assert_eq!(sdp.problem.constraints[0].size(), 5);
        assert_eq!(sdp.problem.num_vars, 2 + 2 + 3);
    }

    #[test]
    fn ball_certificate_satisfies_the_lmi() {
        // tau = 1 / r², c = f, R = r² I is feasible for a single ball
        let f = [0.3, -0.2];
        let r = 0.7;
        let sdp = build_outer_sdp_from_balls(&[(&f, r)]).unwrap();
        let mut z = vec![0.0; sdp.problem.num_vars];
        z[sdp.tau[0]] = 1.0 / (r * r);
        for i in 0..2 {
            z[sdp.center[i]] = f[i];
            z[sdp.shape.index(i, i)] = r * r;
        }
        let rep = conic_solve::verify(&sdp.problem, &z, 1e-12);
        assert!(rep.min_slack_eigenvalue > -1e-12, "{rep:?}");
    }

    #[test]
    fn empty_ball_list_is_rejected() {
        assert!(build_outer_sdp_from_balls(&[]).is_err());
    }
}
