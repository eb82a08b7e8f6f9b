use conic_solve::{solve_with, verify, SolveOptions, SolveReport, SolveStatus, SymmetricMatrix};
use lipset_core::{LipschitzEnvelope, LipsetError};
use serde::{Deserialize, Serialize};

use crate::lmi::{build_invariance_lmi_with, InvarianceLmi, InvarianceOptions};
use crate::set::EllipsoidalInvariantSet;
use crate::verify::{verify_by_envelope_with, EnvelopeCheck, EnvelopeCheckOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectionConfig {
    pub rho_lo: f64,
    pub rho_hi: f64,
    /// bisection steps after the grid scan
    pub max_iters: usize,
    pub feasibility_tol: f64,
    /// uniform grid over `[rho_lo, rho_hi]`, scanned from the top
    pub grid_points: usize,
    /// golden-section steps on the feasibility margin when no grid point
    /// is feasible
    pub search_iters: usize,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self { rho_lo: 0.0, rho_hi: 1.0, max_iters: 6, feasibility_tol: 1e-8, grid_points: 11, search_iters: 16 }
    }
}

impl BisectionConfig {
    pub fn validate(&self) -> Result<(), LipsetError> {
        if !(self.rho_lo >= 0.0 && self.rho_lo < self.rho_hi && self.rho_hi.is_finite()) {
            return Err(LipsetError::InvalidInput(format!(
                "rho range must satisfy 0 <= rho_lo < rho_hi, got [{}, {}]",
                self.rho_lo, self.rho_hi
            )));
        }
        if self.grid_points < 2 {
            return Err(LipsetError::InvalidInput("grid_points must be at least 2".into()));
        }
        if !(self.feasibility_tol > 0.0) {
            return Err(LipsetError::InvalidInput("feasibility_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoTrial {
    pub rho: f64,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub min_slack_eigenvalue: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synthesis {
    pub set: EllipsoidalInvariantSet,
    pub rho: f64,
    pub objective: Option<f64>,
    pub min_slack_eigenvalue: f64,
    pub constraints_used: usize,
    pub trials: Vec<RhoTrial>,
    pub envelope_check: EnvelopeCheck,
    /// solver assignment of every LMI variable at `rho`
    pub values: Vec<f64>,
}

/// Rebuilds the LMI at the certified `ρ` and re-checks the stored assignment
/// with the solver-independent verifier.
pub fn recheck_certificate(
    env: &LipschitzEnvelope,
    opts: &InvarianceOptions,
    synthesis: &Synthesis,
    tol: f64,
) -> Result<SolveReport, LipsetError> {
    let lmi = build_invariance_lmi_with(env, opts, synthesis.rho)?;
    if lmi.problem.num_vars != synthesis.values.len() {
        return Err(LipsetError::DimensionMismatch { expected: lmi.problem.num_vars, got: synthesis.values.len() });
    }
    Ok(verify(&lmi.problem, &synthesis.values, tol))
}

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Input(#[from] LipsetError),
    #[error("envelope has no samples, nothing to certify against")]
    EmptyEnvelope,
    #[error("no feasible rho in [{lo}, {hi}] after {} trials", trials.len())]
    NoFeasibleRho { lo: f64, hi: f64, trials: Vec<RhoTrial> },
    #[error("solver failed at every trial rho in [{lo}, {hi}]")]
    Solver { lo: f64, hi: f64, trials: Vec<RhoTrial> },
    #[error("no feasible certificate passed the envelope check (worst bound {:.6e})", check.worst_bound)]
    Unverified { trials: Vec<RhoTrial>, check: EnvelopeCheck },
}

impl SynthesisError {
    pub fn trials(&self) -> &[RhoTrial] {
        match self {
            SynthesisError::NoFeasibleRho { trials, .. }
            | SynthesisError::Solver { trials, .. }
            | SynthesisError::Unverified { trials, .. } => trials,
            _ => &[],
        }
    }
}

struct Solved {
    rho: f64,
    status: SolveStatus,
    values: Vec<f64>,
    objective: Option<f64>,
    min_slack: f64,
}

struct Search<'a> {
    env: &'a LipschitzEnvelope,
    opts: &'a InvarianceOptions,
    solver: SolveOptions,
    trials: Vec<RhoTrial>,
    feasible: Vec<Solved>,
    lmi: Option<InvarianceLmi>,
}

impl Search<'_> {
    fn trial(&mut self, rho: f64) -> Result<bool, SynthesisError> {
        if let Some(t) = self.trials.iter().find(|t| t.rho == rho) {
            return Ok(t.status.is_feasible());
        }
        let lmi = build_invariance_lmi_with(self.env, self.opts, rho)?;
        let report = solve_with(&lmi.problem, &self.solver).map_err(|e| LipsetError::Solver(e.to_string()))?;
        self.trials.push(RhoTrial {
            rho,
            status: report.status,
            objective: report.objective,
            min_slack_eigenvalue: report.min_slack_eigenvalue,
            iterations: report.iterations,
        });
        // a verified point is a certificate even when the trace was not fully minimized
        let ok = report.status.is_feasible();
        if ok {
            self.feasible.push(Solved {
                rho,
                status: report.status,
                values: report.values,
                objective: report.objective,
                min_slack: report.min_slack_eigenvalue,
            });
        }
        self.lmi = Some(lmi);
        Ok(ok)
    }

    /// Golden-section maximization of the feasibility margin (smallest
    /// slack eigenvalue) over the grid cell pair around the best grid point;
    /// stops at the first feasible `ρ`.
    fn golden(&mut self, grid: &[f64], iters: usize) -> Result<Option<f64>, SynthesisError> {
        let margin = |s: &Self, rho: f64| {
            s.trials.iter().find(|t| t.rho == rho).map(|t| t.min_slack_eigenvalue).unwrap_or(f64::NEG_INFINITY)
        };
        let best = (0..grid.len()).max_by(|&i, &j| margin(self, grid[i]).total_cmp(&margin(self, grid[j]))).unwrap();
        let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        if self.trial(c)? {
            return Ok(Some(c));
        }
        if self.trial(d)? {
            return Ok(Some(d));
        }
        for _ in 2..iters {
            if margin(self, c) >= margin(self, d) {
                b = d;
                d = c;
                c = b - g * (b - a);
                if self.trial(c)? {
                    return Ok(Some(c));
                }
            } else {
                a = c;
                c = d;
                d = a + g * (b - a);
                if self.trial(d)? {
                    return Ok(Some(d));
                }
            }
        }
        Ok(None)
    }
}

/// Synthesis with default options: no domain, no model, at most 64
/// constraints per inequality.
pub fn synthesize(
    env: &LipschitzEnvelope,
    x_eq: &[f64],
    n_sets: usize,
    cfg: &BisectionConfig,
) -> Result<Synthesis, SynthesisError> {
    synthesize_with(env, &InvarianceOptions::new(x_eq.to_vec(), n_sets), cfg, &EnvelopeCheckOptions::default())
}

/// Largest feasible `ρ`: a descending grid scan, then (when no grid point is
/// feasible) a golden-section search maximizing the feasibility margin
/// around the best grid point, then bisection towards the nearest
/// infeasible trial above. Feasible certificates are audited by the
/// envelope check from the largest `ρ` down; the first that passes is
/// returned.
pub fn synthesize_with(
    env: &LipschitzEnvelope,
    opts: &InvarianceOptions,
    cfg: &BisectionConfig,
    check: &EnvelopeCheckOptions,
) -> Result<Synthesis, SynthesisError> {
    cfg.validate()?;
    if env.is_empty() {
        return Err(SynthesisError::EmptyEnvelope);
    }
    let mut search = Search {
        env,
        opts,
        solver: SolveOptions::with_tol(cfg.feasibility_tol),
        trials: Vec::new(),
        feasible: Vec::new(),
        lmi: None,
    };
    let (lo, hi) = (cfg.rho_lo, cfg.rho_hi);
    let step = (hi - lo) / (cfg.grid_points - 1) as f64;
    let grid: Vec<f64> = (0..cfg.grid_points).map(|i| lo + step * i as f64).collect();
    let mut found = None;
    for &rho in grid.iter().rev() {
        if search.trial(rho)? {
            found = Some(rho);
            break;
        }
    }
    if found.is_none() {
        found = search.golden(&grid, cfg.search_iters)?;
    }
    let Some(mut best) = found else {
        let trials = search.trials;
        if trials.iter().all(|t| t.status == SolveStatus::NumericalFailure) {
            return Err(SynthesisError::Solver { lo, hi, trials });
        }
        return Err(SynthesisError::NoFeasibleRho { lo, hi, trials });
    };
    let mut upper = search.trials.iter().map(|t| t.rho).filter(|r| *r > best).fold(hi, f64::min);
    if upper > best {
        for _ in 0..cfg.max_iters {
            let mid = 0.5 * (best + upper);
            if search.trial(mid)? {
                best = mid;
            } else {
                upper = mid;
            }
        }
    }

    let lmi = search.lmi.take().expect("at least one trial");
    search.feasible.sort_by(|a, b| {
        b.rho.total_cmp(&a.rho).then_with(|| (b.status == SolveStatus::Optimal).cmp(&(a.status == SolveStatus::Optimal)))
    });
    let mut last_check = None;
    for s in &search.feasible {
        let shapes: Vec<SymmetricMatrix> =
            lmi.shapes.iter().map(|p| SymmetricMatrix::from_dmatrix(&p.value(&s.values))).collect();
        let Ok(set) = EllipsoidalInvariantSet::new(opts.x_eq.clone(), shapes) else {
            continue;
        };
        let mut check = check.clone();
        check.model = opts.model.clone();
        check.domain = check.domain.or_else(|| opts.domain.clone());
        let result = verify_by_envelope_with(&set, env, &check)?;
        if result.passed() {
            return Ok(Synthesis {
                set,
                rho: s.rho,
                objective: s.objective,
                min_slack_eigenvalue: s.min_slack,
                constraints_used: lmi.selected.len(),
                trials: search.trials,
                envelope_check: result,
                values: s.values.clone(),
            });
        }
        last_check = Some(result);
    }
    let trials = search.trials;
    match last_check {
        Some(check) => Err(SynthesisError::Unverified { trials, check }),
        None => Err(SynthesisError::Solver { lo, hi, trials }),
    }
}
