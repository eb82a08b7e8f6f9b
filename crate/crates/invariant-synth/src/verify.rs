use lipset_core::{Execution, LipschitzEnvelope, LipsetError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::lmi::{AffineModel, DomainBox};
use crate::set::{quad, EllipsoidalInvariantSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Escape {
    pub start: usize,
    pub step: usize,
    pub point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationCheck {
    pub passed: bool,
    /// first start that violates the precondition (not inside the set)
    pub start_outside: Option<usize>,
    pub escape: Option<Escape>,
    pub starts: usize,
    pub horizon: usize,
}

/// Runs every start for `horizon` steps and reports the first escape.
pub fn verify_by_simulation(
    set: &EllipsoidalInvariantSet,
    step: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    starts: &[Vec<f64>],
    horizon: usize,
    exec: Execution,
) -> SimulationCheck {
    let mut check =
        SimulationCheck { passed: false, start_outside: None, escape: None, starts: starts.len(), horizon };
    if let Some(i) = starts.iter().position(|x| x.len() != set.dim() || !set.contains(x)) {
        check.start_outside = Some(i);
        return check;
    }
    let escapes = exec.map_range(starts.len(), |i| {
        let mut x = starts[i].clone();
        for k in 1..=horizon {
            x = step(&x);
            if !set.contains(&x) {
                return Some(Escape { start: i, step: k, point: x });
            }
        }
        None
    });
    check.escape = escapes.into_iter().flatten().next();
    check.passed = check.escape.is_none();
    check
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Violated,
    /// nothing to check against (empty envelope)
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheckOptions {
    pub samples: usize,
    pub seed: u64,
    /// allowed excess of the bound over 1
    pub tol: f64,
    pub model: Option<AffineModel>,
    pub domain: Option<DomainBox>,
    pub execution: Execution,
}

impl Default for EnvelopeCheckOptions {
    fn default() -> Self {
        Self { samples: 1000, seed: 0, tol: 1e-9, model: None, domain: None, execution: Execution::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub verdict: Verdict,
    pub checked: usize,
    /// largest per-point bound on `sqrt((y - x_eq)ᵀ P_m (y - x_eq))` over
    /// the slice, maximized over `m`
    pub worst_bound: f64,
    pub witness: Option<Vec<f64>>,
}

impl EnvelopeCheck {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// Bound on `max_{y ∈ F(x)} sqrt(V_m(y))` from the single best slice ball:
/// `min_k sqrt(V_m(c_k)) + r_k sqrt(λ_max(P_m))`.
fn image_bound(
    set: &EllipsoidalInvariantSet,
    env: &LipschitzEnvelope,
    model: Option<&AffineModel>,
    sqrt_lmax: &[f64],
    x: &[f64],
) -> f64 {
    let l = env.lipschitz_constant();
    let w = env.noise_radius();
    let base = model.map(|m| m.apply(x));
    let mut worst = f64::NEG_INFINITY;
    for (m, p) in set.shapes.iter().enumerate() {
        let mut best = f64::INFINITY;
        for s in env.samples() {
            let d: f64 = x.iter().zip(s.x.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let r = if w > 0.0 { l * (d + w) + w } else { l * d };
            let lower_bound = r * sqrt_lmax[m];
            if lower_bound >= best {
                continue;
            }
            let c: Vec<f64> = match &base {
                Some(b) => b.iter().zip(s.fx.iter()).map(|(p, q)| p + q).collect(),
                None => s.fx.to_vec(),
            };
            best = best.min(quad(p, &c, &set.equilibrium).max(0.0).sqrt() + lower_bound);
        }
        worst = worst.max(best);
    }
    worst
}

/// Samples points of the set (alternating boundary and interior, plus
/// `x_eq`) and checks that every slice image stays inside.
pub fn verify_by_envelope(set: &EllipsoidalInvariantSet, env: &LipschitzEnvelope, samples: usize) -> EnvelopeCheck {
    verify_by_envelope_with(set, env, &EnvelopeCheckOptions { samples, ..Default::default() })
        .expect("dimension-consistent inputs")
}

pub fn verify_by_envelope_with(
    set: &EllipsoidalInvariantSet,
    env: &LipschitzEnvelope,
    opts: &EnvelopeCheckOptions,
) -> Result<EnvelopeCheck> {
    let n = set.dim();
    if env.dimension() != n {
        return Err(LipsetError::DimensionMismatch { expected: n, got: env.dimension() });
    }
    if env.is_empty() {
        return Ok(EnvelopeCheck { verdict: Verdict::Indeterminate, checked: 0, worst_bound: f64::INFINITY, witness: None });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut points = vec![set.equilibrium.to_vec()];
    for i in 0..opts.samples.saturating_sub(1) {
        let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let edge = set.boundary_point(&dir);
        if i % 2 == 0 {
            points.push(edge);
        } else {
            let u: f64 = Uniform::new(0.0, 1.0).sample(&mut rng);
            let t = u.powf(1.0 / n as f64);
            points.push(set.equilibrium.iter().zip(&edge).map(|(c, e)| c + t * (e - c)).collect());
        }
    }
    if let Some(d) = &opts.domain {
        points.retain(|x| d.contains(x));
    }
    let sqrt_lmax: Vec<f64> = (0..set.count()).map(|j| set.sqrt_max_eigenvalue(j)).collect();
    let bounds = opts.execution.map(&points, |x| image_bound(set, env, opts.model.as_ref(), &sqrt_lmax, x));
    let mut check =
        EnvelopeCheck { verdict: Verdict::Certified, checked: points.len(), worst_bound: f64::NEG_INFINITY, witness: None };
    for (x, b) in points.iter().zip(bounds) {
        if b > check.worst_bound {
            check.worst_bound = b;
        }
        if b > 1.0 + opts.tol && check.witness.is_none() {
            check.verdict = Verdict::Violated;
            check.witness = Some(x.clone());
        }
    }
    Ok(check)
}
