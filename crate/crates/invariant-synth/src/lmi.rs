//! The invariance condition for fixed `ρ`, linear in `(P_j, τ_{k,m})`.
//!
//! For every `m` and all `(x, y)` allowed by the selected quadratic
//! constraints `Q_k`:
//!
//! ```text
//! Σ_j [ -ρ (x - x_eq)ᵀ P_j (x - x_eq) + (y - x_eq)ᵀ P_m (y - x_eq) + ρ - 1 ]  ≤  Σ_k τ_{k,m} Q_k
//! ```
//!
//! stated as a matrix inequality on `[x; y; 1]`. With an affine model the
//! envelope describes the residual `d = y - A x - b` and the left-hand side is
//! rewritten on `[x; d; 1]` by the congruence `y = A x + d + b`.

use conic_solve::{
    Definiteness, LinearMatrixProblem, LmiConstraint, MatrixVariable, ProblemBuilder, Sense, SymmetricMatrix,
};
use lipset_core::{build_noisy_qc_matrix, LipschitzEnvelope, LipsetError, Result, SamplePair};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Default inner radius as a fraction of the smallest domain half-width.
pub const INNER_FRACTION: f64 = 1e-2;

/// Axis-aligned domain `[lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(LipsetError::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(LipsetError::InvalidInput("domain box needs lo < hi in every coordinate".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Distance from `c` to the nearer face along each axis.
    pub fn half_widths(&self, c: &[f64]) -> Vec<f64> {
        c.iter().zip(self.lo.iter().zip(&self.hi)).map(|(v, (a, b))| (v - a).min(b - v)).collect()
    }
}

/// Known part of the dynamics, `y = A x + b + d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineModel {
    /// row-major
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl AffineModel {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let n = b.len();
        if a.len() != n || a.iter().any(|r| r.len() != n) {
            return Err(LipsetError::InvalidInput("affine model must be square and match b".into()));
        }
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(row, bi)| row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + bi).collect()
    }

    /// `T` with `[x; y; 1] = T [x; d; 1]`.
    fn lift(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut t = DMatrix::identity(2 * n + 1, 2 * n + 1);
        for i in 0..n {
            for j in 0..n {
                t[(n + i, j)] = self.a[i][j];
            }
            t[(n + i, 2 * n)] = self.b[i];
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceOptions {
    pub x_eq: Vec<f64>,
    pub n_sets: usize,
    /// each ellipsoid must fit inside this box
    pub domain: Option<DomainBox>,
    /// when present the envelope is read as a residual envelope
    pub model: Option<AffineModel>,
    /// cap on the number of quadratic constraints per inequality
    pub max_constraints: usize,
    /// every ellipsoid must contain the ball of this radius around `x_eq`
    /// (`P_j ⪯ I / r²`); defaults to a fraction of the domain
    pub inner_radius: Option<f64>,
}

impl InvarianceOptions {
    pub fn new(x_eq: Vec<f64>, n_sets: usize) -> Self {
        Self { x_eq, n_sets, domain: None, model: None, max_constraints: 64, inner_radius: None }
    }

    pub fn with_domain(mut self, domain: DomainBox) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_model(mut self, model: AffineModel) -> Self {
        self.model = Some(model);
        self
    }

    pub fn with_inner_radius(mut self, r: f64) -> Self {
        self.inner_radius = Some(r);
        self
    }

    /// Explicit inner radius, or `INNER_FRACTION` of the smallest domain
    /// half-width.
    pub fn effective_inner_radius(&self) -> Option<f64> {
        self.inner_radius.or_else(|| {
            let d = self.domain.as_ref()?;
            let w = d.half_widths(&self.x_eq).into_iter().fold(f64::INFINITY, f64::min);
            Some(INNER_FRACTION * w)
        })
    }

    pub fn with_max_constraints(mut self, k: usize) -> Self {
        self.max_constraints = k;
        self
    }

    pub(crate) fn validate(&self, env: &LipschitzEnvelope) -> Result<()> {
        let n = env.dimension();
        if self.x_eq.len() != n {
            return Err(LipsetError::DimensionMismatch { expected: n, got: self.x_eq.len() });
        }
        if self.n_sets == 0 {
            return Err(LipsetError::InvalidInput("n_I must be at least 1".into()));
        }
        if self.max_constraints == 0 {
            return Err(LipsetError::InvalidInput("need at least one quadratic constraint".into()));
        }
        if let Some(d) = &self.domain {
            if d.lo.len() != n {
                return Err(LipsetError::DimensionMismatch { expected: n, got: d.lo.len() });
            }
            if !d.contains(&self.x_eq) || d.half_widths(&self.x_eq).iter().any(|w| *w <= 0.0) {
                return Err(LipsetError::InvalidInput("x_eq must lie in the interior of the domain".into()));
            }
        }
        if let Some(r) = self.inner_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(LipsetError::InvalidInput(format!("inner radius must be positive, got {r}")));
            }
        }
        if let Some(m) = &self.model {
            if m.dim() != n {
                return Err(LipsetError::DimensionMismatch { expected: n, got: m.dim() });
            }
        }
        Ok(())
    }
}

/// Built program with its variable handles.
#[derive(Clone, Debug)]
pub struct InvarianceLmi {
    pub problem: LinearMatrixProblem,
    pub shapes: Vec<MatrixVariable>,
    /// `tau[m][i]` multiplies the constraint of `selected[i]`
    pub tau: Vec<Vec<usize>>,
    /// sample positions (into the envelope) used as constraints
    pub selected: Vec<usize>,
}

/// Greedy farthest-point subset of at most `k` samples, seeded with the
/// sample nearest `x_eq`.
pub fn select_constraints(samples: &[SamplePair], x_eq: &[f64], k: usize) -> Vec<usize> {
    let n = samples.len();
    if n <= k {
        return (0..n).collect();
    }
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
    let first = (0..n).min_by(|&i, &j| d2(&samples[i].x, x_eq).total_cmp(&d2(&samples[j].x, x_eq))).unwrap();
    let mut chosen = vec![first];
    let mut gap: Vec<f64> = samples.iter().map(|s| d2(&s.x, &samples[first].x)).collect();
    while chosen.len() < k {
        let (next, g) = gap.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        if *g == 0.0 {
            break;
        }
        chosen.push(next);
        for (i, s) in samples.iter().enumerate() {
            gap[i] = gap[i].min(d2(&s.x, &samples[next].x));
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Coefficient of the form `w (z - c)ᵀ E_ab (z - c)` on `[x; y; 1]`, with `z`
/// the block starting at `offset`.
fn centered_form(size: usize, offset: usize, a: usize, b: usize, c: &[f64], w: f64) -> SymmetricMatrix {
    let one = size - 1;
    let mut m = SymmetricMatrix::zeros(size);
    // E_ab has ones at (a, b) and (b, a)
    m.set(offset + a, offset + b, w);
    if a == b {
        m.add_sym(offset + a, one, -w * c[a]);
        m.add_sym(one, one, w * c[a] * c[a]);
    } else {
        m.add_sym(offset + a, one, -w * c[b]);
        m.add_sym(offset + b, one, -w * c[a]);
        m.add_sym(one, one, 2.0 * w * c[a] * c[b]);
    }
    m
}

/// The program with default options (no domain, no model, every sample).
pub fn build_invariance_lmi(env: &LipschitzEnvelope, x_eq: &[f64], n_sets: usize, rho: f64) -> Result<InvarianceLmi> {
    let opts = InvarianceOptions::new(x_eq.to_vec(), n_sets).with_max_constraints(env.len().max(1));
    build_invariance_lmi_with(env, &opts, rho)
}

pub fn build_invariance_lmi_with(env: &LipschitzEnvelope, opts: &InvarianceOptions, rho: f64) -> Result<InvarianceLmi> {
    opts.validate(env)?;
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(LipsetError::InvalidInput(format!("rho must be a nonnegative number, got {rho}")));
    }
    if env.is_empty() {
        return Err(LipsetError::InvalidInput("envelope has no samples".into()));
    }
    let n = env.dimension();
    let size = 2 * n + 1;
    let xe = &opts.x_eq;
    let n_i = opts.n_sets;
    let selected = select_constraints(env.samples(), xe, opts.max_constraints);
    let qcs = selected
        .iter()
        .map(|&k| build_noisy_qc_matrix(&env.samples()[k], env.lipschitz_constant(), env.noise_radius()))
        .collect::<Result<Vec<_>>>()?;
    let lift = opts.model.as_ref().map(AffineModel::lift);
    let lifted = |m: SymmetricMatrix| match &lift {
        Some(t) => m.congruence(t),
        None => m,
    };

    let mut pb = ProblemBuilder::new();
    let shapes: Vec<MatrixVariable> =
        (0..n_i).map(|j| pb.matrix(format!("P{}", j + 1), n, Definiteness::Definite)).collect();
    let tau: Vec<Vec<usize>> =
        (0..n_i).map(|_| selected.iter().map(|_| pb.nonnegative_scalar()).collect()).collect();

    for m in 0..n_i {
        let mut lmi = LmiConstraint::new(format!("invariance_{}", m + 1), Sense::NegativeSemidefinite, size);
        let mut constant = SymmetricMatrix::zeros(size);
        constant.set(size - 1, size - 1, n_i as f64 * (rho - 1.0));
        lmi.constant = lifted(constant);
        for (j, p) in shapes.iter().enumerate() {
            for (var, a, b) in p.entries() {
                let mut coeff = centered_form(size, 0, a, b, xe, -rho);
                if j == m {
                    coeff.axpy(1.0, &centered_form(size, n, a, b, xe, n_i as f64));
                }
                lmi.add_term(var, lifted(coeff));
            }
        }
        for (&t, q) in tau[m].iter().zip(&qcs) {
            let mut coeff = q.matrix().clone();
            coeff.scale(-1.0);
            lmi.add_term(t, coeff);
        }
        pb.add_constraint(lmi);
    }

    if let Some(domain) = &opts.domain {
        let w = domain.half_widths(xe);
        for (j, p) in shapes.iter().enumerate() {
            for i in 0..n {
                // [[P, e_i], [e_iᵀ, w_i²]] ⪰ 0  ⇔  e_iᵀ P⁻¹ e_i ≤ w_i²
                let mut c = LmiConstraint::new(format!("domain_{}_{}", j + 1, i), Sense::PositiveSemidefinite, n + 1);
                c.constant.set(i, n, 1.0);
                c.constant.set(n, n, w[i] * w[i]);
                for (var, a, b) in p.entries() {
                    let mut coeff = SymmetricMatrix::zeros(n + 1);
                    coeff.set(a, b, 1.0);
                    c.add_term(var, coeff);
                }
                pb.add_constraint(c);
            }
        }
    }
    if let Some(r) = opts.effective_inner_radius() {
        for (j, p) in shapes.iter().enumerate() {
            let mut c = LmiConstraint::new(format!("inner_{}", j + 1), Sense::NegativeSemidefinite, n);
            c.constant = SymmetricMatrix::scaled_identity(n, -1.0 / (r * r));
            for (var, a, b) in p.entries() {
                c.add_term(var, p.basis(a, b));
            }
            pb.add_constraint(c);
        }
    }
    for p in &shapes {
        pb.minimize_trace(p);
    }
    Ok(InvarianceLmi { problem: pb.build(), shapes, tau, selected })
}
