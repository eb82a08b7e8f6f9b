use conic_solve::SymmetricMatrix;
use lipset_core::{LipsetError, Result, StateVector};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Tolerance on `(x - x_eq)ᵀ P_j (x - x_eq) ≤ 1` in membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// `X_I = {x : (x - x_eq)ᵀ P_j (x - x_eq) ≤ 1 for every j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSet", into = "RawSet")]
pub struct EllipsoidalInvariantSet {
    pub equilibrium: StateVector,
    pub shapes: Vec<SymmetricMatrix>,
}

#[derive(Serialize, Deserialize)]
struct RawSet {
    x_eq: Vec<f64>,
    /// row-major matrices
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
}

impl TryFrom<RawSet> for EllipsoidalInvariantSet {
    type Error = LipsetError;

    fn try_from(raw: RawSet) -> Result<Self> {
        let n = raw.x_eq.len();
        let shapes = raw
            .p
            .into_iter()
            .map(|m| {
                if m.len() != n * n {
                    return Err(LipsetError::InvalidInput(format!("P has {} entries, expected {}", m.len(), n * n)));
                }
                SymmetricMatrix::from_row_major(n, m).map_err(|e| LipsetError::InvalidInput(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        EllipsoidalInvariantSet::new(raw.x_eq, shapes)
    }
}

impl From<EllipsoidalInvariantSet> for RawSet {
    fn from(s: EllipsoidalInvariantSet) -> Self {
        RawSet { x_eq: s.equilibrium.into_inner(), p: s.shapes.into_iter().map(|m| m.as_slice().to_vec()).collect() }
    }
}

impl EllipsoidalInvariantSet {
    pub fn new(x_eq: Vec<f64>, shapes: Vec<SymmetricMatrix>) -> Result<Self> {
        let n = x_eq.len();
        if shapes.is_empty() {
            return Err(LipsetError::InvalidInput("invariant set needs at least one ellipsoid".into()));
        }
        for p in &shapes {
            if p.size() != n {
                return Err(LipsetError::DimensionMismatch { expected: n, got: p.size() });
            }
            if p.to_dmatrix().cholesky().is_none() {
                return Err(LipsetError::InvalidInput("invariant-set shape is not positive definite".into()));
            }
        }
        Ok(Self { equilibrium: StateVector::new(x_eq)?, shapes })
    }

    pub fn dim(&self) -> usize {
        self.equilibrium.dim()
    }

    pub fn count(&self) -> usize {
        self.shapes.len()
    }

    /// `(x - x_eq)ᵀ P_j (x - x_eq)`.
    pub fn level(&self, j: usize, x: &[f64]) -> f64 {
        quad(&self.shapes[j], x, &self.equilibrium)
    }

    /// `max_j` of [`level`](Self::level).
    pub fn max_level(&self, x: &[f64]) -> f64 {
        (0..self.count()).map(|j| self.level(j, x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.max_level(x) <= 1.0 + MEMBERSHIP_TOL
    }

    /// Point where the ray from `x_eq` along `dir` leaves the set.
    pub fn boundary_point(&self, dir: &[f64]) -> Vec<f64> {
        let zero = vec![0.0; dir.len()];
        let t = self
            .shapes
            .iter()
            .map(|p| 1.0 / quad(p, dir, &zero).sqrt())
            .fold(f64::INFINITY, f64::min);
        self.equilibrium.iter().zip(dir).map(|(c, d)| c + t * d).collect()
    }

    /// Every shape multiplied by `s` (the set scales by `1/sqrt(s)`).
    pub fn scaled_shapes(&self, s: f64) -> Self {
        let shapes = self
            .shapes
            .iter()
            .map(|p| {
                let mut p = p.clone();
                p.scale(s);
                p
            })
            .collect();
        Self { equilibrium: self.equilibrium.clone(), shapes }
    }

    /// `sqrt(λ_max(P_j))`.
    pub fn sqrt_max_eigenvalue(&self, j: usize) -> f64 {
        self.shapes[j].to_dmatrix().symmetric_eigenvalues().max().max(0.0).sqrt()
    }

    /// Closed polyline of `n_points` points on the boundary of ellipsoid `j`
    /// projected onto coordinates `(a, b)` (with the other coordinates at
    /// `x_eq`).
    pub fn boundary_polyline(&self, j: usize, a: usize, b: usize, n_points: usize) -> Vec<(f64, f64)> {
        let p = self.shapes[j].to_dmatrix();
        let sub = DMatrix::from_row_slice(2, 2, &[p[(a, a)], p[(a, b)], p[(b, a)], p[(b, b)]]);
        let c = (self.equilibrium[a], self.equilibrium[b]);
        (0..=n_points)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n_points as f64;
                let d = DVector::from_vec(vec![t.cos(), t.sin()]);
                let s = 1.0 / d.dot(&(&sub * &d)).sqrt();
                (c.0 + s * d[0], c.1 + s * d[1])
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub(crate) fn quad(p: &SymmetricMatrix, x: &[f64], c: &[f64]) -> f64 {
    let n = x.len();
    let d: Vec<f64> = x.iter().zip(c).map(|(a, b)| a - b).collect();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += p.get(i, j) * d[j];
        }
        acc += d[i] * row;
    }
    acc
}
