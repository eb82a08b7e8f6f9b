use conic_solve::{SymmetricMatrix, DEFINITE_MARGIN};
use lipset_core::{LipsetError, Result, StateVector};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Tolerance on the quadratic form in [`contains_point`].
pub const CONTAINS_TOL: f64 = 1e-9;

/// `{y : (y - c)ᵀ R⁻¹ (y - c) ≤ 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEllipsoid", into = "RawEllipsoid")]
pub struct Ellipsoid {
    pub center: StateVector,
    pub shape: SymmetricMatrix,
}

#[derive(Serialize, Deserialize)]
struct RawEllipsoid {
    c: Vec<f64>,
    /// row-major
    #[serde(rename = "R")]
    r: Vec<f64>,
}

impl TryFrom<RawEllipsoid> for Ellipsoid {
    type Error = LipsetError;

    fn try_from(raw: RawEllipsoid) -> Result<Self> {
        let n = raw.c.len();
        if raw.r.len() != n * n {
            return Err(LipsetError::InvalidInput(format!("R has {} entries, expected {}", raw.r.len(), n * n)));
        }
        let shape = SymmetricMatrix::from_row_major(n, raw.r).map_err(|e| LipsetError::InvalidInput(e.to_string()))?;
        Ellipsoid::new(raw.c, shape)
    }
}

impl From<Ellipsoid> for RawEllipsoid {
    fn from(e: Ellipsoid) -> Self {
        RawEllipsoid { c: e.center.into_inner(), r: e.shape.as_slice().to_vec() }
    }
}

impl Ellipsoid {
    pub fn new(center: Vec<f64>, shape: SymmetricMatrix) -> Result<Self> {
        if shape.size() != center.len() {
            return Err(LipsetError::DimensionMismatch { expected: center.len(), got: shape.size() });
        }
        if shape.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(LipsetError::InvalidInput("non-finite ellipsoid shape".into()));
        }
        Ok(Self { center: StateVector::new(center)?, shape })
    }

    /// Ball of radius `r` around `center`.
    pub fn ball(center: Vec<f64>, r: f64) -> Result<Self> {
        let n = center.len();
        Self::new(center, SymmetricMatrix::scaled_identity(n, r * r))
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn trace(&self) -> f64 {
        self.shape.trace()
    }

    /// Half-width of the ellipsoid along coordinate `axis`: `sqrt(R_ii)`.
    pub fn semi_extent(&self, axis: usize) -> f64 {
        self.shape.get(axis, axis).max(0.0).sqrt()
    }

    /// Coordinate interval `c_i ± sqrt(R_ii)`.
    pub fn axis_interval(&self, axis: usize) -> (f64, f64) {
        let h = self.semi_extent(axis);
        (self.center[axis] - h, self.center[axis] + h)
    }

    /// Same center, shape multiplied by `s²` (linear scaling by `s`).
    pub fn scaled(&self, s: f64) -> Ellipsoid {
        let mut shape = self.shape.clone();
        shape.scale(s * s);
        Ellipsoid { center: self.center.clone(), shape }
    }

    /// `(y - c)ᵀ R⁻¹ (y - c)`, with `R` floored at `ε I` when singular.
    pub fn quadratic_form(&self, y: &[f64]) -> Result<f64> {
        let n = self.dim();
        if y.len() != n {
            return Err(LipsetError::DimensionMismatch { expected: n, got: y.len() });
        }
        let d = DVector::from_iterator(n, y.iter().zip(self.center.iter()).map(|(a, b)| a - b));
        let r = self.shape.to_dmatrix();
        let chol = r.clone().cholesky().or_else(|| {
            let eps = DEFINITE_MARGIN * r.norm().max(1.0);
            (r + DMatrix::identity(n, n) * eps).cholesky()
        });
        let chol = chol.ok_or_else(|| LipsetError::InvalidInput("ellipsoid shape is not positive semidefinite".into()))?;
        Ok(d.dot(&chol.solve(&d)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn contains_point(e: &Ellipsoid, y: &[f64]) -> Result<bool> {
    Ok(e.quadratic_form(y)? <= 1.0 + CONTAINS_TOL)
}
