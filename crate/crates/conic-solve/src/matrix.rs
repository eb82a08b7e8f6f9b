//! Dense symmetric matrices with a stable row-major serialization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ConicError;

/// Symmetric tolerance used when accepting externally supplied matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A dense symmetric matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSymmetric", into = "RawSymmetric")]
pub struct SymmetricMatrix {
    size: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSymmetric {
    size: usize,
    data: Vec<f64>,
}

impl TryFrom<RawSymmetric> for SymmetricMatrix {
    type Error = ConicError;

    fn try_from(raw: RawSymmetric) -> Result<Self, Self::Error> {
        SymmetricMatrix::from_row_major(raw.size, raw.data)
    }
}

impl From<SymmetricMatrix> for RawSymmetric {
    fn from(m: SymmetricMatrix) -> Self {
        RawSymmetric { size: m.size, data: m.data }
    }
}

impl SymmetricMatrix {
    pub fn zeros(size: usize) -> Self {
        Self { size, data: vec![0.0; size * size] }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size);
        for i in 0..size {
            m.data[i * size + i] = 1.0;
        }
        m
    }

    /// Scaled identity `s * I`.
    pub fn scaled_identity(size: usize, s: f64) -> Self {
        let mut m = Self::identity(size);
        m.scale(s);
        m
    }

    /// Builds a matrix from row-major data, rejecting asymmetric input.
    pub fn from_row_major(size: usize, data: Vec<f64>) -> Result<Self, ConicError> {
        if data.len() != size * size {
            return Err(ConicError::Malformed(format!(
                "matrix of size {size} needs {} entries, got {}",
                size * size,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ConicError::Malformed("non-finite matrix entry".into()));
        }
        let m = Self { size, data };
        if !m.is_symmetric(SYMMETRY_TOL) {
            return Err(ConicError::Malformed("matrix is not symmetric".into()));
        }
        Ok(m)
    }

    /// Symmetrizes `m` as `(m + mᵀ)/2`.
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "square matrix required");
        let size = m.nrows();
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..size {
                data[i * size + j] = 0.5 * (m[(i, j)] + m[(j, i)]);
            }
        }
        Self { size, data }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.size, self.size, &self.data)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.size + j] = v;
        self.data[j * self.size + i] = v;
    }

    /// Adds `v` to both `(i, j)` and `(j, i)` (once on the diagonal).
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.size + j] += v;
        if i != j {
            self.data[j * self.size + i] += v;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &SymmetricMatrix) {
        assert_eq!(self.size, other.size);
        for (d, o) in self.data.iter_mut().zip(&other.data) {
            *d += a * o;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.size).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.size {
            for j in (i + 1)..self.size {
                let a = self.get(i, j);
                let b = self.get(j, i);
                if (a - b).abs() > tol * (1.0 + a.abs().max(b.abs())) {
                    return false;
                }
            }
        }
        true
    }

    /// Congruence `Tᵀ · self · T` for a square `T` of matching size.
    pub fn congruence(&self, t: &DMatrix<f64>) -> SymmetricMatrix {
        let m = self.to_dmatrix();
        SymmetricMatrix::from_dmatrix(&(t.transpose() * m * t))
    }

    /// Writes `block` into the principal submatrix starting at `offset`.
    pub fn add_block(&mut self, offset: usize, block: &SymmetricMatrix, scale: f64) {
        for i in 0..block.size {
            for j in 0..block.size {
                self.data[(offset + i) * self.size + offset + j] += scale * block.get(i, j);
            }
        }
    }
}
