use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LipsetError, Result};

/// A point of the state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(LipsetError::InvalidInput("state vector must have dimension >= 1".into()));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(LipsetError::InvalidInput("state vector has a non-finite entry".into()));
        }
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// One observed tuple `(x_k, f(x_k))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub x: StateVector,
    pub fx: StateVector,
    pub index: usize,
}

impl SamplePair {
    pub fn new(x: Vec<f64>, fx: Vec<f64>, index: usize) -> Result<Self> {
        let x = StateVector::new(x)?;
        let fx = StateVector::new(fx)?;
        check_dim(x.dim(), fx.dim())?;
        Ok(Self { x, fx, index })
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
