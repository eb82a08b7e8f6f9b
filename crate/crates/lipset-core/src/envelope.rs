//! Recursive envelope refinement.
//!
//! The envelope is stored lazily as `L` plus the sample list; the set it
//! represents is the intersection of the per-sample constraint sets, so every
//! query reduces to per-sample tests.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LipsetError, Result};
use crate::par::Execution;
use crate::qc::{build_qc_matrix, check_lipschitz, qc_eval};
use crate::types::{dist, dist_sq, SamplePair, StateVector};

/// Default tolerance on quadratic-constraint values for membership.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzEnvelope {
    lipschitz_constant: f64,
    dimension: usize,
    noise_radius: f64,
    samples: Vec<SamplePair>,
    membership_tol: f64,
}

/// A pair of stored samples that no `L`-Lipschitz function can explain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzViolation {
    pub first: usize,
    pub second: usize,
    /// `‖Δfx‖` minus the largest value allowed for `‖Δx‖`
    pub excess: f64,
}

impl LipschitzEnvelope {
    /// Empty envelope (the whole product space).
    pub fn new(lipschitz_constant: f64, dimension: usize) -> Result<Self> {
        Self::with_noise(lipschitz_constant, dimension, 0.0)
    }

    pub fn with_noise(lipschitz_constant: f64, dimension: usize, noise_radius: f64) -> Result<Self> {
        check_lipschitz(lipschitz_constant)?;
        if dimension == 0 {
            return Err(LipsetError::InvalidInput("dimension must be >= 1".into()));
        }
        if !(noise_radius >= 0.0 && noise_radius.is_finite()) {
            return Err(LipsetError::InvalidInput(format!("noise radius {noise_radius}")));
        }
        Ok(Self {
            lipschitz_constant,
            dimension,
            noise_radius,
            samples: Vec::new(),
            membership_tol: MEMBERSHIP_TOL,
        })
    }

    pub fn from_samples(
        lipschitz_constant: f64,
        dimension: usize,
        noise_radius: f64,
        samples: impl IntoIterator<Item = SamplePair>,
    ) -> Result<Self> {
        let mut env = Self::with_noise(lipschitz_constant, dimension, noise_radius)?;
        for s in samples {
            env.push(s)?;
        }
        Ok(env)
    }

    pub fn with_membership_tol(mut self, tol: f64) -> Self {
        self.membership_tol = tol;
        self
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.lipschitz_constant
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn noise_radius(&self) -> f64 {
        self.noise_radius
    }

    pub fn membership_tol(&self) -> f64 {
        self.membership_tol
    }

    pub fn samples(&self) -> &[SamplePair] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Envelope restricted to the first `n` samples.
    pub fn truncated(&self, n: usize) -> Self {
        let mut env = self.clone();
        env.samples.truncate(n);
        env
    }

    /// Returns the envelope intersected with the constraint of `sample`.
    pub fn refine(&self, sample: SamplePair) -> Result<Self> {
        let mut env = self.clone();
        env.push(sample)?;
        Ok(env)
    }

    /// In-place form of [`refine`](Self::refine).
    pub fn push(&mut self, sample: SamplePair) -> Result<()> {
        check_dim(self.dimension, sample.dim())?;
        self.samples.push(sample);
        Ok(())
    }

    /// Membership of `(x, y)` in the represented set.
    pub fn contains(&self, x: &[f64], y: &[f64]) -> Result<bool> {
        check_dim(self.dimension, x.len())?;
        check_dim(self.dimension, y.len())?;
        let l = self.lipschitz_constant;
        if self.noise_radius > 0.0 {
            let w = self.noise_radius;
            let tol = self.membership_tol;
            return Ok(self
                .samples
                .iter()
                .all(|s| dist(y, &s.fx) <= l * (dist(x, &s.x) + w) + w + tol));
        }
        for s in &self.samples {
            let q = build_qc_matrix(s, l)?;
            if qc_eval(&q, x, y)? > self.membership_tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Whether a stored sample already matches `sample` within `tol`
    /// (`‖Δx‖ ≤ tol` and `‖Δfx‖ ≤ L tol + tol`).
    pub fn is_redundant(&self, sample: &SamplePair, tol: f64) -> bool {
        if sample.dim() != self.dimension {
            return false;
        }
        let dx = tol * tol;
        let dfx = (self.lipschitz_constant * tol + tol).powi(2);
        self.samples
            .iter()
            .any(|s| dist_sq(&s.x, &sample.x) <= dx && dist_sq(&s.fx, &sample.fx) <= dfx)
    }

    /// First sample pair (in lexicographic index order) that violates the
    /// Lipschitz bound, allowing for measurement noise.
    pub fn lipschitz_violation(&self, exec: Execution) -> Option<LipschitzViolation> {
        let l = self.lipschitz_constant;
        let w = self.noise_radius;
        let s = &self.samples;
        exec.find_first(s.len(), |i| {
            (i + 1..s.len()).find_map(|j| {
                let allowed = l * (dist(&s[i].x, &s[j].x) + 2.0 * w) + 2.0 * w;
                let observed = dist(&s[i].fx, &s[j].fx);
                let slack = 1e-12 * (1.0 + observed.abs() + allowed.abs());
                (observed > allowed + slack).then(|| LipschitzViolation {
                    first: i,
                    second: j,
                    excess: observed - allowed,
                })
            })
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&RawEnvelope::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RawEnvelope = serde_json::from_str(s)?;
        raw.try_into()
    }
}

/// Wire format: `{"L", "n", "noise_radius", "samples": [[x], [fx]]...}`.
#[derive(Serialize, Deserialize)]
struct RawEnvelope {
    #[serde(rename = "L")]
    l: f64,
    n: usize,
    noise_radius: f64,
    samples: Vec<(Vec<f64>, Vec<f64>)>,
}

impl From<&LipschitzEnvelope> for RawEnvelope {
    fn from(e: &LipschitzEnvelope) -> Self {
        RawEnvelope {
            l: e.lipschitz_constant,
            n: e.dimension,
            noise_radius: e.noise_radius,
            samples: e.samples.iter().map(|s| (s.x.to_vec(), s.fx.to_vec())).collect(),
        }
    }
}

impl TryFrom<RawEnvelope> for LipschitzEnvelope {
    type Error = LipsetError;

    fn try_from(raw: RawEnvelope) -> Result<Self> {
        let samples = raw
            .samples
            .into_iter()
            .enumerate()
            .map(|(k, (x, fx))| SamplePair::new(x, fx, k))
            .collect::<Result<Vec<_>>>()?;
        LipschitzEnvelope::from_samples(raw.l, raw.n, raw.noise_radius, samples)
    }
}

/// Convenience constructor used by tests and examples.
pub fn sample(x: &[f64], fx: &[f64], index: usize) -> Result<SamplePair> {
    SamplePair::new(x.to_vec(), fx.to_vec(), index)
}

impl LipschitzEnvelope {
    /// Query point as a validated state vector.
    pub fn state(&self, coords: &[f64]) -> Result<StateVector> {
        check_dim(self.dimension, coords.len())?;
        StateVector::new(coords.to_vec())
    }
}
