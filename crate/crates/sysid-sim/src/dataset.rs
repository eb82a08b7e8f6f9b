//! Residual datasets: pairs `(x_k, x_{k+1} - f̄(x_k))` for an assumed model f̄.

use lipset_core::{LipschitzEnvelope, LipsetError, Result, SamplePair};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::pendulum::{pendulum_step, PendulumParams};
use crate::systems::spectral_norm;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AssumedModel {
    /// `f̄ = 0`: the residual is the full next state.
    Zero,
    Identity,
    /// `f̄(x) = A x + b`, `A` row-major.
    Affine { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// Pendulum step without damping.
    PendulumUndamped { params: PendulumParams },
}

impl AssumedModel {
    pub fn tag(&self) -> &'static str {
        match self {
            AssumedModel::Zero => "zero",
            AssumedModel::Identity => "identity",
            AssumedModel::Affine { .. } => "affine",
            AssumedModel::PendulumUndamped { .. } => "pendulum_undamped",
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            AssumedModel::Zero => vec![0.0; x.len()],
            AssumedModel::Identity => x.to_vec(),
            AssumedModel::Affine { a, b } => {
                a.iter().zip(b).map(|(row, bi)| row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + bi).collect()
            }
            AssumedModel::PendulumUndamped { params } => pendulum_step(params, [x[0], x[1]], false).to_vec(),
        }
    }

    /// Affine form `(A, b)` when the model is affine.
    pub fn as_affine(&self, n: usize) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
        let eye = |s: f64| (0..n).map(|i| (0..n).map(|j| if i == j { s } else { 0.0 }).collect()).collect();
        match self {
            AssumedModel::Zero => Some((eye(0.0), vec![0.0; n])),
            AssumedModel::Identity => Some((eye(1.0), vec![0.0; n])),
            AssumedModel::Affine { a, b } => Some((a.clone(), b.clone())),
            AssumedModel::PendulumUndamped { params } => {
                let (a, b) = params.undamped_affine()?;
                Some((a.iter().map(|r| r.to_vec()).collect(), b.to_vec()))
            }
        }
    }

    /// Lipschitz constant of `f̄` (Euclidean). `None` when unknown.
    pub fn lipschitz_bound(&self, n: usize) -> Option<f64> {
        self.as_affine(n).map(|(a, _)| spectral_norm(&a))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    /// measured states (noise included)
    pub trajectories: Vec<Vec<Vec<f64>>>,
    pub assumed_model: AssumedModel,
    pub noise_radius: f64,
    #[serde(with = "pairs")]
    pub residual_pairs: Vec<SamplePair>,
}

mod pairs {
    use lipset_core::SamplePair;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[SamplePair], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<(&[f64], &[f64])> = v.iter().map(|p| (p.x.as_slice(), p.fx.as_slice())).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<SamplePair>, D::Error> {
        let raw: Vec<(Vec<f64>, Vec<f64>)> = Vec::deserialize(d)?;
        raw.into_iter()
            .enumerate()
            .map(|(k, (x, fx))| SamplePair::new(x, fx, k).map_err(D::Error::custom))
            .collect()
    }
}

/// Point drawn uniformly from the ball of radius `r`.
fn ball_noise(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    if r == 0.0 {
        return vec![0.0; n];
    }
    let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let u: f64 = Uniform::new(0.0, 1.0).sample(rng);
    let scale = r * u.powf(1.0 / n as f64) / norm;
    g.into_iter().map(|v| v * scale).collect()
}

/// Builds the residual pairs of every trajectory. With `noise_radius > 0`
/// each state is measured once as `z_k = x_k + w_k`, `‖w_k‖ ≤ noise_radius`,
/// before differencing; the noise stream is determined by `seed`.
pub fn residual_dataset(
    trajectories: &[Vec<Vec<f64>>],
    assumed_model: AssumedModel,
    noise_radius: f64,
    seed: u64,
) -> Result<TrajectoryDataset> {
    if !(noise_radius >= 0.0 && noise_radius.is_finite()) {
        return Err(LipsetError::InvalidInput(format!("noise radius {noise_radius}")));
    }
    let n = trajectories.iter().flat_map(|t| t.first()).map(Vec::len).next().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut measured = Vec::with_capacity(trajectories.len());
    for t in trajectories {
        let mut m = Vec::with_capacity(t.len());
        for x in t {
            if x.len() != n {
                return Err(LipsetError::DimensionMismatch { expected: n, got: x.len() });
            }
            let w = ball_noise(&mut rng, n, noise_radius);
            m.push(x.iter().zip(&w).map(|(a, b)| a + b).collect::<Vec<f64>>());
        }
        measured.push(m);
    }
    let mut residual_pairs = Vec::new();
    for t in &measured {
        for k in 0..t.len().saturating_sub(1) {
            let pred = assumed_model.eval(&t[k]);
            let d: Vec<f64> = t[k + 1].iter().zip(&pred).map(|(a, b)| a - b).collect();
            let idx = residual_pairs.len();
            residual_pairs.push(SamplePair::new(t[k].clone(), d, idx)?);
        }
    }
    Ok(TrajectoryDataset { trajectories: measured, assumed_model, noise_radius, residual_pairs })
}

/// Counts from building an envelope with redundancy-based skipping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnStats {
    pub offered: usize,
    pub stored: usize,
    pub redundant: usize,
}

impl TrajectoryDataset {
    pub fn dim(&self) -> usize {
        self.residual_pairs.first().map(SamplePair::dim).unwrap_or_else(|| {
            self.trajectories.iter().flat_map(|t| t.first()).map(Vec::len).next().unwrap_or(0)
        })
    }

    /// Noise radius seen by the residual envelope: residual measurements
    /// carry `z_{k+1} - f̄(z_k)` errors up to `(1 + L_f̄) w`.
    pub fn envelope_noise_radius(&self) -> f64 {
        if self.noise_radius == 0.0 {
            return 0.0;
        }
        let lf = self.assumed_model.lipschitz_bound(self.dim()).unwrap_or(0.0);
        (1.0 + lf) * self.noise_radius
    }

    /// Envelope over the residual pairs, optionally skipping samples that
    /// [`LipschitzEnvelope::is_redundant`] flags at `redundancy_tol`.
    pub fn envelope(&self, l: f64, redundancy_tol: Option<f64>) -> Result<(LipschitzEnvelope, LearnStats)> {
        let n = self.dim().max(1);
        let mut env = LipschitzEnvelope::with_noise(l, n, self.envelope_noise_radius())?;
        let mut stats = LearnStats::default();
        for s in &self.residual_pairs {
            stats.offered += 1;
            if let Some(tol) = redundancy_tol {
                if env.is_redundant(s, tol) {
                    stats.redundant += 1;
                    continue;
                }
            }
            env.push(s.clone())?;
            stats.stored += 1;
        }
        Ok((env, stats))
    }

    /// Dataset restricted to the first `steps` transitions of every trajectory.
    pub fn truncated(&self, steps: usize) -> Result<TrajectoryDataset> {
        let mut out = self.clone();
        out.trajectories = self.trajectories.iter().map(|t| t.iter().take(steps + 1).cloned().collect()).collect();
        let mut pairs = Vec::new();
        for t in &out.trajectories {
            for k in 0..t.len().saturating_sub(1) {
                let pred = self.assumed_model.eval(&t[k]);
                let d: Vec<f64> = t[k + 1].iter().zip(&pred).map(|(a, b)| a - b).collect();
                let idx = pairs.len();
                pairs.push(SamplePair::new(t[k].clone(), d, idx)?);
            }
        }
        out.residual_pairs = pairs;
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pendulum::damping_residual;
    use crate::systems::{simulate, LinearMap, Pendulum};

    #[test]
    fn true_model_gives_zero_residuals() {
        let f = LinearMap::scaled_identity(2, 0.5);
        let t = simulate(&f, &[1.0, -2.0], 10).unwrap();
        let ds = residual_dataset(&[t], AssumedModel::Affine { a: f.a.clone(), b: vec![0.0; 2] }, 0.0, 0).unwrap();
        assert!(ds.residual_pairs.iter().all(|p| p.fx.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn identity_model_gives_increments() {
        let t = simulate(&LinearMap::scaled_identity(1, 0.5), &[1.0], 2).unwrap();
        let ds = residual_dataset(&[t], AssumedModel::Identity, 0.0, 0).unwrap();
        assert_eq!(ds.residual_pairs[0].fx.as_slice(), &[-0.5]);
        assert_eq!(ds.residual_pairs[1].x.as_slice(), &[0.5]);
        assert_eq!(ds.residual_pairs[1].fx.as_slice(), &[-0.25]);
    }

    #[test]
    fn pendulum_residuals_are_the_damping_term() {
        let params = PendulumParams::default();
        let sys = Pendulum { params, with_damping: true };
        let t = simulate(&sys, &[2.0, 0.5], 50).unwrap();
        let ds = residual_dataset(&[t], AssumedModel::PendulumUndamped { params }, 0.0, 0).unwrap();
        for p in &ds.residual_pairs {
            let d = damping_residual(&params, [p.x[0], p.x[1]]);
            assert!((p.fx[0] - d[0]).abs() < 1e-15 && (p.fx[1] - d[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn noise_is_bounded_and_seeded() {
        let t = simulate(&LinearMap::scaled_identity(3, 0.9), &[1.0, 2.0, 3.0], 100).unwrap();
        let a = residual_dataset(&[t.clone()], AssumedModel::Zero, 0.01, 42).unwrap();
        let b = residual_dataset(&[t.clone()], AssumedModel::Zero, 0.01, 42).unwrap();
        assert_eq!(a, b);
        for (m, x) in a.trajectories[0].iter().zip(&t) {
            let e: f64 = m.iter().zip(x).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            assert!(e <= 0.01);
        }
    }

    #[test]
    fn json_round_trip() {
        let t = simulate(&LinearMap::scaled_identity(1, 0.5), &[1.0], 4).unwrap();
        let ds = residual_dataset(&[t], AssumedModel::Identity, 0.0, 0).unwrap();
        let back = TrajectoryDataset::from_json(&ds.to_json().unwrap()).unwrap();
        assert_eq!(back, ds);
    }
}
