//! Discrete-time systems used to generate data.

use lipset_core::{Execution, LipsetError, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pendulum::{pendulum_step, PendulumParams};

pub trait DynamicalSystem: Sync {
    fn dim(&self) -> usize;
    fn step(&self, x: &[f64]) -> Vec<f64>;
}

/// `x⁺ = A x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    /// row-major
    pub a: Vec<Vec<f64>>,
}

impl LinearMap {
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self { a: (0..n).map(|i| (0..n).map(|j| if i == j { s } else { 0.0 }).collect()).collect() }
    }

    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.a)
    }
}

impl DynamicalSystem for LinearMap {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn step(&self, x: &[f64]) -> Vec<f64> {
        self.a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }
}

pub struct Pendulum {
    pub params: PendulumParams,
    pub with_damping: bool,
}

impl DynamicalSystem for Pendulum {
    fn dim(&self) -> usize {
        2
    }

    fn step(&self, x: &[f64]) -> Vec<f64> {
        pendulum_step(&self.params, [x[0], x[1]], self.with_damping).to_vec()
    }
}

/// `f(x) = L U tanh(V x + c)` with `‖U‖₂ = ‖V‖₂ = 1`, hence `L`-Lipschitz.
#[derive(Clone, Debug)]
pub struct RandomLipschitzMap {
    pub lipschitz: f64,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    c: DVector<f64>,
}

impl RandomLipschitzMap {
    pub fn new(n: usize, lipschitz: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut u = draw(&mut rng);
        let mut v = draw(&mut rng);
        let su: f64 = u.singular_values().max();
        let sv: f64 = v.singular_values().max();
        u /= su.max(1e-12);
        v /= sv.max(1e-12);
        let c = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        Self { lipschitz, u, v, c }
    }
}

impl DynamicalSystem for RandomLipschitzMap {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn step(&self, x: &[f64]) -> Vec<f64> {
        let z = &self.v * DVector::from_column_slice(x) + &self.c;
        let y = &self.u * z.map(f64::tanh) * self.lipschitz;
        y.iter().copied().collect()
    }
}

pub(crate) fn spectral_norm(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let m = a[0].len();
    DMatrix::from_fn(n, m, |i, j| a[i][j]).singular_values().max()
}

/// Trajectory `[x0, f(x0), ..., f^N(x0)]` of length `N + 1`.
pub fn simulate(system: &dyn DynamicalSystem, x0: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(LipsetError::InvalidInput("trajectory length N must be >= 1".into()));
    }
    if x0.len() != system.dim() {
        return Err(LipsetError::DimensionMismatch { expected: system.dim(), got: x0.len() });
    }
    let mut out = Vec::with_capacity(n + 1);
    out.push(x0.to_vec());
    for k in 0..n {
        let next = system.step(&out[k]);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(LipsetError::InvalidInput(format!("non-finite state at step {}", k + 1)));
        }
        out.push(next);
    }
    Ok(out)
}

/// Independent runs from several initial states.
pub fn simulate_many(
    system: &dyn DynamicalSystem,
    starts: &[Vec<f64>],
    n: usize,
    exec: Execution,
) -> Result<Vec<Vec<Vec<f64>>>> {
    exec.map(starts, |x0| simulate(system, x0, n)).into_iter().collect()
}
