//! Torque-controlled pendulum discretized with symplectic Euler.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Upright equilibrium `[π, 0]`.
pub const EQUILIBRIUM: [f64; 2] = [PI, 0.0];

/// Initial conditions of the data-collection runs.
pub const INITIAL_CONDITIONS: [[f64; 2]; 4] =
    [[5.0 * PI / 6.0, 0.0], [5.0 * PI / 3.0, -0.5], [PI / 6.0, 0.0], [5.0 * PI / 4.0, -0.2]];

/// Query states used for the uncertainty table.
pub const QUERY_POINTS: [[f64; 2]; 6] =
    [[2.12, -0.45], [3.11, 0.84], [1.40, 0.34], [3.05, -0.37], [4.21, 0.38], [5.60, 0.22]];

/// Steps per trajectory in the reference experiment.
pub const STEPS_PER_TRAJECTORY: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TorquePolicy {
    /// `T = m l² (g/l sin θ - kp (θ - π) - kd θ̇)`
    GravityCompensatedPd { kp: f64, kd: f64 },
    Zero,
}

impl Default for TorquePolicy {
    fn default() -> Self {
        TorquePolicy::GravityCompensatedPd { kp: 4.0, kd: 3.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    /// damping Lipschitz constant `L_d`
    pub damping: f64,
    pub sampling_period: f64,
    pub torque: TorquePolicy,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self { mass: 2.0, length: 2.0, gravity: 9.81, damping: 0.2, sampling_period: 0.005, torque: TorquePolicy::default() }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [("mass", self.mass), ("length", self.length), ("sampling_period", self.sampling_period)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.damping >= 0.0 && self.gravity.is_finite()) {
            return Err("damping must be nonnegative and gravity finite".into());
        }
        Ok(())
    }

    pub fn inertia(&self) -> f64 {
        self.mass * self.length * self.length
    }

    /// `L̃_d = L_d T_S / (m l²)`, the per-step damping gain on `θ̇`.
    pub fn discrete_damping_gain(&self) -> f64 {
        self.damping * self.sampling_period / self.inertia()
    }

    /// Exact Lipschitz constant of the damping residual
    /// `d(x) = -L̃_d θ̇ [T_S, 1]`, i.e. `L̃_d sqrt(1 + T_S²)`.
    pub fn residual_lipschitz(&self) -> f64 {
        self.discrete_damping_gain() * (1.0 + self.sampling_period * self.sampling_period).sqrt()
    }

    fn torque_over_inertia(&self, theta: f64, omega: f64) -> f64 {
        match self.torque {
            TorquePolicy::GravityCompensatedPd { kp, kd } => {
                let t = self.inertia() * (self.gravity / self.length * theta.sin() - kp * (theta - PI) - kd * omega);
                t / self.inertia()
            }
            TorquePolicy::Zero => 0.0,
        }
    }

    /// Closed-loop undamped map as `x⁺ = A x + b` when it is affine.
    pub fn undamped_affine(&self) -> Option<([[f64; 2]; 2], [f64; 2])> {
        let TorquePolicy::GravityCompensatedPd { kp, kd } = self.torque else {
            return None;
        };
        let h = self.sampling_period;
        let a = [[1.0 - h * h * kp, h * (1.0 - h * kd)], [-h * kp, 1.0 - h * kd]];
        let b = [h * h * kp * PI, h * kp * PI];
        Some((a, b))
    }
}

/// One step of period `T_S`:
/// `θ̇⁺ = θ̇ + T_S (T/(m l²) - (g/l) sin θ - [damp] L_d θ̇ / (m l²))`,
/// `θ⁺ = θ + T_S θ̇⁺`.
pub fn pendulum_step(p: &PendulumParams, state: [f64; 2], with_damping: bool) -> [f64; 2] {
    let [theta, omega] = state;
    let h = p.sampling_period;
    let damping = if with_damping { p.damping * omega / p.inertia() } else { 0.0 };
    let accel = p.torque_over_inertia(theta, omega) - p.gravity / p.length * theta.sin() - damping;
    let omega_next = omega + h * accel;
    [theta + h * omega_next, omega_next]
}

/// The injected damping residual `d(x) = step_damped(x) - step_undamped(x)`
/// in closed form.
pub fn damping_residual(p: &PendulumParams, state: [f64; 2]) -> [f64; 2] {
    let g = p.discrete_damping_gain();
    [-g * state[1] * p.sampling_period, -g * state[1]]
}
