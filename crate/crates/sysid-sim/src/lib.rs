//! Data generation for envelope learning: a controlled pendulum, synthetic
//! Lipschitz maps, residual datasets for an assumed model, bounded
//! measurement noise and periodicity diagnostics.

pub mod csvio;
pub mod dataset;
pub mod pendulum;
pub mod periodicity;
pub mod systems;

pub use csvio::{format_f64, read_trajectory_csv, write_trajectory_csv};
pub use dataset::{residual_dataset, AssumedModel, LearnStats, TrajectoryDataset};
pub use pendulum::{damping_residual, pendulum_step, PendulumParams, TorquePolicy};
pub use periodicity::{detect_periodicity, TrajectoryMeta};
pub use systems::{simulate, simulate_many, DynamicalSystem, LinearMap, Pendulum, RandomLipschitzMap};
