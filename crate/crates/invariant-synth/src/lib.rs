//! Ellipsoidal positive invariant sets around a known equilibrium.
//!
//! For a fixed contraction weight `ρ` the invariance condition is a linear
//! matrix inequality in the shapes `P_j` and the S-procedure multipliers.
//! [`synthesize`] searches `ρ`, minimizes `Σ trace(P_j)` and audits the
//! result against the whole envelope before returning it.

pub mod lmi;
pub mod set;
pub mod synth;
pub mod verify;

pub use lmi::{
    build_invariance_lmi, build_invariance_lmi_with, select_constraints, AffineModel, DomainBox, InvarianceLmi,
    InvarianceOptions,
};
pub use set::{EllipsoidalInvariantSet, MEMBERSHIP_TOL};
pub use synth::{recheck_certificate, synthesize, synthesize_with, BisectionConfig, RhoTrial, Synthesis, SynthesisError};
pub use verify::{
    verify_by_envelope, verify_by_envelope_with, verify_by_simulation, EnvelopeCheck, EnvelopeCheckOptions, Escape,
    SimulationCheck, Verdict,
};
