//! Set-valued models of Lipschitz discrete-time dynamics learned from data.
//!
//! Each observed pair `(x_k, f(x_k))` constrains the graph of `f` to a cone
//! `‖y - f(x_k)‖ ≤ L ‖x - x_k‖`. A [`LipschitzEnvelope`] intersects these
//! constraints; its [`slice`] at a query state is an intersection of balls
//! that always contains the true image.

pub mod envelope;
pub mod error;
pub mod par;
pub mod qc;
pub mod slice;
mod support;
pub mod types;

pub use envelope::{sample, LipschitzEnvelope, LipschitzViolation, MEMBERSHIP_TOL};
pub use error::{LipsetError, Result};
pub use par::Execution;
pub use qc::{build_noisy_qc_matrix, build_qc_matrix, qc_eval, QcMatrix};
pub use slice::{
    bounding_box, coordinate_interval, diameter_bound, diameter_bound_with, slice, slice_ball, slice_member,
    slice_with, SliceBall, SliceSet, SLICE_TOL,
};
pub use types::{SamplePair, StateVector};
