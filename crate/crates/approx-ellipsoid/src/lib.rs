//! Ellipsoidal outer approximations of envelope slices.
//!
//! A slice is an intersection of balls. [`outer_ellipsoid`] returns the
//! minimum-trace ellipsoid certified to contain it by the S-procedure, and
//! [`containment_audit`] checks any ellipsoid against the slice by sampling.

pub mod audit;
pub mod ellipsoid;
pub mod sdp;

pub use audit::{containment_audit, containment_audit_with, sample_ball, AuditReport};
pub use ellipsoid::{contains_point, Ellipsoid, CONTAINS_TOL};
pub use sdp::{
    build_outer_sdp, build_outer_sdp_from_balls, outer_ellipsoid, outer_ellipsoid_with, OuterFit, OuterOptions,
    OuterSdp,
};
