//! Spectral laboratory for compact surfaces of revolution.
//!
//! Given a generating curve `A(x)` of the torus `S¹_x × S¹_θ` with metric
//! `dx² + A² dθ²`, the crate
//!
//! * classifies the critical elements of the effective potential `V0 = A⁻²`
//!   ([`classify`]),
//! * discretizes the separated operators `−h²∂² + V0 + h²V1` and assembles
//!   the surface spectrum ([`spectral`]),
//! * measures phase-space–restricted smallest singular values and their
//!   scaling in `h` near each critical element ([`microlocal`]),
//! * measures eigenfunction mass on rotationally invariant bands and sorts
//!   mode families into the vanishing / lower-bounded dichotomy
//!   ([`experiments`]).

pub mod classify;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fourier;
pub mod geometry;
pub mod jet;
pub mod microlocal;
pub mod profiles;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use profiles::{catalog_profile, construct_from_v0, CatalogProfile, GeneratingCurve, ProfileSpec};
