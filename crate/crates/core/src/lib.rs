//! Cone-field criteria for partial hyperbolicity of geodesic flows.
//!
//! Every geometry in this crate is reduced to the Jacobi operator
//! `K(t) = R(γ', ·)γ'` restricted to `γ'^⊥`, written in a parallel orthonormal
//! frame along a single geodesic. On top of that reduction the crate provides:
//!
//! - [`models`]: curvature-operator models (constant curvature, rank-one
//!   symmetric, higher-rank root data, conformally perturbed non-Anosov
//!   scenario), eigen-splittings `v^⊥ = A ⊕ B`, conformal perturbation.
//! - [`dynamics`]: the linearized flow `η' = ς, ς' = -K(t)η` by RK4 and by
//!   closed-form blocks, plus the Wronskian invariant.
//! - [`criterion`]: the quadratic form `Q^c`, its derivative matrix `S^c`,
//!   cone sampling, the positivity check, gap functions and the `‖A'‖`
//!   tolerance.
//! - [`estimator`]: Lyapunov spectra, splitting dimensions, finite-time cone
//!   invariance and time spent in the criterion-failure set.
//! - [`config`] and [`runner`]: the flat `key = value` experiment format and
//!   the task runner behind the `curvph` binary.

pub mod config;
pub mod criterion;
pub mod dynamics;
pub mod error;
pub mod estimator;
pub(crate) mod linalg;
pub mod models;
pub mod runner;

pub use error::{Error, Result};
