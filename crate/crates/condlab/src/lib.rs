//! Numerical laboratory for boundary null-controllability of the coupled
//! parabolic system
//!
//! ```text
//! ∂ₜy₁ = ∂ₓₓy₁ − q(x)·y₂,      ∂ₜy₂ = ν·∂ₓₓy₂        on (0,π)×(0,T),
//! ```
//!
//! with homogeneous Dirichlet conditions except for one boundary control
//! y₂(0,t) = u(t).
//!
//! The crate is organized in five modules:
//!
//! * [`fnspace`] — functions on (0,π) as truncated Fourier-sine series, with
//!   L², H¹₀ and H⁻¹ norms and oscillatory quadrature.
//! * [`spectral`] — spectrum and (generalized) eigenfunctions of the adjoint
//!   operator L* = −D∂ₓₓ + qA₀*, boundary observations, index maps.
//! * [`condensation`] — minimal-time estimators, Gram-determinant diagnostics
//!   for Riesz-basis degeneration, and construction of Liouville-type ν.
//! * [`moment`] — truncated moment problems, biorthogonal atoms (Blaschke /
//!   Gram synthesis), control assembly, and a penalized quadratic solver.
//! * [`simulate`] — spectral-Galerkin forward/adjoint solver, duality checks
//!   and observability experiments.

pub mod condensation;
pub mod fnspace;
pub mod hp;
pub mod moment;
pub mod simulate;
pub mod spectral;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input contained NaN/inf or violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Operation asked for something outside its domain (e.g. an eigenvalue
    /// that is not part of the relevant spectral family).
    #[error("domain error: {0}")]
    Domain(String),
    /// A quantity underflowed the current working precision; the caller
    /// should retry with at least `required_bits` mantissa bits.
    #[error("precision escalation required: {reason} (need >= {required_bits} bits)")]
    PrecisionEscalation { reason: String, required_bits: u32 },
    /// Normalization by a vanishing boundary observation.
    #[error("zero boundary observation at lambda = {lambda}")]
    ZeroObservation { lambda: f64 },
    /// Assembly failed because one or more synthesized atoms were rejected.
    #[error("atom rejected for groups {groups:?}: {reason}")]
    AtomRejected { groups: Vec<usize>, reason: String },
    /// An iterative solver did not reach its tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
