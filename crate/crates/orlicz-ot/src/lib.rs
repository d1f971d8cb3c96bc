//! Orlicz-space regularized discrete optimal transport.
//!
//! This crate solves Kantorovich problems on compact 1-D/2-D boxes where the
//! transport plan is penalized by a Young's (or quasi-Young's) function of its
//! density with respect to a product base measure:
//!
//! ```text
//! min_p  Σ_ij ( c_ij p_ij + γ · extΦ(p_ij) ) λ1_i λ2_j
//! s.t.   Σ_j p_ij λ2_j = μ1_i / λ1_i ,   Σ_i p_ij λ1_i = μ2_j / λ2_j ,   p ≥ 0.
//! ```
//!
//! The pieces:
//!
//! * [`young`] — Young's-function calculus: builtin regularizers (entropy,
//!   power, Tsallis, custom density tables), extended convex conjugates, a
//!   numeric Legendre-transform oracle, complementation and Luxemburg norms.
//! * [`grid`] — nested dyadic partitions of boxes, measure binning, binned
//!   densities, plan marginals, cell-averaged costs, mollification.
//! * [`transport`] — problem assembly/validation, primal and dual objectives,
//!   duality gap and residual diagnostics.
//! * [`solver`] — generic dual block ascent, its closed-form entropy
//!   specialization, and exact unregularized references (monotone 1-D
//!   coupling, network simplex).
//! * [`experiments`] — coupled (γ, h) and (γ, δ) schedules, discretization and
//!   smoothing sweeps, and the shipped example fixtures.

pub mod experiments;
pub mod grid;
pub mod solver;
pub mod transport;
pub mod young;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("not a Young's function: {0}")]
    NotYoungs(String),
    #[error("conjugate cross-check failed: {0}")]
    ConjugateMismatch(String),
    #[error("failed to bracket a decreasing tail (non-superlinear integrand?): {0}")]
    BracketFailure(String),
    #[error("unbalanced transport instance: {0}")]
    Unbalanced(String),
    #[error("inconsistent problem data: {0}")]
    Inconsistent(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

pub type Result<T> = std::result::Result<T, Error>;
