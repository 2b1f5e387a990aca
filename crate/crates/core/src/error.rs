//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A vector or tuple was built with the wrong number of coordinates.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An input map carried an entry at the origin. The origin value is
    /// fixed by convention (g(0) = -1, Φ(0) = +∞, ρ₂(0) = 0, ω₂(0) = -ω₁²)
    /// and must not be supplied.
    #[error("value at the origin is implied by convention and must not be supplied")]
    OriginImplied,

    /// An input map had entries at x and -x that disagree.
    #[error("asymmetric input: entries at {x} and its mirror disagree ({a} vs {b})")]
    AsymmetricInput { x: String, a: f64, b: f64 },

    /// A value that must be finite was ±∞ or NaN.
    #[error("non-finite value {value} at {at}")]
    NonFinite { at: String, value: f64 },

    /// Mayer function value at or below -1 off the origin has no finite
    /// potential (Φ = -ln(1 + g) diverges).
    #[error("no finite potential for Mayer value {value} <= -1 at {x}")]
    HardCore { x: String, value: f64 },

    /// A sequence-functional operation was asked for an order beyond the
    /// truncation it was built with.
    #[error("order overflow: tuple of length {requested} exceeds max order {max_order}")]
    OrderOverflow { requested: usize, max_order: usize },

    /// Γ expects order-0 component 0, Γ⁻¹ expects order-0 component 1.
    #[error("order-0 component is {got}, expected {expected}")]
    BadUnitPart { expected: f64, got: f64 },

    /// Two functionals combined with incompatible windows or dimensions.
    #[error("incompatible functionals: {0}")]
    IncompatibleFunctionals(String),

    /// Target spec failed validation; the report lists the violated checks.
    #[error("spec validation failed: {0}")]
    SpecValidation(String),

    /// Invalid scalar parameter (z, r, tolerance, order, ...).
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Truncation window smaller than the interaction support; the y-sums
    /// would drop nearest-neighbour terms.
    #[error("window radius {window} is smaller than the interaction support radius {support}")]
    WindowTooSmall { window: i32, support: i32 },

    /// Enumeration volume beyond what exhaustive subset sums can handle.
    #[error("volume too large for exact enumeration: {sites} sites (limit {limit})")]
    VolumeTooLarge { sites: usize, limit: usize },

    /// Finite-volume request outside the volume.
    #[error("point {x} lies outside the finite volume")]
    OutsideVolume { x: String },

    /// Fixed-point iteration produced an unusable iterate (z' ≤ 0 or non-finite).
    #[error("iteration diverged at step {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },

    /// Fixed-point iteration ran out of iterations before the step metric
    /// dropped below tolerance. Usually means ω̄₁ is too large for the
    /// contraction regime.
    #[error("no convergence after {iterations} iterations (last step {final_step:.3e}, tol {tol:.3e})")]
    NonConvergence {
        iterations: usize,
        final_step: f64,
        tol: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
