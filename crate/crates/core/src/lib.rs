//! Forward and inverse maps between short-range lattice-gas interactions and
//! their low-activity correlation data.
//!
//! The forward direction takes an activity z and a pair potential Φ (through
//! its Mayer function g = e^{-Φ} - 1) to the density ω̄₁ and the centered
//! pair correlation ω̄₂ via truncated cluster expansions
//!
//! ```text
//!   ω̄₁    = z + z²·A(z, g)
//!   ω̄₂(x) = z²·g(x) + z³·B(z, g)(x)
//! ```
//!
//! whose coefficients are lattice sums of Ursell functions. The inverse
//! direction recovers (z, g) from prescribed (ω̄₁, ω̄₂) as the fixed point of
//! the map Q(z, g) = (ω̄₁ - z²A, ω̄₂/z² - zB), a contraction on a product
//! domain at small density. An exact finite-volume enumeration oracle
//! cross-checks both directions on small boxes.

pub mod algebra;
pub mod error;
pub mod expansion;
pub mod lattice;
pub mod oracle;
pub mod potential;
pub mod solver;
pub mod targets;
pub mod ursell;

pub use error::{Error, Result};
pub use lattice::{box_points, LatticeVector};
pub use potential::{mayer_from_potential, potential_from_mayer, MayerFunction, PairPotential};
pub use targets::{
    cluster_to_correlation, correlation_to_cluster, validate_cluster_entries, ClusterSpec,
    CorrelationSpec, ValidationCheck, ValidationReport,
};
