//! Numerical verification of Lieb-Robinson bounds for finite quantum spin systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: finite subsets of `Z^ν` with the L1 metric and the decay-function
//!   calculus (uniform integrability, convolution constants).
//! * [`algebra`]: dense spin-1/2 observables, tensor embedding, commutators,
//!   spectral norms and the normalized partial trace.
//! * [`model`]: interactions, local Hamiltonians and the weighted interaction norm.
//! * [`dynamics`]: exact Heisenberg-picture evolution through an eigendecomposition,
//!   with a truncated nested-commutator series as an independent oracle.
//! * [`bounds`]: the commutator bound, its exponential corollary and the velocity
//!   formulas.
//! * [`quasilocality`]: localization errors of evolved observables and empirical
//!   light-cone extraction.
//!
//! Grid sweeps run on rayon when the `parallel` feature is enabled (the default);
//! see [`Execution`].

pub mod algebra;
pub mod bounds;
pub mod dynamics;
mod error;
mod exec;
pub mod geometry;
mod linalg;
pub mod model;
pub mod quasilocality;
pub mod random;
pub mod search;
mod zeta;

pub use error::{Error, Result};
pub use exec::Execution;

/// Complex scalar used for every matrix in the crate.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Unitarity and hermiticity tolerance.
pub const TOL_UNITARY: f64 = 1e-10;
/// Tolerance for equalities derived from composed operations.
pub const TOL_DERIVED: f64 = 1e-9;
/// Tolerance for cross-checks against an independent oracle.
pub const TOL_ORACLE: f64 = 1e-8;
/// Tolerance for geometry predicates.
pub const TOL_GEOMETRY: f64 = 1e-12;

/// Largest supported number of sites without an explicit override.
pub const SITE_CAP: usize = 12;
