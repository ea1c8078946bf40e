//! Growth rates (top Lyapunov exponents) of products of the random 2x2
//! matrices generated by Hill's equation with parameters redrawn every cycle.
//!
//! The crate provides
//!
//! * unit-determinant cycle matrices and overflow-safe products, with a
//!   direct Monte Carlo growth-rate estimator ([`symplectic`]);
//! * the exact `alpha` recursion for `B = [[1, x phi], [1/x, 1]]` products and
//!   the highly unstable closed form ([`exact`]);
//! * perturbative and heuristic approximations ([`approx`]);
//! * elliptical rotations for the classically stable regime ([`elliptic`]);
//! * counter-based random streams ([`ensembles`]);
//! * a fourth-order integrator for single Hill cycles ([`hill`]);
//! * perpendicular-frequency forcing extracted from planar orbits
//!   ([`forcing`]);
//! * figure-style experiment runners writing CSV ([`experiments`]).

pub mod approx;
pub mod elliptic;
pub mod ensembles;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod forcing;
pub mod hill;
pub mod stats;
pub mod symplectic;

pub use ensembles::{DistributionSpec, StreamHandle};
pub use error::{Error, Result};
pub use symplectic::{
    classify, decompose, gamma_h_component, lyapunov_direct, multiply_accumulate, CycleMatrix,
    CycleParams, GrowthEstimate, Mat2, Norm, ProductState, Regime,
};
