//! Numerical toolkit for bounded intersections of quadric hypersurfaces.
//!
//! The crate is organised around the objects needed to bound and measure the
//! geodesic diameter of `M = {Q_1 = ... = Q_k = 0} ∩ B̄ⁿ`:
//!
//! - [`quadric`], [`scene`], [`geometry`]: value types and scene file I/O.
//! - [`manifold`]: Gram matrices, multipliers, projected gradients, retraction
//!   and sampling on `M`.
//! - [`flow`]: Morse checks, normalized-gradient trajectories and the two
//!   diameter estimators.
//! - [`thalweg`]: residuals characterising the thalweg set, perturbation,
//!   curve tracing and a box-counting dimension estimate.
//! - [`crofton`]: Cauchy–Crofton length estimation.
//! - [`barvinok`]: the parameterized linear system, corank control, pivot
//!   patterns, solution counting and the bound polynomials.
//! - [`reduction`]: slack lifting, thickening and strict-inequality handling.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod barvinok;
pub mod crofton;
mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod quadric;
pub mod reduction;
pub mod rng;
pub mod scene;
pub mod thalweg;

pub use error::{Error, Result};
pub use geometry::{Hyperplane, Polyline};
pub use quadric::Quadric;
pub use scene::{Constraint, Role, SceneSystem};

/// Dense point / vector type used throughout the crate.
pub type Point = nalgebra::DVector<f64>;
