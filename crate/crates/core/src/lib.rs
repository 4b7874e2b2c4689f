//! Numerical evaluation of the determinant anomaly for line bundles on the
//! projective line and for weighted Laplacians on the circle.
//!
//! The modules are layered: [`geometry`] provides grids and measures,
//! [`anomaly`] evaluates the functional, and the remaining modules verify
//! inequalities, cross-check against spectral oracles, and search for suprema.

// Negated comparisons such as `!(x > 0.0)` are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anomaly;
pub mod bounds;
pub mod error;
pub mod geometry;
pub mod io;
pub mod numerics;
pub mod optimizer;
pub mod rearrangement;
pub mod spectral;

pub use error::{Error, Result};
