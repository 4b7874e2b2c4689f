//! Numerical building blocks: stencils, quadrature, banded solves, ODEs.

pub mod banded;
pub mod ode;
pub mod quadrature;
pub mod special;
pub mod spline;
pub mod stencil;
