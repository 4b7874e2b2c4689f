//! Grids, measures, densities and section inner products on the projective line.
//!
//! Points of `C ⊂ P¹` are written `z = r e^{iθ}` with `r = e^{t/2}`. In the
//! `(t, θ)` chart the normalized round measure is
//! `μ = ρ(t) dt dθ / 2π` with `ρ(t) = (e^{t/2} + e^{-t/2})^{-2}`, a positive
//! measure of total mass one. Everything downstream integrates against it.

mod field;
mod grid;
mod sections;

pub use field::{MeanZero, RadialProfile, SphereField};
pub(crate) use field::ThetaSpectrum;
pub use grid::{GridConfig, TGrid};
pub use sections::{l2_orthonormal_basis, pointwise_gram};

use crate::error::{Error, Result};
use crate::numerics::special::softplus;
use serde::{Deserialize, Serialize};

/// Radial density of the round measure in the `t = 2 log r` variable.
#[inline]
pub fn rho(t: f64) -> f64 {
    let c = (0.5 * t).cosh();
    0.25 / (c * c)
}

/// `ln ρ_i(t)` for the degree-`n` bundle, stable for large `|t|`.
#[inline]
pub(crate) fn log_rho_i(t: f64, i: usize, n: usize) -> f64 {
    (i as f64 + 1.0) * t - (n as f64 + 2.0) * softplus(t)
}

/// `ρ_i(t) = e^{it} (1 + e^t)^{-n} ρ(t)`: the radial weight of the i-th monomial section.
pub fn rho_i(t: f64, i: usize, n: &BundleDegree) -> Result<f64> {
    let deg = usize::try_from(n.n).map_err(|_| Error::InvalidArgument(format!("ρ_i needs n ≥ 0, got {}", n.n)))?;
    if i > deg {
        return Err(Error::IndexOutOfRange { index: i, max: deg });
    }
    Ok(log_rho_i(t, i, deg).exp())
}

/// The line bundle `O(n)` with its cohomology dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleDegree {
    pub n: i32,
}

impl BundleDegree {
    pub fn new(n: i32) -> Self {
        Self { n }
    }

    /// `dim H⁰(O(n))`.
    pub fn b0(&self) -> usize {
        if self.n >= 0 {
            self.n as usize + 1
        } else {
            0
        }
    }

    /// `dim H¹(O(n))`.
    pub fn b1(&self) -> usize {
        if self.n <= -1 {
            (-self.n - 1) as usize
        } else {
            0
        }
    }

    /// Degree of the Serre dual `Ω¹ ⊗ O(n)* = O(-n-2)`.
    pub fn serre_dual(&self) -> BundleDegree {
        BundleDegree { n: -self.n - 2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::integrate_real_line;

    #[test]
    fn rho_basics() {
        assert_eq!(rho(0.0), 0.25);
        assert_eq!(rho(5.0), rho(-5.0));
        let mass = integrate_real_line(rho, 1e-13, 1e-13).unwrap().value;
        assert!((mass - 1.0).abs() < 1e-11);
        assert_eq!(rho(2000.0), 0.0);
    }

    #[test]
    fn rho_i_reduces_to_rho_for_trivial_bundle() {
        let n0 = BundleDegree::new(0);
        assert!((rho_i(0.0, 0, &n0).unwrap() - 0.25).abs() < 1e-16);
        for k in -40..=40 {
            let t = k as f64 * 0.7;
            let a = rho_i(t, 0, &n0).unwrap();
            assert!((a - rho(t)).abs() <= 1e-13 * rho(t).max(1e-300), "t = {t}");
        }
    }

    #[test]
    fn rho_i_reflection() {
        let n3 = BundleDegree::new(3);
        let a = rho_i(2.0, 1, &n3).unwrap();
        let b = rho_i(-2.0, 2, &n3).unwrap();
        assert!((a - b).abs() < 1e-16);
    }

    #[test]
    fn rho_i_index_checked() {
        let n2 = BundleDegree::new(2);
        assert!(matches!(rho_i(0.0, 3, &n2), Err(Error::IndexOutOfRange { index: 3, max: 2 })));
        assert!(rho_i(0.0, 0, &BundleDegree::new(-1)).is_err());
    }

    #[test]
    fn cohomology_dimensions() {
        for n in -6..=6 {
            let d = BundleDegree::new(n);
            assert_eq!(d.b0() as i32 - d.b1() as i32, n + 1);
            if n >= 0 {
                assert_eq!((d.b0(), d.b1()), (n as usize + 1, 0));
            } else {
                assert_eq!((d.b0(), d.b1()), (0, (-n - 1) as usize));
            }
        }
        assert_eq!(BundleDegree::new(1).serre_dual().n, -3);
    }
}
