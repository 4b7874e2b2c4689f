use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{log_rho_i, BundleDegree};
use crate::error::{Error, Result};
use crate::numerics::quadrature::integrate_real_line;
use crate::numerics::special::binomial;

/// Pointwise inner products `⟨A^{n-j}B^j, A^{n-l}B^l⟩` at `z` for the round metric on `O(n)`.
///
/// Entry `(j, l)` is `C(n,j) C(n,l) (-z)^j (-z̄)^l / (1+|z|²)^n`; index `j` counts
/// powers of `B`, so `(0, 0)` is `⟨Aⁿ, Aⁿ⟩`.
pub fn pointwise_gram(z: Complex64, n: &BundleDegree) -> Result<DMatrix<Complex64>> {
    let deg = usize::try_from(n.n)
        .map_err(|_| Error::InvalidArgument(format!("sections need n ≥ 0, got {}", n.n)))?;
    let big_n = 1.0 + z.norm_sqr();
    // v_j = C(n,j)(-z)^j N^{-n/2}, so the matrix is v v^H conjugated appropriately.
    let scale = big_n.powf(-0.5 * deg as f64);
    let v: Vec<Complex64> = (0..=deg).map(|j| (-z).powu(j as u32) * binomial(deg, j) * scale).collect();
    Ok(DMatrix::from_fn(deg + 1, deg + 1, |j, l| v[j] * v[l].conj()))
}

/// Reciprocal `L²(h₀, μ)` norms of the monomials `A^{n-j}B^j`, `j = 0..=n`.
///
/// Rotation invariance makes distinct monomials orthogonal, so these factors
/// turn the monomials into an orthonormal basis.
pub fn l2_orthonormal_basis(n: &BundleDegree) -> Result<Vec<f64>> {
    let deg = usize::try_from(n.n)
        .map_err(|_| Error::InvalidArgument(format!("sections need n ≥ 0, got {}", n.n)))?;
    (0..=deg)
        .map(|j| {
            let c = binomial(deg, j);
            let q = integrate_real_line(|t| log_rho_i(t, j, deg).exp(), 1e-15, 1e-12)?;
            Ok(1.0 / (c * q.value.sqrt()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rho;

    #[test]
    fn degree_one_at_origin() {
        let g = pointwise_gram(Complex64::new(0.0, 0.0), &BundleDegree::new(1)).unwrap();
        assert_eq!(g[(0, 0)].re, 1.0);
        assert_eq!(g[(1, 1)].re, 0.0);
        assert_eq!(g[(0, 1)].norm(), 0.0);
    }

    #[test]
    fn degree_one_trace_is_one() {
        for (x, y) in [(0.3, -1.2), (5.0, 2.0), (-0.01, 0.0)] {
            let z = Complex64::new(x, y);
            let g = pointwise_gram(z, &BundleDegree::new(1)).unwrap();
            assert!((g.trace().re - 1.0).abs() < 1e-15);
            let expected = -z.conj() / (1.0 + z.norm_sqr());
            assert!((g[(0, 1)] - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn gram_is_hermitian_psd() {
        let g = pointwise_gram(Complex64::new(0.7, 0.4), &BundleDegree::new(4)).unwrap();
        assert!((&g - g.adjoint()).norm() < 1e-14);
        let eig = g.symmetric_eigenvalues();
        assert!(eig.iter().all(|e| *e > -1e-14));
    }

    #[test]
    fn degree_one_norms() {
        let s = l2_orthonormal_basis(&BundleDegree::new(1)).unwrap();
        assert!((s[0] - 2f64.sqrt()).abs() < 1e-10);
        assert!((s[1] - 2f64.sqrt()).abs() < 1e-10);
        assert_eq!(l2_orthonormal_basis(&BundleDegree::new(0)).unwrap().len(), 1);
        assert!((l2_orthonormal_basis(&BundleDegree::new(0)).unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_basis_is_orthonormal_and_trace_integrates_to_rank() {
        // Integrate the scaled Gram over μ = ρ dt dθ/2π: θ-averaging kills off-diagonal
        // entries, so it suffices to integrate the diagonal in t and check the phases.
        for deg in 0..=5usize {
            let n = BundleDegree::new(deg as i32);
            let s = l2_orthonormal_basis(&n).unwrap();
            let diag = |t: f64, j: usize| {
                let z = Complex64::from_polar((0.5 * t).exp(), 0.3);
                let g = pointwise_gram(z, &n).unwrap();
                s[j] * s[j] * g[(j, j)].re * rho(t)
            };
            let mut trace = 0.0;
            for j in 0..=deg {
                let v = integrate_real_line(|t| diag(t, j), 1e-14, 1e-12).unwrap().value;
                assert!((v - 1.0).abs() < 1e-8, "n = {deg}, j = {j}: {v}");
                trace += v;
            }
            assert!((trace - (deg as f64 + 1.0)).abs() < 1e-8);
        }
        // Off-diagonal entries carry e^{i(j-l)θ} and average to zero over θ.
        let n = BundleDegree::new(2);
        let avg: Complex64 = (0..16)
            .map(|k| {
                let z = Complex64::from_polar(1.3, std::f64::consts::TAU * k as f64 / 16.0);
                pointwise_gram(z, &n).unwrap()[(0, 1)]
            })
            .sum::<Complex64>()
            / 16.0;
        assert!(avg.norm() < 1e-15);
    }
}
