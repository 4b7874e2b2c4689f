//! The anomaly `A(φ) = log D(L, h₀e^φ) − log D(L, h₀)` for `L = O(n)` on the
//! projective line with the round base metric.
//!
//! With `c₁(T) = 2μ` and `c₁(O(n), h₀) = nμ` the functional reads
//!
//! ```text
//! A(φ) = ½∫φ dd^cφ − (n+1)∫φ μ + log det ∫e^{φ}⟨α_i,α_j⟩μ + log det ∫e^{−φ}⟨β_i,β_j⟩μ
//! ```
//!
//! where `α` is an `L²`-orthonormal basis of `H⁰(O(n))` and `β` the dual basis
//! for `H¹`, realised through the orthonormal monomials of `O(−n−2)`. The Gram
//! bases are normalized on the evaluation grid itself, so `A(0) = 0` exactly.

use std::f64::consts::{PI, TAU};

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{log_rho_i, BundleDegree, MeanZero, RadialProfile, SphereField, TGrid};
use crate::numerics::special::logsumexp;

pub const DEFAULT_MAX_DEGREE: i32 = 8;

/// Largest admissible density of a Gram integrand at the window edge, relative to the integral.
const TAIL_TOLERANCE: f64 = 1e-6;

/// The four summands of the anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyResult {
    pub n: i32,
    pub total: f64,
    pub energy_term: f64,
    pub linear_term: f64,
    pub h0_term: f64,
    pub h1_term: f64,
}

impl AnomalyResult {
    fn assemble(n: i32, energy_term: f64, linear_term: f64, h0_term: f64, h1_term: f64) -> Self {
        Self { n, total: energy_term + linear_term + h0_term + h1_term, energy_term, linear_term, h0_term, h1_term }
    }
}

/// Euclidean gradient of the anomaly with respect to node values, split by summand.
#[derive(Debug, Clone)]
pub struct GradientParts {
    pub energy: Vec<f64>,
    pub linear: Vec<f64>,
    pub log_det: Vec<f64>,
}

impl GradientParts {
    pub fn total(&self) -> Vec<f64> {
        self.energy.iter().zip(&self.linear).zip(&self.log_det).map(|((a, b), c)| a + b + c).collect()
    }

    /// Divides every component by the `t`-quadrature weight of its row, turning a
    /// Euclidean gradient into an `L²(dt)` one (`row_len` values per row).
    fn scale_to_l2(&mut self, weights: &[f64], row_len: usize) {
        for v in [&mut self.energy, &mut self.linear, &mut self.log_det] {
            for (i, x) in v.iter_mut().enumerate() {
                *x /= weights[i / row_len];
            }
        }
    }
}

fn check_degree(n: &BundleDegree, max_degree: i32) -> Result<()> {
    if n.n.abs() > max_degree {
        return Err(Error::DegreeOutOfRange { n: n.n, max: max_degree });
    }
    Ok(())
}

/// `A(φ)` for a general field, with `|n| ≤ 8`.
pub fn anomaly_general(phi: &SphereField, n: BundleDegree) -> Result<AnomalyResult> {
    anomaly_general_bounded(phi, n, DEFAULT_MAX_DEGREE)
}

pub fn anomaly_general_bounded(phi: &SphereField, n: BundleDegree, max_degree: i32) -> Result<AnomalyResult> {
    check_degree(&n, max_degree)?;
    Ok(general(phi, n, false)?.0)
}

/// `A(φ)` together with its Euclidean gradient in the node values of `φ`.
pub fn anomaly_general_with_gradient(phi: &SphereField, n: BundleDegree) -> Result<(AnomalyResult, GradientParts)> {
    check_degree(&n, DEFAULT_MAX_DEGREE)?;
    let (res, parts) = general(phi, n, true)?;
    Ok((res, parts.expect("gradient requested")))
}

/// `A(f)` for a rotation-invariant perturbation.
///
/// For `n ≥ 0` this is the one-dimensional formula
/// `−½∫ḟ² − (n+1)∫f ρ + Σᵢ log ∫e^f ρ̂ᵢ` with unit-mass densities `ρ̂ᵢ`.
/// Negative degrees go through [`anomaly_general`] on the lifted field.
pub fn anomaly_radial(f: &RadialProfile, n: BundleDegree) -> Result<AnomalyResult> {
    check_degree(&n, DEFAULT_MAX_DEGREE)?;
    Ok(radial(f, n, false)?.0)
}

/// `A(f)` and its Euclidean gradient in the node values of `f`.
pub fn anomaly_radial_with_gradient(f: &RadialProfile, n: BundleDegree) -> Result<(AnomalyResult, GradientParts)> {
    check_degree(&n, DEFAULT_MAX_DEGREE)?;
    let (res, parts) = radial(f, n, true)?;
    Ok((res, parts.expect("gradient requested")))
}

/// `L²(dt)` gradient of [`anomaly_radial`], split by summand.
///
/// The energy part is the discrete `f̈`, the log-det part is
/// `Σᵢ e^f ρ̂ᵢ / ∫e^f ρ̂ᵢ`, and the linear part is `−(n+1)ρ`.
pub fn anomaly_gradient_parts(f: &RadialProfile, n: BundleDegree) -> Result<GradientParts> {
    let (_, mut parts) = anomaly_radial_with_gradient(f, n)?;
    parts.scale_to_l2(f.grid().weights(), 1);
    Ok(parts)
}

/// `L²(dt)` functional gradient of [`anomaly_radial`].
pub fn anomaly_gradient(f: &RadialProfile, n: BundleDegree) -> Result<RadialProfile> {
    let parts = anomaly_gradient_parts(f, n)?;
    RadialProfile::new(f.grid().clone(), parts.total())
}

/// `(A_{O(n)}(φ), A_{O(−n−2)}(−φ))`, which agree by Serre duality.
pub fn anomaly_dual_check(phi: &SphereField, n: BundleDegree) -> Result<(f64, f64)> {
    if n.n < 0 {
        return Err(Error::InvalidArgument(format!("duality check needs n ≥ 0, got {}", n.n)));
    }
    let neg = phi.map(|v| -v)?;
    Ok((anomaly_general(phi, n)?.total, anomaly_general(&neg, n.serre_dual())?.total))
}

/// Orthonormal monomial sections of `O(deg)` sampled on the `t`-grid.
///
/// `coef[j * (deg+1) + a]` is `s_a (−1)^a √(w_j ρ_a(t_j))`, where `s_a` makes the
/// discrete norm one at `φ = 0`. The pointwise inner product of sections `a`
/// and `b`, weighted by `μ`, is then `coef_a coef_b e^{i(a−b)θ}` per row.
struct SectionTable {
    deg: usize,
    coef: Vec<f64>,
}

impl SectionTable {
    fn new(grid: &TGrid, deg: usize) -> Self {
        let m = deg + 1;
        let mut coef = vec![0.0; grid.len() * m];
        for a in 0..m {
            let logs: Vec<f64> =
                grid.points().iter().zip(grid.weights()).map(|(&t, w)| w.ln() + log_rho_i(t, a, deg)).collect();
            let log_norm = logsumexp(logs.iter().copied());
            let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
            for (j, l) in logs.iter().enumerate() {
                coef[j * m + a] = sign * (0.5 * (l - log_norm)).exp();
            }
        }
        Self { deg, coef }
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.coef[j * (self.deg + 1)..(j + 1) * (self.deg + 1)]
    }
}

/// Gram matrix `∫ e^{σφ} ⟨e_a, e_b⟩ μ` with its log-determinant.
struct GramBranch {
    log_det: f64,
    gradient: Option<Vec<f64>>,
}

fn gram_branch(phi: &SphereField, deg: usize, sigma: f64, label: i32, want_gradient: bool) -> Result<GramBranch> {
    let nt = phi.theta_nodes();
    if nt <= 2 * deg {
        return Err(Error::InvalidGrid(format!("{nt} θ-nodes cannot resolve sections of O({label}); need > {}", 2 * deg)));
    }
    let grid = phi.grid();
    let rows = grid.len();
    let m = deg + 1;
    let table = SectionTable::new(grid, deg);
    let shift = phi.values().iter().map(|v| sigma * v).fold(f64::NEG_INFINITY, f64::max);
    let x: Vec<f64> = phi.values().iter().map(|v| (sigma * v - shift).exp()).collect();

    let trig: Vec<(f64, f64)> =
        (0..=deg).flat_map(|d| (0..nt).map(move |k| (TAU * ((d * k) % nt) as f64 / nt as f64).sin_cos())).collect();

    // Fourier coefficients Ĉ_d(t_j) = (1/Nθ) Σ_k x_jk e^{idθ_k}, d = 0..=deg.
    let mut chat = vec![Complex64::new(0.0, 0.0); rows * m];
    for j in 0..rows {
        let xr = &x[j * nt..(j + 1) * nt];
        for d in 0..=deg {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, xv) in xr.iter().enumerate() {
                let (s, c) = trig[d * nt + k];
                re += xv * c;
                im += xv * s;
            }
            chat[j * m + d] = Complex64::new(re, im) / nt as f64;
        }
    }

    let mut g = DMatrix::<Complex64>::zeros(m, m);
    for j in 0..rows {
        let c = table.row(j);
        for a in 0..m {
            for b in 0..=a {
                let v = chat[j * m + (a - b)] * (c[a] * c[b]);
                g[(a, b)] += v;
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            g[(b, a)] = g[(a, b)].conj();
        }
        g[(a, a)].im = 0.0;
    }

    for a in 0..m {
        for j in [0, rows - 1] {
            let edge = table.row(j)[a].powi(2) * chat[j * m].re / grid.weights()[j];
            if edge > TAIL_TOLERANCE * g[(a, a)].re {
                return Err(Error::Divergence(format!(
                    "e^({}φ) against section {a} of O({label}) does not decay at t = {:+}",
                    if sigma > 0.0 { "" } else { "-" },
                    grid.points()[j]
                )));
            }
        }
    }

    let chol = match Cholesky::new(g.clone()) {
        Some(c) => c,
        None => {
            let eig = SymmetricEigen::new(g).eigenvalues;
            let hi = eig.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
            let lo = eig.iter().fold(f64::INFINITY, |acc, e| acc.min(*e));
            let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
            return Err(Error::DegenerateMetric { n: label, condition });
        }
    };
    let l = chol.l_dirty();
    let log_det = m as f64 * shift + 2.0 * (0..m).map(|a| l[(a, a)].re.ln()).sum::<f64>();

    let gradient = want_gradient.then(|| {
        let inv = chol.inverse();
        let mut grad = vec![0.0; rows * nt];
        let mut q = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..rows {
            let c = table.row(j);
            // v^H G⁻¹ v = Σ_d Q_d e^{idθ}, Q_d = Σ_{a−b=d} c_a c_b (G⁻¹)_{ba}.
            for (d, qd) in q.iter_mut().enumerate() {
                *qd = (d..m).map(|a| inv[(a - d, a)] * (c[a] * c[a - d])).sum();
            }
            for k in 0..nt {
                let mut s = q[0].re;
                for (d, qd) in q.iter().enumerate().skip(1) {
                    let (sn, cs) = trig[d * nt + k];
                    s += 2.0 * (qd.re * cs - qd.im * sn);
                }
                grad[j * nt + k] = sigma * x[j * nt + k] * s / nt as f64;
            }
        }
        grad
    });
    Ok(GramBranch { log_det, gradient })
}

fn general(phi: &SphereField, n: BundleDegree, want_gradient: bool) -> Result<(AnomalyResult, Option<GradientParts>)> {
    let energy_term = 0.5 * phi.dirichlet_energy();
    let linear_term = -(n.n as f64 + 1.0) * phi.mean();
    let mut h0 = 0.0;
    let mut h1 = 0.0;
    let mut log_det_grad = want_gradient.then(|| vec![0.0; phi.values().len()]);
    let branch = if n.n >= 0 {
        Some((n.n as usize, 1.0))
    } else if n.n <= -2 {
        Some(((-n.n - 2) as usize, -1.0))
    } else {
        None
    };
    if let Some((deg, sigma)) = branch {
        let b = gram_branch(phi, deg, sigma, n.n, want_gradient)?;
        if sigma > 0.0 {
            h0 = b.log_det;
        } else {
            h1 = b.log_det;
        }
        if let (Some(dst), Some(src)) = (log_det_grad.as_mut(), b.gradient) {
            *dst = src;
        }
    }
    let result = AnomalyResult::assemble(n.n, energy_term, linear_term, h0, h1);
    let parts = log_det_grad.map(|log_det| {
        let energy = phi.dirichlet_integral_gradient().into_iter().map(|g| -g / (8.0 * PI)).collect();
        let nt = phi.theta_nodes() as f64;
        let linear = phi
            .row_weights()
            .iter()
            .flat_map(|w| std::iter::repeat_n(-(n.n as f64 + 1.0) * w / nt, phi.theta_nodes()))
            .collect();
        GradientParts { energy, linear, log_det }
    });
    Ok((result, parts))
}

fn radial(f: &RadialProfile, n: BundleDegree, want_gradient: bool) -> Result<(AnomalyResult, Option<GradientParts>)> {
    if n.n < 0 {
        let deg = (-n.n - 2).max(0) as usize;
        let nt = (2 * deg + 4).max(8);
        let (res, parts) = general(&f.lift(nt), n, want_gradient)?;
        let fold = |v: Vec<f64>| -> Vec<f64> { v.chunks(nt).map(|c| c.iter().sum()).collect() };
        return Ok((
            res,
            parts.map(|p| GradientParts { energy: fold(p.energy), linear: fold(p.linear), log_det: fold(p.log_det) }),
        ));
    }
    let grid = f.grid();
    let deg = n.n as usize;
    let stag = grid.staggered();
    let energy_term = -0.5 * f.energy();
    let linear_term = -(deg as f64 + 1.0) * f.mean();
    let mut h0 = 0.0;
    let mut log_det = want_gradient.then(|| vec![0.0; grid.len()]);
    for i in 0..=deg {
        let base: Vec<f64> =
            grid.points().iter().zip(grid.weights()).map(|(&t, w)| w.ln() + log_rho_i(t, i, deg)).collect();
        let tilted: Vec<f64> = base.iter().zip(f.values()).map(|(b, v)| b + v).collect();
        let log_z = logsumexp(tilted.iter().copied());
        for j in [0, grid.len() - 1] {
            if (tilted[j] - grid.weights()[j].ln() - log_z).exp() > TAIL_TOLERANCE {
                return Err(Error::Divergence(format!(
                    "e^f against ρ_{i} for O({deg}) does not decay at t = {:+}",
                    grid.points()[j]
                )));
            }
        }
        h0 += log_z - logsumexp(base.iter().copied());
        if let Some(g) = log_det.as_mut() {
            for (gj, tj) in g.iter_mut().zip(&tilted) {
                *gj += (tj - log_z).exp();
            }
        }
    }
    let result = AnomalyResult::assemble(n.n, energy_term, linear_term, h0, 0.0);
    let parts = log_det.map(|log_det| {
        let energy = stag.energy_gradient(f.values()).into_iter().map(|g| -0.5 * g).collect();
        let mass = grid.rho_mass();
        let linear =
            grid.weights().iter().zip(grid.rho()).map(|(w, r)| -(deg as f64 + 1.0) * w * r / mass).collect();
        GradientParts { energy, linear, log_det }
    });
    Ok((result, parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> std::sync::Arc<TGrid> {
        GridConfig::default().t_grid().unwrap()
    }

    fn tanh_closed_form(a: f64) -> f64 {
        -a * a / 3.0 + (a.sinh() / a).ln()
    }

    fn smooth_field(seed: u64, nt: usize) -> SphereField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..6).map(|_| rng.random_range(-0.6..0.6)).collect();
        SphereField::from_fn(grid(), nt, move |t, th| {
            let x = (0.5 * t).tanh();
            let s = 1.0 / (0.5 * t).cosh();
            c[0] * x + c[1] * (x * x - 1.0 / 3.0) + s * (c[2] * th.cos() + c[3] * th.sin()) + c[4] * s * s * (2.0 * th).cos()
                + c[5] * x * s * th.sin()
        })
        .unwrap()
    }

    #[test]
    fn zero_field_gives_zero() {
        for n in -3..=3 {
            let r = anomaly_general(&SphereField::zeros(grid(), 16), BundleDegree::new(n)).unwrap();
            assert!(r.total.abs() < 1e-12, "n = {n}: {r:?}");
            assert!(r.h0_term.abs() < 1e-12 && r.h1_term.abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_tanh() {
        for a in [0.5, 1.0, 2.0] {
            let f = RadialProfile::from_fn(grid(), |t| a * (0.5 * t).tanh()).unwrap();
            let r = anomaly_radial(&f, BundleDegree::new(0)).unwrap();
            assert!((r.total - tanh_closed_form(a)).abs() < 1e-7, "a = {a}: {}", r.total);
            let g = anomaly_general(&f.lift(8), BundleDegree::new(0)).unwrap();
            assert!((g.total - r.total).abs() < 1e-10);
        }
        assert!((tanh_closed_form(1.0) + 0.171894).abs() < 1e-6);
        assert!((tanh_closed_form(2.0) + 0.738113).abs() < 1e-6);
    }

    #[test]
    fn constants_are_invisible() {
        for n in -3..=2 {
            let phi = smooth_field((n + 20) as u64, 16);
            let base = anomaly_general(&phi, BundleDegree::new(n)).unwrap().total;
            for c in [-3.0, 1.0, 7.0] {
                let shifted = anomaly_general(&phi.map(|v| v + c).unwrap(), BundleDegree::new(n)).unwrap().total;
                assert!((shifted - base).abs() < 1e-9, "n = {n}, c = {c}");
            }
        }
    }

    #[test]
    fn decomposition_is_exact() {
        let r = anomaly_general(&smooth_field(3, 16), BundleDegree::new(2)).unwrap();
        assert_eq!(r.total, r.energy_term + r.linear_term + r.h0_term + r.h1_term);
        let r = anomaly_general(&smooth_field(3, 16), BundleDegree::new(-3)).unwrap();
        assert_eq!(r.h0_term, 0.0);
        let r = anomaly_general(&smooth_field(3, 16), BundleDegree::new(1)).unwrap();
        assert_eq!(r.h1_term, 0.0);
    }

    #[test]
    fn duality_holds() {
        for n in 0..=2 {
            let (a, b) = anomaly_dual_check(&smooth_field(7 + n as u64, 16), BundleDegree::new(n)).unwrap();
            assert!((a - b).abs() < 1e-10, "n = {n}: {a} vs {b}");
        }
        let x3 = SphereField::from_fn(grid(), 8, |t, _| (0.5 * t).tanh()).unwrap();
        let (a, b) = anomaly_dual_check(&x3, BundleDegree::new(0)).unwrap();
        assert!((a + 0.171894).abs() < 1e-6 && (b + 0.171894).abs() < 1e-6);
    }

    #[test]
    fn radial_gradient_matches_finite_differences() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [-3, -2, 0, 1, 3] {
            let f = RadialProfile::from_fn(g.clone(), |t| 0.8 * (0.5 * t).tanh() + 0.3 / (0.4 * t).cosh()).unwrap();
            let v: Vec<f64> = g.points().iter().map(|&t| rng.random_range(-1.0..1.0) / (0.2 * t).cosh()).collect();
            let (_, parts) = anomaly_radial_with_gradient(&f, BundleDegree::new(n)).unwrap();
            let analytic: f64 = parts.total().iter().zip(&v).map(|(a, b)| a * b).sum();
            let eps = 1e-4;
            let shifted = |s: f64| {
                let p = RadialProfile::new(g.clone(), f.values().iter().zip(&v).map(|(a, b)| a + s * b).collect()).unwrap();
                anomaly_radial(&p, BundleDegree::new(n)).unwrap().total
            };
            let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
            assert!((fd - analytic).abs() < 1e-6 * fd.abs().max(1e-3), "n = {n}: {fd} vs {analytic}");
        }
    }

    #[test]
    fn general_gradient_matches_finite_differences() {
        let small = GridConfig { t_nodes: 96, theta_nodes: 8, ..Default::default() }.t_grid().unwrap();
        let phi = SphereField::from_fn(small, 8, |t, th| 0.5 * (0.5 * t).tanh() + 0.4 * th.cos() / (0.5 * t).cosh()).unwrap();
        for n in [1, -3] {
            let (_, parts) = anomaly_general_with_gradient(&phi, BundleDegree::new(n)).unwrap();
            let grad = parts.total();
            for idx in [100usize, 389, 401, 640] {
                let eps = 1e-5;
                let bump = |s: f64| {
                    let mut v = phi.values().to_vec();
                    v[idx] += s;
                    anomaly_general(&phi.with_values(v).unwrap(), BundleDegree::new(n)).unwrap().total
                };
                let fd = (bump(eps) - bump(-eps)) / (2.0 * eps);
                assert!((fd - grad[idx]).abs() < 1e-7 + 1e-5 * fd.abs(), "n = {n}, idx {idx}: {fd} vs {}", grad[idx]);
            }
        }
    }

    #[test]
    fn log_det_gradient_at_zero_is_rho() {
        let f = RadialProfile::zeros(grid());
        let parts = anomaly_gradient_parts(&f, BundleDegree::new(0)).unwrap();
        let g = grid();
        for (p, r) in parts.log_det.iter().zip(g.rho()) {
            assert!((p - r / g.rho_mass()).abs() < 1e-14);
        }
        let full = anomaly_gradient(&f, BundleDegree::new(0)).unwrap();
        assert!(full.values().iter().all(|v| v.abs() < 1e-14));
        let c = RadialProfile::from_fn(grid(), |_| 2.5).unwrap();
        let parts = anomaly_gradient_parts(&c, BundleDegree::new(0)).unwrap();
        let mass: f64 = parts.log_det.iter().zip(g.weights()).map(|(p, w)| p * w).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_degree_and_coarse_theta() {
        let phi = SphereField::zeros(grid(), 16);
        assert!(matches!(anomaly_general(&phi, BundleDegree::new(9)), Err(Error::DegreeOutOfRange { .. })));
        assert!(matches!(anomaly_general(&SphereField::zeros(grid(), 8), BundleDegree::new(5)), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn divergent_tail_is_reported() {
        let f = RadialProfile::from_fn(grid(), |t| 1.5 * t.abs()).unwrap();
        assert!(matches!(anomaly_radial(&f, BundleDegree::new(0)), Err(Error::Divergence(_))));
        assert!(matches!(anomaly_general(&f.lift(8), BundleDegree::new(0)), Err(Error::Divergence(_))));
    }

    #[test]
    fn onofri_bound_on_random_fields() {
        for seed in 0..8 {
            let r = anomaly_general(&smooth_field(100 + seed, 16).mean_normalized(), BundleDegree::new(0)).unwrap();
            assert!(r.total <= 1e-9, "seed {seed}: {}", r.total);
        }
    }
}
