//! Quantitative inequality checks: the half-line exponential-integral lemma
//! with its explicit constants, the Hölder-type bound for radial profiles,
//! and the Moser–Trudinger / Fontana functionals on the round sphere.

use std::f64::consts::PI;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MeanZero, RadialProfile, SphereField};
use crate::numerics::special::{log_exprel, logsumexp};
use crate::rearrangement::{monotone_envelope, HalfLineFunction};

/// Density of an integrand at the window edge, relative to the integral, above which it is rejected.
const TAIL_TOLERANCE: f64 = 1e-6;

/// `λ_k = 1 + 1/(5k²)`, `μ_k = 1 − 1/(4k)` and `r_k = k + 1 − λ_k k − μ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Constants {
    pub k: u64,
    pub lambda_k: f64,
    pub mu_k: f64,
    pub r_k: f64,
}

impl Lemma3Constants {
    pub fn new(k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("constants are defined for k ≥ 1".into()));
        }
        let kf = k as f64;
        Ok(Self { k, lambda_k: 1.0 + 1.0 / (5.0 * kf * kf), mu_k: 1.0 - 1.0 / (4.0 * kf), r_k: 1.0 / (20.0 * kf) })
    }

    /// `(λ_k, μ_k, r_k)` in exact arithmetic, with `r_k` computed from its definition.
    pub fn exact(k: u64) -> Result<(Ratio<i128>, Ratio<i128>, Ratio<i128>)> {
        if k == 0 {
            return Err(Error::InvalidArgument("constants are defined for k ≥ 1".into()));
        }
        let k = k as i128;
        let one = Ratio::from_integer(1);
        let kk = Ratio::from_integer(k);
        let lambda = one + Ratio::new(1, 5 * k * k);
        let mu = one - Ratio::new(1, 4 * k);
        let r = kk + one - lambda * kk - mu;
        Ok((lambda, mu, r))
    }

    /// `λ_k k + μ_k = k + 1 − 1/(20k)`.
    pub fn level(&self) -> f64 {
        let kf = self.k as f64;
        kf + 1.0 - 1.0 / (20.0 * kf)
    }
}

/// Summary of the lemma's quantities for one admissible `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Report {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "X")]
    pub x: f64,
    pub u0: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub x_points: Vec<f64>,
    /// Coefficient from the proof for `min(N, M)` (`3/8` when `N = 0`).
    pub coefficient: f64,
    /// `½ − 1/(70M²)`.
    pub bound: f64,
    /// `X − (M+1)|u(0)| − bound · I`; the lemma says this is bounded above.
    pub excess: f64,
    /// `C − excess` for the supplied calibration constant `C`.
    pub slack: Option<f64>,
}

fn check_admissible(u: &HalfLineFunction) -> Result<Vec<f64>> {
    let slopes = u.cell_slopes().values().to_vec();
    let scale = slopes.iter().fold(1.0f64, |m, s| m.max(s.abs()));
    if let Some(k) = slopes.windows(2).position(|w| w[1] > w[0] + 1e-12 * scale) {
        return Err(Error::InvalidArgument(format!(
            "u̇ increases at s = {}; the lemma needs u̇ nonincreasing",
            u.s_grid()[k + 1]
        )));
    }
    Ok(slopes)
}

/// `X = Σ_{j=0}^{M} log ∫₀^∞ exp(u(t) − (j+1)t) dt`.
///
/// `u` is the linear interpolant of its samples, integrated exactly cell by
/// cell, and continued past the window with its last slope.
pub fn lemma3_lhs(u: &HalfLineFunction, m: usize) -> Result<f64> {
    let slopes = check_admissible(u)?;
    let s = u.s_grid();
    let v = u.values();
    let tail_slope = *slopes.last().unwrap();
    let mut x = 0.0;
    for j in 0..=m {
        let rate = (j + 1) as f64;
        if tail_slope >= rate {
            return Err(Error::Divergence(format!(
                "summand j = {j}: u̇(∞) = {tail_slope} ≥ {rate}, the integral diverges"
            )));
        }
        let cells = s.windows(2).zip(v.windows(2)).map(|(sw, vw)| {
            let a = vw[0] - rate * sw[0];
            let b = vw[1] - rate * sw[1];
            (sw[1] - sw[0]).ln() + a + log_exprel(b - a)
        });
        let end = u.end();
        let tail = v[v.len() - 1] - rate * end - (rate - tail_slope).ln();
        x += logsumexp(cells.chain(std::iter::once(tail)));
    }
    Ok(x)
}

/// Smallest `N ≥ 0` with `u̇(0) ≤ λ_{N+1}(N+1) + μ_{N+1}`.
pub fn lemma3_threshold(udot0: f64) -> usize {
    let level = |k: f64| k + 1.0 - 1.0 / (20.0 * k);
    if !(udot0 > level(1.0)) {
        return 0;
    }
    // level(k) < k + 1, so every k ≤ ⌊u̇(0)⌋ − 1 fails the inequality.
    let mut k = (udot0.floor() - 1.0).max(1.0);
    while udot0 > level(k) {
        k += 1.0;
    }
    k as usize - 1
}

/// Roots `u̇(x_j) = λ_N j + μ_N`, `j = 0..N`, by bisection on a continuous nonincreasing `u̇`.
pub fn crossing_points_fn(udot: impl Fn(f64) -> f64, window: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("crossing points need N ≥ 1".into()));
    }
    let c = Lemma3Constants::new(n as u64)?;
    (0..n)
        .map(|j| {
            let level = c.lambda_k * j as f64 + c.mu_k;
            if !(udot(0.0) > level) || udot(window) > level {
                return Err(Error::WindowTooSmall { level, window });
            }
            let (mut lo, mut hi) = (0.0, window);
            while hi - lo > 1e-13 * hi.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if udot(mid) > level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        })
        .collect()
}

/// [`crossing_points_fn`] for sampled `u`, with `u̇` interpolated linearly
/// between cell midpoints (which keeps it continuous and nonincreasing).
pub fn crossing_points(u: &HalfLineFunction, n: usize) -> Result<Vec<f64>> {
    let slopes = check_admissible(u)?;
    let mids: Vec<f64> = u.s_grid().windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let udot = |t: f64| {
        if t <= mids[0] {
            return slopes[0];
        }
        if t >= *mids.last().unwrap() {
            return *slopes.last().unwrap();
        }
        let k = mids.partition_point(|&m| m <= t) - 1;
        let w = (t - mids[k]) / (mids[k + 1] - mids[k]);
        slopes[k] + w * (slopes[k + 1] - slopes[k])
    };
    crossing_points_fn(udot, u.end(), n)
}

/// `A(λ_N, μ_N) = 1/(2λ) + (1 − μ/λ)² / (4(μ − μ²/(2λ)))`.
pub fn lemma3_coefficient(n: usize) -> Result<f64> {
    Ok(0.5 + coefficient_excess(n)?)
}

/// `A(λ_N, μ_N) − ½`, evaluated without cancellation.
fn coefficient_excess(n: usize) -> Result<f64> {
    let c = Lemma3Constants::new(n as u64)?;
    let nf = n as f64;
    let eps = 1.0 / (5.0 * nf * nf);
    let delta = 1.0 / (4.0 * nf);
    let (lambda, mu) = (c.lambda_k, c.mu_k);
    let q = (eps + delta) / lambda;
    Ok(-eps / (2.0 * lambda) + q * q / (4.0 * (mu - mu * mu / (2.0 * lambda))))
}

/// `(½ − 1/(70N²)) − A(λ_N, μ_N)`; nonnegative is the claimed inequality.
pub fn lemma3_coefficient_margin(n: usize) -> Result<f64> {
    let nf = n as f64;
    Ok(-1.0 / (70.0 * nf * nf) - coefficient_excess(n)?)
}

/// One row of the coefficient sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub coefficient: f64,
    pub bound: f64,
    pub margin: f64,
}

pub fn coefficient_sweep(max_n: usize) -> Result<Vec<CoefficientRow>> {
    (1..=max_n)
        .into_par_iter()
        .map(|n| {
            let nf = n as f64;
            Ok(CoefficientRow {
                n,
                coefficient: lemma3_coefficient(n)?,
                bound: 0.5 - 1.0 / (70.0 * nf * nf),
                margin: lemma3_coefficient_margin(n)?,
            })
        })
        .collect()
}

/// `½ − 1/(70M²)`.
pub fn lemma3_bound(m: usize) -> f64 {
    0.5 - 1.0 / (70.0 * (m * m) as f64)
}

/// `X − (M+1)|u(0)| − (½ − 1/(70M²)) ∫u̇²`.
pub fn lemma3_excess(u: &HalfLineFunction, m: usize) -> Result<f64> {
    let x = lemma3_lhs(u, m)?;
    let i = u.cell_slopes().integral_pow(2);
    Ok(x - (m as f64 + 1.0) * u.values()[0].abs() - lemma3_bound(m) * i)
}

pub fn lemma3_report(u: &HalfLineFunction, m: usize, calibration: Option<f64>) -> Result<Lemma3Report> {
    if m == 0 {
        return Err(Error::InvalidArgument("M must be ≥ 1".into()));
    }
    let slopes = check_admissible(u)?;
    let x = lemma3_lhs(u, m)?;
    let i = u.cell_slopes().integral_pow(2);
    let n = lemma3_threshold(slopes[0]);
    let n_eff = n.min(m);
    let (x_points, coefficient) =
        if n_eff == 0 { (Vec::new(), 0.375) } else { (crossing_points(u, n_eff)?, lemma3_coefficient(n_eff)?) };
    let bound = lemma3_bound(m);
    let excess = x - (m as f64 + 1.0) * u.values()[0].abs() - bound * i;
    Ok(Lemma3Report {
        m,
        x,
        u0: u.values()[0],
        i,
        n,
        x_points,
        coefficient,
        bound,
        excess,
        slack: calibration.map(|c| c - excess),
    })
}

/// Admissible test functions for the lemma: monotone envelopes of profiles whose
/// derivative is a positive sum of Gaussian bumps, at unit amplitude.
///
/// The random parameters depend only on `seed`, so the same family can be
/// sampled on different grids.
pub fn lemma3_probe_shapes(count: usize, seed: u64, window: f64, nodes: usize) -> Result<Vec<HalfLineFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = HalfLineFunction::uniform_grid(window, nodes);
    (0..count)
        .map(|_| {
            let bumps = rng.random_range(1..=3);
            let params: Vec<(f64, f64, f64)> = (0..bumps)
                .map(|_| (rng.random_range(0.2..2.0), rng.random_range(0.0..6.0), rng.random_range(0.3..2.0)))
                .collect();
            let f0 = rng.random_range(-0.5..0.5);
            let fdot =
                |t: f64| params.iter().map(|(c, m, w)| c * (-(t - m).powi(2) / (2.0 * w * w)).exp()).sum::<f64>();
            let mut values = Vec::with_capacity(nodes);
            values.push(f0);
            for k in 1..nodes {
                let mid = 0.5 * (grid[k - 1] + grid[k]);
                values.push(values[k - 1] + (grid[k] - grid[k - 1]) * fdot(mid));
            }
            Ok(monotone_envelope(&HalfLineFunction::new(grid.clone(), values)?)?.u)
        })
        .collect()
}

/// `sup` of [`lemma3_excess`] over `shapes` scaled by every amplitude.
pub fn lemma3_calibration(shapes: &[HalfLineFunction], m: usize, amplitudes: &[f64]) -> Result<f64> {
    let per_shape: Result<Vec<f64>> = shapes
        .par_iter()
        .map(|u| {
            amplitudes.iter().try_fold(f64::NEG_INFINITY, |best, &a| {
                let scaled = HalfLineFunction::new(u.s_grid().to_vec(), u.values().iter().map(|v| a * v).collect())?;
                Ok(best.max(lemma3_excess(&scaled, m)?))
            })
        })
        .collect();
    Ok(per_shape?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `max |f(t) − f(s)| / (A √|t − s|)` over grid pairs, with `A² = ∫ḟ²` of the
/// linear interpolant (for which Cauchy–Schwarz makes the ratio at most one).
pub fn holder_bound_check(f: &RadialProfile) -> Result<f64> {
    let t = f.t_grid();
    let v = f.values();
    let a2: f64 = t.windows(2).zip(v.windows(2)).map(|(tw, vw)| (vw[1] - vw[0]).powi(2) / (tw[1] - tw[0])).sum();
    let a = a2.sqrt();
    if a == 0.0 {
        if v.iter().any(|x| *x != v[0]) {
            return Err(Error::Inconsistent("zero energy for a nonconstant profile".into()));
        }
        return Ok(0.0);
    }
    let worst = (0..t.len())
        .into_par_iter()
        .map(|i| {
            (i + 1..t.len()).map(|j| (v[j] - v[i]).abs() / (t[j] - t[i]).sqrt()).fold(0.0f64, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst / a)
}

/// `log ∫ e^{h(g)} μ` with a tail test on the outermost rows.
fn log_mu_integral(g: &SphereField, h: impl Fn(f64) -> f64) -> Result<f64> {
    let grid = g.grid();
    let nt = g.theta_nodes();
    let rows = g.row_weights();
    let row_logs: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(j, w)| w.ln() - (nt as f64).ln() + logsumexp(g.row(j).iter().map(|&x| h(x))))
        .collect();
    let total = logsumexp(row_logs.iter().copied());
    if !total.is_finite() {
        return Err(Error::Divergence("exponential integral overflowed".into()));
    }
    for j in [0, grid.len() - 1] {
        let edge = (row_logs[j] - grid.weights()[j].ln() - total).exp();
        if edge > TAIL_TOLERANCE {
            return Err(Error::Divergence(format!(
                "exponential integrand carries relative density {edge:e} at t = {:+}",
                grid.points()[j]
            )));
        }
    }
    Ok(total)
}

/// `log ∫ e^g μ − (1/16π) ∫|∇g|² μ` for the mean-normalized `g`; at most zero on the round sphere.
pub fn mt_deficit(g: &SphereField) -> Result<f64> {
    let g = g.mean_normalized();
    Ok(log_mu_integral(&g, |x| x)? - g.dirichlet_integral() / (16.0 * PI))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FontanaValue {
    /// `log ∫ exp(4πf²) μ` after normalization.
    pub value: f64,
    /// Mean subtracted from the input.
    pub mean_removed: f64,
    /// Factor applied to bring the energy down to one (1 if already ≤ 1).
    pub scale: f64,
    /// Energy `∫|∇f|²μ` of the input after mean removal.
    pub input_energy: f64,
}

/// `log ∫ exp(4πf²) μ` for mean-zero `f` with `∫|∇f|²μ ≤ 1`, normalizing as needed.
pub fn fontana_functional(f: &SphereField) -> Result<FontanaValue> {
    let mean_removed = f.mean();
    let f = f.mean_normalized();
    let input_energy = f.dirichlet_integral();
    let scale = if input_energy > 1.0 { 1.0 / input_energy.sqrt() } else { 1.0 };
    let value = log_mu_integral(&f, |x| 4.0 * PI * (scale * x).powi(2))?;
    Ok(FontanaValue { value, mean_removed, scale, input_energy })
}
