//! Spectral oracle on the circle of length one.
//!
//! For a metric `h(1,1) = e^φ` on the trivial bundle, `Δ_φ s = −e^{−φ}(e^φ s′)′`.
//! Writing `p = e^φ s′`, the eigenvalue equation becomes the first-order system
//! `s′ = e^{−φ} p`, `p′ = −λ e^φ s`, and `F(λ) = 2 − tr M(λ)` of its monodromy
//! `M` vanishes exactly on the spectrum. The regularized determinant is read
//! off from `F′(0)`, normalized once against the flat metric where
//! `det′ Δ₀ = 1`.

use std::io::Read;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ode::{integrate, OdeOptions};
use crate::numerics::special::logsumexp;
use crate::numerics::spline::PeriodicSpline;

/// Samples of `φ` at `x_k = k/n` on the circle `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleMetric {
    samples: Vec<f64>,
}

impl CircleMetric {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        let n = samples.len();
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("circle grid size {n} is not a power of two ≥ 64")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite circle sample".into()));
        }
        Ok(Self { samples })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|k| f(k as f64 / n as f64)).collect())
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self { samples: self.samples.iter().map(|v| v + c).collect() }
    }

    /// Reads `φ` samples from CSV: one column `phi`, or two columns `x,phi`.
    /// A non-numeric first row is treated as a header.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_reader(r);
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = match rec.len() {
                1 => &rec[0],
                2 => &rec[1],
                k => return Err(Error::InvalidArgument(format!("circle CSV rows need 1 or 2 columns, got {k}"))),
            };
            match field.parse::<f64>() {
                Ok(v) => samples.push(v),
                Err(_) if samples.is_empty() => continue,
                Err(_) => return Err(Error::InvalidArgument(format!("unparsable circle sample `{field}`"))),
            }
        }
        Self::new(samples)
    }
}

/// `log ∫ e^φ dx + log ∫ e^{−φ} dx`, nonnegative by Cauchy–Schwarz.
pub fn circle_anomaly_formula(phi: &CircleMetric) -> f64 {
    let n = (phi.len() as f64).ln();
    let plus = logsumexp(phi.samples.iter().copied()) - n;
    let minus = logsumexp(phi.samples.iter().map(|v| -v)) - n;
    // Cauchy–Schwarz holds for the discrete mean too, so only round-off can go below zero.
    plus + minus
}

/// Accuracy settings of the monodromy solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonodromyConfig {
    pub rtol: f64,
    /// Largest spectral parameter used in the extrapolation to `λ = 0`.
    pub lambda0: f64,
    /// Number of halvings of `λ₀`.
    pub levels: usize,
}

impl Default for MonodromyConfig {
    fn default() -> Self {
        Self { rtol: 1e-10, lambda0: 0.5, levels: 7 }
    }
}

struct Monodromy {
    spline: PeriodicSpline,
    opts: OdeOptions,
}

impl Monodromy {
    fn new(phi: &CircleMetric, rtol: f64) -> Self {
        Self { spline: PeriodicSpline::new(&phi.samples), opts: OdeOptions { rtol, ..Default::default() } }
    }

    /// `F(λ) = 2 − tr M(λ)`, integrated as deviations from the identity so that
    /// small `λ` carries no cancellation.
    fn characteristic(&self, lambda: f64) -> Result<f64> {
        let sp = &self.spline;
        let opts = OdeOptions { atol: self.opts.atol * lambda.abs().clamp(1e-6, 1.0), ..self.opts };
        let rhs = |x: f64, y: &[f64; 4]| {
            let e = sp.eval(x).exp();
            // column 1: s = 1 + y0, p = y1; column 2: s = y2, p = 1 + y3
            [y[1] / e, -lambda * e * (1.0 + y[0]), (1.0 + y[3]) / e, -lambda * e * y[2]]
        };
        let y = integrate(rhs, 0.0, 1.0, [0.0; 4], &opts)?;
        Ok(-(y[0] + y[3]))
    }

    /// `F′(0)` by Neville extrapolation of `F(λ)/λ` on `λ₀ 2^{−k}`.
    fn slope_at_zero(&self, cfg: &MonodromyConfig) -> Result<(f64, f64)> {
        if cfg.levels < 2 || !(cfg.lambda0 > 0.0) {
            return Err(Error::InvalidArgument("extrapolation needs λ₀ > 0 and at least two levels".into()));
        }
        let lambdas: Vec<f64> = (0..cfg.levels).map(|k| cfg.lambda0 * 0.5f64.powi(k as i32)).collect();
        let ratios: Vec<f64> = lambdas
            .par_iter()
            .map(|&l| self.characteristic(l).map(|f| f / l))
            .collect::<Result<_>>()?;
        // Neville tableau evaluated at λ = 0.
        let mut p = ratios.clone();
        let mut prev_best = p[0];
        let mut best = p[0];
        for m in 1..p.len() {
            for i in (m..p.len()).rev() {
                let (li, lim) = (lambdas[i], lambdas[i - m]);
                p[i] = (li * p[i - 1] - lim * p[i]) / (li - lim);
            }
            prev_best = best;
            best = p[p.len() - 1];
        }
        Ok((best, (best - prev_best).abs()))
    }
}

/// Result of the monodromy determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleDet {
    pub det: f64,
    pub log_det: f64,
    /// Estimated error of the extrapolated `F′(0)`, relative.
    pub extrapolation_error: f64,
}

fn calibration() -> Result<f64> {
    static CAL: OnceLock<f64> = OnceLock::new();
    if let Some(c) = CAL.get() {
        return Ok(*c);
    }
    let flat = CircleMetric::new(vec![0.0; 64])?;
    let (slope, _) = Monodromy::new(&flat, 1e-12).slope_at_zero(&MonodromyConfig::default())?;
    // det′ Δ₀ = 1 exactly (ζ′(0) = 2 log 2π + 4ζ_R′(0) = 0).
    Ok(*CAL.get_or_init(|| 1.0 / slope))
}

/// `det′ Δ_φ` by the monodromy method with default accuracy.
pub fn circle_det(phi: &CircleMetric) -> Result<CircleDet> {
    circle_det_with(phi, &MonodromyConfig::default())
}

pub fn circle_det_with(phi: &CircleMetric, cfg: &MonodromyConfig) -> Result<CircleDet> {
    let (slope, err) = Monodromy::new(phi, cfg.rtol).slope_at_zero(cfg)?;
    let rel = err / slope.abs();
    if !(slope > 0.0) || rel > 1e-6 {
        return Err(Error::Accuracy { requested: 1e-6, achieved: rel, reason: "extrapolation of F(λ)/λ to λ = 0".into() });
    }
    let det = calibration()? * slope;
    Ok(CircleDet { det, log_det: det.ln(), extrapolation_error: rel })
}

/// `2 − tr M(λ)` for the given metric; at `φ = 0` this is `4 sin²(√λ/2)`.
pub fn characteristic_function(phi: &CircleMetric, lambda: f64) -> Result<f64> {
    Monodromy::new(phi, 1e-10).characteristic(lambda)
}

/// Lowest `count` eigenvalues of the finite-volume discretization of `Δ_φ`
/// in the `e^φ`-weighted inner product.
pub fn circle_eig_check(phi: &CircleMetric, count: usize) -> Result<Vec<f64>> {
    let n = phi.len();
    if count == 0 || count > n / 4 {
        return Err(Error::InvalidArgument(format!("count must be in 1..={}", n / 4)));
    }
    let h = 1.0 / n as f64;
    let phi = &phi.samples;
    let c = phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = phi.iter().map(|v| ((v - c).exp() * h).sqrt()).collect();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let j = (i + 1) % n;
        let face = (0.5 * (phi[i] + phi[j]) - c).exp() / h;
        k[(i, i)] += face;
        k[(j, j)] += face;
        k[(i, j)] -= face;
        k[(j, i)] -= face;
    }
    let sym = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / (w[i] * w[j]));
    let eig = SymmetricEigen::try_new(sym, 1e-14, 10_000).ok_or_else(|| Error::Eigen("symmetric QR did not converge".into()))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals.truncate(count);
    Ok(vals)
}

/// Eigenvalues below `lambda_max` from sign changes and tangencies of `F`,
/// including the zero mode. Tangential (double) roots are reported twice.
pub fn monodromy_eigenvalues(phi: &CircleMetric, lambda_max: f64) -> Result<Vec<f64>> {
    let mono = Monodromy::new(phi, 1e-11);
    let root_max = lambda_max.sqrt();
    let steps = ((root_max / (2.0 * std::f64::consts::PI)).ceil() as usize * 64).max(64);
    let ks: Vec<f64> = (1..=steps).map(|i| root_max * i as f64 / steps as f64).collect();
    let fs: Vec<f64> = ks.par_iter().map(|k| mono.characteristic(k * k)).collect::<Result<_>>()?;
    let f = |k: f64| mono.characteristic(k * k);
    let bisect = |mut lo: f64, mut hi: f64| -> Result<f64> {
        let flo = f(lo)?;
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if (f(mid)? > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let scale = fs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut roots = vec![0.0];
    for i in 1..fs.len() {
        if fs[i - 1] * fs[i] < 0.0 {
            let k = bisect(ks[i - 1], ks[i])?;
            roots.push(k * k);
        } else if i + 1 < fs.len() && fs[i] > 0.0 && fs[i] <= fs[i - 1] && fs[i] <= fs[i + 1] {
            // Local minimum of a positive F: golden-section search for a tangency.
            let (mut a, mut b) = (ks[i - 1], ks[i + 1]);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            while b - a > 1e-10 * b {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if f(c)? < f(d)? {
                    b = d;
                } else {
                    a = c;
                }
            }
            let k = 0.5 * (a + b);
            let fk = f(k)?;
            if fk < 0.0 {
                // A narrow gap between two scan points.
                let (r1, r2) = (bisect(ks[i - 1], k)?, bisect(k, ks[i + 1])?);
                roots.extend([r1 * r1, r2 * r2]);
            } else if fk < 1e-7 * scale {
                roots.extend([k * k, k * k]);
            }
        }
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn bessel_i0(a: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= (a / 2.0).powi(2) / (k * k) as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn grid_constraints() {
        assert!(CircleMetric::new(vec![0.0; 48]).is_err());
        assert!(CircleMetric::new(vec![0.0; 96]).is_err());
        assert!(CircleMetric::new(vec![0.0; 64]).is_ok());
    }

    #[test]
    fn flat_characteristic_function() {
        let flat = CircleMetric::new(vec![0.0; 64]).unwrap();
        for lambda in [0.01, 0.7, 5.0, 39.0, 77.7, 99.0] {
            let f = characteristic_function(&flat, lambda).unwrap();
            let exact = 4.0 * (0.5 * f64::sqrt(lambda)).sin().powi(2);
            assert!((f - exact).abs() < 1e-8, "λ = {lambda}: {f} vs {exact}");
        }
    }

    #[test]
    fn flat_determinant_is_one() {
        let flat = CircleMetric::new(vec![0.0; 64]).unwrap();
        let d = circle_det(&flat).unwrap();
        assert!((d.det - 1.0).abs() < 1e-10);
        // Calibration is a normalization, not a fit: the raw slope already equals one.
        assert!((calibration().unwrap() - 1.0).abs() < 1e-8);
        let shifted = circle_det(&flat.shifted(2.5)).unwrap();
        assert!((shifted.det - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cosine_metric_matches_bessel() {
        for a in [0.3, 1.0, 2.0] {
            let phi = CircleMetric::from_fn(256, |x| a * (TAU * x).cos()).unwrap();
            let target = 2.0 * bessel_i0(a).ln();
            assert!((circle_anomaly_formula(&phi) - target).abs() < 1e-12);
            let d = circle_det(&phi).unwrap();
            assert!((d.log_det - target).abs() < 1e-6, "a = {a}: {} vs {target}", d.log_det);
        }
        assert!((2.0 * bessel_i0(1.0).ln() - 0.471829).abs() < 1e-6);
    }

    #[test]
    fn anomaly_formula_properties() {
        assert!(circle_anomaly_formula(&CircleMetric::new(vec![0.0; 64]).unwrap()).abs() < 1e-15);
        let c = CircleMetric::new(vec![3.7; 64]).unwrap();
        assert!(circle_anomaly_formula(&c).abs() < 1e-12);
        let phi = CircleMetric::from_fn(64, |x| (TAU * x).sin() + 0.2 * (3.0 * TAU * x).cos()).unwrap();
        assert!(circle_anomaly_formula(&phi) > 0.0);
    }

    #[test]
    fn flat_spectrum() {
        let flat = CircleMetric::new(vec![0.0; 256]).unwrap();
        let ev = circle_eig_check(&flat, 5).unwrap();
        let exact = [0.0, 4.0 * PI * PI, 4.0 * PI * PI, 16.0 * PI * PI, 16.0 * PI * PI];
        assert!(ev[0].abs() < 1e-8);
        for (a, b) in ev.iter().zip(exact).skip(1) {
            assert!((a - b).abs() < 1e-3 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn eigenvalues_are_shift_invariant_and_match_monodromy() {
        let phi = CircleMetric::from_fn(512, |x| 0.5 * (TAU * x).cos() + 0.3 * (2.0 * TAU * x).sin()).unwrap();
        let ev = circle_eig_check(&phi, 6).unwrap();
        let ev_shift = circle_eig_check(&phi.shifted(4.0), 6).unwrap();
        assert!(ev[0].abs() < 1e-8);
        for (a, b) in ev.iter().zip(&ev_shift) {
            assert!((a - b).abs() < 1e-8 * a.abs().max(1.0));
        }
        let mono = monodromy_eigenvalues(&phi, ev[5] * 1.05).unwrap();
        assert!(mono.len() >= 6, "{mono:?}");
        for (a, b) in ev.iter().zip(&mono).skip(1) {
            assert!((a - b).abs() < 1e-3 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn flat_monodromy_eigenvalues_are_double() {
        let flat = CircleMetric::new(vec![0.0; 64]).unwrap();
        let roots = monodromy_eigenvalues(&flat, 200.0).unwrap();
        assert_eq!(roots.len(), 5, "{roots:?}");
        assert!((roots[1] - 4.0 * PI * PI).abs() < 1e-6 && (roots[4] - 16.0 * PI * PI).abs() < 1e-6);
    }

    #[test]
    fn csv_input() {
        let text: String = "x,phi\n".to_string() + &(0..64).map(|k| format!("{},{}\n", k as f64 / 64.0, k % 3)).collect::<String>();
        let phi = CircleMetric::read_csv(text.as_bytes()).unwrap();
        assert_eq!(phi.len(), 64);
        assert_eq!(phi.samples()[4], 1.0);
    }
}
