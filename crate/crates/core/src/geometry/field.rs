use std::f64::consts::{PI, TAU};
use std::io::Read;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::TGrid;
use crate::error::{Error, Result};

/// Removal of the `μ`-mean, so that `∫ φ μ = 0`.
pub trait MeanZero: Sized {
    /// `∫ φ μ` on the grid.
    fn mean(&self) -> f64;
    /// Copy with the mean subtracted. Idempotent.
    fn mean_normalized(&self) -> Self;
}

/// A rotation-invariant perturbation `f(t)` on a uniform `t`-grid.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    grid: Arc<TGrid>,
    values: Vec<f64>,
    derivative: Vec<f64>,
}

/// JSON layout of a [`RadialProfile`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialProfileData {
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: Arc<TGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "profile has {} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite profile value at node {k}")));
        }
        let derivative = grid.node_derivative(&values);
        Ok(Self { grid, values, derivative })
    }

    pub fn from_fn(grid: Arc<TGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<TGrid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n], derivative: vec![0.0; n] }
    }

    pub fn grid(&self) -> &Arc<TGrid> {
        &self.grid
    }

    pub fn t_grid(&self) -> &[f64] {
        self.grid.points()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `ḟ` at the nodes (collocated stencil of the grid's order).
    pub fn derivative(&self) -> &[f64] {
        &self.derivative
    }

    /// `∫ ḟ(t)² dt` from the staggered stencil.
    pub fn energy(&self) -> f64 {
        self.grid.staggered().energy(&self.values)
    }

    /// Exact `∫ ḟ² dt` of the piecewise-linear interpolant of the node values.
    pub fn interpolant_energy(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / self.grid.step()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// The rotation-invariant field `φ(t, θ) = f(t)`.
    pub fn lift(&self, theta_nodes: usize) -> SphereField {
        let mut values = Vec::with_capacity(self.values.len() * theta_nodes);
        for &v in &self.values {
            values.extend(std::iter::repeat_n(v, theta_nodes));
        }
        SphereField { grid: self.grid.clone(), theta_nodes, values }
    }

    pub fn to_data(&self) -> RadialProfileData {
        RadialProfileData { t_grid: self.grid.points().to_vec(), values: self.values.clone() }
    }

    pub fn from_data(data: &RadialProfileData, stencil_order: usize) -> Result<Self> {
        let grid = Arc::new(TGrid::from_points(&data.t_grid, stencil_order)?);
        Self::new(grid, data.values.clone())
    }

    /// Reads a two-column `t,f` CSV (an optional header row is skipped).
    pub fn read_csv<R: Read>(reader: R, stencil_order: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut data = RadialProfileData { t_grid: Vec::new(), values: Vec::new() };
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::InvalidArgument("profile CSV needs two columns t,f".into()));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(t), Ok(f)) => {
                    data.t_grid.push(t);
                    data.values.push(f);
                }
                _ if data.t_grid.is_empty() => continue,
                _ => return Err(Error::InvalidArgument(format!("unparsable CSV row {:?}", rec))),
            }
        }
        Self::from_data(&data, stencil_order)
    }
}

impl MeanZero for RadialProfile {
    fn mean(&self) -> f64 {
        let g = &self.grid;
        let s: f64 = g.weights().iter().zip(g.rho()).zip(&self.values).map(|((w, r), f)| w * r * f).sum();
        s / g.rho_mass()
    }

    fn mean_normalized(&self) -> Self {
        let m = self.mean();
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v - m).collect(),
            derivative: self.derivative.clone(),
        }
    }
}

/// A general real field `φ(t, θ)` on a rectangular `(t, θ)` grid.
///
/// Values are stored row-major: `values[j * theta_nodes + k] = φ(t_j, θ_k)`
/// with `θ_k = 2πk / theta_nodes`.
#[derive(Debug, Clone)]
pub struct SphereField {
    grid: Arc<TGrid>,
    theta_nodes: usize,
    values: Vec<f64>,
}

/// JSON layout of a [`SphereField`]; `values[j][k] = φ(t_j, θ_k)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphereFieldData {
    pub t_grid: Vec<f64>,
    pub theta_nodes: usize,
    pub values: Vec<Vec<f64>>,
}

impl SphereField {
    pub fn new(grid: Arc<TGrid>, theta_nodes: usize, values: Vec<f64>) -> Result<Self> {
        if theta_nodes < 4 {
            return Err(Error::InvalidGrid(format!("{theta_nodes} θ-nodes < 4")));
        }
        if values.len() != grid.len() * theta_nodes {
            return Err(Error::InvalidArgument("field size does not match the grid".into()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite field value at index {k}")));
        }
        Ok(Self { grid, theta_nodes, values })
    }

    pub fn from_fn(grid: Arc<TGrid>, theta_nodes: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * theta_nodes);
        for &t in grid.points() {
            for k in 0..theta_nodes {
                values.push(f(t, TAU * k as f64 / theta_nodes as f64));
            }
        }
        Self::new(grid, theta_nodes, values)
    }

    pub fn zeros(grid: Arc<TGrid>, theta_nodes: usize) -> Self {
        let n = grid.len() * theta_nodes;
        Self { grid, theta_nodes, values: vec![0.0; n] }
    }

    pub fn grid(&self) -> &Arc<TGrid> {
        &self.grid
    }

    pub fn theta_nodes(&self) -> usize {
        self.theta_nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.theta_nodes..(j + 1) * self.theta_nodes]
    }

    pub fn value(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.theta_nodes + k % self.theta_nodes]
    }

    pub fn theta(&self, k: usize) -> f64 {
        TAU * k as f64 / self.theta_nodes as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.theta_nodes, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), self.theta_nodes, values)
    }

    /// Per-row mass of `μ`: `w_j ρ(t_j) / Σ w ρ`. Each θ-node of row `j` carries
    /// `row_weights()[j] / theta_nodes`.
    pub fn row_weights(&self) -> Vec<f64> {
        let g = &self.grid;
        g.weights().iter().zip(g.rho()).map(|(w, r)| w * r / g.rho_mass()).collect()
    }

    /// Quadrature weights for `∫ · μ`, summing to one.
    pub fn quad_weights(&self) -> Vec<f64> {
        let nt = self.theta_nodes as f64;
        self.row_weights().into_iter().flat_map(|w| std::iter::repeat_n(w / nt, self.theta_nodes)).collect()
    }

    /// `∫ g(φ) μ`.
    pub fn integrate_mu(&self, g: impl Fn(f64) -> f64) -> f64 {
        let nt = self.theta_nodes;
        self.row_weights()
            .iter()
            .enumerate()
            .map(|(j, w)| w * self.row(j).iter().map(|&v| g(v)).sum::<f64>() / nt as f64)
            .sum()
    }

    /// The conformally invariant Dirichlet integral `∫|∇φ|² μ`, computed in the
    /// `(t, θ)` chart as `∫∫ (2 φ_t² + ½ φ_θ²) dt dθ`.
    pub fn dirichlet_integral(&self) -> f64 {
        let g = &self.grid;
        let nt = self.theta_nodes;
        let dtheta = TAU / nt as f64;
        let mut col = vec![0.0; g.len()];
        let mut t_part = 0.0;
        for k in 0..nt {
            for (j, c) in col.iter_mut().enumerate() {
                *c = self.value(j, k);
            }
            t_part += g.staggered().energy(&col);
        }
        let theta = ThetaSpectrum::new(nt);
        let mut theta_part = 0.0;
        for (j, w) in g.weights().iter().enumerate() {
            theta_part += w * theta.row_energy(self.row(j));
        }
        2.0 * dtheta * t_part + 0.5 * theta_part
    }

    /// `∫ φ dd^c φ = -(1/4π) ∫|∇φ|² μ`.
    pub fn dirichlet_energy(&self) -> f64 {
        -self.dirichlet_integral() / (4.0 * PI)
    }

    /// Gradient of [`Self::dirichlet_integral`] with respect to the node values.
    pub fn dirichlet_integral_gradient(&self) -> Vec<f64> {
        let g = &self.grid;
        let nt = self.theta_nodes;
        let dtheta = TAU / nt as f64;
        let mut grad = vec![0.0; self.values.len()];
        let mut col = vec![0.0; g.len()];
        for k in 0..nt {
            for (j, c) in col.iter_mut().enumerate() {
                *c = self.value(j, k);
            }
            for (j, d) in g.staggered().energy_gradient(&col).into_iter().enumerate() {
                grad[j * nt + k] = 2.0 * dtheta * d;
            }
        }
        let theta = ThetaSpectrum::new(nt);
        for (j, w) in g.weights().iter().enumerate() {
            let lap = theta.laplacian(self.row(j));
            for (k, l) in lap.into_iter().enumerate() {
                grad[j * nt + k] += w * dtheta * l;
            }
        }
        grad
    }

    pub fn to_data(&self) -> SphereFieldData {
        SphereFieldData {
            t_grid: self.grid.points().to_vec(),
            theta_nodes: self.theta_nodes,
            values: (0..self.grid.len()).map(|j| self.row(j).to_vec()).collect(),
        }
    }

    pub fn from_data(data: &SphereFieldData, stencil_order: usize) -> Result<Self> {
        let grid = Arc::new(TGrid::from_points(&data.t_grid, stencil_order)?);
        if data.values.len() != grid.len() || data.values.iter().any(|r| r.len() != data.theta_nodes) {
            return Err(Error::InvalidArgument("field rows do not match t_grid × theta_nodes".into()));
        }
        Self::new(grid, data.theta_nodes, data.values.concat())
    }
}

impl MeanZero for SphereField {
    fn mean(&self) -> f64 {
        self.integrate_mu(|v| v)
    }

    fn mean_normalized(&self) -> Self {
        let m = self.mean();
        Self { grid: self.grid.clone(), theta_nodes: self.theta_nodes, values: self.values.iter().map(|v| v - m).collect() }
    }
}

/// Spectral operators along the periodic θ direction.
pub(crate) struct ThetaSpectrum {
    n: usize,
    fwd: Arc<dyn rustfft::Fft<f64>>,
    inv: Arc<dyn rustfft::Fft<f64>>,
}

impl ThetaSpectrum {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    /// Signed wavenumber of FFT bin `m`; the Nyquist bin counts as `n/2`.
    pub(crate) fn wavenumber(&self, m: usize) -> f64 {
        if m <= self.n / 2 {
            m as f64
        } else {
            m as f64 - self.n as f64
        }
    }

    pub(crate) fn forward(&self, row: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    /// Unnormalized inverse transform, real part.
    pub(crate) fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut spec);
        spec.into_iter().map(|c| c.re / self.n as f64).collect()
    }

    /// `-∂²/∂θ²` applied spectrally.
    pub(crate) fn laplacian(&self, row: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(row);
        for (m, c) in spec.iter_mut().enumerate() {
            let k = self.wavenumber(m);
            *c *= k * k;
        }
        self.inverse(spec)
    }

    /// `∫₀^{2π} φ_θ² dθ` for one row (Parseval).
    pub(crate) fn row_energy(&self, row: &[f64]) -> f64 {
        let spec = self.forward(row);
        let s: f64 = spec.iter().enumerate().map(|(m, c)| self.wavenumber(m).powi(2) * c.norm_sqr()).sum();
        TAU * s / (self.n * self.n) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridConfig;

    fn grid() -> Arc<TGrid> {
        GridConfig::default().t_grid().unwrap()
    }

    #[test]
    fn quad_weights_have_unit_mass() {
        let f = SphereField::zeros(grid(), 16);
        let s: f64 = f.quad_weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(f.quad_weights().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn constant_field_has_zero_energy() {
        let f = SphereField::from_fn(grid(), 16, |_, _| 3.0).unwrap();
        assert!(f.dirichlet_energy().abs() < 1e-14);
        let p = RadialProfile::from_fn(grid(), |_| 7.0).unwrap();
        assert!(p.mean_normalized().values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn x3_energy_matches_closed_form() {
        // φ = a·tanh(t/2) is a times the height function x₃; ∫|∇φ|²μ = 8πa²/3.
        let a = 1.3;
        let f = SphereField::from_fn(grid(), 16, |t, _| a * (0.5 * t).tanh()).unwrap();
        assert!((f.dirichlet_integral() - 8.0 * PI * a * a / 3.0).abs() < 1e-7);
        assert!((f.dirichlet_energy() + 2.0 * a * a / 3.0).abs() < 1e-8);
    }

    #[test]
    fn odd_profile_is_already_mean_zero() {
        let p = RadialProfile::from_fn(grid(), |t| 2.0 * (0.5 * t).tanh()).unwrap();
        assert!(p.mean().abs() < 1e-14);
        let q = p.mean_normalized();
        for (a, b) in p.values().iter().zip(q.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn theta_dependent_energy() {
        // φ = cos θ · sech(t/2)·s: compare the discrete integral with a brute-force
        // evaluation of ∫∫ (2φ_t² + ½φ_θ²) dt dθ using analytic derivatives.
        let g = grid();
        let f = SphereField::from_fn(g.clone(), 32, |t, th| th.cos() / (0.5 * t).cosh()).unwrap();
        let mut exact = 0.0;
        for (j, &t) in g.points().iter().enumerate() {
            let s = 1.0 / (0.5 * t).cosh();
            let ds = -0.5 * s * (0.5 * t).tanh();
            // ∫cos² = ∫sin² = π
            exact += g.weights()[j] * (2.0 * ds * ds * PI + 0.5 * s * s * PI);
        }
        assert!((f.dirichlet_integral() - exact).abs() < 1e-7 * exact);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = GridConfig { t_nodes: 64, theta_nodes: 8, ..Default::default() }.t_grid().unwrap();
        let f = SphereField::from_fn(g, 8, |t, th| (0.3 * t).sin() / (0.2 * t).cosh() + 0.4 * (2.0 * th).sin()).unwrap();
        let grad = f.dirichlet_integral_gradient();
        for idx in [5usize, 77, 200, 511] {
            let eps = 1e-5;
            let mut up = f.values().to_vec();
            up[idx] += eps;
            let mut dn = f.values().to_vec();
            dn[idx] -= eps;
            let fd = (f.with_values(up).unwrap().dirichlet_integral() - f.with_values(dn).unwrap().dirichlet_integral())
                / (2.0 * eps);
            assert!((fd - grad[idx]).abs() < 1e-6 * (1.0 + fd.abs()), "idx {idx}: {fd} vs {}", grad[idx]);
        }
    }

    #[test]
    fn json_round_trip_preserves_layout() {
        let f = SphereField::from_fn(grid(), 8, |t, th| t * 0.01 + th.sin()).unwrap();
        let back = SphereField::from_data(&f.to_data(), 6).unwrap();
        assert_eq!(back.values(), f.values());
        let csv = "t,f\n".to_string()
            + &grid().points().iter().map(|t| format!("{t},{}\n", t.sin())).collect::<String>();
        let p = RadialProfile::read_csv(csv.as_bytes(), 6).unwrap();
        assert_eq!(p.values().len(), 512);
    }
}
