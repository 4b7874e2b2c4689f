//! Projected gradient ascent for `sup A(φ)` under an energy budget.
//!
//! Iterates live on the mean-zero slice `∫φμ = 0`, which loses nothing since
//! `A(φ + c) = A(φ)`. Steps follow the Sobolev gradient: the Euclidean
//! gradient is preconditioned by `H = K + κW`, where `K` is the discrete
//! Dirichlet form and `W` the quadrature mass. In two dimensions `H` is
//! block-diagonal over θ-modes with blocks `K + (m²/4 + κ)W`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anomaly::{anomaly_general_with_gradient, anomaly_radial_with_gradient, DEFAULT_MAX_DEGREE};
use crate::error::{Error, Result};
use crate::geometry::{BundleDegree, GridConfig, MeanZero, RadialProfile, SphereField, TGrid, ThetaSpectrum};
use crate::numerics::banded::{BandedCholesky, SymBanded};

/// Smallest preconditioned squared gradient norm still worth a line search.
const GRADIENT_FLOOR: f64 = 1e-30;

/// Armijo backtracking parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSearch {
    /// Sufficient-increase constant `c₁`.
    pub armijo: f64,
    /// Step contraction on rejection.
    pub contraction: f64,
    /// Step expansion after an accepted step.
    pub expansion: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self { armijo: 1e-4, contraction: 0.5, expansion: 2.0, initial_step: 1.0, max_step: 64.0, max_backtracks: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub n: i32,
    /// Restrict to rotation-invariant perturbations `f(t)`.
    pub radial: bool,
    pub max_iters: usize,
    pub line_search: LineSearch,
    /// Iterates with energy `∫ḟ²` (or `∫|∇φ|²μ / 4π`) above the cap end the trace.
    pub energy_cap: f64,
    pub seed: u64,
    pub restarts: usize,
    /// Amplitude of the random initial profiles.
    pub init_amplitude: f64,
    /// Mass shift `κ` of the preconditioner.
    pub preconditioner_shift: f64,
    /// Relative gain below which a step counts as flat.
    pub plateau_tol: f64,
    /// Consecutive flat steps that end the trace as plateaued.
    pub plateau_patience: usize,
    /// Constant added after every projection; the objective ignores it.
    pub projection_shift: f64,
    pub grid: GridConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n: 0,
            radial: true,
            max_iters: 1000,
            line_search: LineSearch::default(),
            energy_cap: 100.0,
            seed: 0,
            restarts: 1,
            init_amplitude: 1.0,
            preconditioner_shift: 0.1,
            plateau_tol: 1e-11,
            plateau_patience: 5,
            projection_shift: 0.0,
            grid: GridConfig::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.energy_cap > 0.0 && self.energy_cap.is_finite()) {
            return bad(format!("energy cap {} must be positive and finite", self.energy_cap));
        }
        if self.restarts < 1 {
            return bad("restarts must be at least 1".into());
        }
        if self.n.abs() > DEFAULT_MAX_DEGREE {
            return Err(Error::DegreeOutOfRange { n: self.n, max: DEFAULT_MAX_DEGREE });
        }
        let ls = &self.line_search;
        if !(ls.armijo > 0.0 && ls.armijo < 1.0) || !(ls.contraction > 0.0 && ls.contraction < 1.0) {
            return bad("line search constants must lie in (0, 1)".into());
        }
        if !(ls.expansion >= 1.0) || !(ls.initial_step > 0.0) || !(ls.max_step >= ls.initial_step) {
            return bad("line search steps must satisfy 0 < initial <= max and expansion >= 1".into());
        }
        if ls.max_backtracks < 1 {
            return bad("max_backtracks must be at least 1".into());
        }
        if !(self.init_amplitude >= 0.0 && self.init_amplitude.is_finite()) {
            return bad(format!("initial amplitude {} must be finite and nonnegative", self.init_amplitude));
        }
        if !(self.preconditioner_shift > 0.0) || !(self.plateau_tol >= 0.0) || self.plateau_patience < 1 {
            return bad("preconditioner shift must be positive, plateau tolerance nonnegative, patience >= 1".into());
        }
        if !self.projection_shift.is_finite() {
            return bad("projection shift must be finite".into());
        }
        self.grid.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStatus {
    Plateaued,
    HitCap,
    MaxIters,
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    #[serde(rename = "A")]
    pub value: f64,
    pub energy: f64,
    /// Gradient norm in the preconditioner metric, `(gᵀH⁻¹g)^½`.
    pub gradnorm: f64,
}

#[derive(Debug, Clone)]
pub enum SearchIterate {
    Radial(RadialProfile),
    Field(SphereField),
}

impl SearchIterate {
    pub fn values(&self) -> &[f64] {
        match self {
            Self::Radial(f) => f.values(),
            Self::Field(phi) => phi.values(),
        }
    }

    /// `∫ḟ²` for profiles; `∫|∇φ|²μ / 4π` for fields, which agrees on lifts.
    pub fn energy(&self) -> f64 {
        match self {
            Self::Radial(f) => f.energy(),
            Self::Field(phi) => phi.dirichlet_integral() / (4.0 * PI),
        }
    }

    fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Ok(match self {
            Self::Radial(f) => Self::Radial(RadialProfile::new(f.grid().clone(), values)?),
            Self::Field(phi) => Self::Field(phi.with_values(values)?),
        })
    }

    fn project(&self, shift: f64) -> Result<Self> {
        let centred = match self {
            Self::Radial(f) => Self::Radial(f.mean_normalized()),
            Self::Field(phi) => Self::Field(phi.mean_normalized()),
        };
        if shift == 0.0 {
            return Ok(centred);
        }
        centred.with_values(centred.values().iter().map(|v| v + shift).collect())
    }

    fn evaluate(&self, n: BundleDegree) -> Result<(f64, Vec<f64>)> {
        let (res, parts) = match self {
            Self::Radial(f) => anomaly_radial_with_gradient(f, n)?,
            Self::Field(phi) => anomaly_general_with_gradient(phi, n)?,
        };
        Ok((res.total, parts.total()))
    }
}

/// Result of one restart.
#[derive(Debug, Clone)]
pub struct SearchTrace {
    pub restart: usize,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
    pub status: SearchStatus,
    pub best_value: f64,
    pub best: SearchIterate,
}

/// All restarts of one search and the index of the best trace.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub traces: Vec<SearchTrace>,
    pub best: usize,
}

impl SearchOutcome {
    pub fn best_trace(&self) -> &SearchTrace {
        &self.traces[self.best]
    }

    pub fn best_value(&self) -> f64 {
        self.best_trace().best_value
    }
}

/// Inverse of the Sobolev preconditioner, one banded factor per `|m|`.
struct Preconditioner {
    factors: Vec<BandedCholesky>,
    spectrum: Option<ThetaSpectrum>,
    t_nodes: usize,
}

impl Preconditioner {
    fn new(grid: &TGrid, theta_nodes: Option<usize>, kappa: f64) -> Result<Self> {
        let d = grid.staggered();
        let mut stiffness = SymBanded::zeros(grid.len(), d.half_bandwidth());
        for (r, c, v) in d.normal_entries() {
            stiffness.add(r, c, v);
        }
        let modes = theta_nodes.map_or(0, |nt| nt / 2);
        let factors = (0..=modes)
            .map(|m| {
                let mut h = stiffness.clone();
                let shift = (m * m) as f64 / 4.0 + kappa;
                h.add_diagonal(&grid.weights().iter().map(|w| shift * w).collect::<Vec<_>>());
                h.cholesky()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { factors, spectrum: theta_nodes.map(ThetaSpectrum::new), t_nodes: grid.len() })
    }

    fn apply(&self, grad: &[f64]) -> Vec<f64> {
        let Some(spec) = &self.spectrum else {
            return self.factors[0].solve(grad);
        };
        let nt = grad.len() / self.t_nodes;
        let rows: Vec<Vec<Complex64>> = grad.chunks(nt).map(|r| spec.forward(r)).collect();
        let mut out_rows = vec![vec![Complex64::new(0.0, 0.0); nt]; rows.len()];
        for m in 0..nt {
            let factor = &self.factors[spec.wavenumber(m).abs() as usize];
            let re = factor.solve(&rows.iter().map(|r| r[m].re).collect::<Vec<_>>());
            let im = factor.solve(&rows.iter().map(|r| r[m].im).collect::<Vec<_>>());
            for (j, row) in out_rows.iter_mut().enumerate() {
                row[m] = Complex64::new(re[j], im[j]) * nt as f64;
            }
        }
        out_rows.into_iter().flat_map(|r| spec.inverse(r)).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Failures that only mean the trial step went too far.
fn rejects_step(e: &Error) -> bool {
    matches!(e, Error::Divergence(_) | Error::DegenerateMetric { .. })
}

fn wrap(iteration: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Search { iteration, source: Box::new(e) }
}

/// Seeded starting point: a random profile, plus low θ-modes off the radial slice.
fn initial_point(cfg: &SearchConfig, grid: &Arc<TGrid>, seed: u64) -> Result<SearchIterate> {
    let f = profile_family_on(grid.clone(), "fourier", &[seed as f64, cfg.init_amplitude])?;
    if cfg.radial {
        return Ok(SearchIterate::Radial(f));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let coef: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0) * cfg.init_amplitude).collect();
    let nt = cfg.grid.theta_nodes;
    let lifted = f.lift(nt);
    let phi = SphereField::from_fn(grid.clone(), nt, |t, th| {
        let s = 1.0 / (t / 2.0).cosh();
        s * (coef[0] * th.cos() + coef[1] * th.sin()) + s * s * (coef[2] * (2.0 * th).cos() + coef[3] * (2.0 * th).sin())
    })?;
    let values = lifted.values().iter().zip(phi.values()).map(|(a, b)| a + b).collect();
    Ok(SearchIterate::Field(lifted.with_values(values)?))
}

fn run_trace(cfg: &SearchConfig, grid: &Arc<TGrid>, pre: &Preconditioner, restart: usize, seed: u64) -> Result<SearchTrace> {
    let n = BundleDegree::new(cfg.n);
    let ls = &cfg.line_search;
    let mut x = initial_point(cfg, grid, seed)?.project(cfg.projection_shift)?;
    let e0 = x.energy();
    if e0 > cfg.energy_cap {
        let scale = (0.5 * cfg.energy_cap / e0).sqrt();
        x = x.with_values(x.values().iter().map(|v| v * scale).collect())?.project(cfg.projection_shift)?;
    }
    let (mut value, mut grad) = x.evaluate(n).map_err(wrap(0))?;
    let mut energy = x.energy();
    let mut records = Vec::new();
    let mut step = ls.initial_step;
    let mut flat = 0;
    let mut iter = 0;
    let status = loop {
        let dir = pre.apply(&grad);
        let slope = dot(&grad, &dir);
        records.push(TraceRecord { iter, value, energy, gradnorm: slope.max(0.0).sqrt() });
        if slope <= GRADIENT_FLOOR || flat >= cfg.plateau_patience {
            break SearchStatus::Plateaued;
        }
        if iter == cfg.max_iters {
            break SearchStatus::MaxIters;
        }
        iter += 1;
        let mut accepted = None;
        for _ in 0..ls.max_backtracks {
            let values = x.values().iter().zip(&dir).map(|(v, d)| v + step * d).collect();
            let trial = x.with_values(values)?.project(cfg.projection_shift)?;
            match trial.evaluate(n) {
                Ok((v, g)) if v >= value + ls.armijo * step * slope => {
                    accepted = Some((trial, v, g));
                    break;
                }
                Ok(_) => {}
                Err(e) if rejects_step(&e) => {}
                Err(e) => return Err(wrap(iter)(e)),
            }
            step *= ls.contraction;
        }
        let Some((trial, v, g)) = accepted else {
            break SearchStatus::Plateaued;
        };
        let e = trial.energy();
        if e > cfg.energy_cap {
            break SearchStatus::HitCap;
        }
        let gain = v - value;
        flat = if gain <= cfg.plateau_tol * (1.0 + v.abs()) { flat + 1 } else { 0 };
        x = trial;
        value = v;
        grad = g;
        energy = e;
        step = (step * ls.expansion).min(ls.max_step);
    };
    Ok(SearchTrace { restart, seed, records, status, best_value: value, best: x })
}

/// Runs `cfg.restarts` independent ascents in parallel and keeps all traces.
///
/// Restart seeds are drawn from a generator seeded by `cfg.seed`; the best
/// trace maximizes the final value, ties going to the smaller seed.
pub fn search_sup(cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let grid = cfg.grid.t_grid()?;
    let theta = (!cfg.radial).then_some(cfg.grid.theta_nodes);
    let pre = Preconditioner::new(&grid, theta, cfg.preconditioner_shift)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = (0..cfg.restarts).map(|_| rng.random_range(0..1u64 << 53)).collect();
    let traces = seeds
        .par_iter()
        .enumerate()
        .map(|(r, &s)| run_trace(cfg, &grid, &pre, r, s))
        .collect::<Result<Vec<_>>>()?;
    let best = (0..traces.len())
        .max_by(|&a, &b| {
            let (ta, tb) = (&traces[a], &traces[b]);
            ta.best_value.total_cmp(&tb.best_value).then(tb.seed.cmp(&ta.seed))
        })
        .expect("at least one restart");
    Ok(SearchOutcome { traces, best })
}

/// Named probe profiles on the default grid.
///
/// * `zero`
/// * `tanh [a]`: `a·tanh(t/2)`
/// * `bump [h, w, c]`: `h·exp(−(t−c)²/2w²)`
/// * `tent [h, w]`: `h·max(0, 1 − |t|/w)`, energy `2h²/w`
/// * `fourier [seed, amplitude, modes]`: `amplitude·Σ_k (a_k cos kπx + b_k sin kπx)/k`
///   with `x = tanh(t/2)` and seeded uniform coefficients in `[−1, 1]`
pub fn profile_family(name: &str, params: &[f64]) -> Result<RadialProfile> {
    profile_family_on(GridConfig::default().t_grid()?, name, params)
}

pub fn profile_family_on(grid: Arc<TGrid>, name: &str, params: &[f64]) -> Result<RadialProfile> {
    let p = |i: usize, default: f64| params.get(i).copied().unwrap_or(default);
    let arity = |max: usize| {
        if params.len() > max {
            Err(Error::InvalidArgument(format!("family `{name}` takes at most {max} parameters, got {}", params.len())))
        } else if params.iter().any(|v| !v.is_finite()) {
            Err(Error::InvalidArgument(format!("non-finite parameter for family `{name}`")))
        } else {
            Ok(())
        }
    };
    match name {
        "zero" => {
            arity(0)?;
            Ok(RadialProfile::zeros(grid))
        }
        "tanh" => {
            arity(1)?;
            let a = p(0, 1.0);
            RadialProfile::from_fn(grid, |t| a * (t / 2.0).tanh())
        }
        "bump" => {
            arity(3)?;
            let (h, w, c) = (p(0, 1.0), p(1, 1.0), p(2, 0.0));
            if w <= 0.0 {
                return Err(Error::InvalidArgument(format!("bump width {w} must be positive")));
            }
            RadialProfile::from_fn(grid, |t| h * (-(t - c).powi(2) / (2.0 * w * w)).exp())
        }
        "tent" => {
            arity(2)?;
            let (h, w) = (p(0, 1.0), p(1, 1.0));
            if w <= 0.0 {
                return Err(Error::InvalidArgument(format!("tent width {w} must be positive")));
            }
            RadialProfile::from_fn(grid, |t| h * (1.0 - t.abs() / w).max(0.0))
        }
        "fourier" => {
            arity(3)?;
            let (seed, amp, modes) = (p(0, 0.0), p(1, 1.0), p(2, 4.0));
            if seed < 0.0 || seed.fract() != 0.0 || !(1.0..=64.0).contains(&modes) || modes.fract() != 0.0 {
                return Err(Error::InvalidArgument("fourier needs an integer seed >= 0 and 1..=64 modes".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            let coef: Vec<(f64, f64)> =
                (0..modes as usize).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            RadialProfile::from_fn(grid, |t| {
                let x = (t / 2.0).tanh();
                amp * coef
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let w = (k + 1) as f64 * PI * x;
                        (a * w.cos() + b * w.sin()) / (k + 1) as f64
                    })
                    .sum::<f64>()
            })
        }
        _ => Err(Error::UnknownFamily(name.to_string())),
    }
}
