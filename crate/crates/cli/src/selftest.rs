//! The acceptance suite: fourteen checks, each printed as one pass/fail line.

use std::f64::consts::TAU;
use std::sync::Arc;
use std::time::Instant;

use detbound::anomaly::{anomaly_dual_check, anomaly_general, anomaly_radial, anomaly_radial_with_gradient};
use detbound::bounds::{coefficient_sweep, holder_bound_check, lemma3_calibration, lemma3_probe_shapes, mt_deficit, Lemma3Constants};
use detbound::geometry::{BundleDegree, RadialProfile, SphereField, TGrid};
use detbound::optimizer::{profile_family_on, search_sup, SearchStatus};
use detbound::rearrangement::{decreasing_rearrangement, monotone_envelope, HalfLineFunction, StepFunction};
use detbound::spectral::{circle_anomaly_formula, circle_det_with, CircleMetric};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::{calibration_ladder, trig_metric};
use crate::config::RunConfig;

/// Wall-clock budget of the whole suite, in seconds.
pub const WALL_CLOCK_LIMIT: f64 = 300.0;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("[{tag}] {:>2} {:<28} {} ({:.1} s)", self.id, self.name, self.detail, self.seconds)
    }
}

type Check = fn(&RunConfig) -> anyhow::Result<(bool, String)>;

const CHECKS: [(&str, Check); 13] = [
    ("normalization", normalization),
    ("scaling invariance", scaling_invariance),
    ("radial/general agreement", radial_general),
    ("closed-form anomaly", closed_form),
    ("serre duality", duality),
    ("gradient check", gradient_check),
    ("envelope constants", lemma3_constants),
    ("envelope end-to-end", lemma3_end_to_end),
    ("rearrangement", rearrangement),
    ("hoelder bound", holder),
    ("moser-trudinger", moser_trudinger),
    ("circle oracle", circle_oracle),
    ("onofri supremum", onofri_supremum),
];

/// Runs every check in order, calling `report` as each finishes; the last
/// entry is the wall-clock check over the first thirteen.
pub fn run_suite(cfg: &RunConfig, mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
    let start = Instant::now();
    let mut out = Vec::with_capacity(CHECKS.len() + 1);
    for (i, (name, check)) in CHECKS.iter().enumerate() {
        let t = Instant::now();
        let (passed, detail) = check(cfg).unwrap_or_else(|e| (false, format!("error: {e:#}")));
        let o = Outcome { id: i + 1, name, passed, detail, seconds: t.elapsed().as_secs_f64() };
        report(&o);
        out.push(o);
    }
    let total = start.elapsed().as_secs_f64();
    let o = Outcome {
        id: CHECKS.len() + 1,
        name: "wall clock",
        passed: total < WALL_CLOCK_LIMIT,
        detail: format!("suite took {total:.1} s (limit {WALL_CLOCK_LIMIT} s)"),
        seconds: total,
    };
    report(&o);
    out.push(o);
    out
}

fn rng(cfg: &RunConfig, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ stream)
}

/// Random combination of spherical harmonics of degree ≤ 2 in `(t, θ)`.
fn smooth_field(grid: &Arc<TGrid>, nt: usize, rng: &mut ChaCha8Rng, amplitude: f64) -> anyhow::Result<SphereField> {
    let c: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0) * amplitude).collect();
    Ok(SphereField::from_fn(grid.clone(), nt, |t, th| {
        let x = (t / 2.0).tanh();
        let s = 1.0 / (t / 2.0).cosh();
        c[0] * x
            + c[1] * (x * x - 1.0 / 3.0)
            + s * (c[2] * th.cos() + c[3] * th.sin())
            + x * s * (c[4] * th.cos() + c[5] * th.sin())
            + s * s * (c[6] * (2.0 * th).cos() + c[7] * (2.0 * th).sin())
    })?)
}

fn normalization(cfg: &RunConfig) -> anyhow::Result<(bool, String)> {
    let phi = SphereField::zeros(cfg.grid.t_grid()?, cfg.grid.theta_nodes);
    let mut worst = 0.0f64;
    for n in -3..=3 {
        worst = worst.max(anomaly_general(&phi, BundleDegree::new(n))?.total.abs());
    }
    Ok((worst < 1e-10, format!("max |A(0)| = {worst:.1e} over n = -3..3 (tol 1e-10)")))
}

fn scaling_invariance(cfg: &RunConfig) -> anyhow::Result<(bool, String)> {
    let grid = cfg.grid.t_grid()?;
    let mut r = rng(cfg, 2);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let phi = smooth_field(&grid, cfg.grid.theta_nodes, &mut r, 1.0)?;
        for n in [0, 1, 2, -2] {
            let base = anomaly_general(&phi, BundleDegree::new(n))?.total;
            for c in [-3.0, 1.0, 7.0] {
                let shifted = anomaly_general(&phi.map(|v| v + c)?, BundleDegree::new(n))?.total;
                worst = worst.max((shifted - base).abs());
            }
        }
    }
    Ok((worst < 1e-8, format!("max |A(φ+c) - A(φ)| = {worst:.1e} over 120 cases (tol 1e-8)")))
}

fn radial_general(cfg: &RunConfig) -> anyhow::Result<(bool, String)> {
    let grid = cfg.grid.t_grid()?;
    let mut profiles = Vec::new();
    for a in [0.5, 1.0, 2.0] {
        profiles.push(profile_family_on(grid.clone(), "tanh", &[a])?);
    }
    for (h, w) in [(1.0, 2.0), (0.5, 1.0), (1.5, 3.0)] {
        profiles.push(profile_family_on(grid.clone(), "tent", &[h, w])?);
    }
    let mut worst = 0.0f64;
    for f in &profiles {
        let lift = f.lift(cfg.grid.theta_nodes);
        for n in 0..=2 {
            let n = BundleDegree::new(n);
            worst = worst.max((anomaly_radial(f, n)?.total - anomaly_general(&lift, n)?.total).abs());
        }
    }
    Ok((worst < 1e-6, format!("max |radial - general| = {worst:.1e} over tanh/tent, n = 0..2 (tol 1e-6)")))
}

fn closed_form(cfg: &RunConfig) -> anyhow::Result<(bool, String)> {
    let grid = cfg.grid.t_grid()?;
    let mut worst = 0.0f64;
    for a in [0.5f64, 1.0, 2.0] {
        let f = profile_family_on(grid.clone(), "tanh", &[a])?;
        let exact = -a * a / 3.0 + (a.sinh() / a).ln();
        worst = worst.max((anomaly_radial(&f, BundleDegree::new(0))?.total - exact).abs());
    }
    Ok((worst < 1e-7, format!("max error vs -a²/3 + log(sinh a / a) = {worst:.1e} (tol 1e-7)")))
}

fn duality(cfg: &RunConfig) -> anyhow::Result<(bool, String)> {
    let grid = cfg.grid.t_grid()?;
    let mut r = rng(cfg, 5);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let phi = smooth_field(&grid, cfg.grid.theta_nodes, &mut r, 1.0)?;
        for n in [0, 1] {
            let (a, b) = anomaly_dual_check(&phi, BundleDegree::new(n))?;
            worst = worst.max((a - b).abs());
        }
    }
    Ok((worst < 1e-6, format!("max |A_n(φ) - A_(-n-2)(-φ)| = {worst:.1e} (tol 1e-6)")))
}

fn gradient_check(cfg: &RunConfig) -> anyhow::Result<(bool, String)> {
    let grid = cfg.grid.t_grid()?;
    let mut r = rng(cfg, 6);
    let eps = 1e-4;
    let degrees = [0, 1, 2, 3, -2, -3];
    let mut worst = 0.0f64;
    for i in 0..50 {
        let n = BundleDegree::new(degrees[i % degrees.len()]);
        let fs = r.random_range(0..1u64 << 40) as f64;
        let vs = r.random_range(0..1u64 << 40) as f64;
        let f = profile_family_on(grid.clone(), "fourier", &[fs, r.random_range(0.3..1.5)])?;
        let v = profile_family_on(grid.clone(), "fourier", &[vs, 1.0])?;
        let (_, parts) = anomaly_radial_with_gradient(&f, n)?;
        let analytic: f64 = parts.total().iter().zip(v.values()).map(|(g, d)| g * d).sum();
        let at = |s: f64| -> anyhow::Result<f64> {
            let p = RadialProfile::new(grid.clone(), f.values().iter().zip(v.values()).map(|(a, b)| a + s * b).collect())?;
            Ok(anomaly_radial(&p, n)?.total)
        };
        let fd = (at(eps)? - at(-eps)?) / (2.0 * eps);
        let scale = fd.abs().max(analytic.abs());
        if scale > 1e-12 {
            worst = worst.max((analytic - fd).abs() / scale);
        }
    }
    Ok((worst < 1e-5, format!("max relative error = {worst:.1e} over 50 (f, v), ε = 1e-4 (tol 1e-5)")))
}

fn lemma3_constants(_: &RunConfig) -> anyhow::Result<(bool, String)> {
    let mut exact = true;
    for k in 1..=10_000u64 {
        let (_, _, r) = Lemma3Constants::exact(k)?;
        exact &= *r.numer() == 1 && *r.denom() == 20 * k as i128;
    }
    let t = Instant::now();
    let rows = coefficient_sweep(1_000_000)?;
    let secs = t.elapsed().as_secs_f64();
    let min_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let passed = exact && min_margin >= 0.0 && secs < 10.0;
    Ok((
        passed,
        format!("r_k = 1/(20k) exact for k <= 1e4: {exact}; min margin over N <= 1e6 = {min_margin:.2e}; sweep {secs:.2} s"),
    ))
}

fn lemma3_end_to_end(cfg: &RunConfig) -> anyhow::Result<(bool, String)> {
    let base = calibration_ladder(13);
    // up to amplitude 0.25·2^9.5 ≈ 181, i.e. energies ×100 beyond the base ladder
    let extended = calibration_ladder(20);
    let mut passed = true;
    let mut detail = Vec::new();
    for m in [1usize, 3, 8] {
        let shapes = lemma3_probe_shapes(200, cfg.seed, 40.0, 1025)?;
        let fine = lemma3_probe_shapes(200, cfg.seed, 40.0, 2049)?;
        let c = lemma3_calibration(&shapes, m, &base)?;
        let c_ext = lemma3_calibration(&shapes, m, &extended)?;
        let c_fine = lemma3_calibration(&fine, m, &base)?;
        let band = 0.05 * c.abs();
        passed &= c.is_finite() && c_ext <= c + band && (c_fine - c).abs() <= band;
        detail.push(format!("M={m}: C={c:.4} x100={c_ext:.4} h/2={c_fine:.4}"));
    }
    Ok((passed, detail.join("; ")))
}

fn rearrangement(cfg: &RunConfig) -> anyhow::Result<(bool, String)> {
    let mut r = rng(cfg, 9);
    let grid = HalfLineFunction::uniform_grid(30.0, 3001);
    let mut worst = [0.0f64; 6];
    let mut monotone = true;
    for _ in 0..50 {
        let c: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
        let f0 = r.random_range(-3.0..3.0);
        let f = HalfLineFunction::from_fn(grid.clone(), |t| {
            let d = (-0.5 * t).exp();
            f0 + d * (c[1] * (c[2] * t).sin() + c[3] * (0.7 * t).cos() + c[4] * t * (-c[5].abs() * t).exp()) + (d - 1.0) * c[0]
        })?;
        let env = monotone_envelope(&f)?;
        let scale = env.energy().max(1.0);
        // i) endpoint equality at 0 and at the end of the window
        let fend = *f.values().last().expect("nonempty");
        let uend = *env.u.values().last().expect("nonempty");
        worst[0] = worst[0].max((env.u.values()[0] - f.values()[0]).abs()).max((uend - fend).abs());
        // ii) u̇ nonincreasing
        monotone &= env.udot.is_nonincreasing();
        // iii) u ≥ f
        for &s in f.s_grid() {
            worst[1] = worst[1].max(f.eval(s) - env.u.eval(s));
        }
        // iv) energies and first moments agree
        worst[2] = worst[2].max((env.energy() - env.fdot.integral_pow(2)).abs() / scale);
        worst[2] = worst[2].max((env.udot.integral_pow(1) - env.fdot.integral_pow(1)).abs() / scale);
        // distribution functions at the sampled levels
        for &y in env.fdot.values().iter().step_by(97) {
            worst[3] = worst[3].max((env.udot.distribution(y) - env.fdot.distribution(y)).abs());
        }
        // Hardy–Littlewood partial integrals at every node
        for &s in f.s_grid() {
            worst[4] = worst[4].max(env.fdot.partial_integral(s) - env.udot.partial_integral(s));
        }
        monotone &= decreasing_rearrangement(&env.udot)? == env.udot;
    }
    // exactness on step functions, including unequal widths
    let g = StepFunction::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 2.0, 0.0])?;
    let expected = StepFunction::new(vec![0.0, 1.0, 2.0, 3.0], vec![2.0, 1.0, 0.0])?;
    let mut exact = decreasing_rearrangement(&g)? == expected;
    let g = StepFunction::new(vec![0.0, 0.5, 2.0, 2.25, 4.0], vec![-1.0, 3.0, 0.5, 3.0])?;
    let gs = decreasing_rearrangement(&g)?;
    exact &= gs.values() == [3.0, 3.0, 0.5, -1.0] && gs.integral_pow(2) == g.integral_pow(2);
    for &y in g.values() {
        worst[5] = worst[5].max((gs.distribution(y) - g.distribution(y)).abs());
    }
    exact &= worst[5] == 0.0;
    let passed = monotone && exact && worst[..5].iter().all(|&w| w <= 1e-8);
    Ok((
        passed,
        format!(
            "i) {:.1e} iii) {:.1e} iv) {:.1e} distribution {:.1e} HL {:.1e}; ii) {monotone}; steps exact {exact}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    ))
}

fn holder(cfg: &RunConfig) -> anyhow::Result<(bool, String)> {
    let grid = cfg.grid.t_grid()?;
    let mut r = rng(cfg, 10);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let f = match i % 4 {
            0 => profile_family_on(grid.clone(), "tanh", &[r.random_range(-3.0..3.0)])?,
            1 => profile_family_on(grid.clone(), "bump", &[r.random_range(-3.0..3.0), r.random_range(0.2..4.0), r.random_range(-10.0..10.0)])?,
            2 => profile_family_on(grid.clone(), "tent", &[r.random_range(-3.0..3.0), r.random_range(0.3..6.0)])?,
            _ => profile_family_on(grid.clone(), "fourier", &[r.random_range(0..1u64 << 40) as f64, r.random_range(0.1..3.0)])?,
        };
        worst = worst.max(holder_bound_check(&f)?);
    }
    Ok((worst <= 1.0 + 1e-9, format!("max |f(t)-f(s)| / (A |t-s|^½) = {worst:.9} over 100 profiles (tol 1 + 1e-9)")))
}

fn moser_trudinger(cfg: &RunConfig) -> anyhow::Result<(bool, String)> {
    let grid = cfg.grid.t_grid()?;
    let nt = cfg.grid.theta_nodes;
    let mut r = rng(cfg, 11);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100 {
        let g = match i % 3 {
            0 => {
                let amplitude = r.random_range(0.05..3.0);
                smooth_field(&grid, nt, &mut r, amplitude)?
            }
            1 => profile_family_on(grid.clone(), "tanh", &[r.random_range(-6.0..6.0)])?.lift(nt),
            _ => profile_family_on(grid.clone(), "fourier", &[r.random_range(0..1u64 << 40) as f64, r.random_range(0.1..2.0)])?
                .lift(nt),
        };
        worst = worst.max(mt_deficit(&g)?);
    }
    let x3 = profile_family_on(grid, "tanh", &[1.0])?.lift(nt);
    let value = mt_deficit(&x3)?;
    let oracle = (1f64.sinh()).ln() - 1.0 / 6.0;
    let passed = worst <= 1e-9 && (value - -0.005228).abs() < 1e-5 && (value - oracle).abs() < 1e-5;
    Ok((passed, format!("max deficit = {worst:.2e} over 100 probes; x3 (a = 1) gives {value:.6} (target -0.005228)")))
}

fn circle_oracle(cfg: &RunConfig) -> anyhow::Result<(bool, String)> {
    let nodes = cfg.circle_nodes;
    let flat = circle_det_with(&CircleMetric::new(vec![0.0; nodes])?, &cfg.monodromy)?;
    let mut probes = Vec::new();
    for a in [0.3, 1.0, 2.0] {
        probes.push((Some(a), CircleMetric::from_fn(nodes, |x| a * (TAU * x).cos())?));
    }
    let mut r = rng(cfg, 12);
    while probes.len() < 20 {
        probes.push((None, trig_metric(nodes, r.random_range(0..u64::MAX), r.random_range(0.1..1.5))?));
    }
    let mut worst = 0.0f64;
    let mut bessel = 0.0f64;
    let mut min_formula = f64::INFINITY;
    for (a, phi) in &probes {
        let d = circle_det_with(phi, &cfg.monodromy)?;
        let formula = circle_anomaly_formula(phi);
        min_formula = min_formula.min(formula);
        worst = worst.max((d.log_det - flat.log_det - formula).abs());
        if let Some(a) = a {
            bessel = bessel.max((d.log_det - flat.log_det - 2.0 * bessel_i0(*a).ln()).abs());
        }
    }
    for _ in 0..200 {
        let phi = CircleMetric::new((0..nodes).map(|_| r.random_range(-3.0..3.0)).collect())?;
        min_formula = min_formula.min(circle_anomaly_formula(&phi));
    }
    let det0 = (flat.det - 1.0).abs();
    let passed = det0 < 1e-6 && worst < 1e-4 && bessel < 1e-4 && min_formula >= -1e-9;
    Ok((
        passed,
        format!("|det(0) - 1| = {det0:.1e}; max log-det error = {worst:.1e} (Bessel {bessel:.1e}); min formula = {min_formula:.1e}"),
    ))
}

/// `I₀(a) = Σ (a/2)^{2k} / (k!)²`.
fn bessel_i0(a: f64) -> f64 {
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..80 {
        term *= (a / 2.0).powi(2) / (k * k) as f64;
        sum += term;
    }
    sum
}

fn onofri_supremum(cfg: &RunConfig) -> anyhow::Result<(bool, String)> {
    let mut sc = cfg.search_config(0, true);
    sc.restarts = 20;
    let out = search_sup(&sc)?;
    let plateaued = out.traces.iter().filter(|t| t.status == SearchStatus::Plateaued).count();
    let lo = out.traces.iter().map(|t| t.best_value).fold(f64::INFINITY, f64::min);
    let best = out.best_value();
    let mut passed = plateaued == 20 && lo >= -1e-3 && best <= 1e-9;
    let mut detail = vec![format!("n=0: {plateaued}/20 plateaued, best A in [{lo:.1e}, {best:.1e}]")];
    let cap = sc.energy_cap / 4.0;
    for n in [1, -2, -3] {
        let mut sups = Vec::new();
        for c in [cap, 10.0 * cap] {
            let mut s = cfg.search_config(n, true);
            s.restarts = 20;
            s.energy_cap = c;
            s.init_amplitude = 3.0;
            sups.push(search_sup(&s)?.best_value());
        }
        passed &= sups[0].is_finite() && sups[1] <= sups[0].max(0.0) + 1e-6;
        detail.push(format!("n={n}: sup {:.1e} -> {:.1e}", sups[0], sups[1]));
    }
    Ok((passed, detail.join("; ")))
}
