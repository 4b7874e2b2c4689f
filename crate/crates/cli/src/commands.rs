//! Subcommand arguments and implementations.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use detbound::anomaly::{anomaly_general, anomaly_radial, AnomalyResult};
use detbound::bounds::{
    coefficient_sweep, fontana_functional, lemma3_calibration, lemma3_probe_shapes, lemma3_report, mt_deficit,
    FontanaValue, Lemma3Constants, Lemma3Report,
};
use detbound::geometry::{BundleDegree, RadialProfile, SphereField};
use detbound::optimizer::{profile_family_on, search_sup, SearchIterate, SearchStatus, TraceRecord};
use detbound::rearrangement::{monotone_envelope, HalfLineFunction};
use detbound::spectral::{circle_anomaly_formula, circle_det_with, circle_eig_check, CircleMetric};
use detbound::Error;
use serde::Serialize;

use crate::config::{GridMeta, RunConfig};
use crate::{selftest, UsageError, EXIT_DOMAIN};

/// Amplitudes `0.25·2^{k/2}`, `k < 13`, used for the envelope-bound calibration.
pub fn calibration_ladder(levels: usize) -> Vec<f64> {
    (0..levels).map(|k| 0.25 * 2f64.powf(k as f64 / 2.0)).collect()
}

#[derive(Debug, Args)]
pub struct AnomalyArgs {
    /// Degree of the line bundle O(n).
    #[arg(long, allow_negative_numbers = true)]
    pub n: i32,
    /// Profile family: zero, tanh, bump, tent, fourier.
    #[arg(long, default_value = "tanh")]
    pub profile: String,
    /// Family parameter (repeatable, in order).
    #[arg(long = "param", allow_negative_numbers = true)]
    pub params: Vec<f64>,
    /// Two-column `t,f` CSV profile instead of a family.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Use the one-dimensional formula instead of the general evaluator on the lift.
    #[arg(long)]
    pub radial: bool,
}

#[derive(Debug, Args)]
pub struct Lemma3Args {
    /// Emit the coefficient sweep for N = 1..=value as CSV.
    #[arg(long, value_name = "N", conflicts_with_all = ["constants", "input"])]
    pub coefficient_sweep: Option<usize>,
    /// Emit λ_k, μ_k, r_k for k = 1..=value as CSV.
    #[arg(long, value_name = "K", conflicts_with = "input")]
    pub constants: Option<u64>,
    /// Two-column `s,f` CSV; the report is computed for its monotone envelope.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Calibration constant used to report the slack of `--input`.
    #[arg(long, allow_negative_numbers = true)]
    pub calibration: Option<f64>,
    /// Number of probe shapes for the calibration run.
    #[arg(long, default_value_t = 200)]
    pub probes: usize,
    #[arg(long, default_value_t = 40.0)]
    pub window: f64,
    #[arg(long, default_value_t = 1025)]
    pub nodes: usize,
}

#[derive(Debug, Args)]
pub struct RearrangeArgs {
    /// Two-column `s,f` CSV on a grid starting at 0.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct MtArgs {
    #[arg(long, default_value = "tanh")]
    pub profile: String,
    #[arg(long = "param", allow_negative_numbers = true)]
    pub params: Vec<f64>,
    /// Sphere field as JSON (`t_grid`, `theta_nodes`, `values`) instead of a family.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CircleArgs {
    /// One- or two-column CSV of samples on a uniform grid of [0, 1).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Metric family when no input is given: zero, cos (a·cos 2πx), trig (seeded).
    #[arg(long, default_value = "cos")]
    pub family: String,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub amplitude: f64,
    /// Also report this many finite-volume eigenvalues.
    #[arg(long, default_value_t = 0)]
    pub eigenvalues: usize,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub n: i32,
    /// Search over general fields instead of rotation-invariant profiles.
    #[arg(long)]
    pub general: bool,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub energy_cap: Option<f64>,
    #[arg(long)]
    pub init_amplitude: Option<f64>,
    /// CSV trace (restart, iter, A, energy, gradnorm).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// JSON file for the best iterate.
    #[arg(long)]
    pub best: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {}

pub fn dispatch(cmd: &crate::Command, cfg: &RunConfig) -> anyhow::Result<i32> {
    use crate::Command::*;
    match cmd {
        Anomaly(a) => anomaly(a, cfg),
        Lemma3(a) => lemma3(a, cfg),
        Rearrange(a) => rearrange(a, cfg),
        MtCheck(a) => mt_check(a, cfg),
        CircleDet(a) => circle(a, cfg),
        Search(a) => search(a, cfg),
        Selftest(_) => {
            let outcomes = selftest::run_suite(cfg, |o| println!("{}", o.line()));
            Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { EXIT_DOMAIN })
        }
    }
}

fn open_out(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(cfg: &RunConfig, value: &T) -> anyhow::Result<i32> {
    let mut w = open_out(cfg.out.as_deref())?;
    detbound::io::write_json(&mut w, value)?;
    w.flush()?;
    Ok(0)
}

fn emit_csv<T: Serialize>(cfg: &RunConfig, rows: &[T]) -> anyhow::Result<i32> {
    let mut w = open_out(cfg.out.as_deref())?;
    detbound::io::write_csv(&mut w, rows)?;
    w.flush()?;
    Ok(0)
}

fn open_input(path: &Path) -> anyhow::Result<File> {
    File::open(path).map_err(|e| anyhow::anyhow!("cannot open {}: {e}", path.display()))
}

/// Family lookups fail on the invocation, not on the mathematics.
fn family(cfg: &RunConfig, name: &str, params: &[f64]) -> anyhow::Result<RadialProfile> {
    profile_family_on(cfg.grid.t_grid()?, name, params).map_err(|e| match e {
        Error::UnknownFamily(_) | Error::InvalidArgument(_) => UsageError(e.to_string()).into(),
        e => e.into(),
    })
}

#[derive(Serialize)]
struct Source {
    family: Option<String>,
    params: Vec<f64>,
    input: Option<String>,
}

impl Source {
    fn new(input: Option<&Path>, family: &str, params: &[f64]) -> Self {
        match input {
            Some(p) => Self { family: None, params: Vec::new(), input: Some(p.display().to_string()) },
            None => Self { family: Some(family.to_string()), params: params.to_vec(), input: None },
        }
    }
}

#[derive(Serialize)]
struct AnomalyOutput {
    grid_meta: GridMeta,
    source: Source,
    profile_nodes: usize,
    profile_half_width: f64,
    radial: bool,
    energy: f64,
    result: AnomalyResult,
}

fn anomaly(a: &AnomalyArgs, cfg: &RunConfig) -> anyhow::Result<i32> {
    let f = match &a.input {
        Some(p) => RadialProfile::read_csv(open_input(p)?, cfg.grid.stencil_order)?,
        None => family(cfg, &a.profile, &a.params)?,
    };
    let n = BundleDegree::new(a.n);
    let result = if a.radial { anomaly_radial(&f, n)? } else { anomaly_general(&f.lift(cfg.grid.theta_nodes), n)? };
    emit_json(
        cfg,
        &AnomalyOutput {
            grid_meta: cfg.grid_meta(),
            source: Source::new(a.input.as_deref(), &a.profile, &a.params),
            profile_nodes: f.grid().len(),
            profile_half_width: f.grid().half_width(),
            radial: a.radial,
            energy: f.energy(),
            result,
        },
    )
}

#[derive(Serialize)]
struct ConstantsRow {
    k: u64,
    lambda_k: f64,
    mu_k: f64,
    r_k: f64,
    level: f64,
}

#[derive(Serialize)]
struct Lemma3Output {
    grid_meta: GridMeta,
    input: String,
    report: Lemma3Report,
}

#[derive(Serialize)]
struct CalibrationOutput {
    grid_meta: GridMeta,
    #[serde(rename = "M")]
    m: usize,
    probes: usize,
    window: f64,
    nodes: usize,
    amplitudes: Vec<f64>,
    calibration: f64,
}

fn lemma3(a: &Lemma3Args, cfg: &RunConfig) -> anyhow::Result<i32> {
    if let Some(n) = a.coefficient_sweep {
        return emit_csv(cfg, &coefficient_sweep(n)?);
    }
    if let Some(k) = a.constants {
        let rows = (1..=k)
            .map(|k| {
                let c = Lemma3Constants::new(k)?;
                Ok(ConstantsRow { k, lambda_k: c.lambda_k, mu_k: c.mu_k, r_k: c.r_k, level: c.level() })
            })
            .collect::<detbound::Result<Vec<_>>>()?;
        return emit_csv(cfg, &rows);
    }
    if let Some(p) = &a.input {
        let f = HalfLineFunction::read_csv(open_input(p)?)?;
        let env = monotone_envelope(&f)?;
        let report = lemma3_report(&env.u, a.m, a.calibration)?;
        return emit_json(cfg, &Lemma3Output { grid_meta: cfg.grid_meta(), input: p.display().to_string(), report });
    }
    let shapes = lemma3_probe_shapes(a.probes, cfg.seed, a.window, a.nodes)?;
    let amplitudes = calibration_ladder(13);
    let calibration = lemma3_calibration(&shapes, a.m, &amplitudes)?;
    emit_json(
        cfg,
        &CalibrationOutput {
            grid_meta: cfg.grid_meta(),
            m: a.m,
            probes: a.probes,
            window: a.window,
            nodes: a.nodes,
            amplitudes,
            calibration,
        },
    )
}

#[derive(Serialize)]
struct EnvelopeRow {
    s: f64,
    u: f64,
    /// Value of the rearranged derivative on the cell starting at `s`.
    fdot_star: Option<f64>,
}

fn rearrange(a: &RearrangeArgs, cfg: &RunConfig) -> anyhow::Result<i32> {
    let f = HalfLineFunction::read_csv(open_input(&a.input)?)?;
    let env = monotone_envelope(&f)?;
    let rows: Vec<EnvelopeRow> = env
        .u
        .s_grid()
        .iter()
        .zip(env.u.values())
        .enumerate()
        .map(|(i, (&s, &u))| EnvelopeRow { s, u, fdot_star: env.udot.values().get(i).copied() })
        .collect();
    emit_csv(cfg, &rows)
}

#[derive(Serialize)]
struct MtOutput {
    grid_meta: GridMeta,
    source: Source,
    mt_deficit: f64,
    fontana: FontanaValue,
}

fn mt_check(a: &MtArgs, cfg: &RunConfig) -> anyhow::Result<i32> {
    let g = match &a.input {
        Some(p) => {
            let data = detbound::io::read_json(open_input(p)?)?;
            SphereField::from_data(&data, cfg.grid.stencil_order)?
        }
        None => family(cfg, &a.profile, &a.params)?.lift(cfg.grid.theta_nodes),
    };
    emit_json(
        cfg,
        &MtOutput {
            grid_meta: cfg.grid_meta(),
            source: Source::new(a.input.as_deref(), &a.profile, &a.params),
            mt_deficit: mt_deficit(&g)?,
            fontana: fontana_functional(&g)?,
        },
    )
}

#[derive(Serialize)]
struct CircleOutput {
    grid_meta: GridMeta,
    source: Source,
    samples: usize,
    det: f64,
    log_det: f64,
    extrapolation_error: f64,
    /// `log ∫e^φ + log ∫e^{−φ}`, which equals `log det′ Δ_φ − log det′ Δ₀`.
    anomaly_formula: f64,
    eigenvalues: Option<Vec<f64>>,
}

/// Seeded trigonometric polynomial of degree three with coefficients in `[−a, a]`.
pub fn trig_metric(nodes: usize, seed: u64, amplitude: f64) -> detbound::Result<CircleMetric> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.random_range(-amplitude..=amplitude), rng.random_range(-amplitude..=amplitude)))
        .collect();
    CircleMetric::from_fn(nodes, |x| {
        c.iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let w = TAU * (k + 1) as f64 * x;
                (a * w.cos() + b * w.sin()) / (k + 1) as f64
            })
            .sum()
    })
}

fn circle(a: &CircleArgs, cfg: &RunConfig) -> anyhow::Result<i32> {
    let phi = match &a.input {
        Some(p) => CircleMetric::read_csv(open_input(p)?)?,
        None => match a.family.as_str() {
            "zero" => CircleMetric::new(vec![0.0; cfg.circle_nodes])?,
            "cos" => CircleMetric::from_fn(cfg.circle_nodes, |x| a.amplitude * (TAU * x).cos())?,
            "trig" => trig_metric(cfg.circle_nodes, cfg.seed, a.amplitude)?,
            other => return Err(UsageError(format!("unknown circle family `{other}`")).into()),
        },
    };
    let d = circle_det_with(&phi, &cfg.monodromy)?;
    let eigenvalues = if a.eigenvalues > 0 { Some(circle_eig_check(&phi, a.eigenvalues)?) } else { None };
    emit_json(
        cfg,
        &CircleOutput {
            grid_meta: cfg.grid_meta(),
            source: Source::new(a.input.as_deref(), &a.family, &[a.amplitude]),
            samples: phi.len(),
            det: d.det,
            log_det: d.log_det,
            extrapolation_error: d.extrapolation_error,
            anomaly_formula: circle_anomaly_formula(&phi),
            eigenvalues,
        },
    )
}

#[derive(Serialize)]
struct TraceRow {
    restart: usize,
    iter: usize,
    #[serde(rename = "A")]
    value: f64,
    energy: f64,
    gradnorm: f64,
}

impl TraceRow {
    fn new(restart: usize, r: &TraceRecord) -> Self {
        Self { restart, iter: r.iter, value: r.value, energy: r.energy, gradnorm: r.gradnorm }
    }
}

#[derive(Serialize)]
struct TraceSummary {
    restart: usize,
    seed: u64,
    status: SearchStatus,
    iterations: usize,
    best_value: f64,
    final_energy: f64,
}

#[derive(Serialize)]
struct SearchSummary {
    grid_meta: GridMeta,
    n: i32,
    radial: bool,
    energy_cap: f64,
    restarts: usize,
    best_value: f64,
    best_restart: usize,
    best_seed: u64,
    traces: Vec<TraceSummary>,
}

fn search(a: &SearchArgs, cfg: &RunConfig) -> anyhow::Result<i32> {
    let mut sc = cfg.search_config(a.n, !a.general);
    if let Some(v) = a.restarts {
        sc.restarts = v;
    }
    if let Some(v) = a.max_iters {
        sc.max_iters = v;
    }
    if let Some(v) = a.energy_cap {
        sc.energy_cap = v;
    }
    if let Some(v) = a.init_amplitude {
        sc.init_amplitude = v;
    }
    if let Err(e) = sc.validate() {
        return Err(UsageError(e.to_string()).into());
    }
    let out = search_sup(&sc)?;
    if let Some(p) = &a.trace {
        let rows: Vec<TraceRow> = out
            .traces
            .iter()
            .flat_map(|t| t.records.iter().map(|r| TraceRow::new(t.restart, r)))
            .collect();
        detbound::io::write_csv(BufWriter::new(File::create(p)?), &rows)?;
    }
    let best = out.best_trace();
    if let Some(p) = &a.best {
        let w = BufWriter::new(File::create(p)?);
        match &best.best {
            SearchIterate::Radial(f) => detbound::io::write_json(w, &f.to_data())?,
            SearchIterate::Field(phi) => detbound::io::write_json(w, &phi.to_data())?,
        }
    }
    let traces = out
        .traces
        .iter()
        .map(|t| TraceSummary {
            restart: t.restart,
            seed: t.seed,
            status: t.status,
            iterations: t.records.last().map_or(0, |r| r.iter),
            best_value: t.best_value,
            final_energy: t.records.last().map_or(f64::NAN, |r| r.energy),
        })
        .collect();
    emit_json(
        cfg,
        &SearchSummary {
            grid_meta: cfg.grid_meta(),
            n: sc.n,
            radial: sc.radial,
            energy_cap: sc.energy_cap,
            restarts: sc.restarts,
            best_value: best.best_value,
            best_restart: best.restart,
            best_seed: best.seed,
            traces,
        },
    )
}
