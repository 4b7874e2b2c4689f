//! Command-line front end: argument parsing, configuration and result emission.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod selftest;

pub use config::RunConfig;

/// Exit status for a domain failure (invalid input data, divergent integral, ...).
pub const EXIT_DOMAIN: i32 = 1;
/// Exit status for malformed invocations or configuration.
pub const EXIT_USAGE: i32 = 2;

/// An error attributable to the invocation rather than the computation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "detbound", version, about = "Determinant anomalies on the projective line and the circle")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Half-width T of the t-window [-T, T].
    #[arg(long, global = true)]
    pub half_width: Option<f64>,
    #[arg(long, global = true)]
    pub t_nodes: Option<usize>,
    #[arg(long, global = true)]
    pub theta_nodes: Option<usize>,
    #[arg(long, global = true)]
    pub stencil_order: Option<usize>,
    #[arg(long, global = true)]
    pub circle_nodes: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate A(φ) for a profile family or a CSV profile.
    Anomaly(commands::AnomalyArgs),
    /// Envelope-bound constants, coefficient sweep, reports and calibration.
    Lemma3(commands::Lemma3Args),
    /// Monotone envelope of a sampled half-line function.
    Rearrange(commands::RearrangeArgs),
    /// Moser–Trudinger deficit and Fontana functional.
    MtCheck(commands::MtArgs),
    /// Determinant of a weighted Laplacian on the circle.
    CircleDet(commands::CircleArgs),
    /// Gradient ascent for sup A.
    Search(commands::SearchArgs),
    /// Run the acceptance suite.
    Selftest(commands::SelftestArgs),
}

impl GlobalArgs {
    /// Loads the configuration file (if any) and applies flag overrides.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.half_width {
            cfg.grid.half_width = v;
        }
        if let Some(v) = self.t_nodes {
            cfg.grid.t_nodes = v;
        }
        if let Some(v) = self.theta_nodes {
            cfg.grid.theta_nodes = v;
        }
        if let Some(v) = self.stencil_order {
            cfg.grid.stencil_order = v;
        }
        if let Some(v) = self.circle_nodes {
            cfg.circle_nodes = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` (program name first), runs one subcommand and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let result = cli.global.resolve().and_then(|cfg| commands::dispatch(&cli.command, &cfg));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_DOMAIN
            }
        }
    }
}
