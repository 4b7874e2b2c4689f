//! Run configuration: a JSON file overridable by flags.

use std::fs::File;
use std::path::{Path, PathBuf};

use detbound::geometry::GridConfig;
use detbound::optimizer::{LineSearch, SearchConfig};
use detbound::spectral::MonodromyConfig;
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// Search settings that are not fixed per invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    pub max_iters: usize,
    pub energy_cap: f64,
    pub restarts: usize,
    pub init_amplitude: f64,
    pub preconditioner_shift: f64,
    pub plateau_tol: f64,
    pub plateau_patience: usize,
    pub line_search: LineSearch,
}

impl Default for SearchOptions {
    fn default() -> Self {
        let d = SearchConfig::default();
        Self {
            max_iters: d.max_iters,
            energy_cap: d.energy_cap,
            restarts: 20,
            init_amplitude: d.init_amplitude,
            preconditioner_shift: d.preconditioner_shift,
            plateau_tol: d.plateau_tol,
            plateau_patience: d.plateau_patience,
            line_search: d.line_search,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    /// Samples of a circle metric built from a named family.
    pub circle_nodes: usize,
    pub monodromy: MonodromyConfig,
    pub seed: u64,
    pub search: SearchOptions,
    /// Result destination; stdout when absent.
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            circle_nodes: 256,
            monodromy: MonodromyConfig::default(),
            seed: 0,
            search: SearchOptions::default(),
            out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let file = File::open(path).map_err(|e| UsageError(format!("cannot open config {}: {e}", path.display())))?;
        detbound::io::read_json(file).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let usage = |msg: String| -> anyhow::Result<()> { Err(UsageError(msg).into()) };
        if let Err(e) = self.grid.validate() {
            return usage(e.to_string());
        }
        if self.grid.t_nodes > 1 << 16 || self.grid.theta_nodes > 1 << 12 {
            return usage("node counts above 65536 (t) or 4096 (θ) are not supported".into());
        }
        if !self.circle_nodes.is_power_of_two() || !(64..=1 << 16).contains(&self.circle_nodes) {
            return usage(format!("circle nodes {} must be a power of two in [64, 65536]", self.circle_nodes));
        }
        let m = &self.monodromy;
        if !(m.rtol > 0.0 && m.rtol <= 1e-4) || !(m.lambda0 > 0.0 && m.lambda0.is_finite()) || !(2..=30).contains(&m.levels) {
            return usage("monodromy needs 0 < rtol <= 1e-4, lambda0 > 0 and 2..=30 levels".into());
        }
        if let Err(e) = self.search_config(0, true).validate() {
            return usage(e.to_string());
        }
        Ok(())
    }

    pub fn search_config(&self, n: i32, radial: bool) -> SearchConfig {
        let s = &self.search;
        SearchConfig {
            n,
            radial,
            max_iters: s.max_iters,
            line_search: s.line_search.clone(),
            energy_cap: s.energy_cap,
            seed: self.seed,
            restarts: s.restarts,
            init_amplitude: s.init_amplitude,
            preconditioner_shift: s.preconditioner_shift,
            plateau_tol: s.plateau_tol,
            plateau_patience: s.plateau_patience,
            projection_shift: 0.0,
            grid: self.grid.clone(),
        }
    }

    pub fn grid_meta(&self) -> GridMeta {
        GridMeta {
            half_width: self.grid.half_width,
            t_nodes: self.grid.t_nodes,
            theta_nodes: self.grid.theta_nodes,
            stencil_order: self.grid.stencil_order,
            circle_nodes: self.circle_nodes,
            monodromy: self.monodromy,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Grid parameters embedded in every emitted result.
#[derive(Debug, Clone, Serialize)]
pub struct GridMeta {
    pub half_width: f64,
    pub t_nodes: usize,
    pub theta_nodes: usize,
    pub stencil_order: usize,
    pub circle_nodes: usize,
    pub monodromy: MonodromyConfig,
    pub seed: u64,
    pub version: &'static str,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: RunConfig = detbound::io::read_json(r#"{"seed": 5, "grid": {"t_nodes": 256}}"#.as_bytes()).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.grid.t_nodes, 256);
        assert_eq!(cfg.grid.theta_nodes, GridConfig::default().theta_nodes);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = RunConfig { circle_nodes: 100, ..RunConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.circle_nodes = 256;
        cfg.search.energy_cap = -1.0;
        assert!(cfg.validate().is_err());
        assert!(detbound::io::read_json::<_, RunConfig>(r#"{"sede": 5}"#.as_bytes()).is_err());
    }
}
