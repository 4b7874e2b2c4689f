use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quadrature::trapezoid_weights;
use crate::numerics::stencil::{NodeDiff, StaggeredDiff};

use super::rho;

/// Grid parameters shared by every evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Half-width `T` of the truncated window `[-T, T]` in `t`.
    pub half_width: f64,
    pub t_nodes: usize,
    pub theta_nodes: usize,
    /// Order of the staggered derivative stencil (even, 2..=12).
    pub stencil_order: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { half_width: 40.0, t_nodes: 512, theta_nodes: 128, stencil_order: 6 }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width >= 20.0 && self.half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half width {} < 20", self.half_width)));
        }
        if self.t_nodes < 16 {
            return Err(Error::InvalidGrid(format!("{} t-nodes < 16", self.t_nodes)));
        }
        if self.theta_nodes < 4 {
            return Err(Error::InvalidGrid(format!("{} θ-nodes < 4", self.theta_nodes)));
        }
        if self.stencil_order < 2 || self.stencil_order > 12 || self.stencil_order % 2 == 1 {
            return Err(Error::InvalidGrid(format!("unsupported stencil order {}", self.stencil_order)));
        }
        if self.t_nodes <= self.stencil_order {
            return Err(Error::InvalidGrid("fewer t-nodes than stencil points".into()));
        }
        Ok(())
    }

    pub fn t_grid(&self) -> Result<Arc<TGrid>> {
        self.validate()?;
        Ok(Arc::new(TGrid::new(self.half_width, self.t_nodes, self.stencil_order)?))
    }
}

/// Uniform grid on `[-T, T]` with its quadrature weights and derivative stencils.
#[derive(Debug, Clone)]
pub struct TGrid {
    half_width: f64,
    points: Vec<f64>,
    h: f64,
    weights: Vec<f64>,
    rho: Vec<f64>,
    rho_mass: f64,
    order: usize,
    stag: StaggeredDiff,
    node_diff: NodeDiff,
}

impl TGrid {
    pub fn new(half_width: f64, nodes: usize, order: usize) -> Result<Self> {
        GridConfig { half_width, t_nodes: nodes, theta_nodes: 4, stencil_order: order }.validate()?;
        let h = 2.0 * half_width / (nodes - 1) as f64;
        let points: Vec<f64> = (0..nodes)
            .map(|k| if k == nodes - 1 { half_width } else { -half_width + k as f64 * h })
            .collect();
        let weights = trapezoid_weights(nodes, h);
        let rho: Vec<f64> = points.iter().map(|&t| rho(t)).collect();
        let rho_mass = weights.iter().zip(&rho).map(|(w, r)| w * r).sum();
        Ok(Self {
            half_width,
            points,
            h,
            weights,
            rho,
            rho_mass,
            order,
            stag: StaggeredDiff::new(nodes, h, order),
            node_diff: NodeDiff::new(nodes, h, order),
        })
    }

    /// Rebuilds a grid from explicit samples, which must be uniform and symmetric.
    pub fn from_points(points: &[f64], order: usize) -> Result<Self> {
        let n = points.len();
        if n < 16 {
            return Err(Error::InvalidGrid(format!("{n} nodes < 16")));
        }
        let t = points[n - 1];
        if (points[0] + t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::InvalidGrid("t-grid is not symmetric".into()));
        }
        let h = 2.0 * t / (n - 1) as f64;
        for (k, p) in points.iter().enumerate() {
            if k > 0 && p <= &points[k - 1] {
                return Err(Error::InvalidGrid("t-grid is not strictly increasing".into()));
            }
            if (p - (-t + k as f64 * h)).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::InvalidGrid("t-grid is not uniform".into()));
            }
        }
        Self::new(t, n, order)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Trapezoid weights for `∫ · dt`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `ρ` sampled on the grid.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Discrete `∫ ρ dt`, within round-off of one for `T ≥ 40`.
    pub fn rho_mass(&self) -> f64 {
        self.rho_mass
    }

    pub fn staggered(&self) -> &StaggeredDiff {
        &self.stag
    }

    pub fn node_derivative(&self, values: &[f64]) -> Vec<f64> {
        self.node_diff.apply(values)
    }

    pub fn config(&self, theta_nodes: usize) -> GridConfig {
        GridConfig { half_width: self.half_width, t_nodes: self.len(), theta_nodes, stencil_order: self.order }
    }
}
