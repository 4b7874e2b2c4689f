//! Nonincreasing rearrangement on the half-line and the monotone envelope
//! `u(t) = f(0) + ∫₀ᵗ ḟ*(s) ds`.
//!
//! Rearrangement acts on piecewise-constant data: cells are sorted by value
//! together with their widths, which is exactly measure preserving. Sampled
//! functions are reduced to cells first, so every integral identity holds to
//! round-off for the cell representation.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Largest admissible `|g|` at the end of a sampled window, relative to `sup |g|`.
const TAIL_TOLERANCE: f64 = 1e-4;

/// Node samples of a function on `[0, S]`, interpolated linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineFunction {
    s_grid: Vec<f64>,
    values: Vec<f64>,
}

impl HalfLineFunction {
    pub fn new(s_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if s_grid.len() < 2 || s_grid.len() != values.len() {
            return Err(Error::InvalidArgument("need at least two nodes and one value per node".into()));
        }
        if s_grid[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("half-line grid starts at {} instead of 0", s_grid[0])));
        }
        if s_grid.windows(2).any(|w| !(w[1] > w[0])) || !s_grid.last().unwrap().is_finite() {
            return Err(Error::InvalidGrid("half-line grid is not strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite value on the half-line".into()));
        }
        Ok(Self { s_grid, values })
    }

    pub fn from_fn(s_grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = s_grid.iter().map(|&s| f(s)).collect();
        Self::new(s_grid, values)
    }

    /// Uniform grid with `nodes` points on `[0, end]`.
    pub fn uniform_grid(end: f64, nodes: usize) -> Vec<f64> {
        let h = end / (nodes - 1) as f64;
        (0..nodes).map(|k| if k == nodes - 1 { end } else { k as f64 * h }).collect()
    }

    pub fn s_grid(&self) -> &[f64] {
        &self.s_grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn end(&self) -> f64 {
        *self.s_grid.last().unwrap()
    }

    /// Linear interpolation; constant extrapolation past the last node.
    pub fn eval(&self, s: f64) -> f64 {
        let g = &self.s_grid;
        if s <= 0.0 {
            return self.values[0];
        }
        if s >= self.end() {
            return *self.values.last().unwrap();
        }
        let k = g.partition_point(|&x| x <= s) - 1;
        let w = (s - g[k]) / (g[k + 1] - g[k]);
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    /// Slopes of the linear interpolant, one per cell.
    pub fn cell_slopes(&self) -> StepFunction {
        let values = self
            .s_grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(s, v)| (v[1] - v[0]) / (s[1] - s[0]))
            .collect();
        StepFunction { edges: self.s_grid.clone(), values }
    }

    /// Cell averages of the linear interpolant.
    pub fn cell_means(&self) -> StepFunction {
        let values = self.values.windows(2).map(|v| 0.5 * (v[0] + v[1])).collect();
        StepFunction { edges: self.s_grid.clone(), values }
    }

    /// `∫₀^S g²` of the linear interpolant (exact).
    pub fn l2_squared(&self) -> f64 {
        self.s_grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(s, v)| (s[1] - s[0]) * (v[0] * v[0] + v[0] * v[1] + v[1] * v[1]) / 3.0)
            .sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["s", "value"])?;
        for (s, v) in self.s_grid.iter().zip(&self.values) {
            wtr.write_record([format!("{s:e}"), format!("{v:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads two columns `s,value`; a non-numeric first row is treated as a header.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
        let (mut s, mut v) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::InvalidArgument("half-line CSV needs columns s,value".into()));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    s.push(a);
                    v.push(b);
                }
                _ if s.is_empty() => continue,
                _ => return Err(Error::InvalidArgument(format!("unparsable CSV row {rec:?}"))),
            }
        }
        Self::new(s, v)
    }
}

/// A piecewise-constant function: `values[i]` on `[edges[i], edges[i+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    edges: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(edges: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || edges.len() != values.len() + 1 {
            return Err(Error::InvalidArgument("a step function needs one more edge than values".into()));
        }
        if edges[0] != 0.0 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("step edges must start at 0 and increase strictly".into()));
        }
        if values.iter().chain(&edges).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite step data".into()));
        }
        Ok(Self { edges, values })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(|w| w[1] - w[0])
    }

    pub fn end(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    /// Value at `s`, right-continuous; zero outside `[0, end)`.
    pub fn eval(&self, s: f64) -> f64 {
        if s < 0.0 || s >= self.end() {
            return 0.0;
        }
        self.values[self.edges.partition_point(|&e| e <= s) - 1]
    }

    /// `∫ g^k`.
    pub fn integral_pow(&self, k: i32) -> f64 {
        self.widths().zip(&self.values).map(|(w, v)| w * v.powi(k)).sum()
    }

    /// Distribution function `|{s : g(s) > y}|`.
    pub fn distribution(&self, y: f64) -> f64 {
        self.widths().zip(&self.values).filter(|(_, v)| **v > y).map(|(w, _)| w).sum()
    }

    /// `∫₀ᵗ g`.
    pub fn partial_integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (e, v) in self.edges.windows(2).zip(&self.values) {
            if t <= e[0] {
                break;
            }
            acc += (t.min(e[1]) - e[0]) * v;
        }
        acc
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }

    /// Plot-ready CSV: two rows `(edge, value)` per cell.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["s", "value"])?;
        for (e, v) in self.edges.windows(2).zip(&self.values) {
            wtr.write_record([format!("{:e}", e[0]), format!("{v:e}")])?;
            wtr.write_record([format!("{:e}", e[1]), format!("{v:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn tail_check(g: &StepFunction) -> Result<()> {
    let sup = g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let last = g.values.last().unwrap().abs();
    if last > TAIL_TOLERANCE * sup {
        return Err(Error::Divergence(format!(
            "|g| = {last:e} at s = {} has not decayed (sup {sup:e}); not integrable on the half-line",
            g.end()
        )));
    }
    Ok(())
}

/// Nonincreasing rearrangement of a step function, which vanishes past its last edge.
///
/// Cells are sorted by value, largest first, carrying their widths; ties keep
/// their original order. When all widths are equal the original edges are
/// reused verbatim.
pub fn decreasing_rearrangement(g: &StepFunction) -> Result<StepFunction> {
    let widths: Vec<f64> = g.widths().collect();
    let mut order: Vec<usize> = (0..g.values.len()).collect();
    order.sort_by(|&a, &b| g.values[b].total_cmp(&g.values[a]));
    let values: Vec<f64> = order.iter().map(|&i| g.values[i]).collect();
    let w0 = widths[0];
    let uniform = widths.iter().all(|w| (w - w0).abs() <= 1e-12 * w0);
    let edges = if uniform {
        g.edges.clone()
    } else {
        let mut edges = Vec::with_capacity(g.edges.len());
        edges.push(0.0);
        let mut acc = 0.0;
        for &i in &order {
            acc += widths[i];
            edges.push(acc);
        }
        *edges.last_mut().unwrap() = g.end();
        // Tiny cells may collapse under round-off; keep edges strictly increasing.
        for k in 1..edges.len() {
            if edges[k] <= edges[k - 1] {
                edges[k] = f64::from_bits(edges[k - 1].to_bits() + 1);
            }
        }
        edges
    };
    Ok(StepFunction { edges, values })
}

/// Rearrangement of sampled data through its cell averages.
///
/// The samples stand for a function on the whole half-line, so they must have
/// decayed by the end of the window.
pub fn rearrange_samples(g: &HalfLineFunction) -> Result<StepFunction> {
    let cells = g.cell_means();
    tail_check(&cells)?;
    decreasing_rearrangement(&cells)
}

/// The comparison function of the rearrangement lemma.
#[derive(Debug, Clone)]
pub struct Envelope {
    /// `u` at the breakpoints of `udot`; exactly piecewise linear in between.
    pub u: HalfLineFunction,
    /// `u̇ = ḟ*`, nonincreasing.
    pub udot: StepFunction,
    /// `ḟ` as cell slopes of the input.
    pub fdot: StepFunction,
}

impl Envelope {
    pub fn energy(&self) -> f64 {
        self.udot.integral_pow(2)
    }
}

/// `u(t) = f(0) + ∫₀ᵗ ḟ*(s) ds` for the linear interpolant of `f`.
///
/// `ḟ` is the exact (cellwise constant) derivative of the interpolant, so
/// `u(0) = f(0)`, `∫u̇² = ∫ḟ²`, `u(S) = f(S)` and `u ≥ f` hold up to round-off.
pub fn monotone_envelope(f: &HalfLineFunction) -> Result<Envelope> {
    let fdot = f.cell_slopes();
    tail_check(&fdot)?;
    let udot = decreasing_rearrangement(&fdot)?;
    let mut u = Vec::with_capacity(udot.edges.len());
    u.push(f.values[0]);
    let mut acc = f.values[0];
    for (w, v) in udot.widths().zip(&udot.values) {
        acc += w * v;
        u.push(acc);
    }
    let u = HalfLineFunction::new(udot.edges.clone(), u)?;
    Ok(Envelope { u, udot, fdot })
}
