//! Finite-difference stencils on uniform grids.
//!
//! Two operators are provided. [`StaggeredDiff`] maps node values to
//! derivatives at cell midpoints; its normal matrix `h·DᵀD` is the
//! discrete Dirichlet form used throughout the crate and has only the
//! constants in its kernel. [`NodeDiff`] is the collocated counterpart,
//! used for reporting derivatives at the nodes.

/// Fornberg weights for the `order`-th derivative at `x0` from samples at `xs`.
pub fn fornberg_weights(x0: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(n > order, "need more nodes than the derivative order");
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

#[derive(Debug, Clone)]
struct Row {
    start: usize,
    coeffs: Vec<f64>,
}

fn build_rows(nodes: usize, h: f64, width: usize, centers: impl Iterator<Item = f64>) -> Vec<Row> {
    centers
        .map(|x0| {
            // nearest window of `width` consecutive nodes around x0 (in index units)
            let lo = (x0 - (width as f64 - 1.0) / 2.0).round().max(0.0) as usize;
            let start = lo.min(nodes - width);
            let xs: Vec<f64> = (start..start + width).map(|k| k as f64).collect();
            let coeffs = fornberg_weights(x0, &xs, 1).into_iter().map(|c| c / h).collect();
            Row { start, coeffs }
        })
        .collect()
}

fn apply_rows(rows: &[Row], f: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|r| r.coeffs.iter().zip(&f[r.start..]).map(|(c, v)| c * v).sum())
        .collect()
}

/// First derivative at cell midpoints.
#[derive(Debug, Clone)]
pub struct StaggeredDiff {
    nodes: usize,
    h: f64,
    rows: Vec<Row>,
}

impl StaggeredDiff {
    /// `order` must be even; the stencil uses `order` nodes.
    pub fn new(nodes: usize, h: f64, order: usize) -> Self {
        assert!(order >= 2 && order.is_multiple_of(2) && nodes >= order);
        let rows = build_rows(nodes, h, order, (0..nodes - 1).map(|k| k as f64 + 0.5));
        Self { nodes, h, rows }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Half-bandwidth of `DᵀD`.
    pub fn half_bandwidth(&self) -> usize {
        self.rows[0].coeffs.len() - 1
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        debug_assert_eq!(f.len(), self.nodes);
        apply_rows(&self.rows, f)
    }

    /// `Dᵀ g` for midpoint data `g`.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes];
        for (r, gv) in self.rows.iter().zip(g) {
            for (j, c) in r.coeffs.iter().enumerate() {
                out[r.start + j] += c * gv;
            }
        }
        out
    }

    /// Discrete `∫ ḟ² dt`, midpoint rule on the staggered derivative.
    pub fn energy(&self, f: &[f64]) -> f64 {
        self.h * self.apply(f).iter().map(|d| d * d).sum::<f64>()
    }

    /// Gradient of [`Self::energy`] with respect to the node values: `2h DᵀD f`.
    pub fn energy_gradient(&self, f: &[f64]) -> Vec<f64> {
        let d = self.apply(f);
        self.apply_transpose(&d).into_iter().map(|v| 2.0 * self.h * v).collect()
    }

    /// Entries of `h DᵀD` as (row, col, value) triples with col ≤ row.
    pub(crate) fn normal_entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for r in &self.rows {
            for (a, ca) in r.coeffs.iter().enumerate() {
                for (b, cb) in r.coeffs.iter().enumerate().take(a + 1) {
                    out.push((r.start + a, r.start + b, self.h * ca * cb));
                }
            }
        }
        out
    }
}

/// First derivative at the nodes, one-sided near the edges.
#[derive(Debug, Clone)]
pub struct NodeDiff {
    rows: Vec<Row>,
}

impl NodeDiff {
    pub fn new(nodes: usize, h: f64, order: usize) -> Self {
        assert!(order >= 2 && order.is_multiple_of(2) && nodes > order);
        Self { rows: build_rows(nodes, h, order + 1, (0..nodes).map(|k| k as f64)) }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        apply_rows(&self.rows, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_classic_central_weights() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 1);
        assert!((w[0] + 0.5).abs() < 1e-15 && w[1].abs() < 1e-15 && (w[2] - 0.5).abs() < 1e-15);
        let w = fornberg_weights(0.5, &[-1.0, 0.0, 1.0, 2.0], 1);
        let expect = [1.0 / 24.0, -27.0 / 24.0, 27.0 / 24.0, -1.0 / 24.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn staggered_is_exact_on_polynomials_of_low_degree() {
        let n = 40;
        let h = 0.1;
        let d = StaggeredDiff::new(n, h, 6);
        let f: Vec<f64> = (0..n).map(|k| (k as f64 * h).powi(5)).collect();
        let mids = d.apply(&f);
        for (k, v) in mids.iter().enumerate() {
            let x = (k as f64 + 0.5) * h;
            assert!((v - 5.0 * x.powi(4)).abs() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let n = 30;
        let d = StaggeredDiff::new(n, 0.3, 6);
        let f: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin()).collect();
        let g: Vec<f64> = (0..n - 1).map(|k| (k as f64 * 0.11).cos()).collect();
        let lhs: f64 = d.apply(&f).iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = d.apply_transpose(&g).iter().zip(&f).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_mode_carries_energy() {
        let n = 64;
        let d = StaggeredDiff::new(n, 0.5, 6);
        let f: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(d.energy(&f) > 1.0);
        let c = vec![3.0; n];
        assert!(d.energy(&c).abs() < 1e-20);
    }

    #[test]
    fn node_diff_matches_cosine_derivative() {
        let n = 200;
        let h = 0.05;
        let d = NodeDiff::new(n, h, 6);
        let f: Vec<f64> = (0..n).map(|k| (k as f64 * h).cos()).collect();
        for (k, v) in d.apply(&f).iter().enumerate() {
            assert!((v + (k as f64 * h).sin()).abs() < 1e-7, "k = {k}");
        }
    }
}
