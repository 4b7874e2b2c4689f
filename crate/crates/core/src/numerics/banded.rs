//! Symmetric positive-definite banded systems.

use crate::error::{Error, Result};

/// Lower band storage: `band[i][j]` holds entry `(i, i - j)` for `j ≤ bw`.
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    band: Vec<Vec<f64>>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, band: vec![vec![0.0; bw + 1]; n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `v` at `(row, col)` (and its mirror); requires `col ≤ row`.
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        debug_assert!(col <= row && row - col <= self.bw);
        self.band[row][row - col] += v;
    }

    pub fn add_diagonal(&mut self, diag: &[f64]) {
        for (i, d) in diag.iter().enumerate() {
            self.band[i][0] += d;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for j in 0..=self.bw.min(i) {
                let a = self.band[i][j];
                y[i] += a * x[i - j];
                if j > 0 {
                    y[i - j] += a * x[i];
                }
            }
        }
        y
    }

    /// In-place banded Cholesky factorization.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.band.clone();
        for i in 0..n {
            for j in (0..=bw.min(i)).rev() {
                // entry (i, c) with c = i - j
                let c = i - j;
                let mut s = l[i][j];
                let kmin = i.saturating_sub(bw).max(c.saturating_sub(bw));
                for k in kmin..c {
                    s -= l[i][i - k] * l[c][c - k];
                }
                if j == 0 {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Inconsistent(format!(
                            "banded matrix not positive definite at pivot {i}"
                        )));
                    }
                    l[i][0] = s.sqrt();
                } else {
                    l[i][j] = s / l[c][0];
                }
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<Vec<f64>>,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for j in 1..=bw.min(i) {
                s -= self.l[i][j] * y[i - j];
            }
            y[i] = s / self.l[i][0];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in 1..=bw.min(n - 1 - i) {
                s -= self.l[i + j][j] * y[i + j];
            }
            y[i] = s / self.l[i][0];
        }
        y
    }
}
