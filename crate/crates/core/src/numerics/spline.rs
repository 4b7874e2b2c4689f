//! Periodic cubic spline on a uniform grid over `[0, 1)`.

#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    values: Vec<f64>,
    // second derivatives at the nodes
    m: Vec<f64>,
    h: f64,
}

impl PeriodicSpline {
    pub fn new(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n >= 3);
        let h = 1.0 / n as f64;
        // cyclic tridiagonal system: m[i-1] + 4 m[i] + m[i+1] = 6 (y[i+1] - 2y[i] + y[i-1]) / h²
        let rhs: Vec<f64> = (0..n)
            .map(|i| 6.0 * (values[(i + 1) % n] - 2.0 * values[i] + values[(i + n - 1) % n]) / (h * h))
            .collect();
        let m = solve_cyclic(n, &rhs);
        Self { values: values.to_vec(), m, h }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let s = x.rem_euclid(1.0) / self.h;
        let i = (s.floor() as usize).min(n - 1);
        let t = s - i as f64;
        let j = (i + 1) % n;
        let (y0, y1, m0, m1) = (self.values[i], self.values[j], self.m[i], self.m[j]);
        let h2 = self.h * self.h;
        let a = 1.0 - t;
        a * y0 + t * y1 + ((a * a * a - a) * m0 + (t * t * t - t) * m1) * h2 / 6.0
    }
}

/// Solves the circulant system with stencil (1, 4, 1) via Sherman–Morrison.
fn solve_cyclic(n: usize, rhs: &[f64]) -> Vec<f64> {
    let (a, b, c) = (1.0, 4.0, 1.0);
    let gamma = -b;
    let mut diag = vec![b; n];
    diag[0] = b - gamma;
    diag[n - 1] = b - a * c / gamma;
    let x = solve_tridiag(a, &diag, c, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = c;
    let z = solve_tridiag(a, &diag, c, &u);
    let fact = (x[0] + a * x[n - 1] / gamma) / (1.0 + z[0] + a * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn solve_tridiag(sub: f64, diag: &[f64], sup: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = sup / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub * cp[i - 1];
        cp[i] = sup / denom;
        dp[i] = (rhs[i] - sub * dp[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}
