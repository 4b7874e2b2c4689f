//! Small scalar helpers shared by the evaluators.

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln((e^d - 1) / d)`, continuous through `d = 0`.
pub fn log_exprel(d: f64) -> f64 {
    if d.abs() < 1e-8 {
        d / 2.0
    } else if d > 0.0 {
        d + (-(-d).exp_m1()).ln() - d.ln()
    } else {
        (-d.exp_m1()).ln() - (-d).ln()
    }
}

/// Numerically stable `ln Σ exp(x_i)`.
pub fn logsumexp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let v: Vec<f64> = terms.into_iter().collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Kahan-compensated sum, used where many tiny weights are accumulated.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in terms {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}
