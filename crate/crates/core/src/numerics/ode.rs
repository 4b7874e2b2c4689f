//! Dormand–Prince 5(4) integrator with adaptive step control.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub initial_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 200_000, initial_step: 1e-3 }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = rhs(x, y)` from `x0` to `x1`, returning `y(x1)`.
pub fn integrate<const D: usize, F>(rhs: F, x0: f64, x1: f64, y0: [f64; D], opts: &OdeOptions) -> Result<[f64; D]>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let mut x = x0;
    let mut y = y0;
    let span = x1 - x0;
    let mut h = opts.initial_step.min(span.abs()) * span.signum();
    let mut k = [[0.0; D]; 7];
    k[0] = rhs(x, &y);
    let mut last_err = 0.0;
    for _ in 0..opts.max_steps {
        if (x1 - x) * span.signum() <= 0.0 {
            return Ok(y);
        }
        if (x + h - x1) * span.signum() > 0.0 {
            h = x1 - x;
        }
        for s in 1..7 {
            let mut ys = y;
            for (d, yd) in ys.iter_mut().enumerate() {
                for (j, a) in A[s].iter().enumerate().take(s) {
                    *yd += h * a * k[j][d];
                }
            }
            k[s] = rhs(x + C[s] * h, &ys);
        }
        let mut y5 = y;
        let mut err = 0.0_f64;
        for d in 0..D {
            let mut inc5 = 0.0;
            let mut inc4 = 0.0;
            for s in 0..7 {
                inc5 += B5[s] * k[s][d];
                inc4 += B4[s] * k[s][d];
            }
            y5[d] = y[d] + h * inc5;
            let sc = opts.atol + opts.rtol * y[d].abs().max(y5[d].abs());
            err = err.max((h * (inc5 - inc4)).abs() / sc);
        }
        last_err = err;
        if err <= 1.0 {
            x += h;
            y = y5;
            // first-same-as-last
            k[0] = k[6];
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < 1e-14 * span.abs() {
            return Err(Error::Accuracy {
                requested: opts.rtol,
                achieved: last_err * opts.rtol,
                reason: "step size underflow".into(),
            });
        }
    }
    Err(Error::Accuracy {
        requested: opts.rtol,
        achieved: last_err * opts.rtol,
        reason: format!("exceeded {} steps", opts.max_steps),
    })
}
