//! Finite-difference derivative estimates.

use std::ops::{Div, Sub};

/// `1e-6·max(1, |x|)`.
pub fn default_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Central difference `(f(x+h) − f(x−h))/(2h)` for scalar or matrix valued
/// `f`.
pub fn finite_difference<V, F>(f: F, x: f64, h: f64) -> V
where
    F: Fn(f64) -> V,
    V: Sub<Output = V> + Div<f64, Output = V>,
{
    assert!(h > 0.0, "step must be positive");
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central difference with the default step.
pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    finite_difference(f, x, default_step(x))
}

/// Derivative estimate with its error bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ridders {
    pub value: f64,
    pub error: f64,
}

/// Richardson-extrapolated central differences (Ridders' method), starting
/// from step `h0` and shrinking it by 1.4 per stage. Accurate to roughly
/// machine precision for smooth `f` when `h0` is comparable to the scale on
/// which `f` varies.
pub fn ridders<F: Fn(f64) -> f64>(f: F, x: f64, h0: f64) -> Ridders {
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    const NTAB: usize = 12;
    const SAFE: f64 = 2.0;
    assert!(h0 > 0.0, "step must be positive");
    let mut a = [[0.0f64; NTAB]; NTAB];
    let mut h = h0;
    a[0][0] = (f(x + h) - f(x - h)) / (2.0 * h);
    let mut best = Ridders {
        value: a[0][0],
        error: f64::INFINITY,
    };
    for i in 1..NTAB {
        h /= CON;
        a[0][i] = (f(x + h) - f(x - h)) / (2.0 * h);
        let mut fac = CON2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let err = (a[j][i] - a[j - 1][i]).abs().max((a[j][i] - a[j - 1][i - 1]).abs());
            if err <= best.error {
                best = Ridders {
                    value: a[j][i],
                    error: err,
                };
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= SAFE * best.error {
            break;
        }
    }
    best
}

/// Ridders estimate of every component of `∇f` at `x`. Each component is
/// started from `h0`, `h0/10` and `h0/100`; the estimate with the smallest
/// error bound is kept.
pub fn gradient_ridders<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h0: f64) -> Vec<Ridders> {
    (0..x.len())
        .map(|i| {
            let probe = |t: f64| {
                let mut w = x.to_vec();
                w[i] = t;
                f(&w)
            };
            [h0, 0.1 * h0, 0.01 * h0]
                .into_iter()
                .map(|h| ridders(probe, x[i], h))
                .min_by(|a, b| a.error.total_cmp(&b.error))
                .unwrap()
        })
        .collect()
}
