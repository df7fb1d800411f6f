//! Strong Wolfe line search (bracketing phase followed by zoom with cubic
//! interpolation).

pub(crate) struct Trial {
    pub alpha: f64,
    pub f: f64,
    pub g: Vec<f64>,
}

pub(crate) enum Outcome {
    /// A step satisfying both Wolfe conditions.
    Accepted(Trial),
    /// No Wolfe step was found; carries the lowest trial below `f0`, if any.
    Failed(Option<Trial>),
}

pub(crate) struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
    pub max_evals: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, or
/// `None` if it does not exist.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Search along `d` from `x` (with `f0 = f(x)`, `dphi0 = ∇f(x)·d < 0`).
pub(crate) fn strong_wolfe<F>(
    eval: &mut F,
    x: &[f64],
    d: &[f64],
    f0: f64,
    dphi0: f64,
    alpha0: f64,
    p: &WolfeParams,
) -> Outcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut evals = 0usize;
    let mut best: Option<Trial> = None;
    let mut point = |alpha: f64, evals: &mut usize, best: &mut Option<Trial>| -> (f64, f64, Vec<f64>) {
        *evals += 1;
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        let (f, g) = eval(&xt);
        let dphi = dot(&g, d);
        if f.is_finite() && f < f0 && best.as_ref().is_none_or(|b| f < b.f) {
            *best = Some(Trial {
                alpha,
                f,
                g: g.clone(),
            });
        }
        (f, dphi, g)
    };

    let armijo = |alpha: f64, f: f64| f <= f0 + p.c1 * alpha * dphi0;
    let curvature = |dphi: f64| dphi.abs() <= -p.c2 * dphi0;

    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, f0, dphi0);
    let mut alpha = alpha0;
    let (mut lo, mut hi);
    let (mut f_lo, mut d_lo, mut f_hi, mut d_hi);
    loop {
        let (f, dphi, g) = point(alpha, &mut evals, &mut best);
        if !f.is_finite() || !armijo(alpha, f) || (a_prev > 0.0 && f >= f_prev) {
            lo = a_prev;
            f_lo = f_prev;
            d_lo = d_prev;
            hi = alpha;
            f_hi = f;
            d_hi = dphi;
            break;
        }
        if curvature(dphi) {
            return Outcome::Accepted(Trial { alpha, f, g });
        }
        if dphi >= 0.0 {
            lo = alpha;
            f_lo = f;
            d_lo = dphi;
            hi = a_prev;
            f_hi = f_prev;
            d_hi = d_prev;
            break;
        }
        if evals >= p.max_evals {
            return Outcome::Failed(best);
        }
        a_prev = alpha;
        f_prev = f;
        d_prev = dphi;
        alpha *= 4.0;
    }

    // zoom: lo satisfies Armijo and has the lowest f seen in the bracket
    while evals < p.max_evals {
        let (a, b) = (lo.min(hi), lo.max(hi));
        let width = b - a;
        if width <= 1e-16 * b.max(1e-300) {
            break;
        }
        let mut t = if f_hi.is_finite() {
            cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi).unwrap_or(0.5 * (lo + hi))
        } else {
            0.5 * (lo + hi)
        };
        // keep the trial well inside the bracket
        let margin = 0.1 * width;
        if !(t > a + margin && t < b - margin) {
            t = 0.5 * (a + b);
        }
        let (f, dphi, g) = point(t, &mut evals, &mut best);
        if !f.is_finite() || !armijo(t, f) || f >= f_lo {
            hi = t;
            f_hi = f;
            d_hi = dphi;
        } else {
            if curvature(dphi) {
                return Outcome::Accepted(Trial { alpha: t, f, g });
            }
            if dphi * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
                d_hi = d_lo;
            }
            lo = t;
            f_lo = f;
            d_lo = dphi;
        }
    }
    Outcome::Failed(best)
}
