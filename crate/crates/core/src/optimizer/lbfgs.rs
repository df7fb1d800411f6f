//! Limited-memory BFGS minimization (two-loop recursion).

use std::collections::VecDeque;

use super::line_search::{strong_wolfe, Outcome, WolfeParams};
use super::TerminationReason;

pub(crate) struct Settings {
    pub memory: usize,
    pub max_iterations: usize,
    pub grad_tolerance: f64,
    pub wolfe: WolfeParams,
    /// Per-variable divisors applied to the gradient before the
    /// convergence test, so the tolerance is unit independent.
    pub grad_units: Option<Vec<f64>>,
}

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `f` at the start point and after every accepted step.
    pub trajectory: Vec<f64>,
    pub reason: TerminationReason,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// `−H·g` by the two-loop recursion with initial scaling `s·y / y·y`.
fn direction(mem: &VecDeque<Pair>, g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for p in mem.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        for (qi, yi) in q.iter_mut().zip(&p.y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some(p) = mem.back() {
        let gamma = dot(&p.s, &p.y) / dot(&p.y, &p.y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (p, a) in mem.iter().zip(alphas.iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        for (qi, si) in q.iter_mut().zip(&p.s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

pub(crate) fn minimize<F>(mut eval: F, x0: Vec<f64>, st: &Settings) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut evaluations = 0usize;
    let mut counted = |x: &[f64]| {
        evaluations += 1;
        eval(x)
    };
    let converged = |g: &[f64]| -> bool {
        let m = match &st.grad_units {
            Some(u) => g.iter().zip(u).fold(0.0f64, |m, (gi, ui)| m.max((gi / ui).abs())),
            None => g.iter().fold(0.0f64, |m, gi| m.max(gi.abs())),
        };
        m < st.grad_tolerance
    };

    let mut x = x0;
    let (mut f, mut g) = counted(&x);
    let mut trajectory = vec![f];
    let mut mem: VecDeque<Pair> = VecDeque::with_capacity(st.memory);
    let mut iterations = 0;
    let reason = loop {
        if converged(&g) {
            break TerminationReason::Converged;
        }
        if iterations >= st.max_iterations {
            break TerminationReason::MaxIterations;
        }
        let mut d = direction(&mem, &g);
        let mut dphi = dot(&g, &d);
        if !(dphi < 0.0) {
            mem.clear();
            d = g.iter().map(|v| -v).collect();
            dphi = dot(&g, &d);
        }
        let alpha0 = if mem.is_empty() {
            let xn = norm(&x);
            let dn = norm(&d);
            if xn > 0.0 {
                0.1 * xn / dn
            } else {
                1.0 / dn
            }
        } else {
            1.0
        };
        let mut outcome = strong_wolfe(&mut counted, &x, &d, f, dphi, alpha0, &st.wolfe);
        if matches!(outcome, Outcome::Failed(_)) && !mem.is_empty() {
            // retry once along steepest descent with fresh memory
            mem.clear();
            d = g.iter().map(|v| -v).collect();
            dphi = dot(&g, &d);
            let xn = norm(&x);
            let dn = norm(&d);
            let a0 = if xn > 0.0 { 0.1 * xn / dn } else { 1.0 / dn };
            outcome = strong_wolfe(&mut counted, &x, &d, f, dphi, a0, &st.wolfe);
        }
        let (trial, accepted) = match outcome {
            Outcome::Accepted(t) => (t, true),
            Outcome::Failed(Some(t)) => (t, false),
            Outcome::Failed(None) => break TerminationReason::LineSearchFailure,
        };
        let s: Vec<f64> = d.iter().map(|di| trial.alpha * di).collect();
        let y: Vec<f64> = trial.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        f = trial.f;
        g = trial.g;
        iterations += 1;
        trajectory.push(f);
        if !accepted {
            break TerminationReason::LineSearchFailure;
        }
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if mem.len() == st.memory {
                mem.pop_front();
            }
            mem.push_back(Pair { rho: 1.0 / sy, s, y });
        }
    };
    Minimum {
        x,
        iterations,
        trajectory,
        reason,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(max_iterations: usize) -> Settings {
        Settings {
            memory: 10,
            max_iterations,
            grad_tolerance: 1e-10,
            wolfe: WolfeParams {
                c1: 1e-4,
                c2: 0.9,
                max_evals: 40,
            },
            grad_units: None,
        }
    }

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let mut f = 0.0;
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() - 1 {
            let a = x[i + 1] - x[i] * x[i];
            let b = 1.0 - x[i];
            f += 100.0 * a * a + b * b;
            g[i] += -400.0 * a * x[i] - 2.0 * b;
            g[i + 1] += 200.0 * a;
        }
        (f, g)
    }

    #[test]
    fn solves_rosenbrock() {
        let m = minimize(rosenbrock, vec![-1.2, 1.0, -0.5, 0.8], &settings(500));
        assert!(matches!(m.reason, TerminationReason::Converged), "{:?}", m.reason);
        for xi in &m.x {
            assert!((xi - 1.0).abs() < 1e-8);
        }
        for w in m.trajectory.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn budget_is_respected() {
        let m = minimize(rosenbrock, vec![-1.2, 1.0], &settings(3));
        assert_eq!(m.iterations, 3);
        assert!(matches!(m.reason, TerminationReason::MaxIterations));
    }

    #[test]
    fn starts_at_optimum() {
        let m = minimize(rosenbrock, vec![1.0, 1.0], &settings(10));
        assert_eq!(m.iterations, 0);
        assert!(matches!(m.reason, TerminationReason::Converged));
    }
}
