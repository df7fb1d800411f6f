#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    r.random_range(lo..hi)
}

/// Componentwise agreement: relative below `rel`, or absolute below `abs`
/// where the reference is itself tiny.
pub fn close(got: f64, want: f64, rel: f64, abs: f64) -> bool {
    let d = (got - want).abs();
    if want.abs() < abs {
        d < abs
    } else {
        d <= rel * want.abs()
    }
}

pub fn assert_close(got: f64, want: f64, rel: f64, abs: f64, what: &str) {
    assert!(close(got, want, rel, abs), "{what}: got {got:e}, want {want:e}");
}

use pulsegrad_core::oracles::gradient_ridders;
use pulsegrad_core::{
    grid_average, ControlBasis, GridSpec, OptimizationProblem, PulseShape, Target,
};

/// Random controls for `basis`: amplitudes around `scale`, phases anywhere.
pub fn random_shape(r: &mut ChaCha8Rng, basis: ControlBasis, n: usize, scale: f64, dt: f64) -> PulseShape {
    let arity = basis.arity();
    let mut c = Vec::with_capacity(n * arity);
    for _ in 0..n {
        for k in 0..arity {
            let phase = matches!(basis, ControlBasis::PhaseOnly { .. })
                || (basis.amplitude_slot().is_some() && k == 1);
            c.push(if phase {
                uniform(r, -3.2, 3.2)
            } else {
                scale * uniform(r, -1.0, 1.0)
            });
        }
    }
    PulseShape::from_flat(basis, &c, dt).unwrap()
}

pub fn small_grid() -> GridSpec {
    GridSpec {
        n_off: 3,
        bandwidth_hz: 20e3,
        n_rf: 2,
        b1_tolerance: 0.1,
    }
}

pub fn problem(basis: ControlBasis, n: usize, dt: f64, grid: GridSpec, target: Target) -> OptimizationProblem {
    OptimizationProblem::new(PulseShape::zeros(basis, n, dt).unwrap(), grid, target)
}

/// First violation of the FD agreement bounds, as `(index, analytic, fd)`.
pub fn fd_violation(p: &OptimizationProblem, shape: &PulseShape, h0: f64) -> Option<(usize, f64, f64)> {
    fd_violation_with_floor(p, shape, h0, 0.0)
}

/// As [`fd_violation`], but differences below `floor` always pass. Central
/// differences of an O(1) function with steps down to 1e-3 cannot resolve
/// much below ε/h ≈ 1e-13.
pub fn fd_violation_with_floor(
    p: &OptimizationProblem,
    shape: &PulseShape,
    h0: f64,
    floor: f64,
) -> Option<(usize, f64, f64)> {
    let (_, g) = grid_average(p, shape).unwrap();
    let x = shape.flat_controls();
    let f = |c: &[f64]| grid_average(p, &shape.with_flat_controls(c).unwrap()).unwrap().0;
    let fd = gradient_ridders(f, &x, h0);
    g.as_slice()
        .iter()
        .zip(&fd)
        .enumerate()
        .find(|(_, (a, r))| (**a - r.value).abs() > floor && !close(**a, r.value, 1e-7, 1e-8))
        .map(|(i, (a, r))| (i, *a, r.value))
}
