//! Fixtures shared by the benchmarks.

use std::f64::consts::TAU;

use pulsegrad_core::{
    ConstraintSpec, ControlBasis, GridSpec, OptimizationProblem, PulseShape, RotationParams, Target,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` digit parameters with every control in `[-2, 2)`.
pub fn random_params(n: usize, seed: u64) -> Vec<RotationParams> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| RotationParams::from_cartesian(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)))
        .collect()
}

/// Excitation over 6 kHz with ±10% B1, `n` digits of `dt` capped at 5 kHz.
pub fn excitation_problem(basis: ControlBasis, n: usize, dt: f64) -> OptimizationProblem {
    let grid = GridSpec {
        n_off: 11,
        bandwidth_hz: 6e3,
        n_rf: 3,
        b1_tolerance: 0.1,
    };
    let template = PulseShape::zeros(basis, n, dt).expect("n > 0");
    let p = OptimizationProblem::new(template, grid, Target::excitation());
    if basis.is_reduced() {
        p.with_constraint(ConstraintSpec::amplitude(TAU * dt * 5e3))
    } else {
        p
    }
}

/// Random controls for `basis`, amplitudes up to `scale`.
pub fn random_shape(basis: ControlBasis, n: usize, dt: f64, scale: f64, seed: u64) -> PulseShape {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..n * basis.arity()).map(|_| scale * r.random_range(-1.0..1.0)).collect();
    PulseShape::from_flat(basis, &c, dt).expect("arity matches")
}
