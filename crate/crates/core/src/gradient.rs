//! Exact gradients of the PP and UR qualities and their grid averages.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::Result;
use crate::params::{Drive, ResolvedPulse};
use crate::problem::{OptimizationProblem, Target};
use crate::derivatives::{pp_sensitivity_with, ur_sensitivity};
use crate::propagate::{cost_pp, cost_ur, propagate_pp, propagate_ur};
use crate::rotation::Quaternion;
use crate::shape::ControlBasis;

/// Per-digit partial derivatives, digit-major, `arity` values per digit.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientRecord {
    arity: usize,
    values: Vec<f64>,
}

impl GradientRecord {
    pub fn zeros(arity: usize, n_digits: usize) -> Self {
        GradientRecord {
            arity,
            values: vec![0.0; arity * n_digits],
        }
    }

    pub fn from_vec(arity: usize, values: Vec<f64>) -> Self {
        assert!(arity > 0 && values.len() % arity == 0);
        GradientRecord { arity, values }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn n_digits(&self) -> usize {
        self.values.len() / self.arity
    }

    pub fn digit(&self, j: usize) -> &[f64] {
        &self.values[j * self.arity..(j + 1) * self.arity]
    }

    pub fn digit_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.arity..(j + 1) * self.arity]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn scale(&mut self, k: f64) {
        self.values.iter_mut().for_each(|v| *v *= k);
    }

    pub fn add_assign(&mut self, other: &GradientRecord) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Write the derivatives with respect to one digit's controls, given the
/// sensitivity `g` (gradient with respect to the rotation vector).
#[inline]
fn digit_gradient(
    basis: ControlBasis,
    drive: &Drive,
    v: &Vector3<f64>,
    g: &Vector3<f64>,
    b1_scale: f64,
    out: &mut [f64],
) {
    match basis {
        ControlBasis::CartesianXY => {
            out[0] = b1_scale * g.x;
            out[1] = b1_scale * g.y;
        }
        ControlBasis::CartesianXYZ => {
            out[0] = b1_scale * g.x;
            out[1] = b1_scale * g.y;
            out[2] = g.z;
        }
        ControlBasis::PhaseOnly { .. } => {
            out[0] = g.y * v.x - g.x * v.y;
        }
        _ => {
            let (s, c) = drive.v.sin_cos();
            out[0] = b1_scale * (g.x * c + g.y * s);
            out[1] = g.y * v.x - g.x * v.y;
            if basis.has_z() {
                out[2] = g.z;
            }
        }
    }
}

/// PP quality and its gradient with respect to the physical (post-clamp)
/// controls at one grid point.
pub fn gradient_pp_physical(
    pulse: &ResolvedPulse,
    rho0: &Vector3<f64>,
    lambda_f: &Vector3<f64>,
    omega_off: f64,
    b1_scale: f64,
) -> (f64, GradientRecord) {
    let basis = pulse.basis();
    let cache = propagate_pp(pulse, rho0, lambda_f, omega_off, b1_scale);
    let mut grad = GradientRecord::zeros(basis.arity(), pulse.len());
    for (j, drive) in pulse.drives().iter().enumerate() {
        let v = &cache.vectors[j];
        let g = pp_sensitivity_with(v, &cache.terms[j], &cache.lambda[j + 1], &cache.rho[j]);
        digit_gradient(basis, drive, v, &g, b1_scale, grad.digit_mut(j));
    }
    (cost_pp(&cache), grad)
}

/// Signed UR quality and its gradient with respect to the physical controls
/// at one grid point.
pub fn gradient_ur_physical(
    pulse: &ResolvedPulse,
    q_f: &Quaternion,
    omega_off: f64,
    b1_scale: f64,
) -> (f64, GradientRecord) {
    let basis = pulse.basis();
    let cache = propagate_ur(pulse, omega_off, b1_scale, q_f);
    let mut grad = GradientRecord::zeros(basis.arity(), pulse.len());
    for (j, drive) in pulse.drives().iter().enumerate() {
        let v = &cache.vectors[j];
        // Φ = P_j·(dQ_j X_{j-1}) = (P_j X_{j-1}*)·dQ_j
        let m = cache.suffix[j + 1].mul(&cache.prefix[j].conj());
        let g = ur_sensitivity(v, &m);
        digit_gradient(basis, drive, v, &g, b1_scale, grad.digit_mut(j));
    }
    (cost_ur(&cache), grad)
}

/// PP quality `Φ = λF·ρN` at one grid point and its exact gradient with
/// respect to the stored controls.
pub fn gradient_pp(
    pulse: &ResolvedPulse,
    rho0: &Vector3<f64>,
    lambda_f: &Vector3<f64>,
    omega_off: f64,
    b1_scale: f64,
) -> (f64, GradientRecord) {
    let (phi, mut g) = gradient_pp_physical(pulse, rho0, lambda_f, omega_off, b1_scale);
    pulse.pull_back(&mut g);
    (phi, g)
}

/// Signed UR quality at one grid point and its exact gradient with respect
/// to the stored controls.
pub fn gradient_ur(
    pulse: &ResolvedPulse,
    q_f: &Quaternion,
    omega_off: f64,
    b1_scale: f64,
) -> (f64, GradientRecord) {
    let (phi, mut g) = gradient_ur_physical(pulse, q_f, omega_off, b1_scale);
    pulse.pull_back(&mut g);
    (phi, g)
}

/// Below this many digit evaluations per call the grid is walked serially.
const PARALLEL_WORK: usize = 2048;

/// Mean quality over `points` and its gradient with respect to the stored
/// controls. Per-point results are summed in the order of `points` whether
/// or not they were computed in parallel, so the result is reproducible.
pub fn grid_average_points(
    pulse: &ResolvedPulse,
    target: &Target,
    points: &[(f64, f64)],
) -> (f64, GradientRecord) {
    let eval = |&(w, s): &(f64, f64)| match target {
        Target::PP { rho0, lambda_f } => gradient_pp_physical(pulse, rho0, lambda_f, w, s),
        Target::UR { q_f } => gradient_ur_physical(pulse, q_f, w, s),
    };
    let results: Vec<(f64, GradientRecord)> = if points.len() * pulse.len() >= PARALLEL_WORK {
        points.par_iter().map(eval).collect()
    } else {
        points.iter().map(eval).collect()
    };
    let mut phi = 0.0;
    let mut grad = GradientRecord::zeros(pulse.basis().arity(), pulse.len());
    for (p, g) in &results {
        phi += p;
        grad.add_assign(g);
    }
    let k = 1.0 / points.len() as f64;
    grad.scale(k);
    pulse.pull_back(&mut grad);
    (phi * k, grad)
}

/// Grid-averaged quality `Φ̄` (signed for UR) and `∂Φ̄/∂c` for `shape`
/// under the problem's grid, target and constraints.
pub fn grid_average(
    problem: &OptimizationProblem,
    shape: &crate::shape::PulseShape,
) -> Result<(f64, GradientRecord)> {
    let pulse = problem.resolve(shape)?;
    Ok(grid_average_points(&pulse, &problem.target, &problem.grid.points()))
}

/// Grid-averaged quality without the gradient.
pub fn grid_quality(pulse: &ResolvedPulse, target: &Target, points: &[(f64, f64)]) -> f64 {
    let sum: f64 = points
        .iter()
        .map(|&(w, s)| match target {
            Target::PP { rho0, lambda_f } => cost_pp(&propagate_pp(pulse, rho0, lambda_f, w, s)),
            Target::UR { q_f } => cost_ur(&propagate_ur(pulse, w, s, q_f)),
        })
        .sum();
    sum / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::PulseShape;
    use std::f64::consts::FRAC_PI_2;

    fn pulse(basis: ControlBasis, controls: &[f64]) -> ResolvedPulse {
        ResolvedPulse::new(&PulseShape::from_flat(basis, controls, 1e-6).unwrap(), None, None)
            .unwrap()
    }

    #[test]
    fn single_digit_examples() {
        let p = pulse(ControlBasis::CartesianXY, &[0.0, 0.0]);
        let (phi, g) = gradient_pp(&p, &Vector3::z(), &Vector3::z(), 0.0, 1.0);
        assert_eq!(phi, 1.0);
        assert_eq!(g.digit(0)[0], 0.0);
        let (phi, g) = gradient_pp(&p, &Vector3::z(), &-Vector3::y(), 0.0, 1.0);
        assert_eq!(phi, 0.0);
        assert!((g.digit(0)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ur_stationary_points() {
        let p = pulse(ControlBasis::CartesianXY, &[0.0; 8]);
        let (_, g) = gradient_ur(&p, &Quaternion::IDENTITY, 0.0, 1.0);
        assert!(g.inf_norm() < 1e-15);
        let p = pulse(ControlBasis::CartesianXY, &[FRAC_PI_2, 0.0]);
        let Target::UR { q_f } = Target::universal(FRAC_PI_2, 0.0) else {
            unreachable!()
        };
        let (phi, g) = gradient_ur(&p, &q_f, 0.0, 1.0);
        assert!((phi - 1.0).abs() < 1e-15);
        assert!(g.inf_norm() < 1e-15);
    }

    fn fd_check(basis: ControlBasis, target: &Target) {
        let n = 7;
        let controls: Vec<f64> = (0..n * basis.arity())
            .map(|i| ((i * 29 % 13) as f64 - 6.0) * 0.17)
            .collect();
        let shape = PulseShape::from_flat(basis, &controls, 2e-6).unwrap();
        let pts = [(2e4, 0.95), (-1e5, 1.05)];
        let cost = |c: &[f64]| {
            let s = shape.with_flat_controls(c).unwrap();
            let p = ResolvedPulse::new(&s, None, None).unwrap();
            grid_quality(&p, target, &pts)
        };
        let p = ResolvedPulse::new(&shape, None, None).unwrap();
        let (phi, g) = grid_average_points(&p, target, &pts);
        assert!((phi - cost(&controls)).abs() < 1e-15);
        for i in 0..controls.len() {
            let h = 1e-6;
            let mut cp = controls.clone();
            let mut cm = controls.clone();
            cp[i] += h;
            cm[i] -= h;
            let fd = (cost(&cp) - cost(&cm)) / (2.0 * h);
            assert!((g.as_slice()[i] - fd).abs() < 1e-9, "{basis} {i}: {} vs {fd}", g.as_slice()[i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let ur = Target::universal(1.3, 0.4);
        let pp = Target::PP {
            rho0: Vector3::z(),
            lambda_f: Vector3::new(0.0, -0.6, 0.8),
        };
        for b in ControlBasis::all(0.4) {
            if b.is_reduced() {
                continue;
            }
            fd_check(b, &pp);
            fd_check(b, &ur);
        }
    }
}
