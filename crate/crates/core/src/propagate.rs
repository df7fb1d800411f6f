//! Forward and backward propagation with cached intermediate states.

use nalgebra::Vector3;

use crate::params::ResolvedPulse;
use crate::rotation::{Quaternion, RodriguesTerms, Rotation3};

/// States of a point-to-point propagation at one grid point.
///
/// `rho[j]` is the state after digit `j` (`rho[0] = ρ0`), `lambda[j]` the
/// target propagated back through digits `N..j+1` (`lambda[N] = λF`), so that
/// `lambda[j]·rho[j]` is the same for every `j` and digit `j` (1-based)
/// contributes `lambda[j]ᵀ ∂R_j rho[j-1]` to the gradient.
#[derive(Clone, Debug)]
pub struct PropagationCachePP {
    pub vectors: Vec<Vector3<f64>>,
    pub terms: Vec<RodriguesTerms>,
    pub rotations: Vec<Rotation3>,
    pub rho: Vec<Vector3<f64>>,
    pub lambda: Vec<Vector3<f64>>,
}

/// Propagate `rho0` through digit rotation vectors `vectors` and `lambda_f`
/// back through them.
pub fn propagate_pp_vectors(
    vectors: Vec<Vector3<f64>>,
    rho0: &Vector3<f64>,
    lambda_f: &Vector3<f64>,
) -> PropagationCachePP {
    let n = vectors.len();
    let terms: Vec<RodriguesTerms> = vectors.iter().map(|v| RodriguesTerms::new(v.norm())).collect();
    let rotations: Vec<Rotation3> = vectors
        .iter()
        .zip(&terms)
        .map(|(v, t)| Rotation3::from_terms(v, t))
        .collect();
    let mut rho = Vec::with_capacity(n + 1);
    rho.push(*rho0);
    for r in &rotations {
        let next = r.apply(rho.last().unwrap());
        rho.push(next);
    }
    let mut lambda = vec![Vector3::zeros(); n + 1];
    lambda[n] = *lambda_f;
    for j in (0..n).rev() {
        lambda[j] = rotations[j].apply_transpose(&lambda[j + 1]);
    }
    PropagationCachePP {
        vectors,
        terms,
        rotations,
        rho,
        lambda,
    }
}

pub fn propagate_pp(
    pulse: &ResolvedPulse,
    rho0: &Vector3<f64>,
    lambda_f: &Vector3<f64>,
    omega_off: f64,
    b1_scale: f64,
) -> PropagationCachePP {
    let basis = pulse.basis();
    let vectors = pulse
        .drives()
        .iter()
        .map(|d| d.rotation_vector(basis, omega_off, b1_scale))
        .collect();
    propagate_pp_vectors(vectors, rho0, lambda_f)
}

/// `Φ_PP = λF·ρN`.
pub fn cost_pp(cache: &PropagationCachePP) -> f64 {
    let n = cache.rotations.len();
    cache.lambda[n].dot(&cache.rho[n])
}

/// Propagator products of a universal-rotation propagation at one grid
/// point.
///
/// `prefix[j] = Q_j ⋯ Q_1` (`prefix[0]` is the identity) and
/// `suffix[j] = conj(Q_{j+1} ⋯ Q_N)·qF`, so `suffix[j]·prefix[j]` is the same
/// for every `j`.
#[derive(Clone, Debug)]
pub struct PropagationCacheUR {
    pub vectors: Vec<Vector3<f64>>,
    pub quaternions: Vec<Quaternion>,
    pub prefix: Vec<Quaternion>,
    pub suffix: Vec<Quaternion>,
}

pub fn propagate_ur_vectors(vectors: Vec<Vector3<f64>>, q_f: &Quaternion) -> PropagationCacheUR {
    let n = vectors.len();
    let quaternions: Vec<Quaternion> = vectors.iter().map(Quaternion::from_rotation_vector).collect();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(Quaternion::IDENTITY);
    for q in &quaternions {
        let next = q.mul(prefix.last().unwrap());
        prefix.push(next);
    }
    let mut suffix = vec![Quaternion::IDENTITY; n + 1];
    suffix[n] = *q_f;
    for j in (0..n).rev() {
        suffix[j] = quaternions[j].conj().mul(&suffix[j + 1]);
    }
    PropagationCacheUR {
        vectors,
        quaternions,
        prefix,
        suffix,
    }
}

pub fn propagate_ur(
    pulse: &ResolvedPulse,
    omega_off: f64,
    b1_scale: f64,
    q_f: &Quaternion,
) -> PropagationCacheUR {
    let basis = pulse.basis();
    let vectors = pulse
        .drives()
        .iter()
        .map(|d| d.rotation_vector(basis, omega_off, b1_scale))
        .collect();
    propagate_ur_vectors(vectors, q_f)
}

/// Signed `Φ_UR = qF·(Q_N ⋯ Q_1)`. The reported quality is its magnitude
/// since `±Q` are the same rotation.
pub fn cost_ur(cache: &PropagationCacheUR) -> f64 {
    let n = cache.quaternions.len();
    cache.suffix[n].dot(&cache.prefix[n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::{ControlBasis, PulseShape};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn pulse(basis: ControlBasis, controls: &[f64], dt: f64) -> ResolvedPulse {
        ResolvedPulse::new(&PulseShape::from_flat(basis, controls, dt).unwrap(), None, None).unwrap()
    }

    #[test]
    fn ninety_x_excites_to_minus_y() {
        let p = pulse(ControlBasis::CartesianXY, &[FRAC_PI_2, 0.0], 1e-6);
        let c = propagate_pp(&p, &Vector3::z(), &-Vector3::y(), 0.0, 1.0);
        assert!((c.rho[1] - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
        assert!((cost_pp(&c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn free_precession() {
        let dt = 1e-6;
        let phi = 0.2;
        let p = pulse(ControlBasis::CartesianXY, &[0.0; 20], dt);
        let c = propagate_pp(&p, &Vector3::x(), &Vector3::x(), phi / dt, 1.0);
        let expect = Vector3::new((10.0 * phi).cos(), (10.0 * phi).sin(), 0.0);
        assert!((c.rho[10] - expect).norm() < 1e-13);
    }

    #[test]
    fn telescoping_overlap() {
        let controls: Vec<f64> = (0..20).map(|i| ((i * 13 % 7) as f64 - 3.0) * 0.21).collect();
        let p = pulse(ControlBasis::CartesianXY, &controls, 2e-6);
        let c = propagate_pp(&p, &Vector3::z(), &Vector3::new(0.6, 0.0, 0.8), 3e4, 0.93);
        let phi = cost_pp(&c);
        for j in 0..=10 {
            assert!((c.lambda[j].dot(&c.rho[j]) - phi).abs() < 1e-14);
            assert!((c.rho[j].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn ur_examples() {
        let p = pulse(ControlBasis::CartesianXY, &[0.0; 6], 1e-6);
        let c = propagate_ur(&p, 0.0, 1.0, &Quaternion::IDENTITY);
        assert_eq!(cost_ur(&c), 1.0);
        let p = pulse(ControlBasis::CartesianXY, &[FRAC_PI_2, 0.0], 1e-6);
        let q = Quaternion::new(FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2);
        let c = propagate_ur(&p, 0.0, 1.0, &q);
        assert!((cost_ur(&c) - 1.0).abs() < 1e-15);
        let c = propagate_ur(&p, 0.0, 1.0, &q.scale(-1.0));
        assert!((cost_ur(&c) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn ur_split_consistency() {
        let controls: Vec<f64> = (0..30).map(|i| ((i * 17 % 11) as f64 - 5.0) * 0.3).collect();
        let p = pulse(ControlBasis::PolarAmpPhaseZ, &controls, 1e-6);
        let q_f = Quaternion::new(0.1, 0.5, -0.3, 0.8).normalize();
        let c = propagate_ur(&p, 1e5, 1.07, &q_f);
        let phi = cost_ur(&c);
        for j in 0..=10 {
            assert!((c.suffix[j].dot(&c.prefix[j]) - phi).abs() < 1e-14);
        }
    }
}
