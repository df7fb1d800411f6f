//! Exact propagator derivatives from block-augmented exponentials:
//!
//! ```text
//! exp([[A, B], [0, A]]) = [[exp A, ∂/∂ε exp(A + εB)|₀], [0, exp A]]
//! ```
//!
//! For SO(3), `A = Σ θk·Kk` with real antisymmetric generators fixed by the
//! rotation convention (`Kk = [e_k]×`). For SU(2), `A = −i Σ θk·σk/2` with
//! Pauli matrices `σ`.

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;

use super::expm::expm;
use crate::params::RotationParams;
use crate::rotation::{cross_matrix, Quaternion};

/// `Kk = [e_k]×`, the generator of rotations about axis `k`.
pub fn so3_generator(k: usize) -> Matrix3<f64> {
    let mut e = nalgebra::Vector3::zeros();
    e[k] = 1.0;
    cross_matrix(&e)
}

fn so3_algebra(p: &RotationParams) -> Matrix3<f64> {
    cross_matrix(&p.vector())
}

/// Rotation matrix as `exp(Σ θk·Kk)`.
pub fn rotation_by_expm(p: &RotationParams) -> Matrix3<f64> {
    let a = so3_algebra(p);
    let e = expm(&DMatrix::from_iterator(3, 3, a.iter().copied()));
    Matrix3::from_iterator(e.iter().copied())
}

/// `∂R/∂θk` from the upper-right block of a 6×6 exponential.
pub fn augmented_gradient_rot(p: &RotationParams, control: usize) -> Matrix3<f64> {
    let a = so3_algebra(p);
    let b = so3_generator(control);
    let mut m = DMatrix::<f64>::zeros(6, 6);
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = a[(i, j)];
            m[(i + 3, j + 3)] = a[(i, j)];
            m[(i, j + 3)] = b[(i, j)];
        }
    }
    let e = expm(&m);
    Matrix3::from_fn(|i, j| e[(i, j + 3)])
}

/// `−i·σk/2` for `k ∈ {0, 1, 2}`.
fn su2_generator(k: usize) -> [[Complex64; 2]; 2] {
    let z = Complex64::new(0.0, 0.0);
    let h = 0.5;
    match k {
        0 => [[z, Complex64::new(0.0, -h)], [Complex64::new(0.0, -h), z]],
        1 => [[z, Complex64::new(-h, 0.0)], [Complex64::new(h, 0.0), z]],
        _ => [[Complex64::new(0.0, -h), z], [z, Complex64::new(0.0, h)]],
    }
}

fn su2_algebra(p: &RotationParams) -> [[Complex64; 2]; 2] {
    let th = [p.theta_x, p.theta_y, p.theta_z];
    let mut a = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (k, t) in th.iter().enumerate() {
        let g = su2_generator(k);
        for i in 0..2 {
            for j in 0..2 {
                a[i][j] += g[i][j] * t;
            }
        }
    }
    a
}

/// The SU(2) propagator `exp(−i Σ θk·σk/2)`.
pub fn su2_by_expm(p: &RotationParams) -> [[Complex64; 2]; 2] {
    let a = su2_algebra(p);
    let e = expm(&DMatrix::from_fn(2, 2, |i, j| a[i][j]));
    [[e[(0, 0)], e[(0, 1)]], [e[(1, 0)], e[(1, 1)]]]
}

/// `∂U/∂θk` from the upper-right block of a 4×4 complex exponential.
pub fn augmented_gradient_su2(p: &RotationParams, control: usize) -> [[Complex64; 2]; 2] {
    let a = su2_algebra(p);
    let b = su2_generator(control);
    let mut m = DMatrix::<Complex64>::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = a[i][j];
            m[(i + 2, j + 2)] = a[i][j];
            m[(i, j + 2)] = b[i][j];
        }
    }
    let e = expm(&m);
    [[e[(0, 2)], e[(0, 3)]], [e[(1, 2)], e[(1, 3)]]]
}

/// `∂Q/∂θk` read off the SU(2) derivative through `U = D − i(Aσx + Bσy + Cσz)`.
pub fn augmented_quaternion_derivative(p: &RotationParams, control: usize) -> Quaternion {
    Quaternion::from_su2(&augmented_gradient_su2(p, control))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivatives::{d_quaternion, d_rotation_cartesian};
    use crate::rotation::{quaternion_from_params, rotation_from_params};
    use crate::shape::BasisFamily;

    fn samples() -> Vec<RotationParams> {
        vec![
            RotationParams::from_cartesian(1.0, 1.0, 1.0),
            RotationParams::from_cartesian(0.3, -2.2, 0.9),
            RotationParams::from_cartesian(1e-6, -3e-6, 2e-6),
            RotationParams::from_cartesian(0.0, 0.0, 0.0),
        ]
    }

    #[test]
    fn exponential_matches_rodrigues() {
        let t = 1.0 / 3f64.sqrt();
        let p = RotationParams::from_cartesian(t, t, t);
        let r = rotation_from_params(&p);
        assert!((rotation_by_expm(&p) - r.0).amax() < 1e-13);
        for p in samples() {
            let q = Quaternion::from_su2(&su2_by_expm(&p));
            let expect = quaternion_from_params(&p);
            for (a, b) in q.to_array().iter().zip(expect.to_array()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn nilpotent_augmentation() {
        let p = RotationParams::from_cartesian(0.0, 0.0, 0.0);
        assert_eq!(augmented_gradient_rot(&p, 0), so3_generator(0));
        let du = augmented_gradient_su2(&p, 0);
        assert_eq!(du, su2_generator(0));
    }

    #[test]
    fn cross_oracle_agreement() {
        for p in samples() {
            let an = d_rotation_cartesian(&p);
            let aq = d_quaternion(&p, BasisFamily::Cartesian);
            for k in 0..3 {
                assert!((augmented_gradient_rot(&p, k) - an[k]).amax() < 1e-12);
                let oq = augmented_quaternion_derivative(&p, k);
                for (a, b) in oq.to_array().iter().zip(aq[k].to_array()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unitarity_tangency() {
        for p in samples() {
            let u = su2_by_expm(&p);
            for k in 0..3 {
                let du = augmented_gradient_su2(&p, k);
                for i in 0..2 {
                    for j in 0..2 {
                        let mut s = Complex64::new(0.0, 0.0);
                        for l in 0..2 {
                            s += u[l][i].conj() * du[l][j] + du[l][i].conj() * u[l][j];
                        }
                        assert!(s.norm() < 1e-13);
                    }
                }
            }
        }
    }
}
