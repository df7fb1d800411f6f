//! Rotation matrices and unit quaternions of single digits.
//!
//! Both are built from the rotation vector `v = θ·n` in Rodrigues form,
//!
//! ```text
//! R = cos θ·I + (1 − cos θ)/θ²·v vᵀ + sin θ/θ·[v]×
//! Q = (sin(θ/2)/θ·v, cos(θ/2))
//! ```
//!
//! with `[v]×` the cross-product matrix, so that free precession about `z`
//! turns `x` toward `y`. Every coefficient has a removable singularity at
//! `θ = 0` and switches to a Taylor series below [`SERIES_ANGLE`].

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::params::RotationParams;

/// Angle below which the Rodrigues coefficients use their Taylor series.
pub const SERIES_ANGLE: f64 = 0.05;

#[inline]
fn poly(x: f64, c: &[f64]) -> f64 {
    c.iter().rev().fold(0.0, |acc, k| acc * x + k)
}

/// `(cos θ, sin θ/θ, (1 − cos θ)/θ²)`.
#[inline]
pub fn rodrigues_coeffs(theta: f64) -> (f64, f64, f64) {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        let b = poly(t2, &[1.0, -1.0 / 6.0, 1.0 / 120.0, -1.0 / 5040.0, 1.0 / 362880.0]);
        let c = poly(t2, &[0.5, -1.0 / 24.0, 1.0 / 720.0, -1.0 / 40320.0, 1.0 / 3628800.0]);
        (theta.cos(), b, c)
    } else {
        let (s, co) = theta.sin_cos();
        let h = (0.5 * theta).sin() / theta;
        (co, s / theta, 2.0 * h * h)
    }
}

/// Radial slopes of the Rodrigues coefficients, `(c′(θ)/θ, b′(θ)/θ)`:
///
/// ```text
/// d = (θ sin θ − 2(1 − cos θ))/θ⁴,   e = (θ cos θ − sin θ)/θ³
/// ```
#[inline]
pub fn rodrigues_slopes(theta: f64) -> (f64, f64) {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        let d = poly(
            t2,
            &[-1.0 / 12.0, 1.0 / 180.0, -1.0 / 6720.0, 1.0 / 453600.0, -1.0 / 47900160.0],
        );
        let e = poly(
            t2,
            &[-1.0 / 3.0, 1.0 / 30.0, -1.0 / 840.0, 1.0 / 45360.0, -1.0 / 3991680.0],
        );
        (d, e)
    } else {
        let (s, co) = theta.sin_cos();
        let h = (0.5 * theta).sin();
        let one_minus_cos = 2.0 * h * h;
        let t2 = theta * theta;
        (
            (theta * s - 2.0 * one_minus_cos) / (t2 * t2),
            (theta * co - s) / (t2 * theta),
        )
    }
}

/// `(sin(θ/2)/θ, cos(θ/2))`.
#[inline]
pub fn half_angle_coeffs(theta: f64) -> (f64, f64) {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        let s = poly(
            t2,
            &[0.5, -1.0 / 48.0, 1.0 / 3840.0, -1.0 / 645120.0, 1.0 / 185794560.0],
        );
        (s, (0.5 * theta).cos())
    } else {
        let (s, c) = (0.5 * theta).sin_cos();
        (s / theta, c)
    }
}

/// Radial slope of `sin(θ/2)/θ` divided by `θ`:
/// `(θ cos(θ/2)/2 − sin(θ/2))/θ³`.
#[inline]
pub fn half_angle_slope(theta: f64) -> f64 {
    if theta < SERIES_ANGLE {
        poly(
            theta * theta,
            &[
                -1.0 / 24.0,
                1.0 / 960.0,
                -1.0 / 107520.0,
                1.0 / 23224320.0,
                -1.0 / 8174960640.0,
            ],
        )
    } else {
        let (s, c) = (0.5 * theta).sin_cos();
        (0.5 * theta * c - s) / (theta * theta * theta)
    }
}

/// All Rodrigues coefficients and slopes of one angle, sharing the trig
/// evaluations: `R = a·I + c·v vᵀ + b·[v]×`, `d = c′/θ`, `e = b′/θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RodriguesTerms {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl RodriguesTerms {
    #[inline]
    pub fn new(theta: f64) -> Self {
        if theta < SERIES_ANGLE {
            let (a, b, c) = rodrigues_coeffs(theta);
            let (d, e) = rodrigues_slopes(theta);
            RodriguesTerms { a, b, c, d, e }
        } else {
            let (s, co) = theta.sin_cos();
            let h = (0.5 * theta).sin();
            let one_minus_cos = 2.0 * h * h;
            let t2 = theta * theta;
            let b = s / theta;
            RodriguesTerms {
                a: co,
                b,
                c: one_minus_cos / t2,
                d: (theta * s - 2.0 * one_minus_cos) / (t2 * t2),
                e: (co - b) / t2,
            }
        }
    }
}

/// `[v]×`, so that `[v]× w = v × w`.
#[inline]
pub fn cross_matrix(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// A 3×3 rotation matrix acting on Bloch vectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation3(pub Matrix3<f64>);

impl Rotation3 {
    pub fn identity() -> Self {
        Rotation3(Matrix3::identity())
    }

    /// Rotation by `|v|` about `v/|v|`.
    #[inline]
    pub fn from_rotation_vector(v: &Vector3<f64>) -> Self {
        let theta = v.norm();
        let (a, b, c) = rodrigues_coeffs(theta);
        let mut m = (v * v.transpose()) * c + cross_matrix(v) * b;
        m[(0, 0)] += a;
        m[(1, 1)] += a;
        m[(2, 2)] += a;
        Rotation3(m)
    }

    /// Rotation from precomputed coefficients of `|v|`.
    #[inline]
    pub fn from_terms(v: &Vector3<f64>, t: &RodriguesTerms) -> Self {
        let mut m = (v * v.transpose()) * t.c + cross_matrix(v) * t.b;
        m[(0, 0)] += t.a;
        m[(1, 1)] += t.a;
        m[(2, 2)] += t.a;
        Rotation3(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Entry `R_hk`, `h, k ∈ {0, 1, 2}` for `x, y, z`.
    pub fn get(&self, h: usize, k: usize) -> f64 {
        self.0[(h, k)]
    }

    #[inline]
    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    #[inline]
    pub fn apply_transpose(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0.tr_mul(v)
    }

    /// `self · other`: apply `other` first.
    pub fn compose(&self, other: &Rotation3) -> Rotation3 {
        Rotation3(self.0 * other.0)
    }

    pub fn transpose(&self) -> Rotation3 {
        Rotation3(self.0.transpose())
    }
}

pub fn rotation_from_params(p: &RotationParams) -> Rotation3 {
    Rotation3::from_rotation_vector(&p.vector())
}

/// Unit quaternion `(A, B, C, D)` with scalar part `D = cos(θ/2)`.
///
/// Corresponds to the SU(2) propagator `U = D − i(Aσx + Bσy + Cσz)` with
/// Pauli matrices `σ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Quaternion { a, b, c, d }
    }

    #[inline]
    pub fn from_rotation_vector(v: &Vector3<f64>) -> Self {
        let (s, d) = half_angle_coeffs(v.norm());
        Quaternion::new(s * v.x, s * v.y, s * v.z, d)
    }

    pub fn from_array(x: [f64; 4]) -> Self {
        Quaternion::new(x[0], x[1], x[2], x[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    #[inline]
    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.c)
    }

    #[inline]
    pub fn conj(&self) -> Quaternion {
        Quaternion::new(-self.a, -self.b, -self.c, self.d)
    }

    #[inline]
    pub fn dot(&self, o: &Quaternion) -> f64 {
        self.a * o.a + self.b * o.b + self.c * o.c + self.d * o.d
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, k: f64) -> Quaternion {
        Quaternion::new(k * self.a, k * self.b, k * self.c, k * self.d)
    }

    pub fn normalize(&self) -> Quaternion {
        self.scale(1.0 / self.norm())
    }

    /// Hamilton product `self · q1`: the rotation `q1` followed by `self`.
    #[inline]
    pub fn mul(&self, q1: &Quaternion) -> Quaternion {
        let (a2, b2, c2, d2) = (self.a, self.b, self.c, self.d);
        let (a1, b1, c1, d1) = (q1.a, q1.b, q1.c, q1.d);
        Quaternion {
            a: d2 * a1 + a2 * d1 + b2 * c1 - c2 * b1,
            b: d2 * b1 - a2 * c1 + b2 * d1 + c2 * a1,
            c: d2 * c1 + a2 * b1 - b2 * a1 + c2 * d1,
            d: d2 * d1 - a2 * a1 - b2 * b1 - c2 * c1,
        }
    }

    /// Induced rotation `(D² − |a|²)·I + 2·a aᵀ + 2D·[a]×`.
    pub fn to_rotation(&self) -> Rotation3 {
        let v = self.vector();
        let k = self.d * self.d - v.dot(&v);
        let mut m = (v * v.transpose()) * 2.0 + cross_matrix(&v) * (2.0 * self.d);
        m[(0, 0)] += k;
        m[(1, 1)] += k;
        m[(2, 2)] += k;
        Rotation3(m)
    }

    /// The SU(2) matrix `D − i(Aσx + Bσy + Cσz)`, row-major.
    pub fn to_su2(&self) -> [[Complex64; 2]; 2] {
        [
            [Complex64::new(self.d, -self.c), Complex64::new(-self.b, -self.a)],
            [Complex64::new(self.b, -self.a), Complex64::new(self.d, self.c)],
        ]
    }

    /// Inverse of [`to_su2`](Self::to_su2); also maps tangent vectors
    /// (derivatives of SU(2) matrices) to quaternion derivatives.
    pub fn from_su2(u: &[[Complex64; 2]; 2]) -> Quaternion {
        Quaternion::new(-u[0][1].im, -u[0][1].re, -u[0][0].im, u[0][0].re)
    }
}

/// `q2 · q1`, the rotation `q1` followed by `q2`.
pub fn quaternion_multiply(q2: &Quaternion, q1: &Quaternion) -> Quaternion {
    q2.mul(q1)
}

pub fn quaternion_from_params(p: &RotationParams) -> Quaternion {
    Quaternion::from_rotation_vector(&p.vector())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: &Matrix3<f64>, b: &Matrix3<f64>, tol: f64) -> bool {
        (a - b).amax() < tol
    }

    #[test]
    fn zero_rotation_is_identity() {
        let r = rotation_from_params(&RotationParams::from_cartesian(0.0, 0.0, 0.0));
        assert_eq!(r, Rotation3::identity());
        let q = quaternion_from_params(&RotationParams::from_cartesian(0.0, 0.0, 0.0));
        assert_eq!(q, Quaternion::IDENTITY);
    }

    #[test]
    fn half_turn_about_x() {
        let r = rotation_from_params(&RotationParams::from_cartesian(PI, 0.0, 0.0));
        assert!(close(r.matrix(), &Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)), 1e-15));
    }

    #[test]
    fn sign_convention() {
        let r = rotation_from_params(&RotationParams::from_cartesian(PI / 2.0, 0.0, 0.0));
        let m = r.apply(&Vector3::z());
        assert!((m - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
        let r = rotation_from_params(&RotationParams::from_cartesian(0.0, 0.0, 0.3));
        let m = r.apply(&Vector3::x());
        assert!((m - Vector3::new(0.3f64.cos(), 0.3f64.sin(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn quaternion_examples() {
        let q = quaternion_from_params(&RotationParams::from_cartesian(0.0, 0.0, PI));
        assert!((q.to_array()[2] - 1.0).abs() < 1e-15 && q.d.abs() < 1e-15);
        let p = RotationParams::from_cartesian(PI / 2.0, 0.0, 0.0);
        let q = quaternion_from_params(&p);
        assert!((q.a - FRAC_1_SQRT_2).abs() < 1e-15 && (q.d - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(close(q.to_rotation().matrix(), rotation_from_params(&p).matrix(), 1e-15));
    }

    #[test]
    fn product_examples() {
        let q = Quaternion::new(0.1, 0.2, -0.3, 0.5).normalize();
        assert_eq!(quaternion_multiply(&Quaternion::IDENTITY, &q), q);
        let x = Quaternion::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(x.mul(&x), Quaternion::new(0.0, 0.0, 0.0, -1.0));
    }

    #[test]
    fn product_composes_rotations() {
        let q1 = Quaternion::from_rotation_vector(&Vector3::new(0.3, -1.2, 0.7));
        let q2 = Quaternion::from_rotation_vector(&Vector3::new(-2.0, 0.4, 1.1));
        let lhs = q2.mul(&q1).to_rotation();
        let rhs = q2.to_rotation().compose(&q1.to_rotation());
        assert!(close(lhs.matrix(), rhs.matrix(), 1e-14));
    }

    #[test]
    fn su2_round_trip_and_product() {
        let q1 = Quaternion::from_rotation_vector(&Vector3::new(0.3, -1.2, 0.7));
        let q2 = Quaternion::from_rotation_vector(&Vector3::new(-2.0, 0.4, 1.1));
        assert_eq!(Quaternion::from_su2(&q1.to_su2()), q1);
        let (u1, u2) = (q1.to_su2(), q2.to_su2());
        let mut u = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                u[i][j] = u2[i][0] * u1[0][j] + u2[i][1] * u1[1][j];
            }
        }
        let q = Quaternion::from_su2(&u);
        let expect = q2.mul(&q1);
        for (a, b) in q.to_array().iter().zip(expect.to_array()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn series_branches_are_continuous() {
        for t in [SERIES_ANGLE * (1.0 - 1e-12), SERIES_ANGLE] {
            let (a, b, c) = rodrigues_coeffs(t);
            assert!((a - t.cos()).abs() < 1e-16);
            assert!((b - t.sin() / t).abs() < 1e-15);
            assert!((c - (1.0 - t.cos()) / (t * t)).abs() < 1e-12);
            let (d, e) = rodrigues_slopes(t);
            let (d0, e0) = rodrigues_slopes(SERIES_ANGLE * 1.000001);
            let terms = RodriguesTerms::new(SERIES_ANGLE * 1.000001);
            assert!((terms.d - d0).abs() < 1e-15 && (terms.e - e0).abs() < 1e-12);
            assert!((d - d0).abs() < 1e-8 && (e - e0).abs() < 1e-7);
            let (s, _) = half_angle_coeffs(t);
            assert!((s - (t / 2.0).sin() / t).abs() < 1e-15);
            let g0 = half_angle_slope(SERIES_ANGLE * 1.000001);
            assert!((half_angle_slope(t) - g0).abs() < 1e-8);
        }
    }
}
