//! Analytical derivatives of digit rotations with respect to their controls.
//!
//! All controls enter the rotation through the rotation vector `v`, so every
//! derivative is a directional derivative along some `w = ∂v/∂c`:
//!
//! | control | `w`                  |
//! |---------|----------------------|
//! | `θx`    | `(1, 0, 0)`          |
//! | `θy`    | `(0, 1, 0)`          |
//! | `θz`    | `(0, 0, 1)`          |
//! | `α`     | `(−θy, θx, 0)`       |
//! | `θxy`   | `(cos α, sin α, 0)`  |
//!
//! Differentiating the Rodrigues form gives
//!
//! ```text
//! ∂_w R = −b(v·w)·I + d(v·w)·v vᵀ + c(w vᵀ + v wᵀ) + e(v·w)·[v]× + b·[w]×
//! ∂_w Q = (s·w + g(v·w)·v, −(s/2)(v·w))
//! ```
//!
//! with `b, c` the Rodrigues coefficients, `d, e` their radial slopes, and
//! `s = sin(θ/2)/θ`, `g = s′/θ`. None of these divide by `θ` or `θxy`, so the
//! same expressions cover the small-angle regime.

use nalgebra::{Matrix3, Vector3};

use crate::params::RotationParams;
use crate::rotation::{cross_matrix, half_angle_coeffs, half_angle_slope, Quaternion, RodriguesTerms};
use crate::shape::BasisFamily;

/// `∂R/∂c` for three controls, in the order of [`CARTESIAN_CONTROLS`] or
/// [`POLAR_CONTROLS`].
pub type RotationDerivatives = [Matrix3<f64>; 3];

/// `∂Q/∂c` for three controls.
pub type QuaternionDerivatives = [Quaternion; 3];

pub const CARTESIAN_CONTROLS: [&str; 3] = ["θx", "θy", "θz"];
pub const POLAR_CONTROLS: [&str; 3] = ["α", "θxy", "θz"];

/// Directions `∂v/∂c` of the polar controls `(α, θxy, θz)`.
pub fn polar_directions(p: &RotationParams) -> [Vector3<f64>; 3] {
    let (s, c) = p.alpha.sin_cos();
    [
        Vector3::new(-p.theta_y, p.theta_x, 0.0),
        Vector3::new(c, s, 0.0),
        Vector3::z(),
    ]
}

/// Directional derivative of `R(v)` along `w`.
#[inline]
pub fn d_rotation_along(v: &Vector3<f64>, w: &Vector3<f64>) -> Matrix3<f64> {
    let RodriguesTerms { b, c, d, e, .. } = RodriguesTerms::new(v.norm());
    let vw = v.dot(w);
    let mut m = v * v.transpose() * (d * vw)
        + (w * v.transpose() + v * w.transpose()) * c
        + cross_matrix(v) * (e * vw)
        + cross_matrix(w) * b;
    let diag = -b * vw;
    m[(0, 0)] += diag;
    m[(1, 1)] += diag;
    m[(2, 2)] += diag;
    m
}

/// `∂R/∂θk` for a single Cartesian component `k ∈ {0, 1, 2}`.
#[inline]
pub fn d_rotation_cartesian_component(p: &RotationParams, k: usize) -> Matrix3<f64> {
    let mut w = Vector3::zeros();
    w[k] = 1.0;
    d_rotation_along(&p.vector(), &w)
}

/// `(∂R/∂θx, ∂R/∂θy, ∂R/∂θz)`.
pub fn d_rotation_cartesian(p: &RotationParams) -> RotationDerivatives {
    let v = p.vector();
    [
        d_rotation_along(&v, &Vector3::x()),
        d_rotation_along(&v, &Vector3::y()),
        d_rotation_along(&v, &Vector3::z()),
    ]
}

/// `(∂R/∂α, ∂R/∂θxy, ∂R/∂θz)`.
pub fn d_rotation_polar(p: &RotationParams) -> RotationDerivatives {
    let v = p.vector();
    polar_directions(p).map(|w| d_rotation_along(&v, &w))
}

/// Directional derivative of `Q(v)` along `w`.
#[inline]
pub fn d_quaternion_along(v: &Vector3<f64>, w: &Vector3<f64>) -> Quaternion {
    let theta = v.norm();
    let (s, _) = half_angle_coeffs(theta);
    let g = half_angle_slope(theta);
    let vw = v.dot(w);
    let vec = w * s + v * (g * vw);
    Quaternion::new(vec.x, vec.y, vec.z, -0.5 * s * vw)
}

/// `∂Q/∂c` for the Cartesian `(θx, θy, θz)` or polar `(α, θxy, θz)`
/// controls.
pub fn d_quaternion(p: &RotationParams, family: BasisFamily) -> QuaternionDerivatives {
    let v = p.vector();
    let dirs = match family {
        BasisFamily::Cartesian => [Vector3::x(), Vector3::y(), Vector3::z()],
        BasisFamily::Polar => polar_directions(p),
    };
    dirs.map(|w| d_quaternion_along(&v, &w))
}

/// The vector `G` with `λᵀ (∂_w R) ρ = G·w` for every direction `w`.
///
/// One evaluation gives the PP gradient with respect to every control of a
/// digit without forming any matrix.
#[inline]
pub fn pp_sensitivity(v: &Vector3<f64>, lambda: &Vector3<f64>, rho: &Vector3<f64>) -> Vector3<f64> {
    pp_sensitivity_with(v, &RodriguesTerms::new(v.norm()), lambda, rho)
}

/// [`pp_sensitivity`] with the coefficients of `|v|` already at hand.
#[inline]
pub fn pp_sensitivity_with(
    v: &Vector3<f64>,
    t: &RodriguesTerms,
    lambda: &Vector3<f64>,
    rho: &Vector3<f64>,
) -> Vector3<f64> {
    let RodriguesTerms { b, c, d, e, .. } = *t;
    let lr = lambda.dot(rho);
    let lv = lambda.dot(v);
    let vr = v.dot(rho);
    let rxl = rho.cross(lambda);
    // λ·(v×ρ) = v·(ρ×λ)
    let lvr = v.dot(&rxl);
    v * (-b * lr + d * lv * vr + e * lvr) + (lambda * vr + rho * lv) * c + rxl * b
}

/// The vector `G` with `m·(∂_w Q) = G·w` for every direction `w`.
#[inline]
pub fn ur_sensitivity(v: &Vector3<f64>, m: &Quaternion) -> Vector3<f64> {
    let theta = v.norm();
    let (s, _) = half_angle_coeffs(theta);
    let g = half_angle_slope(theta);
    let mv = m.vector();
    mv * s + v * (g * mv.dot(v) - 0.5 * s * m.d)
}
