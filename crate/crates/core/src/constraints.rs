//! Holonomic tanh constraints on the transverse rf amplitude.
//!
//! The optimizer works on an unconstrained auxiliary amplitude `θxy`; the
//! physical amplitude is its tanh image, which can approach but never reach
//! the configured limit. Three variants exist:
//!
//! * per-digit amplitude: `θred = θmax·tanh(θxy/θmax)`
//! * mean power: `θred(j) = θxy(j)·s(P̄)` with `P̄ = Σθxy²/N`
//! * energy: `θred(j) = θxy(j)·s(E)` with `E = Σθxy²`
//!
//! where `s(M) = √(Mmax/M)·tanh(√(M/Mmax))`. The global variants couple all
//! digits; their Jacobian is applied matrix-free in O(N).
//!
//! In floating point `tanh(x)` rounds to exactly 1 for `x ≳ 19`, which would
//! turn the strict bounds into equalities. The tanh value is therefore
//! capped at `1 − MARGIN` (reached near `x ≈ 14`, where its true slope is
//! already ~1e-12), which keeps every output strictly inside its limit.

use crate::error::{Error, Result};
use crate::gradient::GradientRecord;
use crate::shape::ControlBasis;

/// Amplitude limit in radians per digit.
#[derive(Clone, Debug, PartialEq)]
pub enum AmplitudeLimit {
    Uniform(f64),
    PerDigit(Vec<f64>),
}

impl AmplitudeLimit {
    pub fn at(&self, j: usize) -> f64 {
        match self {
            AmplitudeLimit::Uniform(v) => *v,
            AmplitudeLimit::PerDigit(v) => v[j],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintSpec {
    /// `θmax(j) = 2π·Δt(j)·ν_rf_max(j)`.
    Amplitude { theta_max: AmplitudeLimit },
    /// Limit on the mean of `θxy²` over digits (radians²).
    Power { p_max_avg: f64 },
    /// Limit on the sum of `θxy²` over digits (radians²).
    Energy { e_theta_max: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InfeasibleConstraint(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ConstraintSpec {
    pub fn amplitude(theta_max: f64) -> Self {
        ConstraintSpec::Amplitude {
            theta_max: AmplitudeLimit::Uniform(theta_max),
        }
    }

    pub fn validate(&self, n_digits: usize) -> Result<()> {
        match self {
            ConstraintSpec::Amplitude { theta_max } => match theta_max {
                AmplitudeLimit::Uniform(v) => positive("amplitude limit", *v),
                AmplitudeLimit::PerDigit(v) => {
                    if v.len() != n_digits {
                        return Err(Error::InfeasibleConstraint(format!(
                            "{} per-digit amplitude limits for {n_digits} digits",
                            v.len()
                        )));
                    }
                    v.iter().try_for_each(|x| positive("amplitude limit", *x))
                }
            },
            ConstraintSpec::Power { p_max_avg } => positive("power limit", *p_max_avg),
            ConstraintSpec::Energy { e_theta_max } => positive("energy limit", *e_theta_max),
        }
    }

    /// A per-digit amplitude scale comparable to the limit, used to size
    /// initial guesses.
    pub fn reference_amplitude(&self, j: usize, n_digits: usize) -> f64 {
        match self {
            ConstraintSpec::Amplitude { theta_max } => theta_max.at(j),
            ConstraintSpec::Power { p_max_avg } => p_max_avg.sqrt(),
            ConstraintSpec::Energy { e_theta_max } => (e_theta_max / n_digits as f64).sqrt(),
        }
    }

    /// Map auxiliary amplitudes to physical ones.
    pub fn clamp(&self, aux: &[f64]) -> (Vec<f64>, ClampJacobian) {
        match self {
            ConstraintSpec::Amplitude { theta_max } => {
                let (red, slopes) = aux
                    .iter()
                    .enumerate()
                    .map(|(j, &a)| amp_clamp(a, theta_max.at(j)))
                    .unzip();
                (red, ClampJacobian::Diagonal(slopes))
            }
            ConstraintSpec::Power { p_max_avg } => power_clamp(aux, *p_max_avg),
            ConstraintSpec::Energy { e_theta_max } => energy_clamp(aux, *e_theta_max),
        }
    }

    /// Radial variant for Cartesian controls: each `(θx, θy)` pair is scaled
    /// along its own direction so that its length obeys the same map as a
    /// polar amplitude. Returns the pairs and a Jacobian acting on the
    /// interleaved `[gx0, gy0, gx1, gy1, ...]` vector.
    pub fn clamp_cartesian(&self, xy: &[[f64; 2]]) -> (Vec<[f64; 2]>, ClampJacobian) {
        match self {
            ConstraintSpec::Amplitude { theta_max } => {
                let mut red = Vec::with_capacity(xy.len());
                let mut scale = Vec::with_capacity(xy.len());
                let mut dscale = Vec::with_capacity(xy.len());
                for (j, v) in xy.iter().enumerate() {
                    let tmax = theta_max.at(j);
                    let (s, ds) = global_scale(v[0] * v[0] + v[1] * v[1], tmax * tmax);
                    red.push([v[0] * s, v[1] * s]);
                    scale.push(s);
                    dscale.push(ds);
                }
                (
                    red,
                    ClampJacobian::Radial {
                        aux: xy.to_vec(),
                        scale,
                        dscale,
                    },
                )
            }
            ConstraintSpec::Power { .. } | ConstraintSpec::Energy { .. } => {
                let flat: Vec<f64> = xy.iter().flat_map(|v| *v).collect();
                let (red, jac) = match self {
                    ConstraintSpec::Power { p_max_avg } => {
                        global_clamp(&flat, *p_max_avg, 1.0 / xy.len() as f64)
                    }
                    ConstraintSpec::Energy { e_theta_max } => global_clamp(&flat, *e_theta_max, 1.0),
                    ConstraintSpec::Amplitude { .. } => unreachable!(),
                };
                (red.chunks(2).map(|c| [c[0], c[1]]).collect(), jac)
            }
        }
    }

    /// Whether physical amplitudes respect the limit. `slack` is a relative
    /// allowance for rounding.
    pub fn is_satisfied(&self, physical: &[f64], slack: f64) -> bool {
        match self {
            ConstraintSpec::Amplitude { theta_max } => physical
                .iter()
                .enumerate()
                .all(|(j, a)| a.abs() <= theta_max.at(j) * (1.0 + slack)),
            ConstraintSpec::Power { p_max_avg } => {
                mean_square(physical) <= p_max_avg * (1.0 + slack)
            }
            ConstraintSpec::Energy { e_theta_max } => {
                sum_square(physical) <= e_theta_max * (1.0 + slack)
            }
        }
    }
}

fn sum_square(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn mean_square(v: &[f64]) -> f64 {
    sum_square(v) / v.len() as f64
}

/// Distance from 1 at which tanh is capped.
pub const MARGIN: f64 = 1e-12;

/// `tanh(x)` capped at `±(1 − MARGIN)`, and its slope.
fn capped_tanh(x: f64) -> (f64, f64) {
    let t = x.tanh();
    if t.abs() > 1.0 - MARGIN {
        ((1.0 - MARGIN).copysign(t), 0.0)
    } else {
        (t, 1.0 - t * t)
    }
}

/// Per-digit clamp. Returns `(θmax·tanh(θxy/θmax), 1 − tanh²(θxy/θmax))`.
pub fn amp_clamp(theta_xy: f64, theta_max: f64) -> (f64, f64) {
    let (t, slope) = capped_tanh(theta_xy / theta_max);
    (theta_max * t, slope)
}

/// Matrix-free Jacobian `∂θred/∂θxy` of a clamp.
#[derive(Clone, Debug, PartialEq)]
pub enum ClampJacobian {
    Diagonal(Vec<f64>),
    /// `∂θred(k)/∂θxy(j) = s·δkj + θxy(k)·s′(M)·2·weight·θxy(j)` where
    /// `M = weight·Σθxy²`.
    Global {
        aux: Vec<f64>,
        scale: f64,
        dscale: f64,
        weight: f64,
    },
    /// Per-digit radial clamp of Cartesian pairs, acting on an interleaved
    /// vector. Each 2×2 block is `s·I + 2·s′(r²)·v vᵀ`.
    Radial {
        aux: Vec<[f64; 2]>,
        scale: Vec<f64>,
        dscale: Vec<f64>,
    },
}

impl ClampJacobian {
    pub fn identity(n: usize) -> Self {
        ClampJacobian::Diagonal(vec![1.0; n])
    }

    /// Transposed Jacobian action: maps `∂Φ/∂θred` to `∂Φ/∂θxy`. The
    /// Jacobian is symmetric so this is also the forward action.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let mut out = g.to_vec();
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_in_place(&self, g: &mut [f64]) {
        match self {
            ClampJacobian::Diagonal(d) => {
                for (gi, di) in g.iter_mut().zip(d) {
                    *gi *= di;
                }
            }
            ClampJacobian::Global {
                aux,
                scale,
                dscale,
                weight,
            } => {
                let proj: f64 = g.iter().zip(aux).map(|(a, b)| a * b).sum();
                let k = 2.0 * weight * dscale * proj;
                for (gi, ai) in g.iter_mut().zip(aux) {
                    *gi = scale * *gi + k * ai;
                }
            }
            ClampJacobian::Radial { aux, scale, dscale } => {
                for (j, gj) in g.chunks_mut(2).enumerate() {
                    let v = aux[j];
                    let k = 2.0 * dscale[j] * (gj[0] * v[0] + gj[1] * v[1]);
                    gj[0] = scale[j] * gj[0] + k * v[0];
                    gj[1] = scale[j] * gj[1] + k * v[1];
                }
            }
        }
    }
}

/// `s(u) = tanh(u)/u` and `s′(u)/u`, with `u = √(M/Mmax)`.
fn scale_and_slope(u: f64) -> (f64, f64) {
    if u < 1e-2 {
        let u2 = u * u;
        let s = 1.0 + u2 * (-1.0 / 3.0 + u2 * (2.0 / 15.0 + u2 * (-17.0 / 315.0)));
        let ds =
            -2.0 / 3.0 + u2 * (8.0 / 15.0 + u2 * (-34.0 / 105.0 + u2 * (496.0 / 2835.0)));
        (s, ds)
    } else {
        let (t, sech2) = capped_tanh(u);
        (t / u, (u * sech2 - t) / (u * u * u))
    }
}

/// `s(M)` and `ds/dM` for `s(M) = √(Mmax/M)·tanh(√(M/Mmax))`.
fn global_scale(m: f64, limit: f64) -> (f64, f64) {
    let (s, slope_over_u) = scale_and_slope((m / limit).sqrt());
    // ds/dM = s'(u)·du/dM = s'(u)/(2·u·Mmax)
    (s, slope_over_u / (2.0 * limit))
}

fn global_clamp(theta_xy: &[f64], limit: f64, weight: f64) -> (Vec<f64>, ClampJacobian) {
    let m = weight * sum_square(theta_xy);
    let (scale, dscale) = global_scale(m, limit);
    let red = theta_xy.iter().map(|t| t * scale).collect();
    (
        red,
        ClampJacobian::Global {
            aux: theta_xy.to_vec(),
            scale,
            dscale,
            weight,
        },
    )
}

/// Mean-power clamp with `P̄ = Σθxy²/N`.
pub fn power_clamp(theta_xy: &[f64], p_max_avg: f64) -> (Vec<f64>, ClampJacobian) {
    global_clamp(theta_xy, p_max_avg, 1.0 / theta_xy.len() as f64)
}

/// Energy clamp with `E = Σθxy²`.
pub fn energy_clamp(theta_xy: &[f64], e_theta_max: f64) -> (Vec<f64>, ClampJacobian) {
    global_clamp(theta_xy, e_theta_max, 1.0)
}

/// Pull a gradient taken with respect to physical (reduced) amplitudes back
/// to the auxiliary amplitudes. Phase and z components pass through.
pub fn chain_gradient(
    outer: &GradientRecord,
    basis: ControlBasis,
    jacobian: &ClampJacobian,
) -> GradientRecord {
    let mut out = outer.clone();
    chain_in_place(&mut out, basis, jacobian);
    out
}

pub(crate) fn chain_in_place(g: &mut GradientRecord, basis: ControlBasis, jacobian: &ClampJacobian) {
    let slots = basis.transverse_slots();
    if slots.is_empty() {
        return;
    }
    let mut gathered: Vec<f64> = (0..g.n_digits())
        .flat_map(|j| slots.iter().map(move |&s| (j, s)))
        .map(|(j, s)| g.digit(j)[s])
        .collect();
    jacobian.apply_in_place(&mut gathered);
    for (j, chunk) in gathered.chunks(slots.len()).enumerate() {
        let d = g.digit_mut(j);
        for (&s, v) in slots.iter().zip(chunk) {
            d[s] = *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_jacobian_apply(
        clamp: impl Fn(&[f64]) -> Vec<f64>,
        x: &[f64],
        g: &[f64],
    ) -> Vec<f64> {
        // (Jᵀg)_j = Σ_k g_k ∂red_k/∂x_j, central differences in x_j.
        let h = 1e-6;
        (0..x.len())
            .map(|j| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += h;
                xm[j] -= h;
                let rp = clamp(&xp);
                let rm = clamp(&xm);
                g.iter()
                    .zip(rp.iter().zip(&rm))
                    .map(|(gk, (p, m))| gk * (p - m) / (2.0 * h))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn amp_clamp_examples() {
        assert_eq!(amp_clamp(0.0, 0.7), (0.0, 1.0));
        let (r, _) = amp_clamp(0.7, 0.7);
        assert!((r / 0.7 - 1f64.tanh()).abs() < 1e-15);
        assert!((1f64.tanh() - 0.761594).abs() < 1e-6);
        let (r, s) = amp_clamp(50.0 * 0.7, 0.7);
        assert!((r - 0.7).abs() < 1e-12);
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn amp_clamp_monotone() {
        let mut prev = f64::NEG_INFINITY;
        for i in -200..=200 {
            let (r, s) = amp_clamp(i as f64 * 0.05, 1.3);
            assert!(r > prev);
            assert!(s > 0.0);
            prev = r;
        }
    }

    #[test]
    fn power_clamp_small_power_is_identity() {
        let x = [1e-3, -2e-3, 5e-4, 0.0];
        let p = mean_square(&x);
        let (r, _) = power_clamp(&x, p * 1e6);
        for (a, b) in r.iter().zip(&x) {
            assert!((a - b).abs() <= 1e-6 * b.abs());
        }
    }

    #[test]
    fn power_clamp_saturates_below_limit() {
        let pmax = 1.0;
        for base in [2.0, 5.0, 30.0] {
            let x: Vec<f64> = (0..8).map(|i| base + i as f64).collect();
            let (r, _) = power_clamp(&x, pmax);
            let ms = mean_square(&r);
            let u = (mean_square(&x) / pmax).sqrt();
            assert!((ms - pmax * u.tanh().powi(2)).abs() < 3e-12);
            assert!(ms < pmax);
            assert!(ms > 0.999 * pmax);
        }
    }

    #[test]
    fn all_zero_vector_is_identity() {
        let x = [0.0; 5];
        let g = [1.0, -2.0, 3.0, 0.5, 0.25];
        for (r, j) in [power_clamp(&x, 2.0), energy_clamp(&x, 2.0)] {
            assert_eq!(r, x.to_vec());
            assert_eq!(j.apply(&g), g.to_vec());
        }
    }

    #[test]
    fn global_jacobians_match_finite_differences() {
        let x: Vec<f64> = (0..16).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.13).collect();
        let g: Vec<f64> = (0..16).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3 + 0.1).collect();
        for limit in [0.05, 0.5, 5.0] {
            let (_, jp) = power_clamp(&x, limit);
            let fd = fd_jacobian_apply(|v| power_clamp(v, limit).0, &x, &g);
            let an = jp.apply(&g);
            for (a, f) in an.iter().zip(&fd) {
                assert!((a - f).abs() <= 1e-7 * f.abs().max(1e-3), "{a} vs {f}");
            }
            let (_, je) = energy_clamp(&x, limit);
            let fd = fd_jacobian_apply(|v| energy_clamp(v, limit).0, &x, &g);
            let an = je.apply(&g);
            for (a, f) in an.iter().zip(&fd) {
                assert!((a - f).abs() <= 1e-7 * f.abs().max(1e-3), "{a} vs {f}");
            }
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        for u in [0.0099999, 0.0100001, 1e-3, 1e-6] {
            let (s, d) = scale_and_slope(u);
            let t = u.tanh();
            assert!((s - t / u).abs() < 1e-14);
            if u > 1e-3 {
                let direct = (u * (1.0 - t * t) - t) / (u * u * u);
                assert!((d - direct).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_digit_energy_clamp_coincides_with_amplitude_clamp() {
        let tmax = 0.4;
        for x in [0.0, 100.0 * tmax, 0.3 * tmax, -1.7 * tmax] {
            let (e, _) = energy_clamp(&[x], tmax * tmax);
            let (a, _) = amp_clamp(x, tmax);
            assert!((e[0] - a).abs() < 1e-14, "{x}: {} vs {a}", e[0]);
        }
    }

    #[test]
    fn radial_clamp_matches_polar_clamp_on_length() {
        let spec = ConstraintSpec::amplitude(0.8);
        let xy = [[0.3, -0.4], [3.0, 4.0], [0.0, 0.0]];
        let (red, _) = spec.clamp_cartesian(&xy);
        for (v, r) in xy.iter().zip(&red) {
            let len = v[0].hypot(v[1]);
            let (expect, _) = amp_clamp(len, 0.8);
            assert!((r[0].hypot(r[1]) - expect).abs() < 1e-15);
            // direction kept
            assert!((r[0] * v[1] - r[1] * v[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn radial_jacobian_matches_finite_differences() {
        let xy: Vec<[f64; 2]> = (0..6)
            .map(|i| [0.2 * i as f64 - 0.5, 0.9 - 0.31 * i as f64])
            .collect();
        let flat: Vec<f64> = xy.iter().flat_map(|v| *v).collect();
        let g: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        for spec in [
            ConstraintSpec::amplitude(0.6),
            ConstraintSpec::Power { p_max_avg: 0.3 },
            ConstraintSpec::Energy { e_theta_max: 1.1 },
        ] {
            let clamp = |v: &[f64]| -> Vec<f64> {
                let pairs: Vec<[f64; 2]> = v.chunks(2).map(|c| [c[0], c[1]]).collect();
                spec.clamp_cartesian(&pairs).0.into_iter().flatten().collect()
            };
            let (_, jac) = spec.clamp_cartesian(&xy);
            let fd = fd_jacobian_apply(clamp, &flat, &g);
            for (a, f) in jac.apply(&g).iter().zip(&fd) {
                assert!((a - f).abs() <= 1e-7 * f.abs().max(1e-3), "{spec:?}: {a} vs {f}");
            }
        }
    }

    #[test]
    fn validation() {
        assert!(ConstraintSpec::amplitude(0.0).validate(3).is_err());
        assert!(ConstraintSpec::Power { p_max_avg: f64::NAN }.validate(3).is_err());
        let per = ConstraintSpec::Amplitude {
            theta_max: AmplitudeLimit::PerDigit(vec![1.0, 2.0]),
        };
        assert!(per.validate(3).is_err());
        assert!(per.validate(2).is_ok());
    }

    #[test]
    fn chain_gradient_passes_phase_through() {
        let mut outer = GradientRecord::zeros(3, 2);
        outer.digit_mut(0).copy_from_slice(&[1.0, 2.0, 3.0]);
        outer.digit_mut(1).copy_from_slice(&[4.0, 5.0, 6.0]);
        let jac = ClampJacobian::Diagonal(vec![0.5, 0.0]);
        let out = chain_gradient(&outer, ControlBasis::PolarReducedAmpPhaseZ, &jac);
        assert_eq!(out.digit(0), &[0.5, 2.0, 3.0]);
        assert_eq!(out.digit(1), &[0.0, 5.0, 6.0]);
    }
}
