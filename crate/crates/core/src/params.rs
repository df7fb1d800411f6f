//! Per-digit rotation parameters and the map from stored controls to them.

use nalgebra::Vector3;

use crate::constraints::{AmplitudeLimit, ClampJacobian, ConstraintSpec};
use crate::error::{contract, Result};
use crate::shape::{BasisFamily, ControlBasis, Digit, PulseShape};

/// Below this rotation angle the axis is undefined and set to `z`.
pub const SMALL_ANGLE: f64 = 1e-9;

/// Rotation of one digit at one grid point.
///
/// `theta_xy` carries the sign of the stored amplitude: polar controls may
/// go negative during optimization, which is the same rotation as
/// `(|θxy|, α + π)`. `theta_x = cos(α)·theta_xy` holds either way.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationParams {
    pub theta_x: f64,
    pub theta_y: f64,
    /// Includes the offset contribution `ω_off·Δt`.
    pub theta_z: f64,
    pub theta: f64,
    pub n_x: f64,
    pub n_y: f64,
    pub n_z: f64,
    pub theta_xy: f64,
    pub alpha: f64,
}

impl RotationParams {
    fn finish(theta_x: f64, theta_y: f64, theta_z: f64, theta_xy: f64, alpha: f64) -> Self {
        let theta = (theta_x * theta_x + theta_y * theta_y + theta_z * theta_z).sqrt();
        let (n_x, n_y, n_z) = if theta > SMALL_ANGLE {
            (theta_x / theta, theta_y / theta, theta_z / theta)
        } else {
            (0.0, 0.0, 1.0)
        };
        RotationParams {
            theta_x,
            theta_y,
            theta_z,
            theta,
            n_x,
            n_y,
            n_z,
            theta_xy,
            alpha,
        }
    }

    pub fn from_cartesian(theta_x: f64, theta_y: f64, theta_z: f64) -> Self {
        Self::finish(
            theta_x,
            theta_y,
            theta_z,
            theta_x.hypot(theta_y),
            theta_y.atan2(theta_x),
        )
    }

    pub fn from_polar(theta_xy: f64, alpha: f64, theta_z: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        Self::finish(c * theta_xy, s * theta_xy, theta_z, theta_xy, alpha)
    }

    /// The rotation vector `θ·n = (θx, θy, θz)`.
    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.theta_x, self.theta_y, self.theta_z)
    }

    pub fn axis(&self) -> Vector3<f64> {
        Vector3::new(self.n_x, self.n_y, self.n_z)
    }

    /// `n_xy = θxy/θ`, with the same small-angle convention as the axis.
    pub fn n_xy(&self) -> f64 {
        if self.theta > SMALL_ANGLE {
            self.theta_xy / self.theta
        } else {
            0.0
        }
    }
}

/// Rotation parameters of a single digit.
///
/// `b1_scale` multiplies the transverse amplitude only. With a per-digit
/// amplitude constraint the transverse controls are clamped first. Global
/// (power, energy) constraints and per-digit limit lists need the whole
/// shape; use [`ResolvedPulse`] for those.
pub fn digit_to_rotation_params(
    digit: &Digit,
    basis: ControlBasis,
    omega_off: f64,
    b1_scale: f64,
    constraint: Option<&ConstraintSpec>,
) -> Result<RotationParams> {
    digit.check(&basis)?;
    let limit = match constraint {
        None => None,
        Some(ConstraintSpec::Amplitude {
            theta_max: AmplitudeLimit::Uniform(t),
        }) => Some(*t),
        Some(_) => {
            return Err(contract(
                "global or per-digit constraints cannot be applied to a single digit",
            ))
        }
    };
    if basis.is_reduced() && limit.is_none() {
        return Err(contract(format!("basis {basis} requires a constraint")));
    }
    let drive = Drive::from_digit(digit, basis);
    let drive = match limit {
        Some(t) => {
            let spec = ConstraintSpec::amplitude(t);
            clamp_drives(&spec, basis, vec![drive]).0.remove(0)
        }
        None => drive,
    };
    Ok(drive.params(basis, omega_off, b1_scale))
}

/// Physical controls of one digit after constraints are applied.
///
/// `u, v` are `(θx, θy)` for Cartesian bases and `(θxy, α)` for polar and
/// phase-only bases; `z` is the z control without the offset term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drive {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub dt: f64,
}

impl Drive {
    fn from_digit(d: &Digit, basis: ControlBasis) -> Drive {
        let c = &d.controls;
        let z = basis.z_slot().map_or(0.0, |s| c[s]);
        match basis {
            ControlBasis::PhaseOnly { amplitude } => Drive {
                u: amplitude,
                v: c[0],
                z: 0.0,
                dt: d.dt,
            },
            _ => Drive {
                u: c[0],
                v: c[1],
                z,
                dt: d.dt,
            },
        }
    }

    /// Rotation parameters at one grid point.
    #[inline]
    pub fn params(&self, basis: ControlBasis, omega_off: f64, b1_scale: f64) -> RotationParams {
        let tz = self.z + omega_off * self.dt;
        match basis.family() {
            BasisFamily::Cartesian => {
                RotationParams::from_cartesian(b1_scale * self.u, b1_scale * self.v, tz)
            }
            BasisFamily::Polar => RotationParams::from_polar(b1_scale * self.u, self.v, tz),
        }
    }

    /// Rotation vector at one grid point, skipping the derived fields.
    #[inline]
    pub fn rotation_vector(&self, basis: ControlBasis, omega_off: f64, b1_scale: f64) -> Vector3<f64> {
        let tz = self.z + omega_off * self.dt;
        match basis.family() {
            BasisFamily::Cartesian => Vector3::new(b1_scale * self.u, b1_scale * self.v, tz),
            BasisFamily::Polar => {
                let (s, c) = self.v.sin_cos();
                let a = b1_scale * self.u;
                Vector3::new(c * a, s * a, tz)
            }
        }
    }
}

fn clamp_drives(
    spec: &ConstraintSpec,
    basis: ControlBasis,
    mut drives: Vec<Drive>,
) -> (Vec<Drive>, ClampJacobian) {
    match basis {
        ControlBasis::PhaseOnly { .. } => {
            let n = drives.len();
            (drives, ClampJacobian::identity(n))
        }
        ControlBasis::CartesianXY | ControlBasis::CartesianXYZ => {
            let xy: Vec<[f64; 2]> = drives.iter().map(|d| [d.u, d.v]).collect();
            let (red, jac) = spec.clamp_cartesian(&xy);
            for (d, r) in drives.iter_mut().zip(red) {
                d.u = r[0];
                d.v = r[1];
            }
            (drives, jac)
        }
        _ => {
            let amp: Vec<f64> = drives.iter().map(|d| d.u).collect();
            let (red, jac) = spec.clamp(&amp);
            for (d, r) in drives.iter_mut().zip(red) {
                d.u = r;
            }
            (drives, jac)
        }
    }
}

/// A shape with all constraints applied: physical drives per digit plus the
/// Jacobian needed to pull gradients back to the stored controls.
#[derive(Clone, Debug)]
pub struct ResolvedPulse {
    basis: ControlBasis,
    drives: Vec<Drive>,
    jacobian: Option<ClampJacobian>,
    /// Slopes of the optional z clamp.
    z_clamp: Option<Vec<f64>>,
}

impl ResolvedPulse {
    /// Apply `constraint` (and an optional per-digit bound on `|θz|`) to the
    /// stored controls of `shape`.
    pub fn new(
        shape: &PulseShape,
        constraint: Option<&ConstraintSpec>,
        z_limit: Option<f64>,
    ) -> Result<Self> {
        let basis = shape.basis();
        if basis.is_reduced() && constraint.is_none() {
            return Err(contract(format!("basis {basis} requires a constraint")));
        }
        let mut drives: Vec<Drive> = shape
            .digits()
            .iter()
            .map(|d| Drive::from_digit(d, basis))
            .collect();
        let mut jacobian = None;
        if let Some(spec) = constraint {
            spec.validate(drives.len())?;
            let (d, j) = clamp_drives(spec, basis, drives);
            drives = d;
            jacobian = Some(j);
        }
        let z_clamp = match (z_limit, basis.has_z()) {
            (Some(zmax), true) => Some(
                drives
                    .iter_mut()
                    .map(|d| {
                        let (z, slope) = crate::constraints::amp_clamp(d.z, zmax);
                        d.z = z;
                        slope
                    })
                    .collect(),
            ),
            _ => None,
        };
        Ok(ResolvedPulse {
            basis,
            drives,
            jacobian,
            z_clamp,
        })
    }

    pub fn basis(&self) -> ControlBasis {
        self.basis
    }

    pub fn drives(&self) -> &[Drive] {
        &self.drives
    }

    pub fn len(&self) -> usize {
        self.drives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drives.is_empty()
    }

    pub fn jacobian(&self) -> Option<&ClampJacobian> {
        self.jacobian.as_ref()
    }

    pub fn params(&self, omega_off: f64, b1_scale: f64) -> Vec<RotationParams> {
        self.drives
            .iter()
            .map(|d| d.params(self.basis, omega_off, b1_scale))
            .collect()
    }

    /// Pull a gradient with respect to physical controls back to stored
    /// controls.
    pub fn pull_back(&self, g: &mut crate::gradient::GradientRecord) {
        if let Some(j) = &self.jacobian {
            crate::constraints::chain_in_place(g, self.basis, j);
        }
        if let (Some(slopes), Some(slot)) = (&self.z_clamp, self.basis.z_slot()) {
            for (j, s) in slopes.iter().enumerate() {
                g.digit_mut(j)[slot] *= s;
            }
        }
    }

    /// Physical shape in the unreduced basis. Negative polar amplitudes are
    /// folded into the phase.
    pub fn to_physical(&self) -> PulseShape {
        let basis = self.basis.physical();
        let digits = self
            .drives
            .iter()
            .map(|d| {
                let controls = match basis {
                    ControlBasis::PhaseOnly { .. } => vec![d.v],
                    ControlBasis::CartesianXY => vec![d.u, d.v],
                    ControlBasis::CartesianXYZ => vec![d.u, d.v, d.z],
                    _ => {
                        let (amp, phase) = if d.u < 0.0 {
                            (-d.u, d.v + std::f64::consts::PI)
                        } else {
                            (d.u, d.v)
                        };
                        if basis.has_z() {
                            vec![amp, phase, d.z]
                        } else {
                            vec![amp, phase]
                        }
                    }
                };
                Digit::new(controls, d.dt)
            })
            .collect();
        PulseShape::new(basis, digits).expect("resolved drives form a valid shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ninety_degree_cartesian_digit() {
        let dt = 50e-6;
        let omega = 2.0 * PI * 5000.0;
        let d = Digit::new(vec![omega * dt, 0.0], dt);
        let p = digit_to_rotation_params(&d, ControlBasis::CartesianXY, 0.0, 1.0, None).unwrap();
        assert!((p.theta_x - PI / 2.0).abs() < 1e-15);
        assert_eq!((p.theta_y, p.theta_z), (0.0, 0.0));
        assert!((p.theta - PI / 2.0).abs() < 1e-15);
        assert_eq!((p.n_x, p.n_y, p.n_z), (1.0, 0.0, 0.0));
    }

    #[test]
    fn zero_rotation_axis_convention() {
        let d = Digit::new(vec![0.0, 0.0], 1e-6);
        let p = digit_to_rotation_params(&d, ControlBasis::CartesianXY, 0.0, 1.0, None).unwrap();
        assert_eq!(p.theta, 0.0);
        assert_eq!((p.n_x, p.n_y, p.n_z), (0.0, 0.0, 1.0));
    }

    #[test]
    fn polar_digit_with_offset() {
        let dt = 1e-6;
        let d = Digit::new(vec![1.0, PI / 3.0], dt);
        let p = digit_to_rotation_params(&d, ControlBasis::PolarAmpPhase, 0.5 / dt, 1.0, None)
            .unwrap();
        let th = 1.25f64.sqrt();
        assert!((p.theta - th).abs() < 1e-15);
        assert!((p.n_x - (PI / 3.0).cos() / th).abs() < 1e-15);
        assert!((p.n_y - (PI / 3.0).sin() / th).abs() < 1e-15);
        assert!((p.n_z - 0.5 / th).abs() < 1e-12);
    }

    #[test]
    fn b1_scale_leaves_z_alone() {
        let d = Digit::new(vec![0.3, -0.2, 0.7], 2e-6);
        for s in [0.5, 1.0, 1.3] {
            let p = digit_to_rotation_params(&d, ControlBasis::CartesianXYZ, 1e4, s, None).unwrap();
            assert!((p.theta_z - (0.7 + 1e4 * 2e-6)).abs() < 1e-15);
            assert!((p.theta_x - 0.3 * s).abs() < 1e-15);
        }
    }

    #[test]
    fn arity_mismatch_is_contract_violation() {
        let d = Digit::new(vec![0.3], 2e-6);
        assert!(digit_to_rotation_params(&d, ControlBasis::CartesianXY, 0.0, 1.0, None).is_err());
    }

    #[test]
    fn reduced_needs_constraint() {
        let d = Digit::new(vec![0.3, 0.1], 2e-6);
        let b = ControlBasis::PolarReducedAmpPhase;
        assert!(digit_to_rotation_params(&d, b, 0.0, 1.0, None).is_err());
        let c = ConstraintSpec::amplitude(0.2);
        let p = digit_to_rotation_params(&d, b, 0.0, 1.0, Some(&c)).unwrap();
        assert!((p.theta_xy - 0.2 * 1.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn negative_amplitude_folds_at_export() {
        let shape =
            PulseShape::from_flat(ControlBasis::PolarAmpPhase, &[0.4, 0.1, -0.3, 0.2], 1e-6)
                .unwrap();
        let r = ResolvedPulse::new(&shape, None, None).unwrap();
        let phys = r.to_physical();
        assert_eq!(phys.digits()[1].controls, vec![0.3, 0.2 + PI]);
        let back = ResolvedPulse::new(&phys, None, None).unwrap();
        for (a, b) in r.params(1e3, 0.9).iter().zip(back.params(1e3, 0.9)) {
            assert!((a.vector() - b.vector()).norm() < 1e-15);
        }
    }

    #[test]
    fn z_limit_clamps_z_only() {
        let shape =
            PulseShape::from_flat(ControlBasis::CartesianXYZ, &[0.4, 0.1, 30.0], 1e-6).unwrap();
        let r = ResolvedPulse::new(&shape, None, Some(0.5)).unwrap();
        assert!((r.drives()[0].z - 0.5).abs() < 1e-12);
        assert_eq!(r.drives()[0].u, 0.4);
    }
}
