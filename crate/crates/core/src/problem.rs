//! Optimization targets and problem definitions.

use nalgebra::Vector3;

use crate::constraints::ConstraintSpec;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::optimizer::OptimizerOptions;
use crate::params::ResolvedPulse;
use crate::rotation::Quaternion;
use crate::shape::{ControlBasis, PulseShape};

const UNIT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    /// Point-to-point: bring `rho0` onto `lambda_f`.
    PP {
        rho0: Vector3<f64>,
        lambda_f: Vector3<f64>,
    },
    /// Universal rotation: implement the propagator `q_f`.
    UR { q_f: Quaternion },
}

impl Target {
    /// Excitation `z → −y`, the target of a 90° x pulse.
    pub fn excitation() -> Self {
        Target::PP {
            rho0: Vector3::z(),
            lambda_f: -Vector3::y(),
        }
    }

    /// Inversion `z → −z`.
    pub fn inversion() -> Self {
        Target::PP {
            rho0: Vector3::z(),
            lambda_f: -Vector3::z(),
        }
    }

    /// Universal rotation by `angle` about the axis at `phase` in the
    /// transverse plane.
    pub fn universal(angle: f64, phase: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Target::UR {
            q_f: Quaternion::new(s * phase.cos(), s * phase.sin(), 0.0, c),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |n: f64| (n - 1.0).abs() <= UNIT_TOL;
        match self {
            Target::PP { rho0, lambda_f } => {
                if !unit(rho0.norm()) || !unit(lambda_f.norm()) {
                    return Err(Error::InvalidProblem(
                        "PP initial and target states must be unit vectors".into(),
                    ));
                }
            }
            Target::UR { q_f } => {
                if !unit(q_f.norm()) {
                    return Err(Error::InvalidProblem("UR target must be a unit quaternion".into()));
                }
            }
        }
        Ok(())
    }

    pub fn is_ur(&self) -> bool {
        matches!(self, Target::UR { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationProblem {
    /// Defines the basis, digit count and durations; control values are the
    /// starting point for [`InitStrategy::FromFile`](crate::optimizer::InitStrategy).
    pub shape_template: PulseShape,
    pub grid: GridSpec,
    pub target: Target,
    pub constraint: Option<ConstraintSpec>,
    /// Optional tanh bound on `|θz|` per digit, for bases with z controls.
    pub z_limit: Option<f64>,
    pub options: OptimizerOptions,
}

impl OptimizationProblem {
    pub fn new(shape_template: PulseShape, grid: GridSpec, target: Target) -> Self {
        OptimizationProblem {
            shape_template,
            grid,
            target,
            constraint: None,
            z_limit: None,
            options: OptimizerOptions::default(),
        }
    }

    pub fn with_constraint(mut self, c: ConstraintSpec) -> Self {
        self.constraint = Some(c);
        self
    }

    pub fn with_options(mut self, o: OptimizerOptions) -> Self {
        self.options = o;
        self
    }

    pub fn basis(&self) -> ControlBasis {
        self.shape_template.basis()
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.target.validate()?;
        self.options.validate()?;
        let basis = self.basis();
        let n = self.shape_template.len();
        if basis.is_reduced() && self.constraint.is_none() {
            return Err(Error::InvalidProblem(format!("basis {basis} requires a constraint")));
        }
        if let Some(z) = self.z_limit {
            if !(z.is_finite() && z > 0.0) {
                return Err(Error::InvalidProblem(format!("z limit must be positive, got {z}")));
            }
        }
        if let Some(c) = &self.constraint {
            c.validate(n)?;
            if let ControlBasis::PhaseOnly { amplitude } = basis {
                if !c.is_satisfied(&vec![amplitude; n], 0.0) {
                    return Err(Error::InfeasibleConstraint(format!(
                        "constant amplitude {amplitude} rad exceeds the constraint"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Apply the problem's constraints to a shape.
    pub fn resolve(&self, shape: &PulseShape) -> Result<ResolvedPulse> {
        if shape.basis() != self.basis() || shape.len() != self.shape_template.len() {
            return Err(crate::error::contract("shape does not match the problem template"));
        }
        ResolvedPulse::new(shape, self.constraint.as_ref(), self.z_limit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn universal_target_is_rotation() {
        let Target::UR { q_f } = Target::universal(std::f64::consts::FRAC_PI_2, 0.0) else {
            unreachable!()
        };
        let m = q_f.to_rotation().apply(&Vector3::z());
        assert!((m + Vector3::y()).norm() < 1e-15);
    }

    #[test]
    fn validation() {
        let shape = PulseShape::zeros(ControlBasis::PolarReducedAmpPhase, 4, 1e-6).unwrap();
        let p = OptimizationProblem::new(shape.clone(), GridSpec::single(), Target::excitation());
        assert!(p.validate().is_err());
        assert!(p.clone().with_constraint(ConstraintSpec::amplitude(0.1)).validate().is_ok());
        let bad = Target::PP {
            rho0: Vector3::new(1.0, 1.0, 0.0),
            lambda_f: Vector3::z(),
        };
        assert!(OptimizationProblem::new(shape, GridSpec::single(), bad).validate().is_err());

        let po = PulseShape::zeros(ControlBasis::PhaseOnly { amplitude: 0.5 }, 4, 1e-6).unwrap();
        let p = OptimizationProblem::new(po, GridSpec::single(), Target::excitation())
            .with_constraint(ConstraintSpec::amplitude(0.4));
        assert!(matches!(p.validate(), Err(Error::InfeasibleConstraint(_))));
    }
}
