//! Control bases and piecewise-constant pulse shapes.
//!
//! Controls are stored as dimensionless rotation angles per digit
//! (`θ = ω·Δt`), never as angular frequencies, so the optimizer's
//! conditioning does not depend on the digit duration.

use crate::error::{contract, Result};

/// How the controls of one digit are parametrized.
///
/// Control layout per digit:
///
/// | basis                    | controls          |
/// |--------------------------|-------------------|
/// | `CartesianXY`            | `[θx, θy]`        |
/// | `CartesianXYZ`           | `[θx, θy, θz]`    |
/// | `PolarAmpPhase`          | `[θxy, α]`        |
/// | `PolarAmpPhaseZ`         | `[θxy, α, θz]`    |
/// | `PolarReducedAmpPhase`   | `[θxy, α]`        |
/// | `PolarReducedAmpPhaseZ`  | `[θxy, α, θz]`    |
/// | `PhaseOnly`              | `[α]`             |
///
/// For the reduced variants the stored `θxy` is the unconstrained auxiliary
/// variable; the physical amplitude is its tanh image under the problem's
/// [`ConstraintSpec`](crate::constraints::ConstraintSpec).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ControlBasis {
    CartesianXY,
    CartesianXYZ,
    PolarAmpPhase,
    PolarAmpPhaseZ,
    PolarReducedAmpPhase,
    PolarReducedAmpPhaseZ,
    /// Constant transverse amplitude `amplitude` (radians per digit), phase
    /// is the only control.
    PhaseOnly { amplitude: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisFamily {
    Cartesian,
    Polar,
}

impl ControlBasis {
    pub const NAMES: [&'static str; 7] = [
        "cartesian_xy",
        "cartesian_xyz",
        "polar",
        "polar_z",
        "polar_reduced",
        "polar_reduced_z",
        "phase_only",
    ];

    /// All seven bases, with `phase_amplitude` used for the phase-only one.
    pub fn all(phase_amplitude: f64) -> [ControlBasis; 7] {
        [
            ControlBasis::CartesianXY,
            ControlBasis::CartesianXYZ,
            ControlBasis::PolarAmpPhase,
            ControlBasis::PolarAmpPhaseZ,
            ControlBasis::PolarReducedAmpPhase,
            ControlBasis::PolarReducedAmpPhaseZ,
            ControlBasis::PhaseOnly {
                amplitude: phase_amplitude,
            },
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ControlBasis::CartesianXY => "cartesian_xy",
            ControlBasis::CartesianXYZ => "cartesian_xyz",
            ControlBasis::PolarAmpPhase => "polar",
            ControlBasis::PolarAmpPhaseZ => "polar_z",
            ControlBasis::PolarReducedAmpPhase => "polar_reduced",
            ControlBasis::PolarReducedAmpPhaseZ => "polar_reduced_z",
            ControlBasis::PhaseOnly { .. } => "phase_only",
        }
    }

    /// Parse a basis name. `phase_amplitude` is required for `phase_only`.
    pub fn from_name(name: &str, phase_amplitude: Option<f64>) -> Result<Self> {
        let basis = match name {
            "cartesian_xy" => ControlBasis::CartesianXY,
            "cartesian_xyz" => ControlBasis::CartesianXYZ,
            "polar" => ControlBasis::PolarAmpPhase,
            "polar_z" => ControlBasis::PolarAmpPhaseZ,
            "polar_reduced" => ControlBasis::PolarReducedAmpPhase,
            "polar_reduced_z" => ControlBasis::PolarReducedAmpPhaseZ,
            "phase_only" => {
                let amplitude = phase_amplitude.ok_or_else(|| {
                    contract("phase_only basis requires a constant amplitude")
                })?;
                ControlBasis::PhaseOnly { amplitude }
            }
            other => return Err(contract(format!("unknown control basis '{other}'"))),
        };
        basis.validate()?;
        Ok(basis)
    }

    pub fn validate(&self) -> Result<()> {
        if let ControlBasis::PhaseOnly { amplitude } = self {
            if !(amplitude.is_finite() && *amplitude > 0.0) {
                return Err(contract(format!(
                    "phase_only amplitude must be positive and finite, got {amplitude}"
                )));
            }
        }
        Ok(())
    }

    /// Number of controls per digit.
    pub fn arity(&self) -> usize {
        match self {
            ControlBasis::CartesianXY
            | ControlBasis::PolarAmpPhase
            | ControlBasis::PolarReducedAmpPhase => 2,
            ControlBasis::CartesianXYZ
            | ControlBasis::PolarAmpPhaseZ
            | ControlBasis::PolarReducedAmpPhaseZ => 3,
            ControlBasis::PhaseOnly { .. } => 1,
        }
    }

    pub fn family(&self) -> BasisFamily {
        match self {
            ControlBasis::CartesianXY | ControlBasis::CartesianXYZ => BasisFamily::Cartesian,
            _ => BasisFamily::Polar,
        }
    }

    pub fn is_reduced(&self) -> bool {
        matches!(
            self,
            ControlBasis::PolarReducedAmpPhase | ControlBasis::PolarReducedAmpPhaseZ
        )
    }

    pub fn has_z(&self) -> bool {
        matches!(
            self,
            ControlBasis::CartesianXYZ
                | ControlBasis::PolarAmpPhaseZ
                | ControlBasis::PolarReducedAmpPhaseZ
        )
    }

    /// Index of the stored transverse amplitude within a digit, for polar
    /// bases that optimize it.
    pub fn amplitude_slot(&self) -> Option<usize> {
        match self.family() {
            BasisFamily::Polar if !matches!(self, ControlBasis::PhaseOnly { .. }) => Some(0),
            _ => None,
        }
    }

    /// Slots holding optimized transverse controls; these are the ones a
    /// constraint clamp acts on.
    pub fn transverse_slots(&self) -> &'static [usize] {
        match self {
            ControlBasis::CartesianXY | ControlBasis::CartesianXYZ => &[0, 1],
            ControlBasis::PhaseOnly { .. } => &[],
            _ => &[0],
        }
    }

    /// Index of the z control within a digit.
    pub fn z_slot(&self) -> Option<usize> {
        self.has_z().then_some(2)
    }

    /// The basis the physical (post-clamp) controls live in.
    pub fn physical(&self) -> ControlBasis {
        match self {
            ControlBasis::PolarReducedAmpPhase => ControlBasis::PolarAmpPhase,
            ControlBasis::PolarReducedAmpPhaseZ => ControlBasis::PolarAmpPhaseZ,
            other => *other,
        }
    }
}

impl std::fmt::Display for ControlBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One piecewise-constant pulse segment.
#[derive(Clone, Debug, PartialEq)]
pub struct Digit {
    pub controls: Vec<f64>,
    /// Duration in seconds.
    pub dt: f64,
}

impl Digit {
    pub fn new(controls: Vec<f64>, dt: f64) -> Self {
        Digit { controls, dt }
    }

    pub(crate) fn check(&self, basis: &ControlBasis) -> Result<()> {
        if self.controls.len() != basis.arity() {
            return Err(contract(format!(
                "digit has {} controls but basis {} needs {}",
                self.controls.len(),
                basis,
                basis.arity()
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(contract(format!("digit duration must be positive, got {}", self.dt)));
        }
        if self.controls.iter().any(|c| !c.is_finite()) {
            return Err(contract("digit controls must be finite"));
        }
        Ok(())
    }
}

/// An ordered sequence of digits sharing one control basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseShape {
    basis: ControlBasis,
    digits: Vec<Digit>,
}

impl PulseShape {
    pub fn new(basis: ControlBasis, digits: Vec<Digit>) -> Result<Self> {
        basis.validate()?;
        if digits.is_empty() {
            return Err(contract("a pulse shape needs at least one digit"));
        }
        for d in &digits {
            d.check(&basis)?;
        }
        Ok(PulseShape { basis, digits })
    }

    /// `n` digits of duration `dt` with all controls zero.
    pub fn zeros(basis: ControlBasis, n: usize, dt: f64) -> Result<Self> {
        let digits = (0..n).map(|_| Digit::new(vec![0.0; basis.arity()], dt)).collect();
        PulseShape::new(basis, digits)
    }

    /// Build from a flat control vector (`n × arity`, digit-major) with a
    /// common digit duration.
    pub fn from_flat(basis: ControlBasis, controls: &[f64], dt: f64) -> Result<Self> {
        let k = basis.arity();
        if controls.is_empty() || controls.len() % k != 0 {
            return Err(contract(format!(
                "flat control vector of length {} is not a positive multiple of {k}",
                controls.len()
            )));
        }
        let digits = controls
            .chunks(k)
            .map(|c| Digit::new(c.to_vec(), dt))
            .collect();
        PulseShape::new(basis, digits)
    }

    pub fn basis(&self) -> ControlBasis {
        self.basis
    }

    pub fn digits(&self) -> &[Digit] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.digits.iter().map(|d| d.dt).sum()
    }

    /// Common digit duration, if all digits share one.
    pub fn uniform_dt(&self) -> Option<f64> {
        let dt = self.digits[0].dt;
        self.digits.iter().all(|d| d.dt == dt).then_some(dt)
    }

    pub fn flat_controls(&self) -> Vec<f64> {
        self.digits.iter().flat_map(|d| d.controls.iter().copied()).collect()
    }

    /// Overwrite all controls from a flat digit-major vector.
    pub fn set_flat_controls(&mut self, controls: &[f64]) -> Result<()> {
        let k = self.basis.arity();
        if controls.len() != k * self.digits.len() {
            return Err(contract(format!(
                "expected {} controls, got {}",
                k * self.digits.len(),
                controls.len()
            )));
        }
        for (d, c) in self.digits.iter_mut().zip(controls.chunks(k)) {
            d.controls.copy_from_slice(c);
        }
        Ok(())
    }

    /// Set control `index` of the flat layout.
    pub fn set_control(&mut self, index: usize, value: f64) {
        let k = self.basis.arity();
        self.digits[index / k].controls[index % k] = value;
    }

    pub fn with_flat_controls(&self, controls: &[f64]) -> Result<Self> {
        let mut s = self.clone();
        s.set_flat_controls(controls)?;
        Ok(s)
    }

    /// Transverse amplitude of every digit as stored (auxiliary for reduced
    /// bases, constant for phase-only).
    pub fn transverse_amplitudes(&self) -> Vec<f64> {
        self.digits
            .iter()
            .map(|d| match self.basis {
                ControlBasis::CartesianXY | ControlBasis::CartesianXYZ => {
                    d.controls[0].hypot(d.controls[1])
                }
                ControlBasis::PhaseOnly { amplitude } => amplitude,
                _ => d.controls[0],
            })
            .collect()
    }
}
