//! JSON run configuration.
//!
//! Frequencies are given in Hz and durations in μs; they are converted to
//! radians per digit when the problem is built. Unknown keys are rejected,
//! and every error names the line it refers to.

use std::f64::consts::TAU;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use pulsegrad_core::{
    ConstraintSpec, ControlBasis, ControlUnits, GridSpec, InitStrategy, OptimizationProblem,
    OptimizerOptions, PulseShape, Target, Vector3,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    /// `z → −y`.
    Excitation,
    /// `z → −z`.
    Inversion,
    StateTransfer { from: [f64; 3], to: [f64; 3] },
    /// Rotation by `angle_deg` about the transverse axis at `phase_deg`.
    Universal {
        angle_deg: f64,
        #[serde(default)]
        phase_deg: f64,
    },
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_off: NonZeroUsize,
    pub bandwidth_hz: f64,
    pub n_rf: NonZeroUsize,
    #[serde(default)]
    pub b1_tolerance: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintConfig {
    /// Peak amplitude per digit.
    Amplitude { max_hz: f64 },
    /// Root-mean-square amplitude over the pulse.
    Power { rms_hz: f64 },
    /// Total `Σ θxy²` in radians².
    Energy { budget_rad2: f64 },
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InitConfig {
    RandomPhase,
    RandomSmall,
    FromFile,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum UnitsConfig {
    Radians,
    AngularFrequency,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iterations: Option<usize>,
    pub grad_tolerance: Option<f64>,
    pub lbfgs_memory: Option<NonZeroUsize>,
    pub init: Option<InitConfig>,
    pub wolfe_c1: Option<f64>,
    pub wolfe_c2: Option<f64>,
    pub max_line_search_evals: Option<usize>,
    pub units: Option<UnitsConfig>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    /// Evaluation grid density relative to the training grid.
    #[serde(default = "four")]
    pub refine: NonZeroUsize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig { refine: four() }
    }
}

fn four() -> NonZeroUsize {
    NonZeroUsize::new(4).unwrap()
}

fn one() -> NonZeroUsize {
    NonZeroUsize::MIN
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub basis: String,
    pub digits: NonZeroUsize,
    pub dt_us: f64,
    /// Constant amplitude of the phase-only basis.
    #[serde(default)]
    pub amplitude_hz: Option<f64>,
    pub target: TargetConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub constraint: Option<ConstraintConfig>,
    /// Per-digit bound on `|ωz|/2π`, for bases with z controls.
    #[serde(default)]
    pub z_limit_hz: Option<f64>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub starts: NonZeroUsize,
    /// Starting shape for `"init": "from_file"`, relative to the config.
    #[serde(default)]
    pub initial_shape: Option<PathBuf>,
    /// Shape to evaluate with `simulate`, relative to the config.
    #[serde(default)]
    pub shape: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub profile: ProfileConfig,
}

/// A configuration error anchored at a line of the source text.
fn at_line(text: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
    let line = line_of_key(text, key).unwrap_or(1);
    CliError::Validation(format!("config line {line}: {msg}"))
}

/// Line (1-based) of the first `"key":` in `text`.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| {
        l.match_indices(&quoted)
            .any(|(i, _)| l[i + quoted.len()..].trim_start().starts_with(':'))
    })
    .map(|i| i + 1)
}

impl RunConfig {
    /// Parse and validate. `base` resolves relative file paths.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<RunConfig, CliError> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Validation(format!("config line {}, column {}: {e}", e.line(), e.column()))
        })?;
        if let Some(b) = base {
            for p in [&mut cfg.initial_shape, &mut cfg.shape, &mut cfg.output_dir]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = b.join(&*p);
                }
            }
        }
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path.parent()).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn validate(&self, text: &str) -> Result<(), CliError> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(at_line(text, key, format!("{key} must be positive and finite, got {v}")))
            }
        };
        positive("dt_us", self.dt_us)?;
        if let Some(a) = self.amplitude_hz {
            positive("amplitude_hz", a)?;
        }
        if let Some(z) = self.z_limit_hz {
            positive("z_limit_hz", z)?;
        }
        if !(self.grid.bandwidth_hz.is_finite() && self.grid.bandwidth_hz >= 0.0) {
            return Err(at_line(text, "bandwidth_hz", "bandwidth_hz must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.grid.b1_tolerance) {
            return Err(at_line(text, "b1_tolerance", "b1_tolerance must lie in [0, 1)"));
        }
        match &self.constraint {
            Some(ConstraintConfig::Amplitude { max_hz }) => positive("max_hz", *max_hz)?,
            Some(ConstraintConfig::Power { rms_hz }) => positive("rms_hz", *rms_hz)?,
            Some(ConstraintConfig::Energy { budget_rad2 }) => positive("budget_rad2", *budget_rad2)?,
            None => {}
        }
        match &self.target {
            TargetConfig::StateTransfer { from, to } => {
                for (key, v) in [("from", from), ("to", to)] {
                    let n = Vector3::from(*v).norm();
                    if (n - 1.0).abs() > 1e-9 {
                        return Err(at_line(text, key, format!("state '{key}' must be a unit vector, norm is {n}")));
                    }
                }
            }
            TargetConfig::Universal { angle_deg, phase_deg } => {
                if !(angle_deg.is_finite() && phase_deg.is_finite()) {
                    return Err(at_line(text, "angle_deg", "rotation angles must be finite"));
                }
            }
            _ => {}
        }
        let basis = self.basis().map_err(|e| at_line(text, "basis", e))?;
        if self.optimizer.init == Some(InitConfig::FromFile) && self.initial_shape.is_none() {
            return Err(at_line(text, "init", "init from_file needs initial_shape"));
        }
        let o = self.options();
        o.validate().map_err(|e| at_line(text, "optimizer", e))?;
        let template = PulseShape::zeros(basis, self.digits.get(), self.dt()).map_err(|e| at_line(text, "basis", e))?;
        let p = self.problem_with(template);
        p.validate().map_err(|e| {
            let key = match e {
                pulsegrad_core::Error::InfeasibleConstraint(_) => "constraint",
                _ if p.constraint.is_none() && basis.is_reduced() => "basis",
                _ => "optimizer",
            };
            at_line(text, key, e)
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt_us * 1e-6
    }

    /// Radians per digit for an amplitude in Hz.
    pub fn hz_to_rad(&self, hz: f64) -> f64 {
        TAU * self.dt() * hz
    }

    pub fn basis(&self) -> Result<ControlBasis, CliError> {
        let amp = self.amplitude_hz.map(|a| self.hz_to_rad(a));
        ControlBasis::from_name(&self.basis, amp).map_err(CliError::from)
    }

    pub fn target(&self) -> Target {
        match &self.target {
            TargetConfig::Excitation => Target::excitation(),
            TargetConfig::Inversion => Target::inversion(),
            TargetConfig::StateTransfer { from, to } => Target::PP {
                rho0: Vector3::from(*from),
                lambda_f: Vector3::from(*to),
            },
            TargetConfig::Universal { angle_deg, phase_deg } => {
                Target::universal(angle_deg.to_radians(), phase_deg.to_radians())
            }
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            n_off: self.grid.n_off.get(),
            bandwidth_hz: self.grid.bandwidth_hz,
            n_rf: self.grid.n_rf.get(),
            b1_tolerance: self.grid.b1_tolerance,
        }
    }

    pub fn constraint(&self) -> Option<ConstraintSpec> {
        self.constraint.as_ref().map(|c| match c {
            ConstraintConfig::Amplitude { max_hz } => ConstraintSpec::amplitude(self.hz_to_rad(*max_hz)),
            ConstraintConfig::Power { rms_hz } => ConstraintSpec::Power {
                p_max_avg: self.hz_to_rad(*rms_hz).powi(2),
            },
            ConstraintConfig::Energy { budget_rad2 } => ConstraintSpec::Energy {
                e_theta_max: *budget_rad2,
            },
        })
    }

    pub fn options(&self) -> OptimizerOptions {
        let d = OptimizerOptions::default();
        let o = &self.optimizer;
        OptimizerOptions {
            max_iterations: o.max_iterations.unwrap_or(d.max_iterations),
            grad_tolerance: o.grad_tolerance.unwrap_or(d.grad_tolerance),
            lbfgs_memory: o.lbfgs_memory.map_or(d.lbfgs_memory, NonZeroUsize::get),
            seed: self.seed,
            init_strategy: match o.init {
                None => d.init_strategy,
                Some(InitConfig::RandomPhase) => InitStrategy::RandomPhase,
                Some(InitConfig::RandomSmall) => InitStrategy::RandomSmall,
                Some(InitConfig::FromFile) => InitStrategy::FromFile,
            },
            wolfe_c1: o.wolfe_c1.unwrap_or(d.wolfe_c1),
            wolfe_c2: o.wolfe_c2.unwrap_or(d.wolfe_c2),
            max_line_search_evals: o.max_line_search_evals.unwrap_or(d.max_line_search_evals),
            units: match o.units {
                None => d.units,
                Some(UnitsConfig::Radians) => ControlUnits::Radians,
                Some(UnitsConfig::AngularFrequency) => ControlUnits::AngularFrequency,
            },
        }
    }

    fn problem_with(&self, template: PulseShape) -> OptimizationProblem {
        let mut p = OptimizationProblem::new(template, self.grid(), self.target()).with_options(self.options());
        p.constraint = self.constraint();
        p.z_limit = self.z_limit_hz.map(|z| self.hz_to_rad(z));
        p
    }

    /// The optimization problem. With `init: from_file` the template carries
    /// the starting controls.
    pub fn problem(&self) -> Result<OptimizationProblem, CliError> {
        let basis = self.basis()?;
        let template = match (&self.optimizer.init, &self.initial_shape) {
            (Some(InitConfig::FromFile), Some(path)) => {
                let s = crate::shape_io::read_shape(path)?;
                if s.basis() != basis || s.len() != self.digits.get() {
                    return Err(CliError::Validation(format!(
                        "{}: initial shape is {} × {} digits, config wants {} × {}",
                        path.display(),
                        s.basis(),
                        s.len(),
                        basis,
                        self.digits
                    )));
                }
                s
            }
            _ => PulseShape::zeros(basis, self.digits.get(), self.dt())?,
        };
        let p = self.problem_with(template);
        p.validate()?;
        Ok(p)
    }
}
