//! Single-spin optimal-control pulse design with exact analytical gradients.
//!
//! A pulse is a sequence of piecewise-constant digits. Each digit is a
//! rotation of the Bloch sphere (or an SU(2) propagator, represented as a
//! unit quaternion); the gradient of the point-to-point or universal-rotation
//! quality with respect to every control is computed in closed form from the
//! Rodrigues formula. Independent oracles (matrix exponentials, finite
//! differences) live in [`oracles`].
//!
//! ```
//! use pulsegrad_core::{ControlBasis, GridSpec, OptimizationProblem, PulseShape, Target};
//!
//! let template = PulseShape::zeros(ControlBasis::CartesianXY, 1, 1e-6).unwrap();
//! let problem = OptimizationProblem::new(template, GridSpec::single(), Target::excitation());
//! let init = PulseShape::from_flat(ControlBasis::CartesianXY, &[0.3, 0.1], 1e-6).unwrap();
//! let result = pulsegrad_core::optimize(&problem, &init).unwrap();
//! assert!(result.quality > 0.999_999);
//! ```

pub mod constraints;
pub mod derivatives;
pub mod error;
pub mod gradient;
pub mod grid;
pub mod optimizer;
pub mod oracles;
pub mod params;
pub mod problem;
pub mod profile;
pub mod propagate;
pub mod rotation;
pub mod shape;

pub use constraints::{
    amp_clamp, chain_gradient, energy_clamp, power_clamp, AmplitudeLimit, ClampJacobian,
    ConstraintSpec,
};
pub use derivatives::{
    d_quaternion, d_rotation_cartesian, d_rotation_polar, QuaternionDerivatives,
    RotationDerivatives,
};
pub use error::{Error, Result};
pub use gradient::{grid_average, gradient_pp, gradient_ur, GradientRecord};
pub use grid::GridSpec;
pub use optimizer::{
    init_shape, multistart, multistart_seeds, optimize, optimize_seeded, ControlUnits,
    InitStrategy, MultistartReport, OptimizationResult, OptimizerOptions, TerminationReason,
};
pub use params::{digit_to_rotation_params, Drive, ResolvedPulse, RotationParams};
pub use problem::{OptimizationProblem, Target};
pub use profile::{simulate_profile, simulate_ur_profile, ProfileCells, ProfileTable};
pub use propagate::{
    cost_pp, cost_ur, propagate_pp, propagate_ur, PropagationCachePP, PropagationCacheUR,
};
pub use rotation::{
    quaternion_from_params, quaternion_multiply, rotation_from_params, Quaternion, Rotation3,
};
pub use shape::{BasisFamily, ControlBasis, Digit, PulseShape};

pub use nalgebra::Vector3;
