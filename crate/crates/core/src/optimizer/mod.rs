//! L-BFGS maximization of the grid-averaged quality.
//!
//! The minimized objective is `f = 1 − Φ̄` (PP) or `f = 1 − |Φ̄|` (UR).
//! Constraints are applied inside the objective by the tanh clamps, so every
//! evaluated shape is feasible.

mod lbfgs;
mod line_search;

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gradient::grid_average_points;
use crate::problem::{OptimizationProblem, Target};
use crate::shape::{ControlBasis, PulseShape};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitStrategy {
    /// Uniform random phases, amplitude half the reference amplitude.
    RandomPhase,
    /// Every control drawn from `N(0, (0.1·reference)²)`.
    RandomSmall,
    /// Start from the controls of the problem's shape template.
    FromFile,
}

/// Units of the rate controls (`θx, θy, θz, θxy`) seen by the optimizer.
/// Phases are always in radians.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlUnits {
    /// Rotation angle per digit.
    Radians,
    /// Angular frequency, `ω = θ/Δt`.
    AngularFrequency,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerOptions {
    pub max_iterations: usize,
    /// Threshold on `‖∇f‖∞`, measured per radian.
    pub grad_tolerance: f64,
    pub lbfgs_memory: usize,
    pub seed: u64,
    pub init_strategy: InitStrategy,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search_evals: usize,
    pub units: ControlUnits,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            max_iterations: 2000,
            grad_tolerance: 1e-8,
            lbfgs_memory: 10,
            seed: 0,
            init_strategy: InitStrategy::RandomPhase,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_search_evals: 30,
            units: ControlUnits::Radians,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::InvalidProblem(format!(
                "line search constants need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if self.lbfgs_memory == 0 {
            return Err(Error::InvalidProblem("L-BFGS memory must be at least 1".into()));
        }
        if self.max_line_search_evals < 2 {
            return Err(Error::InvalidProblem("line search needs at least 2 evaluations".into()));
        }
        if !(self.grad_tolerance >= 0.0) {
            return Err(Error::InvalidProblem("gradient tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminationReason {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationReason::Converged => "converged",
            TerminationReason::MaxIterations => "max_iterations",
            TerminationReason::LineSearchFailure => "line_search_failure",
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    /// Optimized controls as stored (auxiliary amplitudes for reduced
    /// bases).
    pub shape: PulseShape,
    /// Controls after constraints, in the unreduced basis.
    pub physical_shape: PulseShape,
    /// Reported quality: `Φ̄` for PP, `|Φ̄|` for UR.
    pub quality: f64,
    /// `Φ̄` with its sign (differs from `quality` only for UR).
    pub signed_quality: f64,
    /// Reported quality at the start and after every accepted step.
    pub trajectory: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub wall_time: Duration,
    pub termination: TerminationReason,
    pub seed: u64,
}

impl OptimizationResult {
    pub fn time_per_iteration(&self) -> Duration {
        if self.iterations == 0 {
            Duration::ZERO
        } else {
            self.wall_time / self.iterations as u32
        }
    }
}

/// A reference transverse amplitude for digit `j`: the constraint's scale if
/// any, else `π/N`.
fn reference_amplitude(problem: &OptimizationProblem, j: usize) -> f64 {
    let n = problem.shape_template.len();
    match &problem.constraint {
        Some(c) => c.reference_amplitude(j, n),
        None => std::f64::consts::PI / n as f64,
    }
}

/// Initial controls for `problem`, deterministic in `seed`.
pub fn init_shape(
    problem: &OptimizationProblem,
    strategy: InitStrategy,
    seed: u64,
) -> Result<PulseShape> {
    let template = &problem.shape_template;
    let basis = template.basis();
    if strategy == InitStrategy::FromFile {
        return Ok(template.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut controls = Vec::with_capacity(template.len() * basis.arity());
    for j in 0..template.len() {
        let theta_ref = match basis {
            ControlBasis::PhaseOnly { amplitude } => amplitude,
            _ => reference_amplitude(problem, j),
        };
        match strategy {
            InitStrategy::RandomPhase => {
                let phase = rng.random_range(0.0..TAU);
                let amp = 0.5 * theta_ref;
                match basis {
                    ControlBasis::PhaseOnly { .. } => controls.push(phase),
                    ControlBasis::CartesianXY | ControlBasis::CartesianXYZ => {
                        controls.push(amp * phase.cos());
                        controls.push(amp * phase.sin());
                    }
                    _ => {
                        controls.push(amp);
                        controls.push(phase);
                    }
                }
                if basis.has_z() {
                    controls.push(0.0);
                }
            }
            InitStrategy::RandomSmall => {
                let normal = Normal::new(0.0, 0.1 * theta_ref)
                    .map_err(|e| Error::InvalidProblem(e.to_string()))?;
                for _ in 0..basis.arity() {
                    controls.push(normal.sample(&mut rng));
                }
            }
            InitStrategy::FromFile => unreachable!(),
        }
    }
    template.with_flat_controls(&controls)
}

/// Maps stored controls to optimizer variables and back.
struct Units {
    factors: Vec<f64>,
}

impl Units {
    fn new(shape: &PulseShape, units: ControlUnits) -> Self {
        let basis = shape.basis();
        let k = basis.arity();
        let mut factors = vec![1.0; shape.len() * k];
        if units == ControlUnits::AngularFrequency {
            let rate_slots: &[usize] = match basis {
                ControlBasis::CartesianXY => &[0, 1],
                ControlBasis::CartesianXYZ => &[0, 1, 2],
                ControlBasis::PhaseOnly { .. } => &[],
                _ if basis.has_z() => &[0, 2],
                _ => &[0],
            };
            for (j, d) in shape.digits().iter().enumerate() {
                for &s in rate_slots {
                    factors[j * k + s] = d.dt;
                }
            }
        }
        Units { factors }
    }

    /// Stored θ → optimizer variable.
    fn to_vars(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.factors).map(|(t, f)| t / f).collect()
    }

    fn to_theta(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.factors).map(|(t, f)| t * f).collect()
    }
}

/// Run L-BFGS from `initial`.
pub fn optimize(problem: &OptimizationProblem, initial: &PulseShape) -> Result<OptimizationResult> {
    problem.validate()?;
    let start = Instant::now();
    problem.resolve(initial)?;
    let points = problem.grid.points();
    let units = Units::new(initial, problem.options.units);
    let is_ur = problem.target.is_ur();
    let opts = &problem.options;

    let objective = |x: &[f64]| -> (f64, Vec<f64>) {
        let theta = units.to_theta(x);
        let shape = initial
            .with_flat_controls(&theta)
            .expect("optimizer keeps the control count");
        let pulse = match problem.resolve(&shape) {
            Ok(p) => p,
            Err(_) => return (f64::NAN, vec![0.0; x.len()]),
        };
        let (phi, grad) = grid_average_points(&pulse, &problem.target, &points);
        let sign = if is_ur && phi < 0.0 { -1.0 } else { 1.0 };
        // f = 1 − sign·Φ̄; ∂f/∂x = −sign·∂Φ̄/∂θ·dθ/dx
        let g = grad
            .as_slice()
            .iter()
            .zip(&units.factors)
            .map(|(gi, fi)| -sign * gi * fi)
            .collect();
        (1.0 - sign * phi, g)
    };

    let settings = lbfgs::Settings {
        memory: opts.lbfgs_memory,
        max_iterations: opts.max_iterations,
        grad_tolerance: opts.grad_tolerance,
        wolfe: line_search::WolfeParams {
            c1: opts.wolfe_c1,
            c2: opts.wolfe_c2,
            max_evals: opts.max_line_search_evals,
        },
        grad_units: (opts.units == ControlUnits::AngularFrequency).then(|| units.factors.clone()),
    };
    let m = lbfgs::minimize(objective, units.to_vars(&initial.flat_controls()), &settings);

    let shape = initial.with_flat_controls(&units.to_theta(&m.x))?;
    let pulse = problem.resolve(&shape)?;
    let (signed, _) = grid_average_points(&pulse, &problem.target, &points);
    let quality = match problem.target {
        Target::PP { .. } => signed,
        Target::UR { .. } => signed.abs(),
    };
    Ok(OptimizationResult {
        physical_shape: pulse.to_physical(),
        shape,
        quality,
        signed_quality: signed,
        trajectory: m.trajectory.iter().map(|f| 1.0 - f).collect(),
        iterations: m.iterations,
        evaluations: m.evaluations,
        wall_time: start.elapsed(),
        termination: m.reason,
        seed: opts.seed,
    })
}

/// Initialize from the problem's strategy and seed, then optimize.
pub fn optimize_seeded(problem: &OptimizationProblem, seed: u64) -> Result<OptimizationResult> {
    let init = init_shape(problem, problem.options.init_strategy, seed)?;
    let mut r = optimize(problem, &init)?;
    r.seed = seed;
    Ok(r)
}

/// All runs of a multistart, in seed order, and the index of the best.
#[derive(Clone, Debug)]
pub struct MultistartReport {
    pub results: Vec<Result<OptimizationResult>>,
    pub best: Option<usize>,
}

impl MultistartReport {
    pub fn best_result(&self) -> Option<&OptimizationResult> {
        self.best.and_then(|i| self.results[i].as_ref().ok())
    }
}

/// Optimize from each seed (in parallel) and pick the highest quality; ties
/// go to the earlier seed.
pub fn multistart_seeds(problem: &OptimizationProblem, seeds: &[u64]) -> MultistartReport {
    let results: Vec<Result<OptimizationResult>> =
        seeds.par_iter().map(|&s| optimize_seeded(problem, s)).collect();
    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        if let Ok(r) = r {
            let better = match best {
                None => true,
                Some(b) => r.quality > results[b].as_ref().map_or(f64::NEG_INFINITY, |x| x.quality),
            };
            if better {
                best = Some(i);
            }
        }
    }
    MultistartReport { results, best }
}

/// `n_starts` runs with seeds `seed, seed + 1, ...` from the problem options.
pub fn multistart(problem: &OptimizationProblem, n_starts: usize) -> MultistartReport {
    let base = problem.options.seed;
    let seeds: Vec<u64> = (0..n_starts as u64).map(|i| base.wrapping_add(i)).collect();
    multistart_seeds(problem, &seeds)
}
