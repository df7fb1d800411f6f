//! Command implementations behind the `pulsegrad` binary.

pub mod bench;
pub mod config;
pub mod gradcheck;
pub mod shape_io;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pulsegrad_core::{
    simulate_profile, simulate_ur_profile, ControlBasis, OptimizationProblem,
    OptimizationResult, PulseShape, Target,
};
use serde::Serialize;

use config::RunConfig;
use shape_io::ShapeFormat;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input: configuration, files, infeasible problems. Exit code 1.
    #[error("{0}")]
    Validation(String),
    /// A numerical check failed. Exit code 2.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Validation(format!("{}: {e}", path.display()))
    }
}

impl From<pulsegrad_core::Error> for CliError {
    fn from(e: pulsegrad_core::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

/// Command-line overrides of a run configuration.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub basis: Option<String>,
    pub starts: Option<usize>,
}

/// Load `path` and apply `o`. A basis override is validated like the rest
/// of the file.
pub fn load_config(path: &Path, o: &Overrides) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        CliError::Validation(format!("{}: config line {}, column {}: {e}", path.display(), e.line(), e.column()))
    })?;
    let text = match (&o.basis, value.as_object_mut()) {
        (Some(b), Some(obj)) => {
            obj.insert("basis".into(), serde_json::Value::String(b.clone()));
            serde_json::to_string_pretty(&value).expect("JSON values serialize")
        }
        _ => text,
    };
    let mut cfg = RunConfig::parse(&text, path.parent())
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(n) = o.starts {
        cfg.starts = std::num::NonZeroUsize::new(n)
            .ok_or_else(|| CliError::Validation("--starts must be at least 1".into()))?;
    }
    if let Some(d) = &o.out {
        cfg.output_dir = Some(d.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

#[derive(Serialize)]
struct RunSummary {
    seed: u64,
    quality: Option<f64>,
    iterations: Option<usize>,
    wall_time_s: Option<f64>,
    termination: Option<&'static str>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Report {
    basis: String,
    digits: usize,
    dt_us: f64,
    best_seed: u64,
    quality: f64,
    signed_quality: f64,
    iterations: usize,
    evaluations: usize,
    wall_time_s: f64,
    time_per_iteration_s: f64,
    termination: &'static str,
    runs: Vec<RunSummary>,
}

/// Transverse amplitude per digit of a physical shape.
fn physical_amplitudes(shape: &PulseShape) -> Vec<f64> {
    shape.transverse_amplitudes().into_iter().map(f64::abs).collect()
}

/// Check the exported shape against the problem's limits.
fn check_feasible(p: &OptimizationProblem, r: &OptimizationResult) -> Result<(), CliError> {
    let phys = &r.physical_shape;
    if let Some(c) = &p.constraint {
        if !c.is_satisfied(&physical_amplitudes(phys), 0.0) {
            return Err(CliError::Numerical("optimized shape violates the amplitude constraint".into()));
        }
    }
    if let (Some(z), Some(slot)) = (p.z_limit, phys.basis().z_slot()) {
        if phys.digits().iter().any(|d| d.controls[slot].abs() > z) {
            return Err(CliError::Numerical("optimized shape violates the z limit".into()));
        }
    }
    Ok(())
}

/// `optimize`: multistart run, shapes in the requested formats (both when
/// `format` is `None`), a JSON report and the quality trajectory.
pub fn cmd_optimize(cfg: &RunConfig, format: Option<ShapeFormat>) -> Result<String, CliError> {
    let p = cfg.problem()?;
    let dir = out_dir(cfg)?;
    let seeds: Vec<u64> = (0..cfg.starts.get() as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let rep = pulsegrad_core::multistart_seeds(&p, &seeds);
    let Some(best) = rep.best_result() else {
        let first = rep.results.iter().find_map(|r| r.as_ref().err()).map(|e| e.to_string());
        return Err(CliError::Numerical(format!("every start failed: {}", first.unwrap_or_default())));
    };
    check_feasible(&p, best)?;

    let mut log = String::new();
    let formats = match format {
        Some(f) => vec![f],
        None => vec![ShapeFormat::Native, ShapeFormat::Jcamp],
    };
    for f in formats {
        let path = dir.join(format!("shape.{}", f.extension()));
        match f {
            ShapeFormat::Native => shape_io::write_shape(&path, &best.shape, f)?,
            ShapeFormat::Jcamp if best.physical_shape.basis().has_z() => {
                writeln!(log, "note: no JCAMP export for basis {} (z controls)", cfg.basis).unwrap();
                continue;
            }
            ShapeFormat::Jcamp => shape_io::write_shape(&path, &best.physical_shape, f)?,
        }
        writeln!(log, "wrote {}", path.display()).unwrap();
    }

    let report = Report {
        basis: p.basis().name().to_string(),
        digits: p.shape_template.len(),
        dt_us: cfg.dt_us,
        best_seed: best.seed,
        quality: best.quality,
        signed_quality: best.signed_quality,
        iterations: best.iterations,
        evaluations: best.evaluations,
        wall_time_s: best.wall_time.as_secs_f64(),
        time_per_iteration_s: best.time_per_iteration().as_secs_f64(),
        termination: best.termination.as_str(),
        runs: rep
            .results
            .iter()
            .zip(&seeds)
            .map(|(r, &seed)| match r {
                Ok(r) => RunSummary {
                    seed,
                    quality: Some(r.quality),
                    iterations: Some(r.iterations),
                    wall_time_s: Some(r.wall_time.as_secs_f64()),
                    termination: Some(r.termination.as_str()),
                    error: None,
                },
                Err(e) => RunSummary {
                    seed,
                    quality: None,
                    iterations: None,
                    wall_time_s: None,
                    termination: None,
                    error: Some(e.to_string()),
                },
            })
            .collect(),
    };
    let path = dir.join("report.json");
    let json = serde_json::to_string_pretty(&report).expect("reports serialize") + "\n";
    std::fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
    writeln!(log, "wrote {}", path.display()).unwrap();

    let path = dir.join("trajectory.tsv");
    let mut tsv = String::from("# iteration\tquality\n");
    for (i, q) in best.trajectory.iter().enumerate() {
        writeln!(tsv, "{i}\t{q}").unwrap();
    }
    std::fs::write(&path, tsv).map_err(|e| CliError::io(&path, e))?;
    writeln!(log, "wrote {}", path.display()).unwrap();

    writeln!(
        log,
        "quality {:.6}  iterations {}  time {:.3} s  per iteration {:.3} ms  ({}, seed {})",
        best.quality,
        best.iterations,
        best.wall_time.as_secs_f64(),
        best.time_per_iteration().as_secs_f64() * 1e3,
        best.termination.as_str(),
        best.seed
    )
    .unwrap();
    Ok(log)
}

/// `simulate`: profile of a stored shape on the training ranges sampled
/// more densely.
pub fn cmd_simulate(cfg: &RunConfig, shape_path: Option<&Path>) -> Result<String, CliError> {
    let path = shape_path
        .map(Path::to_path_buf)
        .or_else(|| cfg.shape.clone())
        .ok_or_else(|| CliError::Validation("simulate needs a shape (--shape or \"shape\" in the config)".into()))?;
    let shape = shape_io::read_shape(&path)?;
    let mut p = cfg.problem()?;
    // the file decides the basis; the config supplies grid, target, limits
    if shape.basis() != p.basis() || shape.len() != p.shape_template.len() {
        if shape.basis().is_reduced() && p.constraint.is_none() {
            return Err(CliError::Validation(format!(
                "{}: basis {} needs the constraint it was optimized under",
                path.display(),
                shape.basis()
            )));
        }
        p.shape_template = shape.clone();
    }
    let pulse = p.resolve(&shape)?;
    let eval = p.grid.refined(cfg.profile.refine.get());
    let (table, target_state) = match &p.target {
        Target::PP { rho0, lambda_f } => (simulate_profile(&pulse, rho0, &eval.offsets_hz(), &eval.scales()), Some(*lambda_f)),
        Target::UR { q_f } => (simulate_ur_profile(&pulse, q_f, &eval.offsets_hz(), &eval.scales()), None),
    };
    let dir = out_dir(cfg)?;
    let out = dir.join("profile.tsv");
    std::fs::write(&out, table.to_tsv()).map_err(|e| CliError::io(&out, e))?;
    Ok(format!(
        "wrote {} ({} offsets × {} B1 scales)\nmean quality {:.6}\n",
        out.display(),
        eval.n_off,
        eval.n_rf,
        table.mean_quality(target_state.as_ref())
    ))
}

/// `gradcheck`: the three-way oracle suite.
pub fn cmd_gradcheck(
    opts: &gradcheck::GradcheckOptions,
    kernels: &gradcheck::Kernels,
) -> Result<String, CliError> {
    let rep = gradcheck::run(opts, kernels);
    if rep.passed() {
        Ok(rep.to_string())
    } else {
        Err(CliError::Numerical(rep.to_string()))
    }
}

/// `bench`: kernel timings.
pub fn cmd_bench(calls: usize, repeats: usize, seed: u64) -> String {
    let rep = bench::run(calls, repeats, seed);
    format!(
        "{rep}smallest exponential/analytical speedup {:.1}×, largest analytical/FD spread {:.2}×\n",
        rep.min_exponential_speedup(),
        rep.max_fd_spread()
    )
}

/// Basis used for `--basis` selection in gradcheck when the phase-only
/// amplitude is not given.
pub const GRADCHECK_PHASE_AMPLITUDE: f64 = 0.4;

pub fn parse_basis_selection(name: &str) -> Result<Vec<ControlBasis>, CliError> {
    gradcheck::select_bases(name, GRADCHECK_PHASE_AMPLITUDE).ok_or_else(|| {
        CliError::Validation(format!(
            "unknown basis '{name}' (expected all, cartesian, polar or one of {})",
            ControlBasis::NAMES.join(", ")
        ))
    })
}
