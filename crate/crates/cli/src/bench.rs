//! Timing of single-control derivative kernels: analytical, augmented
//! exponential, and central finite difference.

use std::fmt;
use std::hint::black_box;
use std::time::Instant;

use pulsegrad_core::derivatives::{d_quaternion_along, d_rotation_along, polar_directions};
use pulsegrad_core::oracles::{augmented_gradient_rot, augmented_quaternion_derivative};
use pulsegrad_core::{Quaternion, Rotation3, RotationParams, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Path {
    /// `∂R/∂θk`, rotation matrices.
    PP,
    /// `∂Q/∂θk`, quaternions.
    UR,
}

impl Path {
    pub fn name(&self) -> &'static str {
        match self {
            Path::PP => "PP",
            Path::UR => "UR",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Analytical,
    Exponential,
    FiniteDifference,
}

/// Controls timed per path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Controls {
    Cartesian,
    Polar,
}

/// Median time of `calls` kernel calls, in μs.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub path: Path,
    pub control: &'static str,
    pub analytical_us: f64,
    /// Not defined for polar controls.
    pub exponential_us: Option<f64>,
    pub finite_difference_us: f64,
}

impl BenchRow {
    pub fn exponential_speedup(&self) -> Option<f64> {
        self.exponential_us.map(|e| e / self.analytical_us)
    }

    /// Finite-difference time over analytical time.
    pub fn fd_ratio(&self) -> f64 {
        self.finite_difference_us / self.analytical_us
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub calls: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn min_exponential_speedup(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(BenchRow::exponential_speedup)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest ratio between analytical and FD cost, in either direction.
    pub fn max_fd_spread(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.fd_ratio().max(1.0 / r.fd_ratio()))
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "time per {} derivative calls [μs]", self.calls)?;
        writeln!(
            f,
            "{:<4} {:<8} {:>12} {:>12} {:>12} {:>10} {:>10}",
            "path", "control", "analytical", "exponential", "finite diff", "exp/ana", "fd/ana"
        )?;
        for r in &self.rows {
            let (e, x) = match r.exponential_us {
                Some(e) => (format!("{e:.1}"), format!("{:.1}", e / r.analytical_us)),
                None => ("-".into(), "-".into()),
            };
            writeln!(
                f,
                "{:<4} {:<8} {:>12.1} {:>12} {:>12.1} {:>10} {:>10.2}",
                r.path.name(),
                r.control,
                r.analytical_us,
                e,
                r.finite_difference_us,
                x,
                r.fd_ratio()
            )?;
        }
        Ok(())
    }
}

const CARTESIAN: [&str; 3] = ["θx", "θy", "θz"];
const POLAR: [&str; 3] = ["α", "θxy", "θz"];
const FD_STEP: f64 = 1e-6;

/// Rotation vector with control `k` moved by `h`.
fn shifted(p: &RotationParams, controls: Controls, k: usize, h: f64) -> Vector3<f64> {
    match controls {
        // built per component: an indexed store into the vector stalls the
        // loads that follow and doubles the cost of the shift
        Controls::Cartesian => {
            let v = p.vector();
            let d = |i: usize| if i == k { h } else { 0.0 };
            Vector3::new(v.x + d(0), v.y + d(1), v.z + d(2))
        }
        Controls::Polar => {
            let d = |i: usize| if i == k { h } else { 0.0 };
            let (s, co) = (p.alpha + d(0)).sin_cos();
            let r = p.theta_xy + d(1);
            Vector3::new(co * r, s * r, p.theta_z + d(2))
        }
    }
}

/// `∂v/∂c` for control `k`.
fn direction(p: &RotationParams, controls: Controls, k: usize) -> Vector3<f64> {
    match controls {
        Controls::Cartesian => {
            let mut w = Vector3::zeros();
            w[k] = 1.0;
            w
        }
        Controls::Polar => polar_directions(p)[k],
    }
}

/// One derivative call, first entry of the result. The whole result goes
/// through `black_box` so no method gets to skip work.
fn call(path: Path, method: Method, controls: Controls, p: &RotationParams, k: usize) -> f64 {
    let inv = 0.5 / FD_STEP;
    match (path, method) {
        (Path::PP, Method::Analytical) => {
            black_box(d_rotation_along(&p.vector(), &direction(p, controls, k)))[(0, 0)]
        }
        (Path::PP, Method::Exponential) => black_box(augmented_gradient_rot(p, k))[(0, 0)],
        (Path::PP, Method::FiniteDifference) => {
            let a = Rotation3::from_rotation_vector(&shifted(p, controls, k, FD_STEP));
            let b = Rotation3::from_rotation_vector(&shifted(p, controls, k, -FD_STEP));
            black_box((a.matrix() - b.matrix()) * inv)[(0, 0)]
        }
        (Path::UR, Method::Analytical) => {
            black_box(d_quaternion_along(&p.vector(), &direction(p, controls, k))).a
        }
        (Path::UR, Method::Exponential) => black_box(augmented_quaternion_derivative(p, k)).a,
        (Path::UR, Method::FiniteDifference) => {
            let a = Quaternion::from_rotation_vector(&shifted(p, controls, k, FD_STEP));
            let b = Quaternion::from_rotation_vector(&shifted(p, controls, k, -FD_STEP));
            black_box(Quaternion::new((a.a - b.a) * inv, (a.b - b.b) * inv, (a.c - b.c) * inv, (a.d - b.d) * inv)).a
        }
    }
}

fn time_calls(
    path: Path,
    method: Method,
    controls: Controls,
    params: &[RotationParams],
    k: usize,
    repeats: usize,
) -> f64 {
    let mut samples: Vec<f64> = (0..repeats)
        .map(|_| {
            let t = Instant::now();
            for p in params {
                black_box(call(path, method, controls, black_box(p), k));
            }
            t.elapsed().as_secs_f64() * 1e6
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    samples[repeats / 2]
}

/// Time `calls` calls of every kernel on random parameters; each figure is
/// the median of `repeats` runs.
pub fn run(calls: usize, repeats: usize, seed: u64) -> BenchReport {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<RotationParams> = (0..calls.max(1))
        .map(|_| {
            RotationParams::from_cartesian(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0))
        })
        .collect();
    let repeats = repeats.max(1);
    let warm = &params[..params.len().min(50)];
    let mut rows = Vec::new();
    for controls in [Controls::Cartesian, Controls::Polar] {
        let names = match controls {
            Controls::Cartesian => CARTESIAN,
            Controls::Polar => POLAR,
        };
        for path in [Path::PP, Path::UR] {
            for (k, control) in names.iter().enumerate() {
                let methods: &[Method] = match controls {
                    Controls::Cartesian => &[Method::Analytical, Method::Exponential, Method::FiniteDifference],
                    Controls::Polar => &[Method::Analytical, Method::FiniteDifference],
                };
                for &m in methods {
                    time_calls(path, m, controls, warm, k, 1);
                }
                let t = |m| time_calls(path, m, controls, &params, k, repeats);
                rows.push(BenchRow {
                    path,
                    control,
                    analytical_us: t(Method::Analytical),
                    exponential_us: (controls == Controls::Cartesian).then(|| t(Method::Exponential)),
                    finite_difference_us: t(Method::FiniteDifference),
                });
            }
        }
    }
    BenchReport { calls, rows }
}
