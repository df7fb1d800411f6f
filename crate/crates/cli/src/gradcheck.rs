//! Three-way agreement of the analytical derivatives with the
//! block-augmented exponential and with finite differences.
//!
//! Kernel level: every entry of `∂R/∂c` and `∂Q/∂c` on random digit
//! parameters. Cost level: the full grid-averaged gradient, through the
//! constraint clamps, on random shapes.

use std::f64::consts::PI;
use std::fmt;

use pulsegrad_core::derivatives::{CARTESIAN_CONTROLS, POLAR_CONTROLS};
use pulsegrad_core::oracles::{augmented_gradient_rot, augmented_quaternion_derivative, ridders, Ridders};
use pulsegrad_core::{
    d_quaternion, d_rotation_cartesian, d_rotation_polar, gradient::grid_quality, grid_average,
    BasisFamily, ConstraintSpec, ControlBasis,
    GridSpec, OptimizationProblem, PulseShape, Quaternion, QuaternionDerivatives,
    RotationDerivatives, RotationParams, Target, Vector3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bound on `|analytic − exponential|` per entry.
pub const EXPM_BOUND: f64 = 1e-10;
/// Relative bound against finite differences.
pub const FD_REL: f64 = 1e-7;
/// Absolute bound where the finite-difference value is itself below it.
pub const FD_ABS: f64 = 1e-8;

/// The analytical kernels under test. Swapping one out is how the suite
/// checks that it catches mistakes.
#[derive(Clone, Copy)]
pub struct Kernels {
    pub rotation_cartesian: fn(&RotationParams) -> RotationDerivatives,
    pub rotation_polar: fn(&RotationParams) -> RotationDerivatives,
    pub quaternion: fn(&RotationParams, BasisFamily) -> QuaternionDerivatives,
}

impl Default for Kernels {
    fn default() -> Self {
        Kernels {
            rotation_cartesian: d_rotation_cartesian,
            rotation_polar: d_rotation_polar,
            quaternion: d_quaternion,
        }
    }
}

pub fn fd_agrees(analytic: f64, fd: f64) -> bool {
    let d = (analytic - fd).abs();
    if fd.abs() < FD_ABS {
        d < FD_ABS
    } else {
        d <= FD_REL * fd.abs()
    }
}

/// Ridders estimate from `h0`; if it disagrees with `analytic`, restart
/// from smaller steps and keep whichever estimate has the smallest error
/// bound.
pub fn fd_estimate<F: Fn(f64) -> f64>(f: F, x: f64, h0: f64, analytic: f64) -> f64 {
    let first = ridders(&f, x, h0);
    if fd_agrees(analytic, first.value) {
        return first.value;
    }
    [0.1 * h0, 0.01 * h0]
        .into_iter()
        .map(|h| ridders(&f, x, h))
        .fold(first, |a: Ridders, b| if b.error < a.error { b } else { a })
        .value
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub basis: String,
    pub instance: usize,
    /// E.g. `∂R_xx/∂θx`, or `∂Φ̄/∂c[12]` for cost gradients.
    pub entry: String,
    pub oracle: &'static str,
    pub analytic: f64,
    pub reference: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} instance {}: {} analytic {:e} vs {} {:e}",
            self.basis, self.instance, self.entry, self.analytic, self.oracle, self.reference
        )
    }
}

/// Largest deviations seen, and every bound violation.
#[derive(Clone, Debug, Default)]
pub struct Deviations {
    /// Largest `|analytic − exponential|`; `None` when not applicable.
    pub max_expm: Option<f64>,
    /// Largest relative deviation from FD where `|fd| ≥ FD_ABS`.
    pub max_fd_rel: f64,
    /// Largest absolute deviation from FD where `|fd| < FD_ABS`.
    pub max_fd_abs: f64,
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl Deviations {
    fn expm(&mut self, v: Violation) {
        let d = (v.analytic - v.reference).abs();
        self.max_expm = Some(self.max_expm.unwrap_or(0.0).max(d));
        self.checked += 1;
        if !(d <= EXPM_BOUND) {
            self.violations.push(v);
        }
    }

    fn fd(&mut self, v: Violation) {
        let d = (v.analytic - v.reference).abs();
        if v.reference.abs() < FD_ABS {
            self.max_fd_abs = self.max_fd_abs.max(d);
        } else {
            self.max_fd_rel = self.max_fd_rel.max(d / v.reference.abs());
        }
        self.checked += 1;
        if !fd_agrees(v.analytic, v.reference) {
            self.violations.push(v);
        }
    }

    pub fn merge(&mut self, o: Deviations) {
        self.max_expm = match (self.max_expm, o.max_expm) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self.max_fd_rel = self.max_fd_rel.max(o.max_fd_rel);
        self.max_fd_abs = self.max_fd_abs.max(o.max_fd_abs);
        self.checked += o.checked;
        self.violations.extend(o.violations);
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];
const QUAT: [&str; 4] = ["A", "B", "C", "D"];

/// Random digit parameters; every tenth draw has `θ < 1e-5`.
pub fn random_params(r: &mut ChaCha8Rng, family: BasisFamily, instance: usize) -> RotationParams {
    let scale = if instance % 10 == 9 { 5e-6 } else { 2.0 };
    let mut u = || r.random_range(-1.0..1.0);
    match family {
        BasisFamily::Cartesian => RotationParams::from_cartesian(scale * u(), scale * u(), scale * u()),
        BasisFamily::Polar => {
            let (amp, z) = (scale * u(), scale * u());
            RotationParams::from_polar(amp, PI * u(), z)
        }
    }
}

/// Parameters with control `k` replaced by `t`.
fn perturbed(p: &RotationParams, family: BasisFamily, k: usize, t: f64) -> RotationParams {
    match family {
        BasisFamily::Cartesian => {
            let mut c = [p.theta_x, p.theta_y, p.theta_z];
            c[k] = t;
            RotationParams::from_cartesian(c[0], c[1], c[2])
        }
        BasisFamily::Polar => {
            let mut c = [p.alpha, p.theta_xy, p.theta_z];
            c[k] = t;
            RotationParams::from_polar(c[1], c[0], c[2])
        }
    }
}

fn control_value(p: &RotationParams, family: BasisFamily, k: usize) -> f64 {
    match family {
        BasisFamily::Cartesian => [p.theta_x, p.theta_y, p.theta_z][k],
        BasisFamily::Polar => [p.alpha, p.theta_xy, p.theta_z][k],
    }
}

/// `R(v) − I`, written so that no entry is the difference of two numbers
/// near 1. Differencing `R` itself cannot resolve derivatives much below
/// `ε/h` at tiny angles.
fn rotation_minus_identity(v: &Vector3<f64>) -> [[f64; 3]; 3] {
    let t = v.norm();
    let (b, c) = if t == 0.0 {
        (1.0, 0.5)
    } else {
        let h = (0.5 * t).sin() / t;
        (t.sin() / t, 2.0 * h * h)
    };
    // R = I + b[v]× + c([v]×)², and ([v]×)² = v vᵀ − θ² I
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = c * v[i] * v[j] - if i == j { c * t * t } else { 0.0 };
        }
    }
    m[0][1] -= b * v.z;
    m[0][2] += b * v.y;
    m[1][0] += b * v.z;
    m[1][2] -= b * v.x;
    m[2][0] -= b * v.y;
    m[2][1] += b * v.x;
    m
}

/// `Q(v) − (0, 0, 0, 1)`, with the scalar part as `−2 sin²(θ/4)`.
fn quaternion_minus_identity(v: &Vector3<f64>) -> [f64; 4] {
    let t = v.norm();
    let s = if t == 0.0 { 0.5 } else { (0.5 * t).sin() / t };
    let q = (0.25 * t).sin();
    [s * v.x, s * v.y, s * v.z, -2.0 * q * q]
}

/// Kernel-level check of one parameter draw.
pub fn check_kernels(
    kernels: &Kernels,
    basis: &str,
    family: BasisFamily,
    instance: usize,
    p: &RotationParams,
) -> Deviations {
    let mut dev = Deviations::default();
    let names = match family {
        BasisFamily::Cartesian => CARTESIAN_CONTROLS,
        BasisFamily::Polar => POLAR_CONTROLS,
    };
    let dr = match family {
        BasisFamily::Cartesian => (kernels.rotation_cartesian)(p),
        BasisFamily::Polar => (kernels.rotation_polar)(p),
    };
    let dq = (kernels.quaternion)(p, family);
    let v = |entry: String, oracle, analytic, reference| Violation {
        basis: basis.to_string(),
        instance,
        entry,
        oracle,
        analytic,
        reference,
    };
    for k in 0..3 {
        let x = control_value(p, family, k);
        let expm_r = (family == BasisFamily::Cartesian).then(|| augmented_gradient_rot(p, k));
        let expm_q = (family == BasisFamily::Cartesian).then(|| augmented_quaternion_derivative(p, k));
        for h in 0..3 {
            for c in 0..3 {
                let entry = format!("∂R_{}{}/∂{}", AXES[h], AXES[c], names[k]);
                let a = dr[k][(h, c)];
                if let Some(e) = &expm_r {
                    dev.expm(v(entry.clone(), "exponential", a, e[(h, c)]));
                }
                let f = |t: f64| rotation_minus_identity(&perturbed(p, family, k, t).vector())[h][c];
                dev.fd(v(entry, "finite difference", a, fd_estimate(f, x, 0.1, a)));
            }
        }
        let qa = dq[k].to_array();
        for i in 0..4 {
            let entry = format!("∂Q_{}/∂{}", QUAT[i], names[k]);
            if let Some(e) = &expm_q {
                dev.expm(v(entry.clone(), "exponential", qa[i], e.to_array()[i]));
            }
            let f = |t: f64| quaternion_minus_identity(&perturbed(p, family, k, t).vector())[i];
            dev.fd(v(entry, "finite difference", qa[i], fd_estimate(f, x, 0.1, qa[i])));
        }
    }
    dev
}

/// Which constraint a cost-level instance runs under.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    None,
    Amplitude,
    Power,
    Energy,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 4] =
        [ConstraintKind::None, ConstraintKind::Amplitude, ConstraintKind::Power, ConstraintKind::Energy];

    /// A limit that the random shapes partly saturate.
    pub fn spec(&self, n: usize) -> Option<ConstraintSpec> {
        match self {
            ConstraintKind::None => None,
            ConstraintKind::Amplitude => Some(ConstraintSpec::amplitude(0.7)),
            ConstraintKind::Power => Some(ConstraintSpec::Power { p_max_avg: 0.3 }),
            ConstraintKind::Energy => Some(ConstraintSpec::Energy {
                e_theta_max: 0.3 * n as f64,
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConstraintKind::None => "none",
            ConstraintKind::Amplitude => "amplitude",
            ConstraintKind::Power => "power",
            ConstraintKind::Energy => "energy",
        }
    }

    /// The kinds that apply to `basis` (reduced bases need one; the fixed
    /// amplitude of phase-only shapes is not clamped).
    pub fn for_basis(basis: ControlBasis) -> &'static [ConstraintKind] {
        match basis {
            ControlBasis::PhaseOnly { .. } => &[ConstraintKind::None],
            b if b.is_reduced() => &ConstraintKind::ALL[1..],
            _ => &ConstraintKind::ALL,
        }
    }
}

fn unit(r: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// A random cost-level instance: shape, PP or UR target, small grid.
pub fn random_instance(
    r: &mut ChaCha8Rng,
    basis: ControlBasis,
    n: usize,
    kind: ConstraintKind,
) -> (OptimizationProblem, PulseShape) {
    let dt = 2e-6;
    let mut c = Vec::with_capacity(n * basis.arity());
    for _ in 0..n {
        for k in 0..basis.arity() {
            let phase = matches!(basis, ControlBasis::PhaseOnly { .. }) || (basis.amplitude_slot().is_some() && k == 1);
            c.push(if phase { r.random_range(-PI..PI) } else { r.random_range(-1.0..1.0) });
        }
    }
    let shape = PulseShape::from_flat(basis, &c, dt).expect("arity matches");
    let target = if r.random_bool(0.5) {
        Target::PP {
            rho0: unit(r),
            lambda_f: unit(r),
        }
    } else {
        let a = unit(r);
        let half: f64 = r.random_range(0.0..PI);
        let v = a * half.sin();
        Target::UR {
            q_f: Quaternion::new(v.x, v.y, v.z, half.cos()),
        }
    };
    let grid = GridSpec {
        n_off: 2,
        bandwidth_hz: 40e3,
        n_rf: 1,
        b1_tolerance: 0.0,
    };
    let mut p = OptimizationProblem::new(PulseShape::zeros(basis, n, dt).expect("n > 0"), grid, target);
    p.constraint = kind.spec(n);
    (p, shape)
}

/// Cost-level check: `∂Φ̄/∂c` against finite differences of `Φ̄`.
pub fn check_cost_gradient(p: &OptimizationProblem, shape: &PulseShape, label: &str, instance: usize) -> Deviations {
    let mut dev = Deviations::default();
    let (_, g) = grid_average(p, shape).expect("instance is consistent");
    let points = p.grid.points();
    let x = shape.flat_controls();
    for (i, &a) in g.as_slice().iter().enumerate() {
        let f = |t: f64| {
            let mut s = shape.clone();
            s.set_control(i, t);
            grid_quality(&p.resolve(&s).expect("same template"), &p.target, &points)
        };
        let fd = fd_estimate(f, x[i], 0.1, a);
        dev.fd(Violation {
            basis: label.to_string(),
            instance,
            entry: format!("∂Φ̄/∂c[{i}]"),
            oracle: "finite difference",
            analytic: a,
            reference: fd,
        });
    }
    dev
}

#[derive(Clone, Debug)]
pub struct GradcheckOptions {
    pub seed: u64,
    /// Kernel-level parameter draws per basis family.
    pub kernel_draws: usize,
    /// Cost-level random shapes per basis, digit count and constraint.
    pub instances: usize,
    pub digits: Vec<usize>,
    pub bases: Vec<ControlBasis>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            seed: 0,
            kernel_draws: 200,
            instances: 3,
            digits: vec![1, 10, 50],
            bases: ControlBasis::all(0.4).to_vec(),
        }
    }
}

/// Bases selected by a `--basis` argument: a basis name, or `cartesian`,
/// `polar` (every polar-family basis) or `all`.
pub fn select_bases(name: &str, phase_amplitude: f64) -> Option<Vec<ControlBasis>> {
    let all = ControlBasis::all(phase_amplitude);
    match name {
        "all" => Some(all.to_vec()),
        "cartesian" => Some(all.iter().copied().filter(|b| b.family() == BasisFamily::Cartesian).collect()),
        "polar" => Some(all.iter().copied().filter(|b| b.family() == BasisFamily::Polar).collect()),
        other => ControlBasis::from_name(other, Some(phase_amplitude)).ok().map(|b| vec![b]),
    }
}

#[derive(Clone, Debug)]
pub struct BasisResult {
    pub basis: ControlBasis,
    pub kernel: Deviations,
    pub cost: Deviations,
    pub note: Option<&'static str>,
}

#[derive(Clone, Debug)]
pub struct GradcheckReport {
    pub results: Vec<BasisResult>,
}

pub const POLAR_NOTE: &str =
    "exponential oracle skipped: polar controls enter nonlinearly and have no generator";

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.kernel.passed() && r.cost.passed())
    }

    pub fn violations(&self) -> impl Iterator<Item = &Violation> {
        self.results.iter().flat_map(|r| r.kernel.violations.iter().chain(&r.cost.violations))
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>8} {:>14} {:>14} {:>14} {:>14}  status",
            "basis", "checks", "kernel-expm", "kernel-fd rel", "cost-fd rel", "fd abs<1e-8"
        )?;
        for r in &self.results {
            let expm = r.kernel.max_expm.map_or("-".to_string(), |d| format!("{d:.2e}"));
            writeln!(
                f,
                "{:<16} {:>8} {:>14} {:>14.2e} {:>14.2e} {:>14.2e}  {}",
                r.basis.name(),
                r.kernel.checked + r.cost.checked,
                expm,
                r.kernel.max_fd_rel,
                r.cost.max_fd_rel,
                r.kernel.max_fd_abs.max(r.cost.max_fd_abs),
                if r.kernel.passed() && r.cost.passed() { "ok" } else { "FAIL" }
            )?;
            if let Some(n) = r.note {
                writeln!(f, "  note: {n}")?;
            }
        }
        let v: Vec<&Violation> = self.violations().collect();
        if !v.is_empty() {
            writeln!(f, "{} violations (bounds: exponential {EXPM_BOUND:e}, fd rel {FD_REL:e} / abs {FD_ABS:e}):", v.len())?;
            for x in v.iter().take(20) {
                writeln!(f, "  {x}")?;
            }
            if v.len() > 20 {
                writeln!(f, "  ... and {} more", v.len() - 20)?;
            }
        }
        Ok(())
    }
}

fn basis_seed(seed: u64, basis: usize, part: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ ((basis as u64 + 1) << 32) ^ (part << 48))
}

pub fn run(opts: &GradcheckOptions, kernels: &Kernels) -> GradcheckReport {
    let results = opts
        .bases
        .iter()
        .enumerate()
        .map(|(bi, &basis)| {
            let family = basis.family();
            let label = basis.name();
            let mut kernel = Deviations::default();
            let mut r = basis_seed(opts.seed, bi, 0);
            for i in 0..opts.kernel_draws {
                let p = random_params(&mut r, family, i);
                kernel.merge(check_kernels(kernels, label, family, i, &p));
            }
            let mut cost = Deviations::default();
            let mut r = basis_seed(opts.seed, bi, 1);
            let mut instance = 0;
            for &n in &opts.digits {
                for &kind in ConstraintKind::for_basis(basis) {
                    for _ in 0..opts.instances {
                        let (p, s) = random_instance(&mut r, basis, n, kind);
                        let tag = format!("{label} (N={n}, constraint {})", kind.name());
                        cost.merge(check_cost_gradient(&p, &s, &tag, instance));
                        instance += 1;
                    }
                }
            }
            BasisResult {
                basis,
                kernel,
                cost,
                note: (family == BasisFamily::Polar).then_some(POLAR_NOTE),
            }
        })
        .collect();
    GradcheckReport { results }
}
