//! Shaped-pulse files: the native JSON format and a JCAMP-style
//! amplitude/phase export.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use pulsegrad_core::{ControlBasis, Digit, PulseShape};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeFormat {
    Native,
    Jcamp,
}

impl ShapeFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ShapeFormat::Native => "json",
            ShapeFormat::Jcamp => "jdx",
        }
    }
}

impl FromStr for ShapeFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "native" => Ok(ShapeFormat::Native),
            "jcamp" => Ok(ShapeFormat::Jcamp),
            other => Err(format!("unknown shape format '{other}' (expected native or jcamp)")),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NativeShape {
    dt_us: f64,
    basis: String,
    /// Constant amplitude of a phase-only shape, radians per digit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    digits: Vec<Vec<f64>>,
}

/// Shortest decimal microsecond value that reads back as exactly `dt`.
fn dt_to_us(dt: f64) -> f64 {
    let mut us = dt * 1e6;
    for _ in 0..64 {
        let back = us / 1e6;
        if back == dt {
            return us;
        }
        us = if back < dt { us.next_up() } else { us.next_down() };
    }
    dt * 1e6
}

fn us_to_dt(us: f64) -> f64 {
    us / 1e6
}

pub fn to_native(shape: &PulseShape) -> Result<String, CliError> {
    let dt = shape
        .uniform_dt()
        .ok_or_else(|| CliError::Validation("native format needs a uniform digit duration".into()))?;
    let digits: Vec<Vec<f64>> = shape.digits().iter().map(|d| d.controls.clone()).collect();
    if digits.iter().flatten().any(|c| !c.is_finite()) {
        return Err(CliError::Numerical("shape has non-finite controls".into()));
    }
    let doc = NativeShape {
        dt_us: dt_to_us(dt),
        basis: shape.basis().name().to_string(),
        amplitude: match shape.basis() {
            ControlBasis::PhaseOnly { amplitude } => Some(amplitude),
            _ => None,
        },
        digits,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("shape documents always serialize");
    s.push('\n');
    Ok(s)
}

pub fn from_native(text: &str) -> Result<PulseShape, CliError> {
    let doc: NativeShape = serde_json::from_str(text).map_err(|e| {
        CliError::Validation(format!("shape file line {}, column {}: {e}", e.line(), e.column()))
    })?;
    if !(doc.dt_us.is_finite() && doc.dt_us > 0.0) {
        return Err(CliError::Validation(format!("dt_us must be positive, got {}", doc.dt_us)));
    }
    let basis = ControlBasis::from_name(&doc.basis, doc.amplitude).map_err(CliError::from)?;
    let dt = us_to_dt(doc.dt_us);
    let digits = doc
        .digits
        .into_iter()
        .map(|c| Digit::new(c, dt))
        .collect();
    PulseShape::new(basis, digits).map_err(CliError::from)
}

/// `(amplitude, phase)` per digit of a transverse-only shape, with negative
/// amplitudes folded to `(|a|, α + π)`.
pub fn amplitude_phase(shape: &PulseShape) -> Result<Vec<(f64, f64)>, CliError> {
    let basis = shape.basis();
    if basis.has_z() {
        return Err(CliError::Validation(format!(
            "basis {basis} has z controls, which amplitude/phase files cannot carry"
        )));
    }
    if basis.is_reduced() {
        return Err(CliError::Validation(
            "export the physical shape of a reduced basis, not its auxiliary controls".into(),
        ));
    }
    Ok(shape
        .digits()
        .iter()
        .map(|d| {
            let c = &d.controls;
            let (a, p) = match basis {
                ControlBasis::CartesianXY => (c[0].hypot(c[1]), c[1].atan2(c[0])),
                ControlBasis::PhaseOnly { amplitude } => (amplitude, c[0]),
                _ => (c[0], c[1]),
            };
            if a < 0.0 {
                (-a, p + PI)
            } else {
                (a, p)
            }
        })
        .collect())
}

fn phase_degrees(p: f64) -> String {
    let s = format!("{:.6}", p.to_degrees().rem_euclid(360.0));
    if s == "360.000000" {
        "0.000000".into()
    } else {
        s
    }
}

pub fn to_jcamp(shape: &PulseShape, title: &str) -> Result<String, CliError> {
    let dt = shape
        .uniform_dt()
        .ok_or_else(|| CliError::Validation("JCAMP export needs a uniform digit duration".into()))?;
    let ap = amplitude_phase(shape)?;
    let max = ap.iter().fold(0.0f64, |m, (a, _)| m.max(*a));
    let mut out = String::new();
    writeln!(out, "##TITLE= {title}").unwrap();
    writeln!(out, "##NPOINTS= {}", ap.len()).unwrap();
    writeln!(out, "##$DT_US= {}", dt_to_us(dt)).unwrap();
    writeln!(out, "##$MAX_AMPLITUDE_HZ= {}", max / (TAU * dt)).unwrap();
    writeln!(out, "##XYPOINTS= (XY..XY)").unwrap();
    for (a, p) in ap {
        let pct = if max > 0.0 { 100.0 * a / max } else { 0.0 };
        writeln!(out, "{pct:.6}, {}", phase_degrees(p)).unwrap();
    }
    writeln!(out, "##END=").unwrap();
    Ok(out)
}

/// Contents of a JCAMP-style shape file.
#[derive(Clone, Debug, PartialEq)]
pub struct JcampShape {
    pub title: String,
    pub dt_us: Option<f64>,
    pub max_amplitude_hz: Option<f64>,
    /// `(amplitude percent, phase degrees)` pairs.
    pub points: Vec<(f64, f64)>,
}

impl JcampShape {
    /// Polar shape, given the timing and scale the file may omit.
    pub fn to_shape(&self, dt: f64, max_amplitude_hz: f64) -> Result<PulseShape, CliError> {
        let digits = self
            .points
            .iter()
            .map(|(pct, deg)| Digit::new(vec![TAU * dt * max_amplitude_hz * pct / 100.0, deg.to_radians()], dt))
            .collect();
        PulseShape::new(ControlBasis::PolarAmpPhase, digits).map_err(CliError::from)
    }
}

pub fn from_jcamp(text: &str) -> Result<JcampShape, CliError> {
    let err = |line: usize, msg: String| CliError::Validation(format!("JCAMP line {line}: {msg}"));
    let num = |line: usize, s: &str| -> Result<f64, CliError> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| err(line, format!("expected a number, got '{}'", s.trim())))
    };
    let mut title = None;
    let mut npoints: Option<(usize, usize)> = None;
    let mut dt_us = None;
    let mut max_hz = None;
    let mut points = Vec::new();
    let mut in_data = false;
    let mut ended = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with("$$") {
            continue;
        }
        if ended {
            return Err(err(line, "content after ##END=".into()));
        }
        if let Some(rest) = l.strip_prefix("##") {
            let (label, value) = rest
                .split_once('=')
                .ok_or_else(|| err(line, format!("label without '=': '{l}'")))?;
            let value = value.trim();
            in_data = false;
            match label.trim().to_ascii_uppercase().as_str() {
                "TITLE" => title = Some(value.to_string()),
                "NPOINTS" => {
                    let n = value
                        .parse()
                        .map_err(|_| err(line, format!("bad NPOINTS '{value}'")))?;
                    npoints = Some((n, line));
                }
                "$DT_US" => dt_us = Some(num(line, value)?),
                "$MAX_AMPLITUDE_HZ" => max_hz = Some(num(line, value)?),
                "XYPOINTS" => {
                    if value != "(XY..XY)" {
                        return Err(err(line, format!("unsupported XYPOINTS layout '{value}'")));
                    }
                    in_data = true;
                }
                "END" => ended = true,
                _ => {}
            }
            continue;
        }
        if !in_data {
            return Err(err(line, format!("data outside ##XYPOINTS: '{l}'")));
        }
        let (a, p) = l
            .split_once(',')
            .ok_or_else(|| err(line, format!("expected 'amplitude, phase', got '{l}'")))?;
        let (a, p) = (num(line, a)?, num(line, p)?);
        if !(0.0..=100.0).contains(&a) {
            return Err(err(line, format!("amplitude {a} outside 0..100 percent")));
        }
        points.push((a, p));
    }
    if !ended {
        return Err(err(text.lines().count(), "missing ##END=".into()));
    }
    let title = title.ok_or_else(|| err(1, "missing ##TITLE=".into()))?;
    let (n, nline) = npoints.ok_or_else(|| err(1, "missing ##NPOINTS=".into()))?;
    if n != points.len() {
        return Err(err(nline, format!("NPOINTS = {n} but the file holds {} points", points.len())));
    }
    Ok(JcampShape {
        title,
        dt_us,
        max_amplitude_hz: max_hz,
        points,
    })
}

pub fn write_shape(path: &Path, shape: &PulseShape, format: ShapeFormat) -> Result<(), CliError> {
    let text = match format {
        ShapeFormat::Native => to_native(shape)?,
        ShapeFormat::Jcamp => {
            let title = path.file_stem().and_then(|s| s.to_str()).unwrap_or("pulse");
            to_jcamp(shape, title)?
        }
    };
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Read a shape file; `.jdx`/`.jcamp` files are read as JCAMP and need
/// their `##$DT_US` and `##$MAX_AMPLITUDE_HZ` labels.
pub fn read_shape(path: &Path) -> Result<PulseShape, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext.eq_ignore_ascii_case("jdx") || ext.eq_ignore_ascii_case("jcamp") {
        let j = from_jcamp(&text)?;
        match (j.dt_us, j.max_amplitude_hz) {
            (Some(dt), Some(max)) => j.to_shape(us_to_dt(dt), max),
            _ => Err(CliError::Validation(format!(
                "{}: JCAMP file lacks ##$DT_US or ##$MAX_AMPLITUDE_HZ",
                path.display()
            ))),
        }
    } else {
        from_native(&text)
    }
}
