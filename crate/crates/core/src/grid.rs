//! Offset and B1-scale grids for robust optimization.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Offsets spread linearly over `±bandwidth/2`, B1 scales over
/// `1 ± tolerance`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub n_off: usize,
    pub bandwidth_hz: f64,
    pub n_rf: usize,
    pub b1_tolerance: f64,
}

/// `n` points spread over `center ± half`, exactly mirror-symmetric.
pub fn symmetric_points(center: f64, half: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![center];
    }
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| center + half * (2.0 * i as f64 - m) / m)
        .collect()
}

impl GridSpec {
    /// The single on-resonance, nominal-B1 point.
    pub fn single() -> Self {
        GridSpec {
            n_off: 1,
            bandwidth_hz: 0.0,
            n_rf: 1,
            b1_tolerance: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_off == 0 || self.n_rf == 0 {
            return Err(Error::InvalidProblem("grid needs at least one point per axis".into()));
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz >= 0.0) {
            return Err(Error::InvalidProblem(format!(
                "bandwidth must be finite and non-negative, got {}",
                self.bandwidth_hz
            )));
        }
        if !(self.b1_tolerance.is_finite() && (0.0..1.0).contains(&self.b1_tolerance)) {
            return Err(Error::InvalidProblem(format!(
                "B1 tolerance must lie in [0, 1), got {}",
                self.b1_tolerance
            )));
        }
        Ok(())
    }

    pub fn offsets_hz(&self) -> Vec<f64> {
        symmetric_points(0.0, 0.5 * self.bandwidth_hz, self.n_off)
    }

    /// Offsets as angular frequencies (rad/s).
    pub fn offsets(&self) -> Vec<f64> {
        self.offsets_hz().into_iter().map(|f| TAU * f).collect()
    }

    pub fn scales(&self) -> Vec<f64> {
        symmetric_points(1.0, self.b1_tolerance, self.n_rf)
    }

    pub fn len(&self) -> usize {
        self.n_off * self.n_rf
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All `(ω_off, b1_scale)` pairs, offset-major.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let scales = self.scales();
        self.offsets()
            .into_iter()
            .flat_map(|w| scales.iter().map(move |&s| (w, s)))
            .collect()
    }

    /// The same ranges sampled `factor` times more densely (odd counts are
    /// kept odd so the centre stays on the grid).
    pub fn refined(&self, factor: usize) -> GridSpec {
        let dense = |n: usize| if n == 1 { 1 } else { (n - 1) * factor + 1 };
        GridSpec {
            n_off: dense(self.n_off),
            bandwidth_hz: self.bandwidth_hz,
            n_rf: dense(self.n_rf),
            b1_tolerance: self.b1_tolerance,
        }
    }
}
