//! Offset/B1 profiles of finished pulses.

use std::fmt::Write as _;
use std::f64::consts::TAU;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::params::ResolvedPulse;
use crate::propagate::{cost_ur, propagate_pp, propagate_ur};
use crate::rotation::Quaternion;

#[derive(Clone, Debug, PartialEq)]
pub enum ProfileCells {
    /// Final Bloch vector per cell.
    Magnetization(Vec<Vector3<f64>>),
    /// `|qF·Q_total|` per cell.
    Quality(Vec<f64>),
}

/// Simulation results on an offset × B1 grid. Cells are stored with the
/// offset index varying fastest: cell `(i, l)` sits at `l·n_off + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileTable {
    pub offsets_hz: Vec<f64>,
    pub b1_scales: Vec<f64>,
    pub cells: ProfileCells,
}

impl ProfileTable {
    pub fn len(&self) -> usize {
        self.offsets_hz.len() * self.b1_scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, offset: usize, scale: usize) -> usize {
        scale * self.offsets_hz.len() + offset
    }

    pub fn magnetization(&self, offset: usize, scale: usize) -> Option<Vector3<f64>> {
        match &self.cells {
            ProfileCells::Magnetization(m) => Some(m[self.index(offset, scale)]),
            ProfileCells::Quality(_) => None,
        }
    }

    pub fn quality(&self, offset: usize, scale: usize) -> Option<f64> {
        match &self.cells {
            ProfileCells::Quality(q) => Some(q[self.index(offset, scale)]),
            ProfileCells::Magnetization(_) => None,
        }
    }

    /// Mean over all cells of `target·M` (magnetization profiles) or of the
    /// quality (propagator profiles).
    pub fn mean_quality(&self, target: Option<&Vector3<f64>>) -> f64 {
        let sum: f64 = match &self.cells {
            ProfileCells::Magnetization(m) => {
                let t = target.expect("magnetization profiles need a target state");
                m.iter().map(|v| v.dot(t)).sum()
            }
            ProfileCells::Quality(q) => q.iter().sum(),
        };
        sum / self.len() as f64
    }

    /// Tab-separated table with a `#` header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        match &self.cells {
            ProfileCells::Magnetization(_) => out.push_str("# offset_hz\tb1_scale\tMx\tMy\tMz\n"),
            ProfileCells::Quality(_) => out.push_str("# offset_hz\tb1_scale\tquality\n"),
        }
        for (l, s) in self.b1_scales.iter().enumerate() {
            for (i, f) in self.offsets_hz.iter().enumerate() {
                let k = self.index(i, l);
                match &self.cells {
                    ProfileCells::Magnetization(m) => {
                        let v = m[k];
                        writeln!(out, "{f}\t{s}\t{}\t{}\t{}", v.x, v.y, v.z).unwrap();
                    }
                    ProfileCells::Quality(q) => writeln!(out, "{f}\t{s}\t{}", q[k]).unwrap(),
                }
            }
        }
        out
    }
}

fn cells<T: Send>(
    offsets_hz: &[f64],
    b1_scales: &[f64],
    f: impl Fn(f64, f64) -> T + Sync,
) -> Vec<T> {
    let coords: Vec<(f64, f64)> = b1_scales
        .iter()
        .flat_map(|&s| offsets_hz.iter().map(move |&o| (TAU * o, s)))
        .collect();
    coords.par_iter().map(|&(w, s)| f(w, s)).collect()
}

/// Final Bloch vector of `rho0` for every `(offset, scale)` cell.
pub fn simulate_profile(
    pulse: &ResolvedPulse,
    rho0: &Vector3<f64>,
    offsets_hz: &[f64],
    b1_scales: &[f64],
) -> ProfileTable {
    let m = cells(offsets_hz, b1_scales, |w, s| {
        *propagate_pp(pulse, rho0, rho0, w, s).rho.last().unwrap()
    });
    ProfileTable {
        offsets_hz: offsets_hz.to_vec(),
        b1_scales: b1_scales.to_vec(),
        cells: ProfileCells::Magnetization(m),
    }
}

/// Propagator quality `|qF·Q_total|` for every `(offset, scale)` cell.
pub fn simulate_ur_profile(
    pulse: &ResolvedPulse,
    q_f: &Quaternion,
    offsets_hz: &[f64],
    b1_scales: &[f64],
) -> ProfileTable {
    let q = cells(offsets_hz, b1_scales, |w, s| cost_ur(&propagate_ur(pulse, w, s, q_f)).abs());
    ProfileTable {
        offsets_hz: offsets_hz.to_vec(),
        b1_scales: b1_scales.to_vec(),
        cells: ProfileCells::Quality(q),
    }
}
