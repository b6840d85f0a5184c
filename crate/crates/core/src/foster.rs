//! Foster equivalent of a lossless transmission-line resonator: an optional
//! series capacitance followed by a series chain of parallel LC modes.
//!
//! Half-wave (open) line: Z(ω) = −i Z0 cot(π ω / ω1), modes at p·f1 for every p.
//! Quarter-wave (shorted) line: odd harmonics only, Z_eq = 4 Z0 / π.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

const MODULE: &str = "foster";

/// Default ratio above which the series capacitance is ignored next to C_c.
pub const DEFAULT_SERIES_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    HalfWave,
    QuarterWave,
}

impl Topology {
    /// Z_0 / Z_1: the line impedance relative to the fundamental-mode impedance.
    fn line_to_mode_ratio(self) -> f64 {
        match self {
            Topology::HalfWave => PI / 2.0,
            Topology::QuarterWave => PI / 4.0,
        }
    }

    /// Harmonic number of the n-th mode (n starting at 1).
    fn harmonic(self, n: usize) -> usize {
        match self {
            Topology::HalfWave => n,
            Topology::QuarterWave => 2 * n - 1,
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::HalfWave => "half_wave",
            Topology::QuarterWave => "quarter_wave",
        })
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half_wave" | "lambda/2" => Ok(Topology::HalfWave),
            "quarter_wave" | "lambda/4" => Ok(Topology::QuarterWave),
            other => Err(Error::domain(MODULE, "topology", format!("unknown topology {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    /// Characteristic impedance, ohm.
    pub z_0: f64,
    /// Bare fundamental frequency of the unloaded line, hertz.
    pub f_1: f64,
    pub topology: Topology,
}

impl LineSpec {
    pub fn validate(&self) -> Result<()> {
        ensure_positive(MODULE, "z_0", self.z_0)?;
        ensure_positive(MODULE, "f_1", self.f_1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FosterMode {
    /// Harmonic number p.
    pub harmonic: usize,
    pub f: f64,
    pub z: f64,
    pub c: f64,
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FosterModes {
    /// Series capacitance of the open-ended line; absent for the shorted line.
    pub series_c: Option<f64>,
    pub modes: Vec<FosterMode>,
}

impl FosterModes {
    /// Whether the series capacitance can be dropped next to a coupling capacitor `c_c`.
    pub fn series_negligible(&self, c_c: f64, threshold: f64) -> bool {
        self.series_c.is_none_or(|s| s > threshold * c_c)
    }
}

pub fn decompose(spec: &LineSpec, n_modes: usize) -> Result<FosterModes> {
    spec.validate()?;
    if n_modes == 0 {
        return Err(Error::domain(MODULE, "n_modes", "must be >= 1"));
    }
    let w1 = 2.0 * PI * spec.f_1;
    // Mode capacitance is harmonic-independent for both topologies.
    let c = match spec.topology {
        Topology::HalfWave => PI / (2.0 * w1 * spec.z_0),
        Topology::QuarterWave => PI / (4.0 * w1 * spec.z_0),
    };
    let z1 = spec.z_0 / spec.topology.line_to_mode_ratio();
    let modes = (1..=n_modes)
        .map(|n| {
            let p = spec.topology.harmonic(n);
            let pf = p as f64;
            FosterMode {
                harmonic: p,
                f: pf * spec.f_1,
                z: z1 / pf,
                c,
                l: z1 / (w1 * pf * pf),
            }
        })
        .collect();
    Ok(FosterModes {
        series_c: match spec.topology {
            Topology::HalfWave => Some(c),
            Topology::QuarterWave => None,
        },
        modes,
    })
}

/// The line whose fundamental Foster mode is the LC oscillator (c_r, l_r).
pub fn line_from_lc(c_r: f64, l_r: f64, topology: Topology) -> Result<LineSpec> {
    ensure_positive(MODULE, "c_r", c_r)?;
    ensure_positive(MODULE, "l_r", l_r)?;
    let z_eq = (l_r / c_r).sqrt();
    Ok(LineSpec {
        z_0: z_eq * topology.line_to_mode_ratio(),
        f_1: 1.0 / (2.0 * PI * (l_r * c_r).sqrt()),
        topology,
    })
}
