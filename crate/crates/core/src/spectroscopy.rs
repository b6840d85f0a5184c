//! Flux sweeps of the coupled spectrum, avoided-crossing extraction, dressed
//! anharmonicity and synthetic Lorentzian line shapes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::hamiltonian::{diagonalize, diagonalize_with, resonant_n01, ModelConfig, SpectrumResult};

const MODULE: &str = "spectroscopy";

/// Minimum squared overlap for a dressed state to count as its bare label.
pub const DISPERSIVE_WEIGHT: f64 = 0.75;

/// Resonator line width used as the default synthetic peak width, hertz.
pub const DEFAULT_LINE_WIDTH: f64 = 29.3e6;

/// Map from raw sweep units (coil current, field, …) to φ/φ0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxMapping {
    pub offset: f64,
    pub period: f64,
}

impl FluxMapping {
    pub const IDENTITY: FluxMapping = FluxMapping {
        offset: 0.0,
        period: 1.0,
    };

    pub fn to_flux(&self, raw: f64) -> f64 {
        (raw - self.offset) / self.period
    }

    pub fn to_raw(&self, flux: f64) -> f64 {
        flux * self.period + self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxAxis {
    /// Raw sweep values; φ/φ0 directly when `mapping` is `None`.
    pub values: Vec<f64>,
    pub mapping: Option<FluxMapping>,
}

impl FluxAxis {
    pub fn from_flux(values: Vec<f64>) -> Self {
        FluxAxis { values, mapping: None }
    }

    pub fn raw(values: Vec<f64>, mapping: FluxMapping) -> Result<Self> {
        ensure_positive(MODULE, "period", mapping.period)?;
        Ok(FluxAxis {
            values,
            mapping: Some(mapping),
        })
    }

    /// `n` evenly spaced points from `start` to `stop` inclusive.
    pub fn linspace(start: f64, stop: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(MODULE, "n", "need at least 2 points"));
        }
        let step = (stop - start) / (n - 1) as f64;
        Ok(FluxAxis::from_flux((0..n).map(|i| start + step * i as f64).collect()))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flux(&self, i: usize) -> f64 {
        let raw = self.values[i];
        self.mapping.map_or(raw, |m| m.to_flux(raw))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Lower state of the first-excitation polariton pair.
    Lower,
    Upper,
    /// Ground to qubit-like state.
    Ge,
    /// Qubit-like state to the second Transmon-like state.
    Ef,
}

impl Branch {
    pub const ALL: [Branch; 4] = [Branch::Lower, Branch::Upper, Branch::Ge, Branch::Ef];

    pub fn name(self) -> &'static str {
        match self {
            Branch::Lower => "lower",
            Branch::Upper => "upper",
            Branch::Ge => "ge",
            Branch::Ef => "ef",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lower" => Ok(Branch::Lower),
            "upper" => Ok(Branch::Upper),
            "ge" | "g-e" => Ok(Branch::Ge),
            "ef" | "e-f" => Ok(Branch::Ef),
            other => Err(Error::domain(MODULE, "branch", format!("unknown branch {other:?}"))),
        }
    }
}

/// Transition frequencies of the named branches at one flux point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub lower: f64,
    pub upper: f64,
    pub ge: f64,
    pub ef: f64,
    /// Squared overlap of the qubit-like state with |1,0⟩.
    pub ge_weight: f64,
    pub ef_weight: f64,
}

impl BranchPoint {
    pub fn get(&self, b: Branch) -> f64 {
        match b {
            Branch::Lower => self.lower,
            Branch::Upper => self.upper,
            Branch::Ge => self.ge,
            Branch::Ef => self.ef,
        }
    }
}

/// Reads the named branches off a diagonalized spectrum.
///
/// The polariton pair are the two eigenstates with the largest weight on
/// span{|1,0⟩, |0,1⟩}; `ge` and `ef` follow the states most like |1,0⟩ and |2,0⟩.
pub fn branch_point(s: &SpectrumResult) -> BranchPoint {
    let b = &s.basis;
    let e = b.single(1, 0, 0);
    let photon = b.single(0, 0, 1);
    let f = b.single(2, 0, 0);
    let n = s.eigenfrequencies.len();

    let (mut first, mut second) = ((0usize, -1.0f64), (0usize, -1.0f64));
    for i in 0..n {
        let w = s.weight(i, &e) + s.weight(i, &photon);
        if w > first.1 {
            second = first;
            first = (i, w);
        } else if w > second.1 {
            second = (i, w);
        }
    }
    let (a, c) = (s.eigenfrequencies[first.0], s.eigenfrequencies[second.0]);
    let (ge_idx, ge_weight) = s.find(&e).unwrap_or((1, 0.0));
    let (ef_idx, ef_weight) = s.find(&f).unwrap_or((2, 0.0));
    BranchPoint {
        lower: a.min(c),
        upper: a.max(c),
        ge: s.eigenfrequencies[ge_idx],
        ef: s.eigenfrequencies[ef_idx] - s.eigenfrequencies[ge_idx],
        ge_weight,
        ef_weight,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSpectrum {
    pub axis: FluxAxis,
    /// Frequencies in hertz, one per axis point; NaN where a point failed.
    pub branches: BTreeMap<Branch, Vec<f64>>,
    /// (axis index, message) for points whose diagonalization failed.
    pub failures: Vec<(usize, String)>,
}

impl TransitionSpectrum {
    pub fn branch(&self, b: Branch) -> Option<&[f64]> {
        self.branches.get(&b).map(Vec::as_slice)
    }
}

/// Diagonalizes the model at every axis point (in parallel, results in axis order).
pub fn flux_sweep(cfg: &ModelConfig, axis: &FluxAxis) -> Result<TransitionSpectrum> {
    cfg.validate()?;
    if axis.is_empty() {
        return Err(Error::domain(MODULE, "axis", "empty flux axis"));
    }
    if let Some(m) = axis.mapping {
        ensure_positive(MODULE, "period", m.period)?;
    }
    let n01 = resonant_n01(cfg)?;
    let points: Vec<Result<BranchPoint>> = (0..axis.len())
        .into_par_iter()
        .map(|i| {
            let s = diagonalize_with(&cfg.clone().with_flux(axis.flux(i)), n01)?;
            Ok(branch_point(&s))
        })
        .collect();

    let mut branches: BTreeMap<Branch, Vec<f64>> = Branch::ALL.iter().map(|&b| (b, Vec::with_capacity(axis.len()))).collect();
    let mut failures = Vec::new();
    for (i, p) in points.into_iter().enumerate() {
        match p {
            Ok(p) => {
                for b in Branch::ALL {
                    branches.get_mut(&b).expect("all branches").push(p.get(b));
                }
            }
            Err(e) => {
                for v in branches.values_mut() {
                    v.push(f64::NAN);
                }
                failures.push((i, e.to_string()));
            }
        }
    }
    Ok(TransitionSpectrum {
        axis: axis.clone(),
        branches,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidedCrossing {
    /// Mean of the two branches at the minimum separation, hertz.
    pub center: f64,
    /// Minimum of upper − lower, hertz.
    pub splitting: f64,
    /// Interpolated flux (φ/φ0) of the minimum.
    pub flux: f64,
}

/// Vertex of the parabola through (−1, a), (0, b), (1, c): (offset, value).
fn parabola_vertex(a: f64, b: f64, c: f64) -> (f64, f64) {
    let curv = a - 2.0 * b + c;
    if curv <= 0.0 || !curv.is_finite() {
        return (0.0, b);
    }
    let t = 0.5 * (a - c) / curv;
    (t, b - 0.25 * (a - c) * t)
}

/// Value at offset t of the parabola through (−1, a), (0, b), (1, c).
fn parabola_at(a: f64, b: f64, c: f64, t: f64) -> f64 {
    b + 0.5 * (c - a) * t + 0.5 * (a - 2.0 * b + c) * t * t
}

pub fn avoided_crossing(spec: &TransitionSpectrum) -> Result<AvoidedCrossing> {
    let lower = spec
        .branch(Branch::Lower)
        .ok_or_else(|| Error::domain(MODULE, "branches", "missing lower branch"))?;
    let upper = spec
        .branch(Branch::Upper)
        .ok_or_else(|| Error::domain(MODULE, "branches", "missing upper branch"))?;
    let n = lower.len().min(upper.len());
    let gap: Vec<f64> = (0..n).map(|i| upper[i] - lower[i]).collect();
    let (imin, _) = gap
        .iter()
        .enumerate()
        .filter(|(_, g)| g.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::CrossingNotBracketed)?;
    if imin == 0 || imin + 1 >= n || !gap[imin - 1].is_finite() || !gap[imin + 1].is_finite() {
        return Err(Error::CrossingNotBracketed);
    }
    let (t, splitting) = parabola_vertex(gap[imin - 1], gap[imin], gap[imin + 1]);
    let mean = |i: usize| 0.5 * (upper[i] + lower[i]);
    let center = parabola_at(mean(imin - 1), mean(imin), mean(imin + 1), t);
    let flux = parabola_at(spec.axis.flux(imin - 1), spec.axis.flux(imin), spec.axis.flux(imin + 1), t);
    Ok(AvoidedCrossing {
        center,
        splitting: splitting.max(0.0),
        flux,
    })
}

/// Difference between the g→e and e→f transitions of the dressed spectrum.
pub fn dressed_anharmonicity(cfg: &ModelConfig, flux: f64) -> Result<f64> {
    let s = diagonalize(&cfg.clone().with_flux(flux))?;
    let p = branch_point(&s);
    if p.ge_weight < DISPERSIVE_WEIGHT || p.ef_weight < DISPERSIVE_WEIGHT {
        return Err(Error::NotDispersive(format!(
            "qubit-like states are mixed (|1,0> weight {:.3}, |2,0> weight {:.3})",
            p.ge_weight, p.ef_weight
        )));
    }
    let photon = s.basis.single(0, 0, 1);
    let cavity = s.find(&photon).map(|(i, _)| s.eigenfrequencies[i]).unwrap_or(f64::INFINITY);
    if p.ge >= cavity {
        return Err(Error::NotDispersive("qubit is not detuned below the cavity".into()));
    }
    Ok(p.ge - p.ef)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineShapeTrace {
    pub flux: f64,
    pub frequencies: Vec<f64>,
    /// Normalized amplitudes, clamped to [0, 1].
    pub amplitudes: Vec<f64>,
    /// Full width at half maximum, hertz.
    pub width: f64,
}

/// Lorentzian peaks at every finite branch frequency, with optional Gaussian
/// amplitude noise (standard deviation `noise_sigma`). Deterministic per seed.
pub fn synth_lineshape(
    spec: &TransitionSpectrum,
    frequencies: &[f64],
    width: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<LineShapeTrace>> {
    ensure_positive(MODULE, "width", width)?;
    if !(noise_sigma >= 0.0) {
        return Err(Error::domain(MODULE, "noise_sigma", "must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let half = width / 2.0;
    let mut traces = Vec::with_capacity(spec.axis.len());
    for i in 0..spec.axis.len() {
        // Named branches may coincide (e.g. `ge` and `upper` above the cavity);
        // one physical transition gives one peak.
        let mut centers: Vec<f64> = spec
            .branches
            .values()
            .map(|v| v[i])
            .filter(|f| f.is_finite())
            .collect();
        centers.sort_by(f64::total_cmp);
        centers.dedup_by(|a, b| (*a - *b).abs() < 1e-3 * width);
        let amplitudes = frequencies
            .iter()
            .map(|&f| {
                let clean: f64 = centers.iter().map(|&c| 1.0 / (1.0 + ((f - c) / half).powi(2))).sum();
                let noisy = if noise_sigma > 0.0 { clean + noise.sample(&mut rng) } else { clean };
                noisy.clamp(0.0, 1.0)
            })
            .collect();
        traces.push(LineShapeTrace {
            flux: spec.axis.flux(i),
            frequencies: frequencies.to_vec(),
            amplitudes,
            width,
        });
    }
    Ok(traces)
}

/// Local maxima above `min_height`, refined by three-point parabolic interpolation.
pub fn pick_peaks(trace: &LineShapeTrace, min_height: f64) -> Vec<f64> {
    let a = &trace.amplitudes;
    let f = &trace.frequencies;
    let mut peaks = Vec::new();
    for i in 1..a.len().saturating_sub(1) {
        if a[i] >= min_height && a[i] > a[i - 1] && a[i] >= a[i + 1] {
            let (t, _) = parabola_vertex(-a[i - 1], -a[i], -a[i + 1]);
            let step = if t >= 0.0 { f[i + 1] - f[i] } else { f[i] - f[i - 1] };
            peaks.push(f[i] + t * step);
        }
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{HamiltonianParams, ParamSource, Tier};
    use approx::assert_relative_eq;

    fn jc_spectrum(center: f64, g: f64, slope: f64, n: usize, at: f64) -> TransitionSpectrum {
        let axis = FluxAxis::linspace(-1.0, 1.0, n).unwrap();
        let mut branches = BTreeMap::new();
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for i in 0..n {
            let delta = slope * (axis.flux(i) - at);
            let r = (delta * delta / 4.0 + g * g).sqrt();
            lo.push(center - r);
            hi.push(center + r);
        }
        branches.insert(Branch::Lower, lo);
        branches.insert(Branch::Upper, hi);
        TransitionSpectrum {
            axis,
            branches,
            failures: vec![],
        }
    }

    #[test]
    fn jc_branches_give_center_and_two_g() {
        let s = jc_spectrum(6.2e9, 0.45e9, 8e9, 201, 0.0123);
        let x = avoided_crossing(&s).unwrap();
        assert_relative_eq!(x.splitting, 0.9e9, max_relative = 1e-3);
        assert_relative_eq!(x.center, 6.2e9, max_relative = 1e-9);
        assert!((x.flux - 0.0123).abs() < 0.01);
    }

    #[test]
    fn touching_branches_split_zero() {
        let s = jc_spectrum(6.0e9, 0.0, 8e9, 101, 0.2);
        let x = avoided_crossing(&s).unwrap();
        assert!(x.splitting.abs() < 1.0, "{}", x.splitting);
        assert!((x.flux - 0.2).abs() < 1e-12);
    }

    #[test]
    fn boundary_minimum_is_an_error() {
        let mut s = jc_spectrum(6.0e9, 0.2e9, 8e9, 51, 0.0);
        // Keep only the points right of the minimum.
        let keep = 30;
        s.axis.values = s.axis.values[keep..].to_vec();
        for v in s.branches.values_mut() {
            *v = v[keep..].to_vec();
        }
        assert!(matches!(avoided_crossing(&s), Err(Error::CrossingNotBracketed)));
    }

    #[test]
    fn sweep_is_symmetric_and_periodic() {
        let cfg = ModelConfig::new(Tier::ExactSingle, ParamSource::Hamiltonian(HamiltonianParams::reference_fit()));
        let axis = FluxAxis::from_flux(vec![0.37, -0.37, 1.37, 0.5]);
        let s = flux_sweep(&cfg, &axis).unwrap();
        for b in Branch::ALL {
            let v = s.branch(b).unwrap();
            assert!((v[0] - v[1]).abs() < 1.0, "{b}");
            assert!((v[0] - v[2]).abs() < 10.0, "{b}");
        }
        // At half flux quantum E_J vanishes: the resonator sits at its bare frequency.
        let upper = s.branch(Branch::Upper).unwrap()[3];
        assert!((upper - 6.367e9).abs() < 30e6, "{upper}");
    }

    #[test]
    fn raw_axis_mapping() {
        let m = FluxMapping {
            offset: 0.2,
            period: 2.0,
        };
        let axis = FluxAxis::raw(vec![0.2, 1.2], m).unwrap();
        assert_eq!(axis.flux(0), 0.0);
        assert_eq!(axis.flux(1), 0.5);
        assert_eq!(m.to_raw(m.to_flux(0.77)), 0.77);
        assert!(FluxAxis::raw(vec![0.0], FluxMapping { offset: 0.0, period: 0.0 }).is_err());
    }

    #[test]
    fn uncoupled_anharmonicity_is_charging_energy() {
        let h = HamiltonianParams {
            g: 0.0,
            ..HamiltonianParams::reference_fit()
        };
        let cfg = ModelConfig::new(Tier::DuffingSingle, ParamSource::Hamiltonian(h));
        let a = dressed_anharmonicity(&cfg, 0.454).unwrap();
        assert_relative_eq!(a, 300e6, max_relative = 1e-9);
    }

    #[test]
    fn anharmonicity_near_crossing_is_rejected() {
        let cfg = ModelConfig::new(Tier::ExactSingle, ParamSource::Hamiltonian(HamiltonianParams::reference_fit()));
        let x = flux_sweep(&cfg, &FluxAxis::linspace(0.36, 0.38, 21).unwrap()).unwrap();
        let c = avoided_crossing(&x).unwrap();
        assert!(matches!(dressed_anharmonicity(&cfg, c.flux), Err(Error::NotDispersive(_))));
    }

    #[test]
    fn lineshape_peak_at_branch() {
        let mut branches = BTreeMap::new();
        branches.insert(Branch::Ge, vec![5.0e9]);
        let spec = TransitionSpectrum {
            axis: FluxAxis::from_flux(vec![0.3]),
            branches,
            failures: vec![],
        };
        let grid: Vec<f64> = (0..2001).map(|i| 4.9e9 + i as f64 * 0.1e6).collect();
        let t = &synth_lineshape(&spec, &grid, DEFAULT_LINE_WIDTH, 0.0, 1).unwrap()[0];
        let imax = t.amplitudes.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((t.frequencies[imax] - 5.0e9).abs() <= 0.05e6);
        let above: Vec<f64> = t
            .frequencies
            .iter()
            .zip(&t.amplitudes)
            .filter(|(_, &a)| a >= 0.5)
            .map(|(&f, _)| f)
            .collect();
        let fwhm = above.last().unwrap() - above.first().unwrap();
        assert!((fwhm - 29.3e6).abs() < 0.3e6, "{fwhm}");
    }

    #[test]
    fn lineshape_is_seed_deterministic_and_peaks_recoverable() {
        let cfg = ModelConfig::new(Tier::ExactSingle, ParamSource::Hamiltonian(HamiltonianParams::reference_fit()));
        let spec = flux_sweep(&cfg, &FluxAxis::from_flux(vec![0.30, 0.44])).unwrap();
        let grid: Vec<f64> = (0..8000).map(|i| 2.0e9 + i as f64 * 1.0e6).collect();
        let a = synth_lineshape(&spec, &grid, DEFAULT_LINE_WIDTH, 0.01, 7).unwrap();
        let b = synth_lineshape(&spec, &grid, DEFAULT_LINE_WIDTH, 0.01, 7).unwrap();
        assert_eq!(a, b);
        for (i, trace) in a.iter().enumerate() {
            let peaks = pick_peaks(trace, 0.5);
            for br in [Branch::Lower, Branch::Upper] {
                let f = spec.branch(br).unwrap()[i];
                let nearest = peaks.iter().map(|p| (p - f).abs()).fold(f64::INFINITY, f64::min);
                assert!(nearest < DEFAULT_LINE_WIDTH / 10.0, "{br} {nearest}");
            }
        }
    }
}
