//! Least-squares extraction of Hamiltonian parameters from peak positions,
//! and back-derivation of the resonator circuit elements.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{self, effective_capacitances};
use crate::error::{ensure_positive, Error, Result};
use crate::hamiltonian::{diagonalize_with, resonant_n01, HamiltonianParams, ModelConfig, ParamSource, Tier};
use crate::simplex::{self, SimplexOptions};
use crate::spectroscopy::{branch_point, Branch, BranchPoint, FluxMapping};

const MODULE: &str = "fitting";

/// Objective scale: residuals are summed in units of this many hertz.
const RESIDUAL_UNIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    EC,
    EJMax,
    FR,
    G,
    FluxOffset,
    FluxPeriod,
}

impl Param {
    pub const ALL: [Param; 6] = [
        Param::EC,
        Param::EJMax,
        Param::FR,
        Param::G,
        Param::FluxOffset,
        Param::FluxPeriod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::EC => "e_c",
            Param::EJMax => "e_j_max",
            Param::FR => "f_r",
            Param::G => "g",
            Param::FluxOffset => "flux_offset",
            Param::FluxPeriod => "flux_period",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::domain(MODULE, "free_params", format!("unknown parameter {s:?}")))
    }
}

/// Point in fit space. Energies in hertz; the flux mapping converts raw sweep values to φ/φ0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub e_c: f64,
    pub e_j_max: f64,
    pub f_r: f64,
    pub g: f64,
    pub flux_offset: f64,
    pub flux_period: f64,
}

impl FitParams {
    pub fn from_hamiltonian(h: &HamiltonianParams, mapping: FluxMapping) -> Self {
        FitParams {
            e_c: h.e_c,
            e_j_max: h.e_j_max,
            f_r: h.f_r,
            g: h.g,
            flux_offset: mapping.offset,
            flux_period: mapping.period,
        }
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::EC => self.e_c,
            Param::EJMax => self.e_j_max,
            Param::FR => self.f_r,
            Param::G => self.g,
            Param::FluxOffset => self.flux_offset,
            Param::FluxPeriod => self.flux_period,
        }
    }

    pub fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::EC => self.e_c = v,
            Param::EJMax => self.e_j_max = v,
            Param::FR => self.f_r = v,
            Param::G => self.g = v,
            Param::FluxOffset => self.flux_offset = v,
            Param::FluxPeriod => self.flux_period = v,
        }
    }

    pub fn hamiltonian(&self) -> HamiltonianParams {
        HamiltonianParams {
            e_c: self.e_c,
            e_j_max: self.e_j_max,
            f_r: self.f_r,
            g: self.g,
            flux: 0.0,
        }
    }

    pub fn mapping(&self) -> FluxMapping {
        FluxMapping {
            offset: self.flux_offset,
            period: self.flux_period,
        }
    }

    /// Default box: ×[0.5, 1.5] for energies, ±0.25 period for the offset, ×[0.8, 1.25] for the period.
    pub fn default_bounds(&self, p: Param) -> (f64, f64) {
        let v = self.get(p);
        match p {
            Param::FluxOffset => (v - 0.25 * self.flux_period.abs(), v + 0.25 * self.flux_period.abs()),
            Param::FluxPeriod => (0.8 * v, 1.25 * v),
            _ => (0.5 * v, 1.5 * v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakPoint {
    pub sweep_value: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub branch: Option<Branch>,
    #[serde(default)]
    pub weight: Option<f64>,
}

impl PeakPoint {
    pub fn weight(&self) -> f64 {
        self.weight.unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakData {
    pub points: Vec<PeakPoint>,
}

impl PeakData {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::domain(MODULE, "points", "no peak data"));
        }
        for p in &self.points {
            if !p.sweep_value.is_finite() {
                return Err(Error::domain(MODULE, "sweep_value", "must be finite"));
            }
            ensure_positive(MODULE, "frequency_hz", p.frequency_hz)?;
            ensure_positive(MODULE, "weight", p.weight())?;
        }
        Ok(())
    }

    /// Reads CSV with header `sweep_value,frequency_hz[,branch][,weight]`; `#` lines are comments.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        for required in ["sweep_value", "frequency_hz"] {
            if !headers.iter().any(|h| h == required) {
                return Err(Error::domain(MODULE, "peaks", format!("missing column {required:?}")));
            }
        }
        let mut points = Vec::new();
        for rec in rdr.deserialize::<RawPeak>() {
            let r = rec?;
            let branch = match r.branch.as_deref().map(str::trim) {
                None | Some("") => None,
                Some(s) => Some(s.parse()?),
            };
            points.push(PeakPoint {
                sweep_value: r.sweep_value,
                frequency_hz: r.frequency_hz,
                branch,
                weight: r.weight,
            });
        }
        let data = PeakData { points };
        data.validate()?;
        Ok(data)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["sweep_value", "frequency_hz", "branch", "weight"])?;
        for p in &self.points {
            w.write_record([
                format!("{:.12e}", p.sweep_value),
                format!("{:.12e}", p.frequency_hz),
                p.branch.map(|b| b.to_string()).unwrap_or_default(),
                format!("{}", p.weight()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawPeak {
    sweep_value: f64,
    frequency_hz: f64,
    #[serde(default)]
    branch: Option<String>,
    #[serde(default)]
    weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub free_params: Vec<Param>,
    pub initial: FitParams,
    /// Per-parameter (lo, hi); missing entries use [`FitParams::default_bounds`].
    #[serde(default)]
    pub bounds: BTreeMap<Param, (f64, f64)>,
    /// Relative objective spread at which the simplex stops.
    pub tolerance: f64,
    pub max_evaluations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// (C_J, C_c) in farad; enables circuit back-derivation.
    #[serde(default)]
    pub capacitances: Option<(f64, f64)>,
    /// Qubit frequency used when inverting the coupling; defaults to the fitted f_r.
    #[serde(default)]
    pub f_a_at_resonance: Option<f64>,
}

impl FitConfig {
    /// Fits E_c, E_J,max, f_r and g with the flux mapping frozen.
    pub fn new(initial: FitParams) -> Self {
        FitConfig {
            free_params: vec![Param::EC, Param::EJMax, Param::FR, Param::G],
            initial,
            bounds: BTreeMap::new(),
            tolerance: 1e-14,
            max_evaluations: 6000,
            restarts: 2,
            seed: 0,
            capacitances: None,
            f_a_at_resonance: None,
        }
    }

    pub fn bounds(&self, p: Param) -> (f64, f64) {
        self.bounds.get(&p).copied().unwrap_or_else(|| self.initial.default_bounds(p))
    }

    pub fn validate(&self) -> Result<()> {
        if self.free_params.is_empty() {
            return Err(Error::domain(MODULE, "free_params", "nothing to fit"));
        }
        let mut seen = self.free_params.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.free_params.len() {
            return Err(Error::domain(MODULE, "free_params", "duplicate parameter"));
        }
        self.initial.hamiltonian().validate()?;
        ensure_positive(MODULE, "flux_period", self.initial.flux_period)?;
        for &p in &self.free_params {
            let (lo, hi) = self.bounds(p);
            let v = self.initial.get(p);
            if !(lo < hi && lo <= v && v <= hi) {
                return Err(Error::domain(
                    MODULE,
                    "bounds",
                    format!("initial {p} = {v} outside [{lo}, {hi}]"),
                ));
            }
            if !matches!(p, Param::FluxOffset) && lo <= 0.0 {
                return Err(Error::domain(MODULE, "bounds", format!("{p} lower bound must be > 0")));
            }
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::domain(MODULE, "tolerance", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircuitElements {
    pub c_r: f64,
    pub l_r: f64,
    pub z_r: f64,
    pub z_0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResidual {
    pub sweep_value: f64,
    pub frequency_hz: f64,
    pub branch: Branch,
    /// Model minus data, hertz.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub evaluations: usize,
    pub objective: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: FitParams,
    pub residual_rms: f64,
    pub residuals: Vec<PointResidual>,
    pub derived_circuit: Option<CircuitElements>,
    pub report: ConvergenceReport,
}

/// Model at one parameter point: branch frequencies at each distinct flux.
struct Evaluator<'a> {
    data: &'a PeakData,
    model: &'a ModelConfig,
    /// Sorted distinct sweep values and, per datum, its index in that list.
    raws: Vec<f64>,
    slot: Vec<usize>,
}

impl<'a> Evaluator<'a> {
    fn new(data: &'a PeakData, model: &'a ModelConfig) -> Self {
        let mut raws: Vec<f64> = data.points.iter().map(|p| p.sweep_value).collect();
        raws.sort_by(f64::total_cmp);
        raws.dedup();
        let slot = data
            .points
            .iter()
            .map(|p| raws.binary_search_by(|r| r.total_cmp(&p.sweep_value)).expect("present"))
            .collect();
        Evaluator { data, model, raws, slot }
    }

    fn branches(&self, p: &FitParams) -> Result<Vec<BranchPoint>> {
        let mut cfg = self.model.clone();
        cfg.source = ParamSource::Hamiltonian(p.hamiltonian());
        let n01 = resonant_n01(&cfg)?;
        let mapping = p.mapping();
        self.raws
            .par_iter()
            .map(|&raw| {
                let s = diagonalize_with(&cfg.clone().with_flux(mapping.to_flux(raw)), n01)?;
                Ok(branch_point(&s))
            })
            .collect()
    }

    /// Assigned branch and model frequency for every datum.
    fn assign(&self, model: &[BranchPoint]) -> Vec<(Branch, f64)> {
        self.data
            .points
            .iter()
            .zip(&self.slot)
            .map(|(d, &i)| {
                let bp = &model[i];
                let b = d.branch.unwrap_or_else(|| {
                    if (bp.lower - d.frequency_hz).abs() <= (bp.upper - d.frequency_hz).abs() {
                        Branch::Lower
                    } else {
                        Branch::Upper
                    }
                });
                (b, bp.get(b))
            })
            .collect()
    }

    fn objective(&self, p: &FitParams) -> f64 {
        match self.branches(p) {
            Ok(model) => self
                .assign(&model)
                .iter()
                .zip(&self.data.points)
                .map(|((_, f), d)| d.weight() * ((f - d.frequency_hz) / RESIDUAL_UNIT).powi(2))
                .sum(),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Minimizes the weighted squared distance between model branches and peak data.
///
/// Unhinted points go to the nearer of the two polariton branches.
pub fn fit(data: &PeakData, cfg: &FitConfig, model: &ModelConfig) -> Result<FitResult> {
    data.validate()?;
    cfg.validate()?;
    if model.tier != Tier::ExactSingle {
        return Err(Error::domain(
            MODULE,
            "tier",
            format!("fits run against the exact_single Hamiltonian, got {}", model.tier),
        ));
    }
    let eval = Evaluator::new(data, model);
    let mut warnings = crossing_warnings(&eval, &cfg.initial)?;

    let free = &cfg.free_params;
    let bounds: Vec<(f64, f64)> = free.iter().map(|&p| cfg.bounds(p)).collect();
    let to_params = |x: &[f64]| {
        let mut p = cfg.initial;
        for ((&param, &(lo, hi)), &u) in free.iter().zip(&bounds).zip(x) {
            p.set(param, lo + u * (hi - lo));
        }
        p
    };
    let x0: Vec<f64> = free
        .iter()
        .zip(&bounds)
        .map(|(&p, &(lo, hi))| (cfg.initial.get(p) - lo) / (hi - lo))
        .collect();
    let opts = SimplexOptions {
        f_tol: cfg.tolerance,
        max_evaluations: cfg.max_evaluations,
        restarts: cfg.restarts,
        seed: cfg.seed,
        ..SimplexOptions::default()
    };
    let best = simplex::minimize(&|x: &[f64]| eval.objective(&to_params(x)), &x0, &opts);
    let params = to_params(&best.x);

    for (&p, (&u, &(lo, hi))) in free.iter().zip(best.x.iter().zip(&bounds)) {
        if u <= 1e-6 || u >= 1.0 - 1e-6 {
            warnings.push(format!("{p} finished on its bound [{lo:e}, {hi:e}]"));
        }
    }

    let model_pts = eval.branches(&params)?;
    let residuals: Vec<PointResidual> = eval
        .assign(&model_pts)
        .into_iter()
        .zip(&data.points)
        .map(|((branch, f), d)| PointResidual {
            sweep_value: d.sweep_value,
            frequency_hz: d.frequency_hz,
            branch,
            residual: f - d.frequency_hz,
        })
        .collect();
    let wsum: f64 = data.points.iter().map(PeakPoint::weight).sum();
    let residual_rms = (residuals
        .iter()
        .zip(&data.points)
        .map(|(r, d)| d.weight() * r.residual * r.residual)
        .sum::<f64>()
        / wsum)
        .sqrt();

    let derived_circuit = match cfg.capacitances {
        Some((c_j, c_c)) => {
            let f_a = cfg.f_a_at_resonance.unwrap_or(params.f_r);
            match extract_circuit(params.f_r, params.g, c_j, c_c, f_a) {
                Ok(c) => Some(c),
                Err(e) => {
                    warnings.push(format!("circuit extraction failed: {e}"));
                    None
                }
            }
        }
        None => None,
    };

    Ok(FitResult {
        params,
        residual_rms,
        residuals,
        derived_circuit,
        report: ConvergenceReport {
            converged: best.converged,
            evaluations: best.evaluations,
            objective: best.value,
            warnings,
        },
    })
}

/// Warnings about how well the data pin down the crossing, judged at the initial point.
fn crossing_warnings(eval: &Evaluator<'_>, initial: &FitParams) -> Result<Vec<String>> {
    let model = eval.branches(initial)?;
    let mut warnings = Vec::new();

    // Side of the crossing: is the qubit-like state below or above the cavity-like one?
    let sides: Vec<bool> = model.iter().map(|bp| bp.ge < 0.5 * (bp.lower + bp.upper)).collect();
    if sides.iter().all(|&s| s) || sides.iter().all(|&s| !s) {
        warnings.push("g weakly constrained: all data lie on one side of the crossing".to_string());
    }

    let splitting = model.iter().map(|bp| bp.upper - bp.lower).fold(f64::INFINITY, f64::min);
    let near = eval
        .data
        .points
        .iter()
        .zip(&eval.slot)
        .filter(|(d, &i)| d.branch.is_none() && model[i].upper - model[i].lower < 2.0 * splitting)
        .count();
    if near > 0 {
        warnings.push(format!(
            "{near} unhinted point(s) within twice the splitting of the crossing; branch assignment may swap"
        ));
    }
    Ok(warnings)
}

/// Inverts the coupling formula for C_r, then derives the resonator elements.
pub fn extract_circuit(f_r: f64, g: f64, c_j: f64, c_c: f64, f_a: f64) -> Result<CircuitElements> {
    for (field, v) in [("f_r", f_r), ("g", g), ("c_j", c_j), ("c_c", c_c), ("f_a", f_a)] {
        ensure_positive(MODULE, field, v)?;
    }
    let bound = 0.5 * (f_a * f_r).sqrt();
    if g >= bound {
        return Err(Error::domain(
            MODULE,
            "g",
            format!("coupling {g:e} Hz reaches the bound sqrt(f_a f_r)/2 = {bound:e} Hz"),
        ));
    }
    let one_plus = f_a * f_r / (4.0 * g * g * (1.0 + c_j / c_c));
    let c_r = c_c * (one_plus - 1.0);
    if !(c_r > 0.0) {
        return Err(Error::domain(
            MODULE,
            "c_r",
            format!("coupling too large for the stated capacitances (C_r = {c_r:e} F)"),
        ));
    }
    let caps = effective_capacitances(c_j, c_c, c_r)?;
    let w = 2.0 * PI * f_r;
    let l_r = 1.0 / (w * w * caps.c_r_eff);
    let z_r = (l_r / c_r).sqrt();
    Ok(CircuitElements {
        c_r,
        l_r,
        z_r,
        z_0: PI * z_r / 2.0,
    })
}

/// Synthetic peak data from the model at `truth`: one point per (sweep value, branch),
/// with Gaussian noise of standard deviation `noise_sigma` hertz. Deterministic per seed.
pub fn synthesize_peaks(
    truth: &FitParams,
    model: &ModelConfig,
    sweep_values: &[f64],
    branches: &[Branch],
    noise_sigma: f64,
    seed: u64,
) -> Result<PeakData> {
    if !(noise_sigma >= 0.0) {
        return Err(Error::domain(MODULE, "noise_sigma", "must be >= 0"));
    }
    let data = PeakData {
        points: sweep_values
            .iter()
            .map(|&s| PeakPoint {
                sweep_value: s,
                frequency_hz: 1.0,
                branch: None,
                weight: None,
            })
            .collect(),
    };
    let eval = Evaluator::new(&data, model);
    let pts = eval.branches(truth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut points = Vec::with_capacity(sweep_values.len() * branches.len());
    for &s in sweep_values {
        let bp = &pts[eval.raws.binary_search_by(|r| r.total_cmp(&s)).expect("present")];
        for &b in branches {
            let dn = if noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            points.push(PeakPoint {
                sweep_value: s,
                frequency_hz: bp.get(b) + dn,
                branch: Some(b),
                weight: None,
            });
        }
    }
    Ok(PeakData { points })
}

/// Forward check of an extraction: the coupling predicted by the extracted C_r.
pub fn forward_coupling(elements: &CircuitElements, c_j: f64, c_c: f64, f_a: f64, f_r: f64) -> Result<f64> {
    circuit::coupling_from_frequencies(c_j, c_c, elements.c_r, f_a, f_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const FF: f64 = 1e-15;

    #[test]
    fn reference_extraction() {
        let c = extract_circuit(6.367e9, 455e6, 51.0 * FF, 9.0 * FF, 6.367e9).unwrap();
        assert_relative_eq!(c.c_r, 57.0877e-15, max_relative = 1e-4);
        assert_relative_eq!(c.l_r, 9.65191e-9, max_relative = 1e-4);
        assert_relative_eq!(c.z_r, 411.183, max_relative = 1e-4);
        assert_relative_eq!(c.z_0, 645.885, max_relative = 1e-4);
        let g = forward_coupling(&c, 51.0 * FF, 9.0 * FF, 6.367e9, 6.367e9).unwrap();
        assert_relative_eq!(g, 455e6, max_relative = 1e-12);
    }

    #[test]
    fn extraction_at_bound_is_domain_error() {
        let f = 6e9;
        assert!(matches!(
            extract_circuit(f, f / 2.0, 51.0 * FF, 9.0 * FF, f),
            Err(Error::Domain { field: "g", .. })
        ));
        // Below the absolute bound but too large for these capacitances.
        let g_max = 0.5 * f / (1.0 + 51.0 / 9.0f64).sqrt();
        assert!(matches!(
            extract_circuit(f, g_max * 1.01, 51.0 * FF, 9.0 * FF, f),
            Err(Error::Domain { field: "c_r", .. })
        ));
    }

    #[test]
    fn extraction_round_trips_circuit() {
        // Forward: (C_r, L_r) → (f_r, g), then invert.
        for &(c_j, c_c, c_r, l_r) in &[
            (51.0 * FF, 9.0 * FF, 57.1 * FF, 9.65e-9),
            (10.0 * FF, 200.0 * FF, 10.0 * FF, 20e-9),
            (80.0 * FF, 3.0 * FF, 120.0 * FF, 4e-9),
        ] {
            let caps = effective_capacitances(c_j, c_c, c_r).unwrap();
            let f_r = circuit::resonator_frequency(l_r, caps.c_r_eff).unwrap();
            let g = circuit::coupling_from_frequencies(c_j, c_c, c_r, f_r, f_r).unwrap();
            let e = extract_circuit(f_r, g, c_j, c_c, f_r).unwrap();
            assert_relative_eq!(e.c_r, c_r, max_relative = 1e-9);
            assert_relative_eq!(e.l_r, l_r, max_relative = 1e-9);
        }
    }

    #[test]
    fn csv_round_trip_and_header_required() {
        let data = PeakData {
            points: vec![
                PeakPoint {
                    sweep_value: 0.1,
                    frequency_hz: 6.1e9,
                    branch: Some(Branch::Lower),
                    weight: Some(2.0),
                },
                PeakPoint {
                    sweep_value: 0.2,
                    frequency_hz: 6.4e9,
                    branch: None,
                    weight: None,
                },
            ],
        };
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = PeakData::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.points[0], data.points[0]);
        assert_eq!(back.points[1].branch, None);
        assert_eq!(back.points[1].weight(), 1.0);

        let minimal = "# comment\nsweep_value,frequency_hz\n0.1,6e9\n";
        assert_eq!(PeakData::read_csv(minimal.as_bytes()).unwrap().points.len(), 1);
        assert!(PeakData::read_csv("0.1,6e9\n0.2,6e9\n".as_bytes()).is_err());
        assert!(PeakData::read_csv("sweep_value,frequency_hz\n0.1,-6e9\n".as_bytes()).is_err());
    }

    fn reference_truth() -> FitParams {
        FitParams::from_hamiltonian(&HamiltonianParams::reference_fit(), FluxMapping::IDENTITY)
    }

    fn sweep_values() -> Vec<f64> {
        (0..21).map(|i| 0.25 + 0.01 * i as f64).collect()
    }

    #[test]
    fn flux_offset_only_recovers_shift() {
        let model = ModelConfig::new(Tier::ExactSingle, ParamSource::Hamiltonian(HamiltonianParams::reference_fit()));
        let truth = FitParams {
            flux_offset: 0.013,
            ..reference_truth()
        };
        let data = synthesize_peaks(&truth, &model, &sweep_values(), &[Branch::Lower, Branch::Upper], 0.0, 0).unwrap();
        let mut cfg = FitConfig::new(reference_truth());
        cfg.free_params = vec![Param::FluxOffset];
        cfg.bounds.insert(Param::FluxOffset, (-0.05, 0.05));
        let r = fit(&data, &cfg, &model).unwrap();
        assert!(r.report.converged);
        assert!((r.params.flux_offset - 0.013).abs() < 1e-7, "{}", r.params.flux_offset);
        assert!(r.residual_rms < 1e3);
    }

    #[test]
    fn one_sided_data_warns() {
        let model = ModelConfig::new(Tier::ExactSingle, ParamSource::Hamiltonian(HamiltonianParams::reference_fit()));
        let truth = reference_truth();
        let sweep: Vec<f64> = (0..6).map(|i| 0.42 + 0.005 * i as f64).collect();
        let data = synthesize_peaks(&truth, &model, &sweep, &[Branch::Lower, Branch::Upper], 0.0, 0).unwrap();
        let mut cfg = FitConfig::new(truth);
        cfg.free_params = vec![Param::G];
        let r = fit(&data, &cfg, &model).unwrap();
        assert!(r.report.warnings.iter().any(|w| w.contains("g weakly constrained")));
    }

    #[test]
    fn duffing_tier_rejected() {
        let model = ModelConfig::new(Tier::DuffingSingle, ParamSource::Hamiltonian(HamiltonianParams::reference_fit()));
        let data = PeakData {
            points: vec![PeakPoint {
                sweep_value: 0.3,
                frequency_hz: 6e9,
                branch: None,
                weight: None,
            }],
        };
        assert!(fit(&data, &FitConfig::new(reference_truth()), &model).is_err());
    }

    #[test]
    fn initial_outside_bounds_rejected() {
        let mut cfg = FitConfig::new(reference_truth());
        cfg.bounds.insert(Param::G, (500e6, 600e6));
        assert!(cfg.validate().is_err());
    }
}
