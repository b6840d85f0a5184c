//! Coupled Transmon–resonator Hamiltonian in three tiers.
//!
//! * `duffing_single`: Duffing oscillator levels, charge operator ∝ (b̂ + b̂†), one mode.
//! * `exact_single`: exact Cooper-pair-box levels and ⟨k|n̂|l⟩, one mode.
//! * `exact_multimode`: exact Cooper-pair box coupled to the first `n_modes`
//!   Foster modes of the resonator line. The whole capacitance network
//!   (C_J, C_c, every mode capacitance) is inverted, so the charging energy,
//!   the mode frequencies, the per-mode couplings and the capacitive
//!   mode-mode couplings all follow from one matrix. With one mode this is
//!   the single-mode circuit Hamiltonian.
//!
//! Basis ordering: Transmon index slowest, then modes in ascending order
//! (the last mode's photon number runs fastest).
//!
//! Units: hertz throughout (H/h).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::circuit::{self, josephson_energy, CircuitParams};
use crate::constants::{ELEMENTARY_CHARGE, PLANCK};
use crate::cpb::{self, diagonalize_cpb, duffing_charge_matrix, duffing_levels};
use crate::error::{ensure_positive, Error, Result};
use crate::foster::{self, Topology, DEFAULT_SERIES_THRESHOLD};

const MODULE: &str = "rabi_hamiltonian";

pub const DEFAULT_DIM_CAP: usize = 20_000;
pub const DEFAULT_N_PH_SINGLE: usize = 8;
pub const DEFAULT_N_PH_MULTI: usize = 5;
pub const DEFAULT_N_MODES_MULTI: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    DuffingSingle,
    ExactSingle,
    ExactMultimode,
}

impl Tier {
    pub fn is_exact(self) -> bool {
        !matches!(self, Tier::DuffingSingle)
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::DuffingSingle => "duffing_single",
            Tier::ExactSingle => "exact_single",
            Tier::ExactMultimode => "exact_multimode",
        })
    }
}

impl FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "duffing_single" => Ok(Tier::DuffingSingle),
            "exact_single" => Ok(Tier::ExactSingle),
            "exact_multimode" => Ok(Tier::ExactMultimode),
            other => Err(Error::domain(MODULE, "tier", format!("unknown tier {other:?}"))),
        }
    }
}

/// Effective single-mode Hamiltonian parameters (the fit space).
///
/// `g` is the qubit–resonator coupling g_01 at the flux where the bare
/// qubit transition equals `f_r`; away from that point the coupling follows
/// the flux dependence of ⟨0|n̂|1⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianParams {
    pub e_c: f64,
    pub e_j_max: f64,
    pub f_r: f64,
    pub g: f64,
    pub flux: f64,
}

impl HamiltonianParams {
    /// Spectroscopy fit values of the reference device.
    pub fn reference_fit() -> Self {
        HamiltonianParams {
            e_c: 300e6,
            e_j_max: 46e9,
            f_r: 6.367e9,
            g: 455e6,
            flux: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive(MODULE, "e_c", self.e_c)?;
        ensure_positive(MODULE, "e_j_max", self.e_j_max)?;
        ensure_positive(MODULE, "f_r", self.f_r)?;
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(Error::domain(MODULE, "g", format!("must be >= 0, got {}", self.g)));
        }
        if !self.flux.is_finite() {
            return Err(Error::domain(MODULE, "flux", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    Hamiltonian(HamiltonianParams),
    Circuit(CircuitParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub tier: Tier,
    pub k_levels: usize,
    pub n_ph: usize,
    pub n_modes: usize,
    /// Charge-basis half width; `None` picks [`cpb::recommended_n_cut`] for E_J,max.
    pub n_cut: Option<usize>,
    pub rwa: bool,
    pub dim_cap: usize,
    pub topology: Topology,
    pub series_threshold: f64,
    pub source: ParamSource,
}

impl ModelConfig {
    /// Default cutoffs for `tier`.
    pub fn new(tier: Tier, source: ParamSource) -> Self {
        let (n_ph, n_modes) = match tier {
            Tier::ExactMultimode => (DEFAULT_N_PH_MULTI, DEFAULT_N_MODES_MULTI),
            _ => (DEFAULT_N_PH_SINGLE, 1),
        };
        ModelConfig {
            tier,
            k_levels: cpb::DEFAULT_K_LEVELS,
            n_ph,
            n_modes,
            n_cut: None,
            rwa: false,
            dim_cap: DEFAULT_DIM_CAP,
            topology: Topology::HalfWave,
            series_threshold: DEFAULT_SERIES_THRESHOLD,
            source,
        }
    }

    pub fn flux(&self) -> f64 {
        match &self.source {
            ParamSource::Hamiltonian(h) => h.flux,
            ParamSource::Circuit(c) => c.flux,
        }
    }

    pub fn with_flux(mut self, flux: f64) -> Self {
        self.set_flux(flux);
        self
    }

    pub fn set_flux(&mut self, flux: f64) {
        match &mut self.source {
            ParamSource::Hamiltonian(h) => h.flux = flux,
            ParamSource::Circuit(c) => c.flux = flux,
        }
    }

    pub fn e_j_max(&self) -> f64 {
        match &self.source {
            ParamSource::Hamiltonian(h) => h.e_j_max,
            ParamSource::Circuit(c) => c.e_j_max,
        }
    }

    pub fn modes(&self) -> usize {
        match self.tier {
            Tier::ExactMultimode => self.n_modes,
            _ => 1,
        }
    }

    pub fn dimension(&self) -> usize {
        self.n_ph
            .checked_pow(self.modes() as u32)
            .and_then(|d| d.checked_mul(self.k_levels))
            .unwrap_or(usize::MAX)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_levels < 2 {
            return Err(Error::domain(MODULE, "k_levels", "must be >= 2"));
        }
        if self.n_ph < 2 {
            return Err(Error::domain(MODULE, "n_ph", "must be >= 2"));
        }
        if self.n_modes < 1 {
            return Err(Error::domain(MODULE, "n_modes", "must be >= 1"));
        }
        match &self.source {
            ParamSource::Hamiltonian(h) => h.validate()?,
            ParamSource::Circuit(c) => c.validate()?,
        }
        if self.tier == Tier::ExactMultimode && !matches!(self.source, ParamSource::Circuit(_)) {
            return Err(Error::domain(
                MODULE,
                "source",
                "exact_multimode needs circuit parameters (c_j, c_c, c_r, l_r)",
            ));
        }
        let dim = self.dimension();
        if dim > self.dim_cap {
            return Err(Error::DimensionCap {
                dim,
                cap: self.dim_cap,
                suggestion: suggest_cutoffs(self),
            });
        }
        Ok(())
    }
}

fn suggest_cutoffs(cfg: &ModelConfig) -> String {
    let modes = cfg.modes() as f64;
    let max_ph = ((cfg.dim_cap as f64 / cfg.k_levels as f64).powf(1.0 / modes)).floor() as usize;
    if max_ph >= 2 {
        format!("try n_ph <= {max_ph} with k_levels = {}", cfg.k_levels)
    } else {
        let max_modes = ((cfg.dim_cap as f64 / cfg.k_levels as f64).ln() / (cfg.n_ph as f64).ln()).floor();
        format!("try n_modes <= {max_modes} or a smaller n_ph")
    }
}

/// Everything needed to assemble the matrix at one flux point.
#[derive(Debug, Clone)]
pub struct ResolvedModel {
    pub e_c: f64,
    pub e_j: f64,
    pub e_j_negative_branch: bool,
    pub levels: Vec<f64>,
    /// ⟨k|n̂|l⟩ in the retained Transmon eigenbasis.
    pub charge: DMatrix<f64>,
    pub mode_frequencies: Vec<f64>,
    /// Coupling per unit Cooper-pair number for each mode, hertz.
    pub prefactors: Vec<f64>,
    /// Coefficient of (â_p + â_p†)(â_q + â_q†), hertz; zero diagonal.
    pub mode_mode: DMatrix<f64>,
    pub cpb_converged: bool,
}

fn n_cut_for(cfg: &ModelConfig, e_c: f64) -> usize {
    cfg.n_cut.unwrap_or_else(|| cpb::recommended_n_cut(e_c, cfg.e_j_max()))
}

/// Duffing-tier ⟨0|n̂|1⟩ where √(8E_J E_c) − E_c = f_r.
fn duffing_resonant_n01(e_c: f64, f_r: f64) -> f64 {
    let e_j = (f_r + e_c).powi(2) / (8.0 * e_c);
    (e_j / (32.0 * e_c)).powf(0.25)
}

/// Exact ⟨0|n̂|1⟩ at the E_J for which the bare CPB transition equals `f_r`.
///
/// Falls back to the Duffing value when `f_r` lies below the E_J = 0 limit 4E_c.
pub fn resonant_charge_element(e_c: f64, f_r: f64, n_cut: usize) -> Result<f64> {
    let eps1 = |e_j: f64| -> Result<(f64, f64)> {
        let s = diagonalize_cpb(e_c, e_j, n_cut, 2)?;
        Ok((s.levels[1], s.n_elements[(0, 1)].abs()))
    };
    if f_r <= 4.0 * e_c * (1.0 + 1e-9) {
        return Ok(duffing_resonant_n01(e_c, f_r));
    }
    // Illinois regula falsi on ε1(E_J) − f_r, which is smooth and increasing.
    let (mut lo, mut f_lo) = (0.0, eps1(0.0)?.0 - f_r);
    let mut hi = 2.0 * (f_r + e_c).powi(2) / (8.0 * e_c) + 4.0 * e_c;
    let mut f_hi = eps1(hi)?.0 - f_r;
    while f_hi < 0.0 {
        (lo, f_lo) = (hi, f_hi);
        hi *= 2.0;
        if hi > 1e6 * f_r {
            return Err(Error::domain(MODULE, "f_r", "could not bracket the resonant E_J"));
        }
        f_hi = eps1(hi)?.0 - f_r;
    }
    let mut side = 0i8;
    let mut best = (0.5 * (lo + hi), f64::INFINITY, 0.0);
    for _ in 0..100 {
        let x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let (e1, n01) = eps1(x)?;
        let fx = e1 - f_r;
        if fx.abs() < best.1 {
            best = (x, fx.abs(), n01);
        }
        if fx.abs() <= 1e-12 * f_r || hi - lo <= 1e-13 * hi {
            break;
        }
        if fx < 0.0 {
            (lo, f_lo) = (x, fx);
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            (hi, f_hi) = (x, fx);
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(best.2)
}

/// ⟨0|n̂|1⟩ at qubit–resonator resonance for a Hamiltonian-sourced config.
///
/// It depends on (E_c, f_r, n_cut) only, so flux sweeps compute it once and
/// pass it to [`diagonalize_with`]. `None` for circuit-sourced configs.
pub fn resonant_n01(cfg: &ModelConfig) -> Result<Option<f64>> {
    match &cfg.source {
        ParamSource::Hamiltonian(h) => {
            h.validate()?;
            Ok(Some(match cfg.tier {
                Tier::DuffingSingle => duffing_resonant_n01(h.e_c, h.f_r),
                _ => resonant_charge_element(h.e_c, h.f_r, n_cut_for(cfg, h.e_c))?,
            }))
        }
        ParamSource::Circuit(_) => Ok(None),
    }
}

pub fn resolve(cfg: &ModelConfig) -> Result<ResolvedModel> {
    resolve_with(cfg, None)
}

/// [`resolve`] with a precomputed [`resonant_n01`] value.
pub fn resolve_with(cfg: &ModelConfig, n01_res: Option<f64>) -> Result<ResolvedModel> {
    cfg.validate()?;
    let k = cfg.k_levels;
    match (&cfg.source, cfg.tier) {
        (ParamSource::Hamiltonian(h), tier) => {
            let ej = josephson_energy(h.e_j_max, h.flux);
            let (levels, charge, converged) = transmon(tier, h.e_c, ej.value, n_cut_for(cfg, h.e_c), k)?;
            let n01_res = match n01_res {
                Some(v) => v,
                None => resonant_n01(cfg)?.expect("hamiltonian source"),
            };
            Ok(ResolvedModel {
                e_c: h.e_c,
                e_j: ej.value,
                e_j_negative_branch: ej.negative_branch,
                levels,
                charge,
                mode_frequencies: vec![h.f_r],
                prefactors: vec![h.g / n01_res],
                mode_mode: DMatrix::zeros(1, 1),
                cpb_converged: converged,
            })
        }
        (ParamSource::Circuit(c), Tier::ExactMultimode) => resolve_multimode(cfg, c),
        (ParamSource::Circuit(c), tier) => {
            let caps = circuit::effective_capacitances(c.c_j, c.c_c, c.c_r)?;
            let e_c = circuit::charging_energy(caps.c_j_eff)?;
            let f_r = circuit::resonator_frequency(c.l_r, caps.c_r_eff)?;
            let ej = josephson_energy(c.e_j_max, c.flux);
            let (levels, charge, converged) = transmon(tier, e_c, ej.value, n_cut_for(cfg, e_c), k)?;
            Ok(ResolvedModel {
                e_c,
                e_j: ej.value,
                e_j_negative_branch: ej.negative_branch,
                levels,
                charge,
                mode_frequencies: vec![f_r],
                prefactors: vec![circuit::coupling_prefactor(c)?],
                mode_mode: DMatrix::zeros(1, 1),
                cpb_converged: converged,
            })
        }
    }
}

type TransmonParts = (Vec<f64>, DMatrix<f64>, bool);

fn transmon(tier: Tier, e_c: f64, e_j: f64, n_cut: usize, k: usize) -> Result<TransmonParts> {
    match tier {
        Tier::DuffingSingle => {
            Ok((duffing_levels(e_c, e_j, k), duffing_charge_matrix(e_c, e_j, k), true))
        }
        _ => {
            let s = diagonalize_cpb(e_c, e_j, n_cut.max(k.div_ceil(2)), k)?;
            Ok((s.levels, s.n_elements, s.converged))
        }
    }
}

fn resolve_multimode(cfg: &ModelConfig, c: &CircuitParams) -> Result<ResolvedModel> {
    let line = foster::line_from_lc(c.c_r, c.l_r, cfg.topology)?;
    let ladder = foster::decompose(&line, cfg.n_modes)?;
    let c_c = match ladder.series_c {
        Some(s) if !ladder.series_negligible(c.c_c, cfg.series_threshold) => c.c_c * s / (c.c_c + s),
        _ => c.c_c,
    };
    let p = ladder.modes.len();
    let mut cap = DMatrix::<f64>::zeros(p + 1, p + 1);
    cap[(0, 0)] = c.c_j + c_c;
    for i in 0..p {
        cap[(0, i + 1)] = -c_c;
        cap[(i + 1, 0)] = -c_c;
        for j in 0..p {
            cap[(i + 1, j + 1)] = c_c;
        }
        cap[(i + 1, i + 1)] += ladder.modes[i].c;
    }
    let inv = cap
        .try_inverse()
        .ok_or_else(|| Error::domain(MODULE, "capacitance", "network capacitance matrix is singular"))?;

    let e_c = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE * inv[(0, 0)] / (2.0 * PLANCK);
    let mut freqs = Vec::with_capacity(p);
    let mut q_zpf = Vec::with_capacity(p);
    let mut prefactors = Vec::with_capacity(p);
    for (i, mode) in ladder.modes.iter().enumerate() {
        let c_eff = 1.0 / inv[(i + 1, i + 1)];
        freqs.push(1.0 / (2.0 * PI * (mode.l * c_eff).sqrt()));
        let q = circuit::zero_point_charge(c_eff, mode.l);
        q_zpf.push(q);
        prefactors.push(2.0 * ELEMENTARY_CHARGE * inv[(0, i + 1)] * q / PLANCK);
    }
    let mut mode_mode = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            if i != j {
                mode_mode[(i, j)] = inv[(i + 1, j + 1)] * q_zpf[i] * q_zpf[j] / PLANCK;
            }
        }
    }

    let ej = josephson_energy(c.e_j_max, c.flux);
    let (levels, charge, converged) =
        transmon(Tier::ExactMultimode, e_c, ej.value, n_cut_for(cfg, e_c), cfg.k_levels)?;
    Ok(ResolvedModel {
        e_c,
        e_j: ej.value,
        e_j_negative_branch: ej.negative_branch,
        levels,
        charge,
        mode_frequencies: freqs,
        prefactors,
        mode_mode,
        cpb_converged: converged,
    })
}

/// Single-mode Hamiltonian parameters equivalent to a circuit-sourced config.
pub fn effective_hamiltonian_params(cfg: &ModelConfig) -> Result<HamiltonianParams> {
    match &cfg.source {
        ParamSource::Hamiltonian(h) => Ok(*h),
        ParamSource::Circuit(c) => {
            let single = ModelConfig {
                tier: if cfg.tier == Tier::DuffingSingle { Tier::DuffingSingle } else { Tier::ExactSingle },
                ..cfg.clone()
            };
            let r = resolve(&single)?;
            let n01 = match single.tier {
                Tier::DuffingSingle => duffing_resonant_n01(r.e_c, r.mode_frequencies[0]),
                _ => resonant_charge_element(r.e_c, r.mode_frequencies[0], n_cut_for(cfg, r.e_c))?,
            };
            Ok(HamiltonianParams {
                e_c: r.e_c,
                e_j_max: c.e_j_max,
                f_r: r.mode_frequencies[0],
                g: r.prefactors[0] * n01,
                flux: c.flux,
            })
        }
    }
}

/// Product basis {|k⟩ ⊗ |n_1 … n_P⟩}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub k_levels: usize,
    pub n_ph: usize,
    pub n_modes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BareState {
    pub transmon: usize,
    pub photons: Vec<usize>,
}

impl BareState {
    pub fn new(transmon: usize, photons: Vec<usize>) -> Self {
        BareState { transmon, photons }
    }

    pub fn excitations(&self) -> usize {
        self.transmon + self.photons.iter().sum::<usize>()
    }
}

impl fmt::Display for BareState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}", self.transmon)?;
        for n in &self.photons {
            write!(f, ",{n}")?;
        }
        f.write_str(">")
    }
}

impl Basis {
    pub fn photon_states(&self) -> usize {
        self.n_ph.pow(self.n_modes as u32)
    }

    pub fn dimension(&self) -> usize {
        self.k_levels * self.photon_states()
    }

    fn stride(&self, mode: usize) -> usize {
        self.n_ph.pow((self.n_modes - 1 - mode) as u32)
    }

    pub fn index(&self, s: &BareState) -> Option<usize> {
        if s.transmon >= self.k_levels || s.photons.len() != self.n_modes || s.photons.iter().any(|&n| n >= self.n_ph) {
            return None;
        }
        let photons: usize = s.photons.iter().enumerate().map(|(p, &n)| n * self.stride(p)).sum();
        Some(s.transmon * self.photon_states() + photons)
    }

    pub fn state(&self, index: usize) -> BareState {
        let d = self.photon_states();
        let mut rest = index % d;
        let photons = (0..self.n_modes)
            .map(|p| {
                let s = self.stride(p);
                let n = rest / s;
                rest %= s;
                n
            })
            .collect();
        BareState {
            transmon: index / d,
            photons,
        }
    }

    /// Bare state with the Transmon in `k` and `n` photons in mode `mode` only.
    pub fn single(&self, k: usize, mode: usize, n: usize) -> BareState {
        let mut photons = vec![0; self.n_modes];
        if mode < self.n_modes {
            photons[mode] = n;
        }
        BareState::new(k, photons)
    }
}

#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub matrix: DMatrix<f64>,
    pub basis: Basis,
    pub bare_energies: Vec<f64>,
    pub model: ResolvedModel,
}

impl Hamiltonian {
    /// max |H − Hᵀ| relative to the largest element.
    pub fn hermiticity_defect(&self) -> f64 {
        let scale = self.matrix.amax().max(f64::MIN_POSITIVE);
        (&self.matrix - self.matrix.transpose()).amax() / scale
    }
}

pub fn assemble(cfg: &ModelConfig) -> Result<Hamiltonian> {
    let model = resolve(cfg)?;
    Ok(assemble_resolved(cfg, model))
}

fn assemble_resolved(cfg: &ModelConfig, model: ResolvedModel) -> Hamiltonian {
    let basis = Basis {
        k_levels: cfg.k_levels,
        n_ph: cfg.n_ph,
        n_modes: model.mode_frequencies.len(),
    };
    let dim = basis.dimension();
    let p_modes = basis.n_modes;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let mut bare_energies = vec![0.0; dim];

    for col in 0..dim {
        let s = basis.state(col);
        let e = model.levels[s.transmon]
            + s.photons.iter().zip(&model.mode_frequencies).map(|(&n, f)| n as f64 * f).sum::<f64>();
        bare_energies[col] = e;
        h[(col, col)] = e;

        // Transmon–mode terms that add one photon to mode p; the lowering
        // terms are their transposes.
        for p in 0..p_modes {
            let n = s.photons[p];
            if n + 1 >= basis.n_ph {
                continue;
            }
            let amp = model.prefactors[p] * ((n + 1) as f64).sqrt();
            let mut t = s.clone();
            t.photons[p] += 1;
            for l in 0..basis.k_levels {
                if cfg.rwa && l + 1 != s.transmon {
                    continue;
                }
                let v = amp * model.charge[(l, s.transmon)];
                if v == 0.0 {
                    continue;
                }
                t.transmon = l;
                let row = basis.index(&t).expect("in range");
                h[(row, col)] += v;
                h[(col, row)] += v;
            }
        }

        // Mode–mode terms: (+1, +1) and (+1, −1) for p < q, plus transposes.
        for p in 0..p_modes {
            for q in (p + 1)..p_modes {
                let k_pq = model.mode_mode[(p, q)];
                if k_pq == 0.0 {
                    continue;
                }
                for dq in [1i64, -1] {
                    if cfg.rwa && dq == 1 {
                        continue;
                    }
                    let np = s.photons[p];
                    let nq = s.photons[q] as i64;
                    let nq_new = nq + dq;
                    if np + 1 >= basis.n_ph || nq_new < 0 || nq_new >= basis.n_ph as i64 {
                        continue;
                    }
                    let amp_q = if dq == 1 { (nq + 1) as f64 } else { nq as f64 }.sqrt();
                    let v = k_pq * ((np + 1) as f64).sqrt() * amp_q;
                    let mut t = s.clone();
                    t.photons[p] += 1;
                    t.photons[q] = nq_new as usize;
                    let row = basis.index(&t).expect("in range");
                    h[(row, col)] += v;
                    h[(col, row)] += v;
                }
            }
        }
    }

    Hamiltonian {
        matrix: h,
        basis,
        bare_energies,
        model,
    }
}

/// Transmon–mode coupling rates g_kl for every mode.
#[derive(Debug, Clone)]
pub struct CouplingSet {
    pub per_mode: Vec<DMatrix<f64>>,
}

pub fn coupling_set(cfg: &ModelConfig) -> Result<CouplingSet> {
    if !cfg.tier.is_exact() {
        return Err(Error::domain(MODULE, "tier", "coupling set is defined for exact tiers only"));
    }
    let model = resolve(cfg)?;
    Ok(CouplingSet {
        per_mode: model.prefactors.iter().map(|&b| &model.charge * b).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Eigenfrequencies relative to the ground state, ascending.
    pub eigenfrequencies: Vec<f64>,
    /// Dominant bare-basis state of each eigenstate.
    pub labels: Vec<BareState>,
    /// Squared overlap of each eigenstate with its label.
    pub label_weights: Vec<f64>,
    pub transitions_from_ground: Vec<f64>,
    /// Transitions from the eigenstate most like |1, 0…⟩ to every higher state.
    pub transitions_from_excited: Vec<f64>,
    pub basis: Basis,
    pub bare_energies: Vec<f64>,
    pub model: ResolvedModel,
    vectors: DMatrix<f64>,
}

impl SpectrumResult {
    /// |⟨bare|ψ_state⟩|².
    pub fn weight(&self, state: usize, bare: &BareState) -> f64 {
        self.basis
            .index(bare)
            .map(|i| self.vectors[(i, state)].powi(2))
            .unwrap_or(0.0)
    }

    /// Eigenstate with the largest weight on `bare`, and that weight.
    pub fn find(&self, bare: &BareState) -> Option<(usize, f64)> {
        let i = self.basis.index(bare)?;
        let row = self.vectors.row(i);
        let mut best = (0, -1.0);
        for (s, v) in row.iter().enumerate() {
            let w = v * v;
            if w > best.1 {
                best = (s, w);
            }
        }
        Some(best)
    }

    pub fn eigenvector(&self, state: usize) -> nalgebra::DVectorView<'_, f64> {
        self.vectors.column(state)
    }
}

pub fn diagonalize(cfg: &ModelConfig) -> Result<SpectrumResult> {
    let h = assemble(cfg)?;
    Ok(diagonalize_hamiltonian(h))
}

/// [`diagonalize`] with a precomputed [`resonant_n01`] value.
pub fn diagonalize_with(cfg: &ModelConfig, n01_res: Option<f64>) -> Result<SpectrumResult> {
    let model = resolve_with(cfg, n01_res)?;
    Ok(diagonalize_hamiltonian(assemble_resolved(cfg, model)))
}

/// Eigen-decomposition block by block: the connected components of the
/// sparsity pattern (parity sectors, and excitation-number sectors under the
/// RWA) are diagonalized independently. Columns follow block order.
fn block_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for c in 0..n {
        for r in (c + 1)..n {
            if m[(r, c)] != 0.0 {
                let (a, b) = (root(&mut parent, r), root(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut block_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        if block_of[r] == usize::MAX {
            block_of[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[block_of[r]].push(i);
    }

    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for idx in &blocks {
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])]);
        let eig = SymmetricEigen::new(sub);
        for k in 0..idx.len() {
            let col = values.len();
            values.push(eig.eigenvalues[k]);
            for (r, &i) in idx.iter().enumerate() {
                vectors[(i, col)] = eig.eigenvectors[(r, k)];
            }
        }
    }
    (values, vectors)
}

pub fn diagonalize_hamiltonian(h: Hamiltonian) -> SpectrumResult {
    let Hamiltonian {
        matrix,
        basis,
        bare_energies,
        model,
    } = h;
    let dim = basis.dimension();
    let (values, eigvecs) = block_eigen(&matrix);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let ground = values[order[0]];
    let eigenfrequencies: Vec<f64> = order.iter().map(|&i| values[i] - ground).collect();
    let vectors = DMatrix::from_fn(dim, dim, |r, c| eigvecs[(r, order[c])]);

    let mut labels = Vec::with_capacity(dim);
    let mut label_weights = Vec::with_capacity(dim);
    for s in 0..dim {
        let mut best = 0;
        let mut best_w = -1.0;
        for i in 0..dim {
            let w = vectors[(i, s)].powi(2);
            let tie = (w - best_w).abs() <= 1e-12;
            if (w > best_w && !tie) || (tie && bare_energies[i] < bare_energies[best]) {
                best = i;
                best_w = w;
            }
        }
        labels.push(basis.state(best));
        label_weights.push(best_w);
    }

    let transitions_from_ground = eigenfrequencies[1..].to_vec();
    let mut result = SpectrumResult {
        eigenfrequencies,
        labels,
        label_weights,
        transitions_from_ground,
        transitions_from_excited: Vec::new(),
        basis,
        bare_energies,
        model,
        vectors,
    };
    let e_state = result.basis.single(1, 0, 0);
    if let Some((e, _)) = result.find(&e_state) {
        let base = result.eigenfrequencies[e];
        result.transitions_from_excited = result.eigenfrequencies[e + 1..].iter().map(|f| f - base).collect();
    }
    result
}
