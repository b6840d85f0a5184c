//! Closed-form circuit quantities for a Transmon capacitively coupled to a
//! single LC resonator mode.
//!
//! All frequencies and energies are ordinary frequencies in hertz (E/h, ω/2π),
//! capacitances in farad, inductances in henry and flux in units of φ0.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{ELEMENTARY_CHARGE, FLUX_QUANTUM, HBAR, PLANCK};
use crate::error::{ensure_positive, Error, Result};

const MODULE: &str = "circuit_core";

/// Smallest E_J/E_c for which the Transmon (Duffing) picture is trusted.
pub const TRANSMON_REGIME_RATIO: f64 = 20.0;

/// The physical network: Transmon to ground, coupling capacitor, one resonator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub c_j: f64,
    pub c_c: f64,
    pub c_r: f64,
    pub l_r: f64,
    /// E_J,max / h in hertz.
    pub e_j_max: f64,
    /// External SQUID flux in units of φ0.
    pub flux: f64,
}

impl CircuitParams {
    pub fn new(c_j: f64, c_c: f64, c_r: f64, l_r: f64, e_j_max: f64, flux: f64) -> Result<Self> {
        let p = CircuitParams {
            c_j,
            c_c,
            c_r,
            l_r,
            e_j_max,
            flux,
        };
        p.validate()?;
        Ok(p)
    }

    /// Device values: designed C_J, C_c and the resonator extracted from spectroscopy.
    pub fn reference_device() -> Self {
        CircuitParams {
            c_j: 51e-15,
            c_c: 9e-15,
            c_r: 57.1e-15,
            l_r: 9.65e-9,
            e_j_max: 46e9,
            flux: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive(MODULE, "c_j", self.c_j)?;
        ensure_positive(MODULE, "c_c", self.c_c)?;
        ensure_positive(MODULE, "c_r", self.c_r)?;
        ensure_positive(MODULE, "l_r", self.l_r)?;
        ensure_positive(MODULE, "e_j_max", self.e_j_max)?;
        if !self.flux.is_finite() {
            return Err(Error::domain(MODULE, "flux", "must be finite"));
        }
        Ok(())
    }

    pub fn with_flux(mut self, flux: f64) -> Self {
        self.flux = flux;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCapacitances {
    /// C*² = C_c C_J + C_c C_r + C_J C_r, farad².
    pub c_star_sq: f64,
    pub c_j_eff: f64,
    pub c_r_eff: f64,
}

/// Effective capacitances of the two-node network.
pub fn effective_capacitances(c_j: f64, c_c: f64, c_r: f64) -> Result<EffectiveCapacitances> {
    ensure_positive(MODULE, "c_j", c_j)?;
    ensure_positive(MODULE, "c_c", c_c)?;
    ensure_positive(MODULE, "c_r", c_r)?;
    let c_star_sq = c_c * c_j + c_c * c_r + c_j * c_r;
    Ok(EffectiveCapacitances {
        c_star_sq,
        c_j_eff: c_star_sq / (c_r + c_c),
        c_r_eff: c_star_sq / (c_j + c_c),
    })
}

/// E_c / h = e² / (2 C h) in hertz.
pub fn charging_energy(c_j_eff: f64) -> Result<f64> {
    ensure_positive(MODULE, "c_j_eff", c_j_eff)?;
    Ok(ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * c_j_eff * PLANCK))
}

/// Flux-tuned Josephson energy of a symmetric SQUID.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JosephsonEnergy {
    /// |E_J,max cos(π φ)| in hertz.
    pub value: f64,
    /// True where cos(πφ) < 0; the spectrum only depends on the magnitude.
    pub negative_branch: bool,
}

pub fn josephson_energy(e_j_max: f64, flux: f64) -> JosephsonEnergy {
    let c = (PI * flux).cos();
    JosephsonEnergy {
        value: (e_j_max * c).abs(),
        negative_branch: c < 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmonFrequency {
    /// √(8 E_J E_c) − E_c in hertz.
    pub value: f64,
    /// Set when E_J/E_c < 20.
    pub outside_transmon_regime: bool,
}

pub fn transmon_frequency(e_j: f64, e_c: f64) -> Result<TransmonFrequency> {
    ensure_positive(MODULE, "e_j", e_j)?;
    ensure_positive(MODULE, "e_c", e_c)?;
    Ok(TransmonFrequency {
        value: (8.0 * e_j * e_c).sqrt() - e_c,
        outside_transmon_regime: e_j / e_c < TRANSMON_REGIME_RATIO,
    })
}

/// 1 / (2π √(L C)) in hertz.
pub fn resonator_frequency(l_r: f64, c_r_eff: f64) -> Result<f64> {
    ensure_positive(MODULE, "l_r", l_r)?;
    ensure_positive(MODULE, "c_r_eff", c_r_eff)?;
    Ok(1.0 / (2.0 * PI * (l_r * c_r_eff).sqrt()))
}

/// L_J = φ0² / (4π² E_J), with `e_j` given as E_J/h in hertz.
pub fn josephson_inductance(e_j: f64) -> Result<f64> {
    ensure_positive(MODULE, "e_j", e_j)?;
    Ok(FLUX_QUANTUM * FLUX_QUANTUM / (4.0 * PI * PI * e_j * PLANCK))
}

/// g/√(f_a f_r) = ½ / √((1 + C_J/C_c)(1 + C_r/C_c)).
///
/// Zero C_J or C_r is allowed and gives the bound ½.
pub fn normalized_coupling(c_j: f64, c_c: f64, c_r: f64) -> Result<f64> {
    ensure_positive(MODULE, "c_c", c_c)?;
    if !(c_j >= 0.0 && c_r >= 0.0) {
        return Err(Error::domain(MODULE, "c_j/c_r", "must be >= 0"));
    }
    Ok(0.5 / ((1.0 + c_j / c_c) * (1.0 + c_r / c_c)).sqrt())
}

/// Coupling rate from capacitances and the two oscillator frequencies (hertz).
pub fn coupling_from_frequencies(c_j: f64, c_c: f64, c_r: f64, f_a: f64, f_r: f64) -> Result<f64> {
    ensure_positive(MODULE, "f_a", f_a)?;
    ensure_positive(MODULE, "f_r", f_r)?;
    Ok(normalized_coupling(c_j, c_c, c_r)? * (f_a * f_r).sqrt())
}

/// Two equivalent evaluations of the qubit-resonator coupling g/2π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingRate {
    /// Capacitance-ratio form with ω_a ≈ √(8 E_J E_c).
    pub closed_form: f64,
    /// (ħ/2)(C_c/C*²)/√(Z_r,eff Z_a,eff), converted to hertz.
    pub impedance_form: f64,
}

pub fn coupling_rate(p: &CircuitParams) -> Result<CouplingRate> {
    p.validate()?;
    let caps = effective_capacitances(p.c_j, p.c_c, p.c_r)?;
    let e_c = charging_energy(caps.c_j_eff)?;
    let e_j = josephson_energy(p.e_j_max, p.flux).value;
    ensure_positive(MODULE, "e_j(flux)", e_j)?;
    let f_r = resonator_frequency(p.l_r, caps.c_r_eff)?;
    let f_a = (8.0 * e_j * e_c).sqrt();
    let closed_form = coupling_from_frequencies(p.c_j, p.c_c, p.c_r, f_a, f_r)?;

    let l_j = josephson_inductance(e_j)?;
    let z_r_eff = (p.l_r / caps.c_r_eff).sqrt();
    let z_a_eff = (l_j / caps.c_j_eff).sqrt();
    let g_angular = 0.5 * p.c_c / caps.c_star_sq / (z_r_eff * z_a_eff).sqrt();
    Ok(CouplingRate {
        closed_form,
        impedance_form: g_angular / (2.0 * PI),
    })
}

/// Resonator impedance √(L_r/C_r) and the λ/2 line impedance Z_0 = π Z_r / 2.
pub fn impedance_chain(c_r: f64, l_r: f64) -> Result<(f64, f64)> {
    ensure_positive(MODULE, "c_r", c_r)?;
    ensure_positive(MODULE, "l_r", l_r)?;
    let z_r = (l_r / c_r).sqrt();
    Ok((z_r, PI * z_r / 2.0))
}

/// Zero-point charge fluctuation √((ħ/2)√(C/L)) of an LC oscillator, coulomb.
pub fn zero_point_charge(c: f64, l: f64) -> f64 {
    (HBAR / 2.0 * (c / l).sqrt()).sqrt()
}

/// Coupling per unit Cooper-pair number, (2e/h)(C_c/C*²) q_zpf, in hertz.
pub fn coupling_prefactor(p: &CircuitParams) -> Result<f64> {
    let caps = effective_capacitances(p.c_j, p.c_c, p.c_r)?;
    ensure_positive(MODULE, "l_r", p.l_r)?;
    let q_zpf = zero_point_charge(caps.c_r_eff, p.l_r);
    Ok(2.0 * ELEMENTARY_CHARGE / PLANCK * p.c_c / caps.c_star_sq * q_zpf)
}

/// Every closed-form quantity derived from a [`CircuitParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub c_star_sq: f64,
    pub c_j_eff: f64,
    pub c_r_eff: f64,
    pub e_c: f64,
    pub e_j: f64,
    pub e_j_negative_branch: bool,
    /// √(8 E_J E_c) − E_c.
    pub omega_a: f64,
    pub omega_r: f64,
    pub l_j: f64,
    pub z_r_eff: f64,
    pub z_a_eff: f64,
    pub g: f64,
    pub g_impedance_form: f64,
    pub outside_transmon_regime: bool,
}

pub fn derive(p: &CircuitParams) -> Result<DerivedParams> {
    p.validate()?;
    let caps = effective_capacitances(p.c_j, p.c_c, p.c_r)?;
    let e_c = charging_energy(caps.c_j_eff)?;
    let ej = josephson_energy(p.e_j_max, p.flux);
    let fa = transmon_frequency(ej.value, e_c)?;
    let omega_r = resonator_frequency(p.l_r, caps.c_r_eff)?;
    let l_j = josephson_inductance(ej.value)?;
    let g = coupling_rate(p)?;
    Ok(DerivedParams {
        c_star_sq: caps.c_star_sq,
        c_j_eff: caps.c_j_eff,
        c_r_eff: caps.c_r_eff,
        e_c,
        e_j: ej.value,
        e_j_negative_branch: ej.negative_branch,
        omega_a: fa.value,
        omega_r,
        l_j,
        z_r_eff: (p.l_r / caps.c_r_eff).sqrt(),
        z_a_eff: (l_j / caps.c_j_eff).sqrt(),
        g: g.closed_form,
        g_impedance_form: g.impedance_form,
        outside_transmon_regime: fa.outside_transmon_regime,
    })
}
