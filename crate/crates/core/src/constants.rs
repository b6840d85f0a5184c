//! Physical constants (exact SI values fixed by the 2019 redefinition, CODATA 2018).

use std::f64::consts::PI;

/// Elementary charge, coulomb.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant, joule second.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, joule second.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Superconducting flux quantum h/2e, weber.
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELEMENTARY_CHARGE);

pub const CONSTANTS_RELEASE: &str = "CODATA 2018";

/// One-line description echoed into output headers.
pub fn describe() -> String {
    format!(
        "{CONSTANTS_RELEASE}: e={ELEMENTARY_CHARGE:e} C, h={PLANCK:e} J s"
    )
}
