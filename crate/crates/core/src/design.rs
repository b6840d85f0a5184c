//! Coupling design: normalized coupling of a capacitance choice, its bound,
//! the resonator impedance it needs, and brute-force scans.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{self, effective_capacitances, TRANSMON_REGIME_RATIO};
use crate::error::{ensure_positive, Error, Result};

const MODULE: &str = "design";

pub const ULTRASTRONG_THRESHOLD: f64 = 0.1;
pub const DEEP_STRONG_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignTopology {
    Lumped,
    QuarterWave,
    HalfWave,
}

impl fmt::Display for DesignTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignTopology::Lumped => "lumped",
            DesignTopology::QuarterWave => "quarter_wave",
            DesignTopology::HalfWave => "half_wave",
        })
    }
}

impl FromStr for DesignTopology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lumped" => Ok(DesignTopology::Lumped),
            "quarter_wave" | "lambda/4" => Ok(DesignTopology::QuarterWave),
            "half_wave" | "lambda/2" => Ok(DesignTopology::HalfWave),
            other => Err(Error::domain(MODULE, "topology", format!("unknown topology {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub c_j: f64,
    pub c_c: f64,
    pub c_r: f64,
    /// Common qubit and resonator frequency, hertz.
    pub target_f: f64,
    pub topology: DesignTopology,
}

impl DesignPoint {
    pub fn validate(&self) -> Result<()> {
        ensure_positive(MODULE, "c_j", self.c_j)?;
        ensure_positive(MODULE, "c_c", self.c_c)?;
        ensure_positive(MODULE, "c_r", self.c_r)?;
        ensure_positive(MODULE, "target_f", self.target_f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Strong,
    Ultrastrong,
    DeepStrong,
}

impl Regime {
    pub fn classify(g_bar: f64) -> Self {
        if g_bar >= DEEP_STRONG_THRESHOLD {
            Regime::DeepStrong
        } else if g_bar >= ULTRASTRONG_THRESHOLD {
            Regime::Ultrastrong
        } else {
            Regime::Strong
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Strong => "strong",
            Regime::Ultrastrong => "ultrastrong",
            Regime::DeepStrong => "deep-strong",
        })
    }
}

/// A published value next to the one computed here. Never reconciled, only reported.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotedComparison {
    pub quantity: &'static str,
    pub quoted: f64,
    pub computed: f64,
    /// (computed − quoted) / quoted.
    pub relative_difference: f64,
}

impl QuotedComparison {
    fn new(quantity: &'static str, quoted: f64, computed: f64) -> Self {
        QuotedComparison {
            quantity,
            quoted,
            computed,
            relative_difference: (computed - quoted) / quoted,
        }
    }

    pub fn agrees_within(&self, rel: f64) -> bool {
        self.relative_difference.abs() <= rel
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub point: DesignPoint,
    pub g_bar: f64,
    /// g = ḡ·target_f, hertz.
    pub g: f64,
    /// Z_eq (lumped) or Z_0 (lines), ohm.
    pub required_impedance: f64,
    pub regime: Regime,
    /// g / (√(f_a f_r)/2).
    pub bound_margin: f64,
    pub e_c: f64,
    /// E_J/E_c needed to put the qubit at `target_f`.
    pub e_j_over_e_c: f64,
    pub outside_transmon_regime: bool,
    pub comparisons: Vec<QuotedComparison>,
}

/// Published reference points: capacitances (fF), quoted ḡ, quoted impedances (Ω) by topology.
struct QuotedPoint {
    caps_ff: (f64, f64, f64),
    g_bar: f64,
    impedances: &'static [(DesignTopology, f64)],
}

const QUOTED: [QuotedPoint; 2] = [
    QuotedPoint {
        caps_ff: (51.0, 9.0, 57.1),
        g_bar: 0.071,
        impedances: &[],
    },
    QuotedPoint {
        caps_ff: (10.0, 200.0, 10.0),
        g_bar: 0.45,
        impedances: &[
            (DesignTopology::QuarterWave, 722.0),
            (DesignTopology::HalfWave, 1440.0),
            (DesignTopology::Lumped, 918.0),
        ],
    },
];

fn quoted_comparisons(point: &DesignPoint, g_bar: f64, z: f64) -> Vec<QuotedComparison> {
    let same = |a: f64, b_ff: f64| (a / (b_ff * 1e-15) - 1.0).abs() < 1e-9;
    let mut out = Vec::new();
    for q in &QUOTED {
        let (j, c, r) = q.caps_ff;
        if same(point.c_j, j) && same(point.c_c, c) && same(point.c_r, r) {
            out.push(QuotedComparison::new("g_bar", q.g_bar, g_bar));
            for &(t, quoted) in q.impedances {
                if t == point.topology {
                    out.push(QuotedComparison::new("required_impedance", quoted, z));
                }
            }
        }
    }
    out
}

pub fn required_impedance(c_r: f64, f: f64, topology: DesignTopology) -> Result<f64> {
    ensure_positive(MODULE, "c_r", c_r)?;
    ensure_positive(MODULE, "f", f)?;
    let z_eq = 1.0 / (2.0 * PI * f * c_r);
    Ok(match topology {
        DesignTopology::Lumped => z_eq,
        DesignTopology::QuarterWave => PI * z_eq / 4.0,
        DesignTopology::HalfWave => PI * z_eq / 2.0,
    })
}

pub fn evaluate(point: &DesignPoint) -> Result<DesignReport> {
    point.validate()?;
    let g_bar = circuit::normalized_coupling(point.c_j, point.c_c, point.c_r)?;
    let z = required_impedance(point.c_r, point.target_f, point.topology)?;
    let caps = effective_capacitances(point.c_j, point.c_c, point.c_r)?;
    let e_c = circuit::charging_energy(caps.c_j_eff)?;
    // √(8 E_J E_c) − E_c = target_f.
    let e_j = (point.target_f + e_c).powi(2) / (8.0 * e_c);
    let ratio = e_j / e_c;
    Ok(DesignReport {
        point: *point,
        g_bar,
        g: g_bar * point.target_f,
        required_impedance: z,
        regime: Regime::classify(g_bar),
        bound_margin: 2.0 * g_bar,
        e_c,
        e_j_over_e_c: ratio,
        outside_transmon_regime: ratio < TRANSMON_REGIME_RATIO,
        comparisons: quoted_comparisons(point, g_bar, z),
    })
}

/// Cartesian scan ranked by ḡ (descending); ties keep scan order.
pub fn scan_coupling(
    c_j_range: &[f64],
    c_c_range: &[f64],
    c_r_range: &[f64],
    target_f: f64,
    topology: DesignTopology,
) -> Result<Vec<DesignReport>> {
    for (field, r) in [("c_j_range", c_j_range), ("c_c_range", c_c_range), ("c_r_range", c_r_range)] {
        if r.is_empty() {
            return Err(Error::domain(MODULE, field, "empty range"));
        }
    }
    let points: Vec<DesignPoint> = c_j_range
        .iter()
        .flat_map(|&c_j| {
            c_c_range.iter().flat_map(move |&c_c| {
                c_r_range.iter().map(move |&c_r| DesignPoint {
                    c_j,
                    c_c,
                    c_r,
                    target_f,
                    topology,
                })
            })
        })
        .collect();
    let mut reports = points.par_iter().map(evaluate).collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| b.g_bar.total_cmp(&a.g_bar));
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const FF: f64 = 1e-15;

    fn point(c_j: f64, c_c: f64, c_r: f64, topology: DesignTopology) -> DesignPoint {
        DesignPoint {
            c_j: c_j * FF,
            c_c: c_c * FF,
            c_r: c_r * FF,
            target_f: 6e9,
            topology,
        }
    }

    #[test]
    fn reference_device_coupling() {
        let r = evaluate(&point(51.0, 9.0, 57.1, DesignTopology::HalfWave)).unwrap();
        assert_relative_eq!(r.g_bar, 0.071_455_581_7, max_relative = 1e-9);
        assert_eq!(r.regime, Regime::Strong);
        assert_eq!(r.comparisons.len(), 1);
        assert!(r.comparisons[0].agrees_within(0.01));
    }

    #[test]
    fn proposal_point_reports_gap() {
        let r = evaluate(&point(10.0, 200.0, 10.0, DesignTopology::Lumped)).unwrap();
        assert_relative_eq!(r.g_bar, 10.0 / 21.0, max_relative = 1e-12);
        assert_eq!(r.regime, Regime::Ultrastrong);
        let gb = r.comparisons.iter().find(|c| c.quantity == "g_bar").unwrap();
        assert_eq!(gb.quoted, 0.45);
        assert!(gb.agrees_within(0.1));
        assert!(!gb.agrees_within(0.05));
        let z = r.comparisons.iter().find(|c| c.quantity == "required_impedance").unwrap();
        assert_eq!(z.quoted, 918.0);
        assert_relative_eq!(z.computed, 2652.582_384_864_922, max_relative = 1e-9);
    }

    #[test]
    fn impedance_values_and_ratios() {
        let c = 10.0 * FF;
        let l = required_impedance(c, 6e9, DesignTopology::Lumped).unwrap();
        let q = required_impedance(c, 6e9, DesignTopology::QuarterWave).unwrap();
        let h = required_impedance(c, 6e9, DesignTopology::HalfWave).unwrap();
        assert_relative_eq!(l, 2652.58, max_relative = 1e-5);
        assert_relative_eq!(q, 2083.33, max_relative = 1e-5);
        assert_relative_eq!(h, 4166.67, max_relative = 1e-5);
        assert!(required_impedance(0.0, 6e9, DesignTopology::Lumped).is_err());
    }

    #[test]
    fn large_coupling_capacitor_saturates_bound() {
        let r = evaluate(&point(10.0, 1e9, 10.0, DesignTopology::Lumped)).unwrap();
        assert!((r.g_bar - 0.5).abs() < 1e-6);
        assert!(r.bound_margin <= 1.0);
    }

    #[test]
    fn symmetric_split_extremes() {
        let g = |c_j: f64, c_r: f64| evaluate(&point(c_j, 50.0, c_r, DesignTopology::Lumped)).unwrap().g_bar;
        let argbest = |pairs: Vec<(f64, f64)>, better: fn(f64, f64) -> bool| {
            let mut best = pairs[0];
            for &p in &pairs[1..] {
                if better(g(p.0, p.1), g(best.0, best.1)) {
                    best = p;
                }
            }
            best
        };
        // Fixed C_J + C_r: the symmetric split is the weakest coupling.
        let sum: Vec<(f64, f64)> = (1..40).map(|i| (i as f64, 40.0 - i as f64)).collect();
        assert_eq!(argbest(sum, |a, b| a < b), (20.0, 20.0));
        // Fixed C_J · C_r: the symmetric split is the strongest.
        let prod: Vec<(f64, f64)> = (1..=40).map(|i| (i as f64 * 0.5, 400.0 / (i as f64 * 0.5))).collect();
        assert_eq!(argbest(prod, |a, b| a > b), (20.0, 20.0));
    }

    #[test]
    fn scan_ranks_proposal_above_device() {
        let r = scan_coupling(
            &[10.0 * FF, 51.0 * FF],
            &[9.0 * FF, 200.0 * FF],
            &[10.0 * FF, 57.1 * FF],
            6e9,
            DesignTopology::Lumped,
        )
        .unwrap();
        assert_eq!(r.len(), 8);
        let pos = |j: f64, c: f64, rr: f64| {
            r.iter()
                .position(|x| x.point.c_j == j * FF && x.point.c_c == c * FF && x.point.c_r == rr * FF)
                .unwrap()
        };
        assert!(pos(10.0, 200.0, 10.0) < pos(51.0, 9.0, 57.1));
        assert!(r.windows(2).all(|w| w[0].g_bar >= w[1].g_bar));
        assert!(scan_coupling(&[], &[1.0], &[1.0], 6e9, DesignTopology::Lumped).is_err());
    }

    #[test]
    fn low_ratio_flagged_not_dropped() {
        // Tiny junction capacitance: large E_c, E_J/E_c below the Transmon regime at 1 GHz.
        let p = DesignPoint {
            c_j: 1.0 * FF,
            c_c: 1.0 * FF,
            c_r: 1.0 * FF,
            target_f: 1e9,
            topology: DesignTopology::Lumped,
        };
        let r = scan_coupling(&[p.c_j], &[p.c_c], &[p.c_r], p.target_f, p.topology).unwrap();
        assert!(r[0].outside_transmon_regime);
    }

    proptest! {
        #[test]
        fn bound_and_monotonicity(
            c_j in 1e-16f64..1e-12,
            c_c in 1e-16f64..1e-12,
            c_r in 1e-16f64..1e-12,
            k in 1.01f64..10.0,
        ) {
            let base = evaluate(&DesignPoint { c_j, c_c, c_r, target_f: 5e9, topology: DesignTopology::Lumped }).unwrap();
            prop_assert!(base.g_bar <= 0.5 && base.bound_margin <= 1.0);
            let g = |c_j: f64, c_c: f64, c_r: f64| circuit::normalized_coupling(c_j, c_c, c_r).unwrap();
            prop_assert!(g(c_j * k, c_c, c_r) < base.g_bar);
            prop_assert!(g(c_j, c_c, c_r * k) < base.g_bar);
            prop_assert!(g(c_j, c_c * k, c_r) > base.g_bar);
            let l = required_impedance(c_r, 5e9, DesignTopology::Lumped).unwrap();
            let q = required_impedance(c_r, 5e9, DesignTopology::QuarterWave).unwrap();
            let h = required_impedance(c_r, 5e9, DesignTopology::HalfWave).unwrap();
            prop_assert!((h / q - 2.0).abs() < 1e-14);
            prop_assert!((l / q - 4.0 / PI).abs() < 1e-14);
        }
    }
}
