//! Cooper-pair box H = 4 E_c n̂² − E_J cos δ̂ in the charge basis at zero offset charge.
//!
//! The Hamiltonian commutes with charge reflection n → −n, so it is
//! diagonalized separately on the even and odd subspaces. Parity selection
//! rules for ⟨k|n̂|l⟩ then hold exactly, and degenerate levels (E_J = 0) are
//! ordered even before odd.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const MODULE: &str = "cpb";

pub const DEFAULT_N_CUT: usize = 15;
pub const DEFAULT_K_LEVELS: usize = 6;

/// Boundary weight above which a level is reported as unconverged in `n_cut`.
const BOUNDARY_WEIGHT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone)]
pub struct CpbSpectrum {
    pub e_c: f64,
    pub e_j: f64,
    pub n_cut: usize,
    /// ε_k in hertz, ascending, ε_0 = 0.
    pub levels: Vec<f64>,
    /// Absolute ground-state energy (hertz) that was subtracted from `levels`.
    pub ground_energy: f64,
    pub parity: Vec<Parity>,
    /// ⟨k|n̂|l⟩ for the retained levels.
    pub n_elements: DMatrix<f64>,
    pub converged: bool,
}

impl CpbSpectrum {
    pub fn k_levels(&self) -> usize {
        self.levels.len()
    }
}

struct Block {
    values: Vec<f64>,
    /// Columns are eigenvectors; rows indexed by |n| (even block starts at n = 0).
    vectors: DMatrix<f64>,
}

fn solve_block(diag: &[f64], off: &[f64]) -> Block {
    let dim = diag.len();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        h[(i, i)] = diag[i];
    }
    for (i, &t) in off.iter().enumerate() {
        h[(i, i + 1)] = t;
        h[(i + 1, i)] = t;
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vectors = DMatrix::<f64>::zeros(dim, dim);
    let mut values = Vec::with_capacity(dim);
    for (col, &src) in order.iter().enumerate() {
        let mut v: DVector<f64> = eig.eigenvectors.column(src).into_owned();
        fix_sign(&mut v);
        vectors.set_column(col, &v);
        values.push(eig.eigenvalues[src]);
    }
    Block { values, vectors }
}

/// Makes the largest-magnitude component positive (first one on ties).
fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() * (1.0 + 1e-10) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

pub fn diagonalize_cpb(e_c: f64, e_j: f64, n_cut: usize, k_levels: usize) -> Result<CpbSpectrum> {
    if !(e_c.is_finite() && e_c > 0.0) {
        return Err(Error::domain(MODULE, "e_c", format!("must be > 0, got {e_c}")));
    }
    if !(e_j.is_finite() && e_j >= 0.0) {
        return Err(Error::domain(MODULE, "e_j", format!("must be >= 0, got {e_j}")));
    }
    if n_cut == 0 {
        return Err(Error::domain(MODULE, "n_cut", "must be >= 1"));
    }
    if k_levels == 0 || k_levels > 2 * n_cut {
        return Err(Error::domain(
            MODULE,
            "k_levels",
            format!("must be in 1..={} for n_cut = {n_cut}, got {k_levels}", 2 * n_cut),
        ));
    }

    // Even block: |0>, (|n> + |-n>)/√2 for n = 1..=n_cut.
    let even_diag: Vec<f64> = (0..=n_cut).map(|n| 4.0 * e_c * (n * n) as f64).collect();
    let mut even_off = vec![-e_j / 2.0; n_cut];
    even_off[0] = -e_j / std::f64::consts::SQRT_2;
    // Odd block: (|n> - |-n>)/√2 for n = 1..=n_cut.
    let odd_diag: Vec<f64> = (1..=n_cut).map(|n| 4.0 * e_c * (n * n) as f64).collect();
    let odd_off = vec![-e_j / 2.0; n_cut - 1];

    let even = solve_block(&even_diag, &even_off);
    let odd = solve_block(&odd_diag, &odd_off);

    // Merge, even first on ties.
    let mut picks: Vec<(Parity, usize)> = Vec::with_capacity(k_levels);
    let (mut ie, mut io) = (0, 0);
    while picks.len() < k_levels {
        let take_even = match (even.values.get(ie), odd.values.get(io)) {
            (Some(&a), Some(&b)) => a <= b + 1e-9 * e_c,
            (Some(_), None) => true,
            _ => false,
        };
        if take_even {
            picks.push((Parity::Even, ie));
            ie += 1;
        } else {
            picks.push((Parity::Odd, io));
            io += 1;
        }
    }

    let energy = |&(p, i): &(Parity, usize)| match p {
        Parity::Even => even.values[i],
        Parity::Odd => odd.values[i],
    };
    let ground_energy = energy(&picks[0]);
    let levels: Vec<f64> = picks.iter().map(|p| energy(p) - ground_energy).collect();

    // ⟨odd_i| n̂ |even_j⟩ = Σ_n n · u_odd[n-1, i] · u_even[n, j]
    let cross = |oi: usize, ej: usize| -> f64 {
        (1..=n_cut)
            .map(|n| n as f64 * odd.vectors[(n - 1, oi)] * even.vectors[(n, ej)])
            .sum()
    };
    let mut n_elements = DMatrix::<f64>::zeros(k_levels, k_levels);
    for (k, &(pk, ik)) in picks.iter().enumerate() {
        for (l, &(pl, il)) in picks.iter().enumerate() {
            n_elements[(k, l)] = match (pk, pl) {
                (Parity::Odd, Parity::Even) => cross(ik, il),
                (Parity::Even, Parity::Odd) => cross(il, ik),
                _ => 0.0,
            };
        }
    }

    let converged = picks.iter().all(|&(p, i)| {
        let w = match p {
            Parity::Even => even.vectors[(n_cut, i)],
            Parity::Odd => odd.vectors[(n_cut - 1, i)],
        };
        w * w < BOUNDARY_WEIGHT_TOL
    });

    Ok(CpbSpectrum {
        e_c,
        e_j,
        n_cut,
        levels,
        ground_energy,
        parity: picks.iter().map(|p| p.0).collect(),
        n_elements,
        converged,
    })
}

/// Duffing-oscillator levels ε_k = k ω_a − (E_c/2) k (k − 1), ω_a = √(8 E_J E_c) − E_c.
pub fn duffing_levels(e_c: f64, e_j: f64, k_levels: usize) -> Vec<f64> {
    let omega_a = (8.0 * e_j * e_c).sqrt() - e_c;
    (0..k_levels)
        .map(|k| {
            let k = k as f64;
            k * omega_a - 0.5 * e_c * k * (k - 1.0)
        })
        .collect()
}

/// Duffing charge operator (E_J / 32 E_c)^{1/4} (b̂ + b̂†) truncated to `k_levels`.
pub fn duffing_charge_matrix(e_c: f64, e_j: f64, k_levels: usize) -> DMatrix<f64> {
    let scale = (e_j / (32.0 * e_c)).powf(0.25);
    let mut n = DMatrix::<f64>::zeros(k_levels, k_levels);
    for k in 1..k_levels {
        let v = scale * (k as f64).sqrt();
        n[(k - 1, k)] = v;
        n[(k, k - 1)] = v;
    }
    n
}

/// Charge cutoff large enough for E_J/E_c: at least the default, and ≥ 5 + √(E_J/E_c).
pub fn recommended_n_cut(e_c: f64, e_j: f64) -> usize {
    let need = 5.0 + (e_j / e_c).max(0.0).sqrt();
    DEFAULT_N_CUT.max(need.ceil() as usize)
}
