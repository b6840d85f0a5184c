//! Bounded Nelder–Mead minimization with seeded restarts.
//!
//! Coordinates are normalized to the unit box [0, 1]^n; trial points are
//! clamped to it. Vertex evaluations of a fresh simplex run in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Stop when the spread of objective values across the simplex falls below this.
    pub f_tol: f64,
    /// Stop when every vertex lies within this distance (normalized units) of the best.
    pub x_tol: f64,
    pub max_evaluations: usize,
    /// Additional runs started from perturbations of the incumbent.
    pub restarts: usize,
    /// Edge length of the initial simplex, normalized units.
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            f_tol: 1e-12,
            x_tol: 1e-9,
            max_evaluations: 4000,
            restarts: 2,
            initial_step: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    /// Best point found, normalized units.
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn clamp_unit(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b − a)
    let mut out: Vec<f64> = a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect();
    clamp_unit(&mut out);
    out
}

struct Run<'a, F> {
    f: &'a F,
    evaluations: usize,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Run<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn eval_many(&mut self, xs: &[Vec<f64>]) -> Vec<f64> {
        self.evaluations += xs.len();
        let f = self.f;
        xs.par_iter()
            .map(|x| {
                let v = f(x);
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            })
            .collect()
    }

    /// One Nelder–Mead descent from `start`; returns (point, value, converged).
    fn descend(&mut self, start: &[f64], opts: &SimplexOptions, budget: usize) -> (Vec<f64>, f64, bool) {
        let n = start.len();
        let mut pts = vec![start.to_vec()];
        for i in 0..n {
            let mut p = start.to_vec();
            // Step inward when the start sits on the upper face.
            p[i] = if p[i] + opts.initial_step <= 1.0 {
                p[i] + opts.initial_step
            } else {
                p[i] - opts.initial_step
            };
            clamp_unit(&mut p);
            pts.push(p);
        }
        let vals = self.eval_many(&pts);
        let mut simplex: Vec<(Vec<f64>, f64)> = pts.into_iter().zip(vals).collect();
        let stop_at = self.evaluations + budget;

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (best, worst) = (simplex[0].1, simplex[n].1);
            let spread = (worst - best).abs();
            let size = simplex[1..]
                .iter()
                .map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            // A flat objective alone is not enough: the simplex must also be small.
            if size <= opts.x_tol || (spread <= opts.f_tol * (1.0 + best.abs()) && size <= 1e-4) {
                return (simplex[0].0.clone(), best, true);
            }
            if self.evaluations >= stop_at {
                return (simplex[0].0.clone(), best, false);
            }

            let mut centroid = vec![0.0; n];
            for (p, _) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(p) {
                    *c += v / n as f64;
                }
            }
            let worst_pt = simplex[n].0.clone();
            let xr = combine(&centroid, &worst_pt, -1.0);
            let fr = self.eval(&xr);
            if fr < simplex[0].1 {
                let xe = combine(&centroid, &worst_pt, -2.0);
                let fe = self.eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = combine(&centroid, &xr, 0.5);
                    let fc = self.eval(&xc);
                    (xc, fc)
                } else {
                    let xc = combine(&centroid, &worst_pt, 0.5);
                    let fc = self.eval(&xc);
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let best_pt = simplex[0].0.clone();
                    let shrunk: Vec<Vec<f64>> = simplex[1..].iter().map(|(p, _)| combine(&best_pt, p, 0.5)).collect();
                    let vals = self.eval_many(&shrunk);
                    for (slot, (p, v)) in simplex[1..].iter_mut().zip(shrunk.into_iter().zip(vals)) {
                        *slot = (p, v);
                    }
                }
            }
        }
    }
}

/// Minimizes `f` over the unit box starting at `x0` (normalized coordinates).
///
/// Deterministic for a given seed: restarts perturb the incumbent with a
/// ChaCha stream and parallel evaluation never changes the visiting order.
pub fn minimize<F>(f: &F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut run = Run { f, evaluations: 0 };
    let mut x = x0.to_vec();
    clamp_unit(&mut x);
    if x.is_empty() {
        let value = run.eval(&x);
        return SimplexResult {
            x,
            value,
            evaluations: 1,
            converged: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let per_run = opts.max_evaluations / (opts.restarts + 1).max(1);
    let (mut best_x, mut best_v, mut converged) = run.descend(&x, opts, per_run.max(x.len() + 2));
    for r in 0..opts.restarts {
        let scale = opts.initial_step * 0.5f64.powi(r as i32);
        let mut start: Vec<f64> = best_x.iter().map(|v| v + scale * (rng.random::<f64>() - 0.5)).collect();
        clamp_unit(&mut start);
        let (xr, vr, cr) = run.descend(&start, opts, per_run.max(x.len() + 2));
        if vr < best_v {
            best_x = xr;
            best_v = vr;
            converged = cr;
        } else {
            converged |= cr;
        }
    }
    SimplexResult {
        x: best_x,
        value: best_v,
        evaluations: run.evaluations,
        converged,
    }
}
