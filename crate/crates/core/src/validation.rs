//! Independent checks on the analytic densities: Monte Carlo sampling of
//! Wishart extremes, nested quadrature of the joint density over the ordered
//! region, and goodness-of-fit statistics.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extreme::{DensityCurve, Extreme};
use crate::model::{joint_density, ModelParams};
use crate::quadrature::{integrate_finite, integrate_semi_infinite, QuadSpec};

/// Sorted draws of one extreme eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    pub which: Extreme,
    pub values: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub params: ModelParams,
    /// Draws whose eigen-decomposition failed and were redrawn.
    pub retries: usize,
}

const MAX_RETRIES_PER_DRAW: usize = 8;
const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 10_000;

/// Eigenvalues of `A^T A` for one draw. Each draw owns ChaCha stream `draw`
/// under `seed`, so results do not depend on scheduling. Gaussians come from
/// `rand_distr::StandardNormal` (ziggurat), scaled by `sqrt(rho)`.
fn draw_spectrum(p: &ModelParams, seed: u64, draw: u64) -> Result<(Vec<f64>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw);
    let (k, m) = (p.k(), p.m());
    let sd = p.rho().sqrt();
    for attempt in 0..=MAX_RETRIES_PER_DRAW {
        // a failed attempt simply continues along the same stream
        let a = DMatrix::<f64>::from_fn(m, k, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        });
        let w = a.transpose() * &a;
        if let Some(eig) = SymmetricEigen::try_new(w, EIGEN_EPS, EIGEN_MAX_ITER) {
            let values: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
            if values.iter().all(|v| v.is_finite()) {
                return Ok((values, attempt));
            }
        }
    }
    Err(Error::Numerical(format!("eigen-decomposition failed {MAX_RETRIES_PER_DRAW} times on draw {draw}")))
}

/// Draws `n_samples` Wishart matrices and keeps the requested extreme
/// eigenvalue of each. Parallel over draws on the current rayon pool.
pub fn sample_extreme_eigs(p: &ModelParams, n_samples: usize, seed: u64, which: Extreme) -> Result<EmpiricalSample> {
    let mut both = sample_both_extremes(p, n_samples, seed)?;
    Ok(match which {
        Extreme::Largest => both.swap_remove(0),
        Extreme::Smallest => both.swap_remove(1),
    })
}

/// Largest and smallest eigenvalue samples taken from the same draws.
pub fn sample_both_extremes(p: &ModelParams, n_samples: usize, seed: u64) -> Result<Vec<EmpiricalSample>> {
    if n_samples == 0 {
        return Err(Error::Validation("n_samples must be at least 1".into()));
    }
    let draws: Vec<(f64, f64, usize)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|d| {
            draw_spectrum(p, seed, d).map(|(vals, retries)| {
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                (hi, lo, retries)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let retries = draws.iter().map(|d| d.2).sum();
    let build = |which: Extreme, mut values: Vec<f64>| {
        values.sort_by(f64::total_cmp);
        EmpiricalSample { which, values, n_samples, seed, params: *p, retries }
    };
    Ok(vec![
        build(Extreme::Largest, draws.iter().map(|d| d.0).collect()),
        build(Extreme::Smallest, draws.iter().map(|d| d.1).collect()),
    ])
}

/// Marginal density of an extreme eigenvalue by direct nested quadrature of
/// the joint density over the ordered region (`2 <= K <= 4`).
///
/// The outermost level runs at `spec.rel_tol`; each deeper level is one
/// decade tighter (floored at 1e-13) so inner errors stay below outer ones.
pub fn brute_force_pdf(lambda: f64, p: &ModelParams, which: Extreme, spec: &QuadSpec) -> Result<f64> {
    p.require_full_rank()?;
    let k = p.k();
    if !(2..=4).contains(&k) {
        return Err(Error::Unsupported(format!("brute-force oracle supports 2 <= K <= 4, got K={k}")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("eigenvalue must be finite and >= 0, got {lambda}")));
    }
    let mut vars = vec![0.0; k];
    match which {
        Extreme::Largest => {
            vars[0] = lambda;
            nested_largest(1, &mut vars, p, spec)
        }
        Extreme::Smallest => {
            vars[k - 1] = lambda;
            nested_smallest(k - 2, 0, &mut vars, p, spec)
        }
    }
}

fn level_spec(spec: &QuadSpec, depth: usize) -> QuadSpec {
    spec.with_rel_tol((spec.rel_tol * 10f64.powi(-(depth as i32))).max(1e-13))
}

fn density_or_zero(vars: &[f64], p: &ModelParams) -> Result<f64> {
    // nodes can collide with a bound at machine resolution; the Vandermonde
    // factor vanishes there
    if vars.windows(2).any(|w| !(w[0] > w[1])) {
        return Ok(0.0);
    }
    joint_density(vars, p)
}

// Integrates vars[pos] over (0, vars[pos-1]).
fn nested_largest(pos: usize, vars: &mut Vec<f64>, p: &ModelParams, spec: &QuadSpec) -> Result<f64> {
    let upper = vars[pos - 1];
    if upper == 0.0 {
        return Ok(0.0);
    }
    let last = pos + 1 == vars.len();
    let mut failure = None;
    let s = level_spec(spec, pos - 1);
    let r = integrate_finite(
        |x| {
            vars[pos] = x;
            let v = if last { density_or_zero(vars, p) } else { nested_largest(pos + 1, vars, p, spec) };
            v.unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        0.0,
        upper,
        &s,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r?.value)
}

// Integrates vars[pos] over (vars[pos+1], inf).
fn nested_smallest(pos: usize, depth: usize, vars: &mut Vec<f64>, p: &ModelParams, spec: &QuadSpec) -> Result<f64> {
    let lower = vars[pos + 1];
    let mut failure = None;
    let s = level_spec(spec, depth);
    let r = integrate_semi_infinite(
        |x| {
            vars[pos] = x;
            let v =
                if pos == 0 { density_or_zero(vars, p) } else { nested_smallest(pos - 1, depth + 1, vars, p, spec) };
            v.unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        lower,
        &s,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r?.value)
}

/// Kolmogorov-Smirnov distance between a sample and a density curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    /// Fraction of the sample lying outside the curve's grid.
    pub clipped_mass: f64,
}

/// Sup-norm distance between the empirical cdf of `sample` and the curve cdf
/// (linear between grid points).
pub fn ks_statistic(sample: &EmpiricalSample, curve: &DensityCurve) -> Result<KsOutcome> {
    let xs = &sample.values;
    if xs.is_empty() {
        return Err(Error::Structural("KS statistic of an empty sample".into()));
    }
    if curve.grid.is_empty() {
        return Err(Error::Structural("KS statistic against an empty curve".into()));
    }
    let n = xs.len() as f64;
    let (lo, hi) = (curve.grid[0], curve.grid[curve.grid.len() - 1]);
    let mut statistic = 0.0_f64;
    let mut clipped = 0usize;
    for (i, &x) in xs.iter().enumerate() {
        if x < lo || x > hi {
            clipped += 1;
        }
        let f = curve.cdf_at(x);
        statistic = statistic.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(KsOutcome { statistic, clipped_mass: clipped as f64 / n })
}

/// 99% critical value of the one-sample KS statistic, `1.63 / sqrt(n)`.
pub fn ks_critical_99(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Largest gap between a histogram density of the sample and the curve's pdf
/// at the bin centers.
pub fn max_histogram_deviation(sample: &EmpiricalSample, curve: &DensityCurve, bins: usize) -> Result<f64> {
    let xs = &sample.values;
    if xs.is_empty() || bins == 0 {
        return Err(Error::Structural("histogram needs a nonempty sample and at least one bin".into()));
    }
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    if !(hi > lo) {
        return Ok(curve.pdf.iter().cloned().fold(0.0, f64::max));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in xs {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = xs.len() as f64;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let center = lo + (b as f64 + 0.5) * width;
            (c as f64 / (n * width) - curve.pdf_at(center)).abs()
        })
        .fold(0.0, f64::max))
}
