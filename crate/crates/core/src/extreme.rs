//! Densities of the largest and smallest eigenvalue.
//!
//! Expanding the Vandermonde determinant along the row of the extreme
//! eigenvalue leaves, for every column `n`, an ordered `(K-1)`-fold integral of
//! a determinant of one-variable kernels `theta_i(x) = x^{r_{n,i}} xi(x)`. Each
//! of those integrals is the Pfaffian of a skew-symmetric matrix of pairwise
//! signed double integrals (augmented by one column of single integrals when
//! `K - 1` is odd), so
//!
//! ```text
//! f(l_1) = c * sum_n (-1)^{n+1} l_1^{K-n} xi(l_1) Pf(B_n)    on [0, l_1]^2
//! f(l_K) = c * sum_n (-1)^{n+K} l_K^{K-n} xi(l_K) Pf(D_n)    on [l_K, inf)^2
//! ```
//!
//! Kernel entries are computed in the scaled variable `u = x / 2rho` and
//! divided by `(2rho)^{a} Gamma(a)` per row, with `a = r + (M-K+1)/2`. The
//! removed row factors live in [`SkewMatrix::log_scale`], which keeps every
//! stored entry in `[-1, 1]` regardless of `(K, M)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{exponent_r, log_norm_constant, power_ln, xi, ModelParams};
use crate::pfaffian::{pfaffian, SkewMatrix};
use crate::quadrature::{integrate_finite, integrate_semi_infinite, QuadSpec};
use crate::signed_log::SignedLogValue;
use crate::special::{log_gamma, reg_gamma_pair};

/// Which extreme eigenvalue a density refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    Largest,
    Smallest,
}

impl Extreme {
    pub fn name(&self) -> &'static str {
        match self {
            Extreme::Largest => "largest",
            Extreme::Smallest => "smallest",
        }
    }
}

impl std::fmt::Display for Extreme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Extreme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "largest" => Ok(Extreme::Largest),
            "smallest" => Ok(Extreme::Smallest),
            other => Err(Error::Validation(format!("unknown extreme '{other}'"))),
        }
    }
}

/// How the kernel block is completed when `K` is even (odd block order `K-1`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Augmentation {
    /// One extra row/column holding the single integrals `int theta_i`,
    /// giving even order `K`.
    #[default]
    SingleColumn,
    /// Two extra rows/columns, one of ones and one of single integrals, giving
    /// order `K+1`. That order is odd for even `K`, so the Pfaffian does not
    /// exist and evaluation fails; kept to document the rejected layout.
    TwoRowOnes,
}

/// Matrix entry represented as `value * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledEntry {
    pub value: f64,
    pub log_scale: f64,
}

impl ScaledEntry {
    pub fn to_signed_log(&self) -> SignedLogValue {
        SignedLogValue::from_f64(self.value).scale_ln(self.log_scale)
    }

    /// Plain value; overflows for large shapes.
    pub fn to_f64(&self) -> f64 {
        self.to_signed_log().to_f64()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("eigenvalue must be >= 0, got {lambda}")));
    }
    Ok(())
}

/// Global sign from reading the ordered `(K-1)`-fold integral in descending
/// rather than ascending variable order: the reversal permutation of `K-1`
/// rows.
fn ordering_parity(k: usize) -> i8 {
    let swaps = (k - 1) * k.saturating_sub(2) / 2;
    if swaps.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// `ln((2rho)^a Gamma(a))`, the factor pulled out of a kernel row.
fn row_log_scale(a: f64, p: &ModelParams) -> Result<f64> {
    Ok(a * (2.0 * p.rho()).ln() + log_gamma(a)?)
}

fn gamma_density(a: f64, log_gamma_a: f64, u: f64) -> f64 {
    if u == 0.0 {
        return if a == 1.0 { 1.0 } else { 0.0 };
    }
    ((a - 1.0) * u.ln() - u - log_gamma_a).exp()
}

/// Normalized signed double integral between the kernels with gamma shapes
/// `a_i` (row) and `a_j` (column), in the scaled variable.
///
/// Largest: `int_0^e g_j(u) [2 P(a_i, u) - P(a_i, e)] du`.
/// Smallest: `int_e^inf g_j(u) [Q(a_i, e) - 2 Q(a_i, u)] du`.
fn kernel_core(which: Extreme, a_i: f64, a_j: f64, edge: f64, spec: &QuadSpec) -> Result<f64> {
    let lg_j = log_gamma(a_j)?;
    let mut failure: Option<Error> = None;
    let result = match which {
        Extreme::Largest => {
            if edge == 0.0 {
                return Ok(0.0);
            }
            let (p_edge, _) = reg_gamma_pair(a_i, edge)?;
            integrate_finite(
                |u| {
                    let g = gamma_density(a_j, lg_j, u);
                    if g == 0.0 {
                        return 0.0;
                    }
                    match reg_gamma_pair(a_i, u) {
                        Ok((p, _)) => g * (2.0 * p - p_edge),
                        Err(e) => {
                            failure.get_or_insert(e);
                            f64::NAN
                        }
                    }
                },
                0.0,
                edge,
                spec,
            )
        }
        Extreme::Smallest => {
            if edge.is_infinite() {
                return Ok(0.0);
            }
            let (_, q_edge) = reg_gamma_pair(a_i, edge)?;
            integrate_semi_infinite(
                |u| {
                    let g = gamma_density(a_j, lg_j, u);
                    if g == 0.0 {
                        return 0.0;
                    }
                    match reg_gamma_pair(a_i, u) {
                        Ok((_, q)) => g * (q_edge - 2.0 * q),
                        Err(e) => {
                            failure.get_or_insert(e);
                            f64::NAN
                        }
                    }
                },
                edge,
                spec,
            )
        }
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(result?.value)
}

/// Normalized single integral of the kernel with shape `a` over the region.
fn aug_core(which: Extreme, a: f64, edge: f64) -> Result<f64> {
    let (p, q) = reg_gamma_pair(a, edge)?;
    Ok(match which {
        Extreme::Largest => p,
        Extreme::Smallest => q,
    })
}

fn kernel_rows(n: usize, k: usize) -> Result<Vec<usize>> {
    if n < 1 || n > k {
        return Err(Error::Validation(format!("expansion term n={n} outside 1..={k}")));
    }
    (1..k).map(|i| exponent_r(n, i, k)).collect()
}

/// Signed double integral `b_{i,j}` (largest) or `d_{i,j}` (smallest) of the
/// kernels `theta_i`, `theta_j` for expansion term `n`.
pub fn kernel_entry(
    which: Extreme,
    n: usize,
    i: usize,
    j: usize,
    lambda: f64,
    p: &ModelParams,
    spec: &QuadSpec,
) -> Result<ScaledEntry> {
    p.require_full_rank()?;
    check_lambda(lambda)?;
    let k = p.k();
    let r_i = exponent_r(n, i, k)?;
    let r_j = exponent_r(n, j, k)?;
    let (a_i, a_j) = (p.gamma_shape(r_i), p.gamma_shape(r_j));
    let log_scale = row_log_scale(a_i, p)? + row_log_scale(a_j, p)?;
    if i == j {
        return Ok(ScaledEntry { value: 0.0, log_scale });
    }
    let value = kernel_core(which, a_i, a_j, lambda / (2.0 * p.rho()), spec)?;
    Ok(ScaledEntry { value, log_scale })
}

pub fn kernel_entry_largest(
    n: usize,
    i: usize,
    j: usize,
    lambda1: f64,
    p: &ModelParams,
    spec: &QuadSpec,
) -> Result<ScaledEntry> {
    kernel_entry(Extreme::Largest, n, i, j, lambda1, p, spec)
}

pub fn kernel_entry_smallest(
    n: usize,
    i: usize,
    j: usize,
    lambda_k: f64,
    p: &ModelParams,
    spec: &QuadSpec,
) -> Result<ScaledEntry> {
    kernel_entry(Extreme::Smallest, n, i, j, lambda_k, p, spec)
}

/// Single integral of `theta_i` over the region: `(2rho)^a gamma(a, l/2rho)`
/// for the largest eigenvalue, `(2rho)^a Gamma(a, l/2rho)` for the smallest.
pub fn aug_entry(which: Extreme, n: usize, i: usize, lambda: f64, p: &ModelParams) -> Result<ScaledEntry> {
    p.require_full_rank()?;
    check_lambda(lambda)?;
    let a = p.gamma_shape(exponent_r(n, i, p.k())?);
    Ok(ScaledEntry { value: aug_core(which, a, lambda / (2.0 * p.rho()))?, log_scale: row_log_scale(a, p)? })
}

pub fn aug_entry_largest(n: usize, i: usize, lambda1: f64, p: &ModelParams) -> Result<ScaledEntry> {
    aug_entry(Extreme::Largest, n, i, lambda1, p)
}

pub fn aug_entry_smallest(n: usize, i: usize, lambda_k: f64, p: &ModelParams) -> Result<ScaledEntry> {
    aug_entry(Extreme::Smallest, n, i, lambda_k, p)
}

/// Kernel values for every pair of powers `r != s` in `0..K` at one point.
/// Entries depend on `n` only through the powers, so one table serves all
/// `K` expansion terms.
struct KernelTable {
    which: Extreme,
    k: usize,
    core: Vec<f64>,
    aug: Vec<f64>,
    row_scale: Vec<f64>,
}

impl KernelTable {
    fn build(which: Extreme, lambda: f64, p: &ModelParams, spec: &QuadSpec, needed: Option<&[usize]>) -> Result<Self> {
        let k = p.k();
        let edge = lambda / (2.0 * p.rho());
        let shapes: Vec<f64> = (0..k).map(|r| p.gamma_shape(r)).collect();
        let wanted = |r: usize| needed.is_none_or(|rows| rows.contains(&r));
        let mut core = vec![0.0; k * k];
        for r in 0..k {
            for s in 0..r {
                if !(wanted(r) && wanted(s)) {
                    continue;
                }
                let v = kernel_core(which, shapes[r], shapes[s], edge, spec)?;
                core[r * k + s] = v;
                core[s * k + r] = -v;
            }
        }
        let aug = shapes.iter().map(|&a| aug_core(which, a, edge)).collect::<Result<Vec<_>>>()?;
        let row_scale = shapes.iter().map(|&a| row_log_scale(a, p)).collect::<Result<Vec<_>>>()?;
        Ok(Self { which, k, core, aug, row_scale })
    }

    fn assemble(&self, n: usize, augmentation: Augmentation) -> Result<SkewMatrix> {
        let k = self.k;
        let rows = kernel_rows(n, k)?;
        let base = rows.len();
        let log_rows: f64 = rows.iter().map(|&r| self.row_scale[r]).sum();
        let kernel = |i: usize, j: usize| self.core[rows[i] * k + rows[j]];
        let m = if base % 2 == 0 {
            SkewMatrix::from_upper(base, Self::spread(log_rows, base), kernel)?
        } else {
            match augmentation {
                Augmentation::SingleColumn => {
                    SkewMatrix::from_upper(base + 1, Self::spread(log_rows, base + 1), |i, j| {
                        if j < base {
                            kernel(i, j)
                        } else {
                            self.aug[rows[i]]
                        }
                    })?
                }
                Augmentation::TwoRowOnes => {
                    SkewMatrix::from_upper(base + 2, Self::spread(log_rows, base + 2), |i, j| {
                        if j < base {
                            kernel(i, j)
                        } else if j == base {
                            if i < base {
                                // unit entry, with the row factor divided back out
                                (-self.row_scale[rows[i]]).exp()
                            } else {
                                0.0
                            }
                        } else if i < base {
                            self.aug[rows[i]]
                        } else {
                            0.0
                        }
                    })?
                }
            }
        };
        let _ = self.which;
        Ok(m)
    }

    /// Per-entry share of the row factors: `Pf(e^s A) = e^{s order/2} Pf(A)`.
    fn spread(log_rows: f64, order: usize) -> f64 {
        if order == 0 {
            0.0
        } else {
            2.0 * log_rows / order as f64
        }
    }
}

/// Skew-symmetric kernel matrix `B_n` (largest) or `D_n` (smallest).
pub fn assemble_skew(
    which: Extreme,
    n: usize,
    lambda: f64,
    p: &ModelParams,
    spec: &QuadSpec,
    augmentation: Augmentation,
) -> Result<SkewMatrix> {
    p.require_full_rank()?;
    check_lambda(lambda)?;
    let rows = kernel_rows(n, p.k())?;
    let table = KernelTable::build(which, lambda, p, spec, Some(&rows))?;
    table.assemble(n, augmentation)
}

pub fn assemble_skew_largest(n: usize, lambda1: f64, p: &ModelParams, spec: &QuadSpec) -> Result<SkewMatrix> {
    assemble_skew(Extreme::Largest, n, lambda1, p, spec, Augmentation::default())
}

pub fn assemble_skew_smallest(n: usize, lambda_k: f64, p: &ModelParams, spec: &QuadSpec) -> Result<SkewMatrix> {
    assemble_skew(Extreme::Smallest, n, lambda_k, p, spec, Augmentation::default())
}

/// Density of the requested extreme eigenvalue at `lambda`, in signed-log form
/// (small negative values are quadrature noise).
pub fn pdf_signed(
    which: Extreme,
    lambda: f64,
    p: &ModelParams,
    spec: &QuadSpec,
    augmentation: Augmentation,
) -> Result<SignedLogValue> {
    p.require_full_rank()?;
    check_lambda(lambda)?;
    let k = p.k();
    if lambda.is_infinite() {
        return Ok(SignedLogValue::ZERO);
    }
    let prefactor = log_norm_constant(p)? * xi(lambda, p)?;
    if k == 1 {
        return Ok(prefactor);
    }
    if which == Extreme::Largest && lambda == 0.0 {
        // empty integration volume
        return Ok(SignedLogValue::ZERO);
    }
    if prefactor.is_zero() {
        return Ok(SignedLogValue::ZERO);
    }
    let table = KernelTable::build(which, lambda, p, spec, None)?;
    let mut terms = Vec::with_capacity(k);
    for n in 1..=k {
        let pf = pfaffian(&table.assemble(n, augmentation)?)?;
        let alternating = match which {
            Extreme::Largest => n + 1,
            Extreme::Smallest => n + k,
        };
        let sign = if alternating % 2 == 0 { 1 } else { -1 };
        let term = prefactor * power_ln(lambda, (k - n) as f64) * pf;
        terms.push(SignedLogValue::new(sign, 0.0) * term);
    }
    let total = SignedLogValue::sum(terms) * SignedLogValue::new(ordering_parity(k), 0.0);
    if !total.is_finite() {
        return Err(Error::Numerical(format!("{which} density at {lambda} is not finite")));
    }
    Ok(total)
}

/// Density as a plain float; a value outside the `f64` range is an error
/// (use [`pdf_signed`] for the log-domain value).
pub fn pdf(which: Extreme, lambda: f64, p: &ModelParams, spec: &QuadSpec) -> Result<f64> {
    let v = pdf_signed(which, lambda, p, spec, Augmentation::default())?;
    let x = v.to_f64();
    if !x.is_finite() {
        return Err(Error::Numerical(format!(
            "{which} density at {lambda} overflows f64 (ln|value| = {:.1})",
            v.log_mag()
        )));
    }
    Ok(x)
}

pub fn pdf_largest(lambda1: f64, p: &ModelParams, spec: &QuadSpec) -> Result<f64> {
    pdf(Extreme::Largest, lambda1, p, spec)
}

pub fn pdf_smallest(lambda_k: f64, p: &ModelParams, spec: &QuadSpec) -> Result<f64> {
    pdf(Extreme::Smallest, lambda_k, p, spec)
}

/// Density sampled on a grid with its trapezoidal cumulative distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub which: Extreme,
    pub params: ModelParams,
    pub grid: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    /// `false` where evaluation failed; those points carry `pdf = 0`.
    pub valid: Vec<bool>,
    pub warnings: Vec<String>,
}

/// Allowed overshoot of the cumulative distribution above 1.
pub const CDF_SLACK: f64 = 1e-3;

impl DensityCurve {
    pub fn cdf_final(&self) -> f64 {
        self.cdf.last().copied().unwrap_or(0.0)
    }

    /// Cumulative distribution at `x`, linear between grid points, 0 below
    /// the grid and `cdf_final` above it.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if g.is_empty() || x <= g[0] {
            return 0.0;
        }
        if x >= g[g.len() - 1] {
            return self.cdf_final();
        }
        let hi = g.partition_point(|&v| v <= x);
        let lo = hi - 1;
        let t = (x - g[lo]) / (g[hi] - g[lo]);
        self.cdf[lo] + t * (self.cdf[hi] - self.cdf[lo])
    }

    /// Density at `x`, linear between grid points and 0 outside.
    pub fn pdf_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if g.is_empty() || x < g[0] || x > g[g.len() - 1] {
            return 0.0;
        }
        let hi = g.partition_point(|&v| v <= x).min(g.len() - 1);
        if hi == 0 {
            return self.pdf[0];
        }
        let lo = hi - 1;
        let t = ((x - g[lo]) / (g[hi] - g[lo])).clamp(0.0, 1.0);
        self.pdf[lo] + t * (self.pdf[hi] - self.pdf[lo])
    }

    /// Checks the structural invariants (lengths, ordering, ranges).
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.grid.len();
        if n == 0 {
            return Err(Error::Structural("density curve has an empty grid".into()));
        }
        if self.pdf.len() != n || self.cdf.len() != n || self.valid.len() != n {
            return Err(Error::Structural("density curve columns differ in length".into()));
        }
        check_grid(&self.grid)?;
        if self.pdf.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Validation("density curve has negative or NaN pdf values".into()));
        }
        if self.cdf.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Validation("density curve cdf is decreasing".into()));
        }
        if self.cdf.iter().any(|v| !(*v >= 0.0 && *v <= 1.0 + CDF_SLACK)) {
            return Err(Error::Validation("density curve cdf leaves [0, 1]".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Structural("evaluation grid is empty".into()));
    }
    if !(grid[0] >= 0.0) || grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("evaluation grid must be finite and start at a value >= 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation("evaluation grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Cumulative trapezoidal integral, starting at 0.
pub fn trapezoid_cumulative(grid: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    for i in 0..grid.len() {
        if i > 0 {
            acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Above this order the per-point quadrature tolerance is relaxed.
const RELAXED_TOL_ORDER: usize = 20;
const RELAXED_REL_TOL: f64 = 1e-8;
/// Normalization error that triggers a warning on the curve.
pub const NORMALIZATION_WARN: f64 = 1e-3;

/// Evaluates the density over `grid` (in parallel on the current rayon pool,
/// merged in grid order).
///
/// A failed point is kept with `pdf = 0`, flagged invalid and reported in
/// `warnings`. If the raw trapezoid integral comes out negative, the whole
/// curve is flipped: it is the one global sign the derivation leaves open.
pub fn evaluate_curve(which: Extreme, grid: &[f64], p: &ModelParams, spec: &QuadSpec) -> Result<DensityCurve> {
    p.require_full_rank()?;
    check_grid(grid)?;
    spec.validate()?;
    let spec = if p.k() > RELAXED_TOL_ORDER { spec.with_rel_tol(spec.rel_tol.max(RELAXED_REL_TOL)) } else { *spec };

    let raw: Vec<Result<f64>> = grid.par_iter().map(|&x| pdf(which, x, p, &spec)).collect();

    let mut warnings = Vec::new();
    let mut valid = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len());
    for (x, r) in grid.iter().zip(raw) {
        match r {
            Ok(v) => {
                valid.push(true);
                values.push(v);
            }
            Err(e) => {
                warnings.push(format!("evaluation failed at lambda={x}: {e}"));
                valid.push(false);
                values.push(0.0);
            }
        }
    }

    let total: f64 = trapezoid_cumulative(grid, &values).last().copied().unwrap_or(0.0);
    if total < 0.0 {
        warnings.push("raw curve integrates to a negative value; global sign flipped".into());
        values.iter_mut().for_each(|v| *v = -*v);
    }
    let peak = values.iter().cloned().fold(0.0_f64, f64::max);
    let lowest = values.iter().cloned().fold(0.0_f64, f64::min);
    if lowest < -1e-8 * peak {
        warnings.push(format!("pdf dips to {lowest:e} against a peak of {peak:e}; negative values clamped"));
    }
    let pdf: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let cdf = trapezoid_cumulative(grid, &pdf);
    let cdf_final = cdf.last().copied().unwrap_or(0.0);
    if (cdf_final - 1.0).abs() > NORMALIZATION_WARN {
        warnings.push(format!("normalization off: cdf ends at {cdf_final:.6}"));
    }
    for w in &warnings {
        log::warn!("{which} K={} M={}: {w}", p.k(), p.m());
    }

    Ok(DensityCurve { which, params: *p, grid: grid.to_vec(), pdf, cdf, valid, warnings })
}

/// Upper end `q` of an automatic grid: the chi-square envelope puts less than
/// `tail` probability beyond it.
///
/// Largest: `l_1 <= tr W` and `tr W / rho ~ chi2_{KM}`, tightened by the
/// Gaussian operator-norm bound `P(sqrt(l_1 / rho) > sqrt(M) + sqrt(K) + t) <= exp(-t^2 / 2)`.
/// Smallest: `l_K <= min_i W_ii` with independent `W_ii / rho ~ chi2_M`.
pub fn envelope_upper_bound(which: Extreme, p: &ModelParams, tail: f64) -> Result<f64> {
    if !(tail > 0.0 && tail < 1.0) {
        return Err(Error::Domain(format!("tail probability must lie in (0, 1), got {tail}")));
    }
    let chi = chi_square_envelope(which, p, tail)?;
    Ok(match which {
        Extreme::Largest => {
            let (k, m) = (p.k() as f64, p.m() as f64);
            let norm = m.sqrt() + k.sqrt() + (-2.0 * tail.ln()).sqrt();
            chi.min(p.rho() * norm * norm)
        }
        Extreme::Smallest => chi,
    })
}

fn chi_square_envelope(which: Extreme, p: &ModelParams, tail: f64) -> Result<f64> {
    let (k, m) = (p.k() as f64, p.m() as f64);
    let tail_at = |q: f64| -> Result<f64> {
        let u = q / (2.0 * p.rho());
        Ok(match which {
            Extreme::Largest => reg_gamma_pair(k * m / 2.0, u)?.1,
            Extreme::Smallest => reg_gamma_pair(m / 2.0, u)?.1.powf(k),
        })
    };
    let mut hi = 2.0 * p.rho() * (k * m).max(1.0);
    while tail_at(hi)? >= tail {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if tail_at(mid)? >= tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

pub const AUTO_GRID_TAIL: f64 = 1e-6;
pub const AUTO_GRID_POINTS: usize = 2001;

/// Grid on `[0, q]` with `q` from [`envelope_upper_bound`], graded as
/// `q t^2` for uniform `t`. The grading resolves the `sqrt(lambda)` onset at 0
/// (when `M - K = 2`), where a uniform trapezoid rule converges only like `h^1.5`.
pub fn auto_grid(which: Extreme, p: &ModelParams, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::Validation("a grid needs at least 2 points".into()));
    }
    let q = envelope_upper_bound(which, p, AUTO_GRID_TAIL)?;
    Ok(uniform_grid(0.0, 1.0, points).into_iter().map(|t| q * t * t).collect())
}

pub fn uniform_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    let step = (max - min) / (points - 1) as f64;
    (0..points).map(|i| if i + 1 == points { max } else { min + step * i as f64 }).collect()
}
