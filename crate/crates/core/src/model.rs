//! Model parameters and the joint eigenvalue density of a real Wishart matrix
//! `W = A^T A`, with `A` an `M x K` matrix of i.i.d. `N(0, rho)` entries.
//!
//! For ordered eigenvalues `l_1 > ... > l_K >= 0` the density is
//! `c * V(l) * prod xi(l_i)` with `V` the Vandermonde product and
//! `xi(l) = l^{(M-K-1)/2} exp(-l / 2rho)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signed_log::SignedLogValue;
use crate::special::log_multivariate_gamma;

/// Dimensions and scale of the Wishart model (`Sigma = rho * I_K`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: usize,
    rho: f64,
}

impl ModelParams {
    /// Full-rank model: `1 <= K < M`, `rho > 0`.
    pub fn new(k: usize, m: usize, rho: f64) -> Result<Self> {
        let p = Self::for_sampling(k, m, rho)?;
        p.require_full_rank()?;
        Ok(p)
    }

    /// Parameters accepted by the Monte Carlo sampler, which also handles the
    /// rank-deficient case `M <= K`.
    pub fn for_sampling(k: usize, m: usize, rho: f64) -> Result<Self> {
        if k == 0 || m == 0 {
            return Err(Error::Validation(format!("K and M must be at least 1 (K={k}, M={m})")));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Validation(format!("rho must be positive and finite, got {rho}")));
        }
        Ok(Self { k, m, rho })
    }

    pub fn require_full_rank(&self) -> Result<()> {
        if self.k >= self.m {
            return Err(Error::Validation(format!("the model requires K < M (got K={}, M={})", self.k, self.m)));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Exponent `(M - K - 1) / 2` of the weight function.
    pub fn weight_exponent(&self) -> f64 {
        (self.m as f64 - self.k as f64 - 1.0) / 2.0
    }

    /// Gamma shape `r + (M - K + 1) / 2` attached to the kernel power `r`.
    pub fn gamma_shape(&self, r: usize) -> f64 {
        r as f64 + (self.m as f64 - self.k as f64 + 1.0) / 2.0
    }
}

/// Normalization constant `c = pi^{K^2/2} (2 rho)^{-KM/2} / (Gamma_K(M/2) Gamma_K(K/2))`.
pub fn log_norm_constant(p: &ModelParams) -> Result<SignedLogValue> {
    p.require_full_rank()?;
    let (k, m) = (p.k as f64, p.m as f64);
    let log_c = k * k / 2.0 * PI.ln()
        - k * m / 2.0 * (2.0 * p.rho).ln()
        - log_multivariate_gamma(p.k, m / 2.0)?
        - log_multivariate_gamma(p.k, k / 2.0)?;
    Ok(SignedLogValue::from_ln(log_c))
}

fn check_point(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("eigenvalue must be >= 0, got {lambda}")));
    }
    Ok(())
}

/// `lambda^power` with `0^0 = 1`.
pub(crate) fn power_ln(lambda: f64, power: f64) -> SignedLogValue {
    if power == 0.0 {
        SignedLogValue::ONE
    } else if lambda == 0.0 {
        SignedLogValue::ZERO
    } else {
        SignedLogValue::from_ln(power * lambda.ln())
    }
}

/// Weight `xi(lambda) = lambda^{(M-K-1)/2} exp(-lambda / 2rho)`.
pub fn xi(lambda: f64, p: &ModelParams) -> Result<SignedLogValue> {
    check_point(lambda)?;
    if lambda.is_infinite() {
        return Ok(SignedLogValue::ZERO);
    }
    Ok(power_ln(lambda, p.weight_exponent()).scale_ln(-lambda / (2.0 * p.rho)))
}

/// Power attached to kernel row `i` once column `n` of the Vandermonde matrix
/// has been removed (1-based indices).
pub fn exponent_r(n: usize, i: usize, k: usize) -> Result<usize> {
    if n < 1 || n > k || i < 1 || i + 1 > k {
        return Err(Error::Validation(format!(
            "kernel index out of range: n={n} (1..={k}), i={i} (1..={})",
            k.saturating_sub(1)
        )));
    }
    Ok(if i < n { k - i } else { k - 1 - i })
}

/// Index of the expansion term `n` and the kernel row `i`, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelIndex {
    n: usize,
    i: usize,
    r: usize,
}

impl KernelIndex {
    pub fn new(n: usize, i: usize, k: usize) -> Result<Self> {
        let r = exponent_r(n, i, k)?;
        Ok(Self { n, i, r })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn r(&self) -> usize {
        self.r
    }
}

/// Kernel function `theta(lambda) = lambda^{r_{n,i}} xi(lambda)`.
pub fn theta(idx: KernelIndex, lambda: f64, p: &ModelParams) -> Result<SignedLogValue> {
    let w = xi(lambda, p)?;
    if idx.r == 0 {
        return Ok(w);
    }
    Ok(power_ln(lambda, idx.r as f64) * w)
}

/// `prod_{i<j} (l_i - l_j)`.
pub fn vandermonde_det(lambdas: &[f64]) -> f64 {
    let mut prod = 1.0;
    for i in 0..lambdas.len() {
        for j in (i + 1)..lambdas.len() {
            prod *= lambdas[i] - lambdas[j];
        }
    }
    prod
}

/// Joint density of the ordered eigenvalues. Input must be strictly
/// descending and nonnegative; permutations are rejected, not symmetrized.
pub fn joint_density(lambdas: &[f64], p: &ModelParams) -> Result<f64> {
    if lambdas.len() != p.k {
        return Err(Error::Validation(format!("expected {} eigenvalues, got {}", p.k, lambdas.len())));
    }
    if lambdas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Validation("eigenvalues must be strictly descending".into()));
    }
    let mut acc = log_norm_constant(p)?;
    for (i, &li) in lambdas.iter().enumerate() {
        acc = acc * xi(li, p)?;
        for &lj in &lambdas[i + 1..] {
            acc = acc.scale_ln((li - lj).ln());
        }
    }
    Ok(acc.to_f64())
}
