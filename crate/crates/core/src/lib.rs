//! Exact densities of the largest and smallest eigenvalues of real Wishart
//! matrices with `Sigma = rho * I`, computed as alternating sums of Pfaffians
//! of skew-symmetric kernel matrices, plus the Monte Carlo and brute-force
//! machinery used to check them.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod cli;
pub mod error;
pub mod extreme;
pub mod model;
pub mod pfaffian;
pub mod quadrature;
pub mod signed_log;
pub mod special;
pub mod validation;

pub use error::{Error, Result};
pub use extreme::{DensityCurve, Extreme};
pub use model::{KernelIndex, ModelParams};
pub use pfaffian::{pfaffian, SkewMatrix};
pub use quadrature::{QuadResult, QuadSpec};
pub use signed_log::SignedLogValue;
pub use validation::{brute_force_pdf, ks_statistic, sample_extreme_eigs, EmpiricalSample, KsOutcome};
