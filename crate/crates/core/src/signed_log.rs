//! Signed values stored as `sign * exp(log_mag)`.
//!
//! Normalization constants, Pfaffians and gamma products at realistic `(K, M)`
//! overflow `f64` long before the final density does, so they travel in this
//! form and are exponentiated once at the end.

use std::cmp::Ordering;
use std::ops::{Add, Mul, Neg};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLogValue {
    sign: i8,
    log_mag: f64,
}

impl SignedLogValue {
    pub const ZERO: Self = Self { sign: 0, log_mag: 0.0 };
    pub const ONE: Self = Self { sign: 1, log_mag: 0.0 };

    /// Builds a value from a sign and log-magnitude. A zero sign canonicalizes
    /// the magnitude to 0, as does a log-magnitude of `-inf`.
    pub fn new(sign: i8, log_mag: f64) -> Self {
        let sign = sign.signum();
        if sign == 0 || log_mag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self { sign, log_mag }
        }
    }

    /// Positive value with the given natural log.
    pub fn from_ln(log_mag: f64) -> Self {
        Self::new(1, log_mag)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else if x > 0.0 {
            Self::new(1, x.ln())
        } else {
            Self::new(-1, (-x).ln())
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn log_mag(&self) -> f64 {
        self.log_mag
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn is_finite(&self) -> bool {
        self.sign == 0 || self.log_mag.is_finite()
    }

    pub fn to_f64(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_mag.exp(),
        }
    }

    /// Multiplies by `exp(delta)`.
    pub fn scale_ln(self, delta: f64) -> Self {
        if self.is_zero() {
            self
        } else {
            Self::new(self.sign, self.log_mag + delta)
        }
    }

    pub fn abs(self) -> Self {
        Self::new(self.sign.abs(), self.log_mag)
    }

    /// Sum of many values, anchored at the largest magnitude so that
    /// intermediate exponentials stay in range.
    pub fn sum<I: IntoIterator<Item = Self>>(values: I) -> Self {
        let terms: Vec<Self> = values.into_iter().filter(|v| !v.is_zero()).collect();
        let Some(anchor) = terms.iter().map(|t| t.log_mag).max_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
        else {
            return Self::ZERO;
        };
        if !anchor.is_finite() {
            return Self::new(1, anchor);
        }
        let mut acc = 0.0_f64;
        let mut comp = 0.0_f64;
        for t in &terms {
            // Neumaier summation
            let x = f64::from(t.sign) * (t.log_mag - anchor).exp();
            let s = acc + x;
            if acc.abs() >= x.abs() {
                comp += (acc - s) + x;
            } else {
                comp += (x - s) + acc;
            }
            acc = s;
        }
        Self::from_f64(acc + comp).scale_ln(anchor)
    }
}

impl Add for SignedLogValue {
    type Output = Self;

    /// Signed log-sum-exp of two values.
    fn add(self, other: Self) -> Self {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.log_mag >= other.log_mag { (self, other) } else { (other, self) };
        let ratio = (small.log_mag - big.log_mag).exp();
        if big.sign == small.sign {
            Self::new(big.sign, big.log_mag + ratio.ln_1p())
        } else if ratio == 1.0 {
            Self::ZERO
        } else {
            Self::new(big.sign, big.log_mag + (-ratio).ln_1p())
        }
    }
}

impl Mul for SignedLogValue {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            Self::ZERO
        } else {
            Self::new(self.sign * rhs.sign, self.log_mag + rhs.log_mag)
        }
    }
}

impl Neg for SignedLogValue {
    type Output = Self;

    fn neg(self) -> Self {
        Self::new(-self.sign, self.log_mag)
    }
}
