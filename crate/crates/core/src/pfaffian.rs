//! Dense skew-symmetric matrices and their signed Pfaffians.

use crate::error::{Error, Result};
use crate::signed_log::SignedLogValue;

/// Relative tolerance on `a[i][j] + a[j][i]` accepted at construction.
const SKEW_TOL: f64 = 1e-12;
/// Pivots below this magnitude (after equilibration) make the Pfaffian zero.
const PIVOT_THRESHOLD: f64 = 1e-300;
/// Row-magnitude spread that triggers equilibration before elimination.
const EQUILIBRATION_RATIO: f64 = 1e8;

/// Square skew-symmetric matrix with a global scale factor `exp(log_scale)`
/// applied to every entry.
///
/// Odd orders can be built (they show up when assembling with a convention
/// that does not pair up rows) but have no Pfaffian; [`pfaffian`] rejects them.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    order: usize,
    entries: Vec<f64>,
    log_scale: f64,
}

impl SkewMatrix {
    /// Validates skew symmetry of a row-major `order x order` array.
    pub fn new(order: usize, entries: Vec<f64>, log_scale: f64) -> Result<Self> {
        if entries.len() != order * order {
            return Err(Error::Structural(format!(
                "expected {} entries for order {order}, got {}",
                order * order,
                entries.len()
            )));
        }
        if !log_scale.is_finite() {
            return Err(Error::Validation(format!("log_scale must be finite, got {log_scale}")));
        }
        for i in 0..order {
            let d = entries[i * order + i];
            if d != 0.0 {
                return Err(Error::Validation(format!("diagonal entry ({i},{i}) = {d} is not zero")));
            }
            for j in (i + 1)..order {
                let a = entries[i * order + j];
                let b = entries[j * order + i];
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::Validation(format!("non-finite entry at ({i},{j})")));
                }
                if (a + b).abs() > SKEW_TOL * a.abs().max(b.abs()) {
                    return Err(Error::Validation(format!(
                        "entries ({i},{j})={a} and ({j},{i})={b} are not antisymmetric"
                    )));
                }
            }
        }
        Ok(Self { order, entries, log_scale })
    }

    /// Builds the matrix from its strict upper triangle; the lower triangle is
    /// mirrored exactly.
    pub fn from_upper<F>(order: usize, log_scale: f64, mut upper: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let mut entries = vec![0.0; order * order];
        for i in 0..order {
            for j in (i + 1)..order {
                let v = upper(i, j);
                entries[i * order + j] = v;
                entries[j * order + i] = -v;
            }
        }
        Self::new(order, entries, log_scale)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    /// Row-major entries, without the global scale applied.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    fn row_max(&self) -> Vec<f64> {
        (0..self.order)
            .map(|i| self.entries[i * self.order..(i + 1) * self.order].iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .collect()
    }
}

/// Congruence `D A D` with `D = diag(d)`, compensated in `log_scale` so the
/// Pfaffian is unchanged (`Pf(DAD) = det(D) Pf(A)`).
pub fn congruence_scale(m: &SkewMatrix, d: &[f64]) -> Result<SkewMatrix> {
    let n = m.order;
    if d.len() != n {
        return Err(Error::Structural(format!("scale vector has length {}, matrix order {n}", d.len())));
    }
    if let Some(bad) = d.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("congruence scales must be positive and finite, got {bad}")));
    }
    let mut entries = m.entries.clone();
    for i in 0..n {
        for j in 0..n {
            // (a d_i) d_j stays bounded where d_i d_j alone can overflow
            entries[i * n + j] = entries[i * n + j] * d[i] * d[j];
        }
    }
    let log_scale = if n == 0 {
        m.log_scale
    } else {
        let log_det: f64 = d.iter().map(|v| v.ln()).sum();
        m.log_scale - 2.0 * log_det / n as f64
    };
    Ok(SkewMatrix { order: n, entries, log_scale })
}

/// Signed Pfaffian by skew Parlett-Reid elimination with partial pivoting.
///
/// The global `log_scale` contributes `(order/2) * log_scale` to the log-magnitude.
pub fn pfaffian(m: &SkewMatrix) -> Result<SignedLogValue> {
    let n = m.order;
    if n % 2 == 1 {
        return Err(Error::Structural(format!("Pfaffian of odd order {n} is not defined here")));
    }
    if n == 0 {
        return Ok(SignedLogValue::ONE);
    }

    let rows = m.row_max();
    if rows.contains(&0.0) {
        return Ok(SignedLogValue::ZERO);
    }
    let max_row = rows.iter().cloned().fold(0.0_f64, f64::max);
    let min_row = rows.iter().cloned().fold(f64::INFINITY, f64::min);
    let work = if max_row / min_row > EQUILIBRATION_RATIO { equilibrate(m)? } else { m.clone() };

    let mut a = work.entries.clone();
    let mut sign: i8 = 1;
    let mut log_mag = 0.0;
    let mut k = 0;
    while k + 1 < n {
        // largest entry in column k below the diagonal
        let mut kp = k + 1;
        let mut best = a[(k + 1) * n + k].abs();
        for i in (k + 2)..n {
            let v = a[i * n + k].abs();
            if v > best {
                best = v;
                kp = i;
            }
        }
        if kp != k + 1 {
            swap_row_col(&mut a, n, k + 1, kp);
            sign = -sign;
        }
        let pivot = a[k * n + k + 1];
        if !(pivot.abs() >= PIVOT_THRESHOLD) {
            if pivot.is_nan() {
                return Err(Error::Numerical("NaN pivot in Pfaffian elimination".into()));
            }
            return Ok(SignedLogValue::ZERO);
        }
        if pivot < 0.0 {
            sign = -sign;
        }
        log_mag += pivot.abs().ln();

        if k + 2 < n {
            let tau: Vec<f64> = ((k + 2)..n).map(|j| a[k * n + j] / pivot).collect();
            let col: Vec<f64> = ((k + 2)..n).map(|i| a[i * n + k + 1]).collect();
            for (ii, i) in ((k + 2)..n).enumerate() {
                for (jj, j) in ((k + 2)..n).enumerate() {
                    a[i * n + j] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }

    let value = SignedLogValue::new(sign, log_mag + (n / 2) as f64 * work.log_scale);
    if !value.is_finite() {
        return Err(Error::Numerical("Pfaffian magnitude is not finite".into()));
    }
    Ok(value)
}

fn swap_row_col(a: &mut [f64], n: usize, p: usize, q: usize) {
    for j in 0..n {
        a.swap(p * n + j, q * n + j);
    }
    for i in 0..n {
        a.swap(i * n + p, i * n + q);
    }
}

/// A few sweeps of symmetric row/column balancing towards unit row maxima.
fn equilibrate(m: &SkewMatrix) -> Result<SkewMatrix> {
    let mut current = m.clone();
    for _ in 0..3 {
        let d: Vec<f64> = current.row_max().iter().map(|r| 1.0 / r.sqrt()).collect();
        current = congruence_scale(&current, &d)?;
    }
    Ok(current)
}
