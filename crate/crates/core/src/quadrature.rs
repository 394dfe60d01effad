//! Adaptive Gauss-Kronrod (7/15) quadrature on finite and semi-infinite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-14, max_subdivisions: 2000 }
    }
}

impl QuadSpec {
    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::Validation(format!(
                "quadrature tolerances must be positive (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Validation("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }
}

/// Integral estimate with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub err_est: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

fn gauss_kronrod_15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { a, b, value, err }
}

/// Integral of `f` over `[a, b]`. Endpoints are never evaluated, so integrable
/// power singularities at either end are handled by bisection.
pub fn integrate_finite<F>(mut f: F, a: f64, b: f64, spec: &QuadSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    spec.validate()?;
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!("integration interval [{a}, {b}] is not a finite ordered range")));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, err_est: 0.0 });
    }

    let first = gauss_kronrod_15(&mut f, a, b);
    let mut total = first.value;
    let mut total_err = first.err;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 1;

    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Numerical(format!("integrand produced non-finite values on [{a}, {b}]")));
        }
        if total_err <= (spec.rel_tol * total.abs()).max(spec.abs_tol) {
            break;
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::Tolerance { value: total, err_est: total_err });
        }
        let worst = heap.pop().expect("heap holds every live segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine resolution
            return Err(Error::Tolerance { value: total, err_est: total_err });
        }
        let left = gauss_kronrod_15(&mut f, worst.a, mid);
        let right = gauss_kronrod_15(&mut f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
    }

    // re-sum to shed drift from the incremental updates
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let err_est: f64 = heap.iter().map(|s| s.err).sum();
    Ok(QuadResult { value, err_est })
}

/// Integral of `f` over `[a, inf)` through the map `x = a + t / (1 - t)`.
pub fn integrate_semi_infinite<F>(mut f: F, a: f64, spec: &QuadSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    if !a.is_finite() {
        return Err(Error::Domain(format!("semi-infinite lower limit must be finite, got {a}")));
    }
    integrate_finite(
        |t| {
            let s = 1.0 - t;
            let fx = f(a + t / s);
            if fx == 0.0 {
                0.0
            } else {
                fx / (s * s)
            }
        },
        0.0,
        1.0,
        spec,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{log_gamma, reg_lower_gamma, reg_upper_gamma};

    fn spec() -> QuadSpec {
        QuadSpec::default()
    }

    #[test]
    fn polynomial() {
        let r = integrate_finite(|x| x, 0.0, 1.0, &spec()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inverse_sqrt_endpoint_singularity() {
        let r = integrate_finite(|x| 1.0 / x.sqrt(), 0.0, 1.0, &spec()).unwrap();
        assert!((r.value - 2.0).abs() <= 2e-10, "{r:?}");
        assert!(r.err_est >= (r.value - 2.0).abs());
    }

    #[test]
    fn lower_gamma_kernel() {
        let r = integrate_finite(|x: f64| x.powf(1.5) * (-x).exp(), 0.0, 5.0, &spec()).unwrap();
        let want = (log_gamma(2.5).unwrap()).exp() * reg_lower_gamma(2.5, 5.0).unwrap();
        assert!((r.value - want).abs() <= 1e-10 * want);
    }

    #[test]
    fn exponential_tails() {
        let r = integrate_semi_infinite(|x: f64| (-x).exp(), 0.0, &spec()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let r = integrate_semi_infinite(|x: f64| (-x).exp(), 2.0, &spec()).unwrap();
        assert!((r.value - (-2f64).exp()).abs() < 1e-12 * (-2f64).exp());
    }

    #[test]
    fn upper_gamma_kernel() {
        let r = integrate_semi_infinite(|x: f64| x * x * (-x / 2.0).exp(), 1.0, &spec()).unwrap();
        let want = 8.0 * 2.0 * reg_upper_gamma(3.0, 0.5).unwrap();
        assert!((r.value - want).abs() <= 1e-10 * want);
        assert!((want - 15.769_797_152_528_469).abs() < 1e-12);
    }

    #[test]
    fn degenerate_interval() {
        let r = integrate_finite(|x| x, 3.0, 3.0, &spec()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(matches!(integrate_finite(|x| x, 1.0, 0.0, &spec()), Err(Error::Domain(_))));
    }

    #[test]
    fn non_convergence_carries_estimate() {
        let tight = QuadSpec { max_subdivisions: 3, ..spec() };
        match integrate_finite(|x: f64| (1.0 / x).sin() / x.sqrt(), 0.0, 1.0, &tight) {
            Err(Error::Tolerance { value, err_est }) => {
                assert!(value.is_finite() && err_est > 0.0);
            }
            other => panic!("expected tolerance failure, got {other:?}"),
        }
    }

    #[test]
    fn invalid_spec_rejected() {
        let bad = QuadSpec { rel_tol: 0.0, ..spec() };
        assert!(matches!(integrate_finite(|x| x, 0.0, 1.0, &bad), Err(Error::Validation(_))));
        let bad = QuadSpec { max_subdivisions: 0, ..spec() };
        assert!(matches!(integrate_finite(|x| x, 0.0, 1.0, &bad), Err(Error::Validation(_))));
    }

    #[test]
    fn additivity() {
        let f = |x: f64| x.sin() * (-0.3 * x).exp() + x * x;
        let whole = integrate_finite(f, 0.0, 7.0, &spec()).unwrap();
        let left = integrate_finite(f, 0.0, 2.5, &spec()).unwrap();
        let right = integrate_finite(f, 2.5, 7.0, &spec()).unwrap();
        let slack = whole.err_est + left.err_est + right.err_est;
        assert!((left.value + right.value - whole.value).abs() <= slack.max(1e-12 * whole.value.abs()));
    }

    #[test]
    fn linearity() {
        let f = |x: f64| x.powf(2.5) * (-x).exp();
        let base = integrate_semi_infinite(f, 0.3, &spec()).unwrap().value;
        for alpha in [-3.0, 0.01, 1e6] {
            let scaled = integrate_semi_infinite(|x| alpha * f(x), 0.3, &spec()).unwrap().value;
            assert!((scaled - alpha * base).abs() <= 1e-12 * (alpha * base).abs());
        }
    }

    #[test]
    fn error_estimate_is_conservative() {
        type Case = (fn(f64) -> f64, f64, f64, f64);
        let cases: [Case; 6] = [
            (|x| x.exp(), 0.0, 1.0, std::f64::consts::E - 1.0),
            (|x| x.cos(), 0.0, 10.0, 10f64.sin()),
            (|x| 1.0 / (1.0 + x * x), -4.0, 4.0, 2.0 * 4f64.atan()),
            (|x| x.sqrt(), 0.0, 2.0, 2.0 / 3.0 * 2f64.powf(1.5)),
            (|x| x.ln(), 0.0, 1.0, -1.0),
            (|x| (-(x * x)).exp(), -3.0, 3.0, 1.772_414_696_519_042),
        ];
        for (f, a, b, want) in cases {
            let r = integrate_finite(f, a, b, &spec()).unwrap();
            assert!(r.err_est >= (r.value - want).abs(), "[{a},{b}]: {r:?} vs {want}");
        }
    }
}
