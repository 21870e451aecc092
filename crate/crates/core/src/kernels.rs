//! Normal distribution primitives and lognormal partial moments of the
//! terminal deflator.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

use crate::solvers::{expand_bracket, find_root_1d, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("argument {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },
    #[error("target {target} outside (0, {sup})")]
    TargetOutOfRange { target: f64, sup: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `P(a < Z <= b)` without cancellation when both ends sit in the upper tail.
pub fn std_normal_interval(a: f64, b: f64) -> f64 {
    if b <= a {
        0.0
    } else if a > 0.0 {
        std_normal_cdf(-a) - std_normal_cdf(-b)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    }
}

/// Inverse of [`std_normal_cdf`]: rational starting point refined by two
/// Halley steps against the erfc-based CDF.
#[allow(clippy::excessive_precision)]
pub fn std_normal_quantile(p: f64) -> Result<f64, KernelError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(KernelError::Domain {
            what: "std_normal_quantile",
            value: p,
        });
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    let p_low = 0.02425;
    let mut x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    for _ in 0..2 {
        // work in the smaller tail to keep the residual relative
        let e = if x > 0.0 {
            (1.0 - p) - std_normal_cdf(-x)
        } else {
            std_normal_cdf(x) - p
        };
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    Ok(x)
}

/// `E[exp(aY) 1{Y <= dcut}]` for `Y ~ N(mu, v^2)`.
pub fn truncated_exp_moment(a: f64, mu: f64, v: f64, dcut: f64) -> f64 {
    if v <= 0.0 {
        return if mu <= dcut { (a * mu).exp() } else { 0.0 };
    }
    let scale = (a * mu + 0.5 * a * a * v * v).exp();
    if dcut == f64::INFINITY {
        return scale;
    }
    scale * std_normal_cdf((dcut - mu) / v - a * v)
}

/// `E[exp(aY) 1{lo < Y <= hi}]`, accurate when both cuts sit in one tail.
pub fn exp_moment_between(a: f64, mu: f64, v: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if v <= 0.0 {
        return if lo < mu && mu <= hi {
            (a * mu).exp()
        } else {
            0.0
        };
    }
    let scale = (a * mu + 0.5 * a * a * v * v).exp();
    let shift = |c: f64| (c - mu) / v - a * v;
    scale * std_normal_interval(shift(lo), shift(hi))
}

/// Distribution of `ln z(T)` as `N(m0, nu0^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialMomentContext {
    pub m0: f64,
    pub nu0: f64,
}

impl PartialMomentContext {
    pub fn new(m0: f64, nu0: f64) -> Result<Self, KernelError> {
        if !(nu0 > 0.0) || !nu0.is_finite() || !m0.is_finite() {
            return Err(KernelError::Domain {
                what: "PartialMomentContext::nu0",
                value: nu0,
            });
        }
        Ok(Self { m0, nu0 })
    }

    /// `E[z(T)]`.
    pub fn mean(&self) -> f64 {
        (self.m0 + 0.5 * self.nu0 * self.nu0).exp()
    }

    /// `H_p` at `ln y`; accepts `-inf` and `+inf`.
    pub fn h_log(&self, p: f64, log_y: f64) -> f64 {
        if log_y == f64::NEG_INFINITY {
            return 0.0;
        }
        truncated_exp_moment(p, self.m0, self.nu0, log_y)
    }

    /// `H_p(hi) - H_p(lo)` for `0 <= lo <= hi <= inf`.
    pub fn h_between(&self, p: f64, lo: f64, hi: f64) -> f64 {
        exp_moment_between(p, self.m0, self.nu0, lo.ln(), hi.ln())
    }

    fn positive(y: f64, what: &'static str) -> Result<(), KernelError> {
        if y > 0.0 {
            Ok(())
        } else {
            Err(KernelError::Domain { what, value: y })
        }
    }

    /// `H_p(y) = E[z(T)^p 1{z(T) <= y}]`.
    pub fn h(&self, p: f64, y: f64) -> Result<f64, KernelError> {
        Self::positive(y, "H_p")?;
        Ok(self.h_log(p, y.ln()))
    }

    /// `K_p(y) = H_1(y) - H_{p+1}(y) / y^p`.
    pub fn k(&self, p: f64, y: f64) -> Result<f64, KernelError> {
        Self::positive(y, "K_p")?;
        Ok(self.k_log(p, y.ln()))
    }

    /// `J_p(y) = H_0(y) - H_p(y) / y^p`.
    pub fn j(&self, p: f64, y: f64) -> Result<f64, KernelError> {
        Self::positive(y, "J_p")?;
        let l = y.ln();
        Ok(self.h_log(0.0, l) - self.h_log(p, l) * (-p * l).exp())
    }

    fn k_log(&self, p: f64, l: f64) -> f64 {
        if l == f64::INFINITY {
            return self.mean();
        }
        // H_{p+1}(y)/y^p folded into one exponent to avoid overflow
        let tail = exp_moment_between(p + 1.0, self.m0, self.nu0, f64::NEG_INFINITY, l);
        let scaled = if tail > 0.0 {
            (tail.ln() - p * l).exp()
        } else {
            0.0
        };
        self.h_log(1.0, l) - scaled
    }

    fn invert_monotone<F>(&self, target: f64, sup: f64, f: F) -> Result<f64, KernelError>
    where
        F: Fn(f64) -> f64,
    {
        if !(target > 0.0 && target < sup) {
            return Err(KernelError::TargetOutOfRange { target, sup });
        }
        let g = |l: f64| f(l) - target;
        let spread = 4.0 * self.nu0;
        let (lo, hi) = expand_bracket(g, self.m0 - spread, self.m0 + spread, 200)
            .ok_or(KernelError::TargetOutOfRange { target, sup })?;
        let r = find_root_1d(g, lo, hi, 1e-15)?;
        Ok(r.value().exp())
    }

    /// Solves `H_1(y) = target`.
    pub fn invert_h1(&self, target: f64) -> Result<f64, KernelError> {
        self.invert_monotone(target, self.mean(), |l| self.h_log(1.0, l))
    }

    /// Solves `K_p(y) = target`.
    pub fn invert_k(&self, p: f64, target: f64) -> Result<f64, KernelError> {
        if !(p > 0.0) {
            return Err(KernelError::Domain {
                what: "invert_k order",
                value: p,
            });
        }
        self.invert_monotone(target, self.mean(), |l| self.k_log(p, l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx1() -> PartialMomentContext {
        PartialMomentContext::new(-0.14, 0.4).unwrap()
    }

    #[test]
    fn cdf_and_quantile_symmetry() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!(std_normal_quantile(0.5).unwrap().abs() < 1e-15);
        // mpmath reference
        assert!((std_normal_cdf(-1.2467) - 0.1062537594177143).abs() < 1e-15);
    }

    #[test]
    fn quantile_round_trip() {
        for k in 1..2000 {
            let p = k as f64 / 2000.0;
            let x = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(x) - p).abs() < 1e-14 * p.max(1e-3), "p={p}");
        }
        for p in [1e-300, 1e-100, 1e-20, 1e-10] {
            let x = std_normal_quantile(p).unwrap();
            assert!(((std_normal_cdf(x) - p) / p).abs() < 1e-12);
            let y = std_normal_quantile(1.0 - p.max(1e-15)).unwrap();
            assert!(y > 0.0);
        }
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn truncated_moment_limits() {
        assert_eq!(truncated_exp_moment(0.0, 0.3, 0.7, f64::INFINITY), 1.0);
        assert!((truncated_exp_moment(1.0, 0.0, 1.0, f64::INFINITY) - 0.5f64.exp()).abs() < 1e-15);
        assert_eq!(truncated_exp_moment(2.0, 0.1, 0.0, 0.0), 0.0);
        assert!((truncated_exp_moment(2.0, 0.1, 0.0, 0.2) - 0.2f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn h_limits() {
        let c = ctx1();
        assert_eq!(c.h(0.0, f64::INFINITY).unwrap(), 1.0);
        assert!((c.h(1.0, f64::INFINITY).unwrap() - (-0.06f64).exp()).abs() < 1e-15);
        assert!(c.h(1.0, 0.0).is_err());
        assert!(c.h(1.0, -2.0).is_err());
        assert!((c.k(1.0, 1e12).unwrap() - c.mean()).abs() < 1e-9);
    }

    #[test]
    fn partial_moments_are_nondecreasing() {
        let c = ctx1();
        let mut s = 7u64;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for _ in 0..1000 {
            let y1 = (c.m0 + c.nu0 * (8.0 * next() - 4.0)).exp();
            let y2 = y1 * (1.0 + next());
            for p in [0.0, 1.0, 2.0] {
                assert!(c.h(p, y2).unwrap() >= c.h(p, y1).unwrap());
            }
            assert!(c.k(1.0, y2).unwrap() >= c.k(1.0, y1).unwrap() - 1e-16);
            assert!(c.j(1.0, y2).unwrap() >= c.j(1.0, y1).unwrap() - 1e-16);
        }
    }

    #[test]
    fn inversions_round_trip() {
        let c = ctx1();
        for k in 0..=80 {
            let y = (c.m0 + c.nu0 * (-4.0 + 0.1 * k as f64)).exp();
            let back = c.invert_h1(c.h(1.0, y).unwrap()).unwrap();
            assert!((back / y - 1.0).abs() < 1e-9, "y={y} back={back}");
        }
        let target = c.mean() / 2.0;
        let y = c.invert_k(1.0, target).unwrap();
        assert!((c.k(1.0, y).unwrap() - target).abs() < 1e-10);
        assert!(matches!(
            c.invert_h1(1.0),
            Err(KernelError::TargetOutOfRange { .. })
        ));
        assert!(matches!(
            c.invert_k(1.0, 0.0),
            Err(KernelError::TargetOutOfRange { .. })
        ));
    }

    #[test]
    fn upper_bound_root_for_example_one() {
        let c = ctx1();
        let y = c.invert_h1(0.1).unwrap();
        let d_upper = 10.0 * c.h(0.0, y).unwrap();
        assert!((d_upper - 1.9847).abs() < 5e-4, "{d_upper}");
    }

    #[test]
    fn interval_matches_difference() {
        for (a, b) in [(-1.0, 0.5), (0.2, 3.0), (6.0, 9.0), (-9.0, -6.0)] {
            let direct = std_normal_cdf(b) - std_normal_cdf(a);
            assert!((std_normal_interval(a, b) - direct).abs() < 1e-15);
        }
        assert!(std_normal_interval(9.0, 10.0) > 0.0);
    }
}
