//! Terminal payoffs that are piecewise affine in the terminal deflator.
//!
//! Every optimal terminal wealth in this crate has the form
//! `X = a_k + b_k z` on `lo_k < z <= hi_k`, so wealth, exposure and moments
//! reduce to sums of lognormal partial moments.

use serde::{Deserialize, Serialize};

use crate::kernels::{exp_moment_between, std_normal_pdf, PartialMomentContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lo: f64,
    /// Unbounded last pieces are stored as `null` in serialized form.
    #[serde(with = "unbounded")]
    pub hi: f64,
    pub a: f64,
    pub b: f64,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Payoff {
    pieces: Vec<Piece>,
}

impl Payoff {
    pub fn new(pieces: Vec<Piece>) -> Self {
        let pieces = pieces.into_iter().filter(|p| p.hi > p.lo).collect();
        Self { pieces }
    }

    pub fn constant(level: f64) -> Self {
        Self::new(vec![Piece {
            lo: 0.0,
            hi: f64::INFINITY,
            a: level,
            b: 0.0,
        }])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Finite interior thresholds, in increasing order.
    pub fn kinks(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| [p.lo, p.hi])
            .filter(|c| *c > 0.0 && c.is_finite())
            .collect();
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    pub fn value(&self, z: f64) -> f64 {
        self.pieces
            .iter()
            .find(|p| p.lo < z && z <= p.hi)
            .map_or(0.0, |p| p.a + p.b * z)
    }

    /// `E[z(T)^p X]` for `p` in {0, 1}.
    pub fn moment(&self, ctx: &PartialMomentContext, p: f64) -> f64 {
        self.pieces
            .iter()
            .map(|pc| {
                let mut v = 0.0;
                if pc.a != 0.0 {
                    v += pc.a * ctx.h_between(p, pc.lo, pc.hi);
                }
                if pc.b != 0.0 {
                    v += pc.b * ctx.h_between(p + 1.0, pc.lo, pc.hi);
                }
                v
            })
            .sum()
    }

    pub fn mean(&self, ctx: &PartialMomentContext) -> f64 {
        self.moment(ctx, 0.0)
    }

    /// `E[z(T) X]`, the initial cost of the payoff.
    pub fn cost(&self, ctx: &PartialMomentContext) -> f64 {
        self.moment(ctx, 1.0)
    }

    pub fn second_moment(&self, ctx: &PartialMomentContext) -> f64 {
        self.pieces
            .iter()
            .map(|p| {
                p.a * p.a * ctx.h_between(0.0, p.lo, p.hi)
                    + 2.0 * p.a * p.b * ctx.h_between(1.0, p.lo, p.hi)
                    + p.b * p.b * ctx.h_between(2.0, p.lo, p.hi)
            })
            .sum()
    }

    /// Probability that `X` equals `level` on a flat piece.
    pub fn mass_at(&self, ctx: &PartialMomentContext, level: f64) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.b == 0.0 && p.a == level)
            .map(|p| ctx.h_between(0.0, p.lo, p.hi))
            .sum()
    }

    /// `E[(gamma - X)_+^q]`. Sloped pieces must lie entirely below `gamma`
    /// and are supported for `q` in {1, 2}.
    pub fn shortfall(&self, ctx: &PartialMomentContext, gamma: f64, q: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| {
                if p.b == 0.0 {
                    let gap = gamma - p.a;
                    if gap > 0.0 {
                        gap.powf(q) * ctx.h_between(0.0, p.lo, p.hi)
                    } else {
                        0.0
                    }
                } else {
                    let c = gamma - p.a;
                    let (h0, h1) = (
                        ctx.h_between(0.0, p.lo, p.hi),
                        ctx.h_between(1.0, p.lo, p.hi),
                    );
                    if q == 1.0 {
                        c * h0 - p.b * h1
                    } else {
                        let h2 = ctx.h_between(2.0, p.lo, p.hi);
                        c * c * h0 - 2.0 * c * p.b * h1 + p.b * p.b * h2
                    }
                }
            })
            .sum()
    }

    /// `x(t) = E[(z(T)/z(t)) X | z(t) = z]` where `ln(z(T)/z(t)) ~ N(m, nu^2)`.
    /// With `nu = 0` this is the deterministic limit `e^m X(z e^m)`.
    pub fn wealth(&self, m: f64, nu: f64, z: f64) -> f64 {
        if nu <= 0.0 {
            let g = m.exp();
            return g * self.value(z * g);
        }
        let lz = z.ln();
        self.pieces
            .iter()
            .map(|p| {
                let (lo, hi) = (p.lo.ln() - lz, p.hi.ln() - lz);
                let mut v = 0.0;
                if p.a != 0.0 {
                    v += p.a * exp_moment_between(1.0, m, nu, lo, hi);
                }
                if p.b != 0.0 {
                    v += p.b * z * exp_moment_between(2.0, m, nu, lo, hi);
                }
                v
            })
            .sum()
    }

    /// `-z ∂x/∂z`, the scalar that multiplies `(sigma sigma')^{-1} b` in the policy.
    pub fn exposure(&self, m: f64, nu: f64, z: f64) -> f64 {
        if nu <= 0.0 {
            return 0.0;
        }
        let lz = z.ln();
        let kappa = |c: f64| (c.ln() - lz - m) / nu;
        let e1 = (m + 0.5 * nu * nu).exp();
        let e2 = (2.0 * m + 2.0 * nu * nu).exp();
        self.pieces
            .iter()
            .map(|p| {
                let (klo, khi) = (kappa(p.lo), kappa(p.hi));
                let mut s = 0.0;
                if p.a != 0.0 {
                    s += p.a * e1 / nu * (std_normal_pdf(khi - nu) - std_normal_pdf(klo - nu));
                }
                if p.b != 0.0 {
                    let level = exp_moment_between(2.0, m, nu, p.lo.ln() - lz, p.hi.ln() - lz);
                    let edge =
                        e2 / nu * (std_normal_pdf(khi - 2.0 * nu) - std_normal_pdf(klo - 2.0 * nu));
                    s += p.b * z * (edge - level);
                }
                s
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PartialMomentContext {
        PartialMomentContext::new(-0.14, 0.4).unwrap()
    }

    fn two_piece() -> Payoff {
        Payoff::new(vec![
            Piece {
                lo: 0.0,
                hi: 0.4,
                a: 10.0,
                b: 0.0,
            },
            Piece {
                lo: 0.4,
                hi: 3.0,
                a: 1.5,
                b: -0.5,
            },
        ])
    }

    #[test]
    fn value_is_piecewise() {
        let p = two_piece();
        assert_eq!(p.value(0.1), 10.0);
        assert!((p.value(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(p.value(5.0), 0.0);
        assert_eq!(p.kinks(), vec![0.4, 3.0]);
    }

    #[test]
    fn wealth_at_time_zero_is_cost() {
        let c = ctx();
        let p = two_piece();
        assert!((p.wealth(c.m0, c.nu0, 1.0) - p.cost(&c)).abs() < 1e-14);
    }

    #[test]
    fn exposure_matches_finite_difference() {
        let p = two_piece();
        for &z in &[0.3, 0.8, 1.0, 1.7, 4.0] {
            let h = 1e-5 * z;
            let dx = (p.wealth(-0.07, 0.28, z + h) - p.wealth(-0.07, 0.28, z - h)) / (2.0 * h);
            let s = p.exposure(-0.07, 0.28, z);
            assert!((s + z * dx).abs() < 1e-8 * s.abs().max(1.0), "z={z}");
        }
    }

    #[test]
    fn deterministic_limit() {
        let p = two_piece();
        assert_eq!(p.wealth(0.0, 0.0, 0.2), 10.0);
        assert_eq!(p.exposure(0.0, 0.0, 0.2), 0.0);
    }

    #[test]
    fn constant_payoff_is_a_bond() {
        let c = ctx();
        let p = Payoff::constant(2.0);
        assert!((p.cost(&c) - 2.0 * c.mean()).abs() < 1e-15);
        assert!((p.second_moment(&c) - 4.0).abs() < 1e-15);
        assert_eq!(p.mass_at(&c, 2.0), 1.0);
        assert_eq!(p.shortfall(&c, 1.0, 2.0), 0.0);
        assert_eq!(p.shortfall(&c, 3.0, 0.0), 1.0);
    }
}
