//! Deterministic market with piecewise-constant coefficients.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_EPS_ND: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("sigma sigma' has smallest eigenvalue {min_eig:e} < {eps:e} on segment {segment}")]
    DegenerateVolatility {
        segment: usize,
        min_eig: f64,
        eps: f64,
    },
    #[error("horizon must be positive, got {0}")]
    NonpositiveHorizon(f64),
    #[error("singular volatility matrix on segment {0}")]
    SingularVolatility(usize),
    #[error("invalid segment layout: {0}")]
    Segments(String),
    #[error("non-finite coefficient on segment {0}")]
    NonFinite(usize),
}

/// One constant-coefficient piece as it appears in a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSegment {
    pub t_start: f64,
    pub r: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMarket {
    pub horizon: f64,
    pub segments: Vec<RawSegment>,
}

impl RawMarket {
    /// Single segment covering `[0, horizon]`.
    pub fn constant(horizon: f64, r: f64, mu: Vec<f64>, sigma: Vec<Vec<f64>>) -> Self {
        Self {
            horizon,
            segments: vec![RawSegment {
                t_start: 0.0,
                r,
                mu,
                sigma,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub r: f64,
    pub mu: Vec<f64>,
    pub sigma: DMatrix<f64>,
    /// Market price of risk.
    pub theta: Vec<f64>,
    /// `(sigma sigma')^{-1} (mu - r 1)`, the direction of every optimal allocation.
    pub direction: Vec<f64>,
    pub theta_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    horizon: f64,
    n_assets: usize,
    segments: Vec<Segment>,
    raw: RawMarket,
}

/// Law of `ln(z(T)/z(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeflatorMoments {
    pub t: f64,
    pub m: f64,
    pub nu: f64,
}

fn smallest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn validate_market(raw: &RawMarket) -> Result<MarketModel, MarketError> {
    validate_market_with(raw, DEFAULT_EPS_ND)
}

pub fn validate_market_with(raw: &RawMarket, eps_nd: f64) -> Result<MarketModel, MarketError> {
    if !(raw.horizon > 0.0) || !raw.horizon.is_finite() {
        return Err(MarketError::NonpositiveHorizon(raw.horizon));
    }
    let first = raw
        .segments
        .first()
        .ok_or_else(|| MarketError::Segments("no segments".into()))?;
    if first.t_start != 0.0 {
        return Err(MarketError::Segments(format!(
            "first segment starts at {}",
            first.t_start
        )));
    }
    let n = first.mu.len();
    if n == 0 {
        return Err(MarketError::DimensionMismatch("no risky assets".into()));
    }
    let mut segments = Vec::with_capacity(raw.segments.len());
    for (k, seg) in raw.segments.iter().enumerate() {
        let t_end = raw.segments.get(k + 1).map_or(raw.horizon, |s| s.t_start);
        if !(t_end > seg.t_start) {
            return Err(MarketError::Segments(format!(
                "segment {k} is empty or out of order"
            )));
        }
        if seg.mu.len() != n || seg.sigma.len() != n || seg.sigma.iter().any(|row| row.len() != n) {
            return Err(MarketError::DimensionMismatch(format!(
                "segment {k} is not {n}-dimensional"
            )));
        }
        let finite = seg.r.is_finite()
            && seg.mu.iter().all(|v| v.is_finite())
            && seg.sigma.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(MarketError::NonFinite(k));
        }
        let sigma = DMatrix::from_fn(n, n, |i, j| seg.sigma[i][j]);
        let cov = &sigma * sigma.transpose();
        let min_eig = smallest_eigenvalue(&cov);
        if !(min_eig >= eps_nd) {
            return Err(MarketError::DegenerateVolatility {
                segment: k,
                min_eig,
                eps: eps_nd,
            });
        }
        let excess = DVector::from_iterator(n, seg.mu.iter().map(|m| m - seg.r));
        let theta = sigma
            .clone()
            .lu()
            .solve(&excess)
            .ok_or(MarketError::SingularVolatility(k))?;
        let direction = cov
            .lu()
            .solve(&excess)
            .ok_or(MarketError::SingularVolatility(k))?;
        segments.push(Segment {
            t_start: seg.t_start,
            t_end,
            r: seg.r,
            mu: seg.mu.clone(),
            theta_sq: theta.norm_squared(),
            theta: theta.iter().copied().collect(),
            direction: direction.iter().copied().collect(),
            sigma,
        });
    }
    Ok(MarketModel {
        horizon: raw.horizon,
        n_assets: n,
        segments,
        raw: raw.clone(),
    })
}

impl MarketModel {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn raw(&self) -> &RawMarket {
        &self.raw
    }

    /// Times at which some coefficient changes, excluding 0 and T.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.t_start).collect()
    }

    /// Segment in force at `t`; right-continuous, with `T` mapped to the last one.
    pub fn segment_at(&self, t: f64) -> &Segment {
        self.segments
            .iter()
            .rev()
            .find(|s| s.t_start <= t)
            .unwrap_or(&self.segments[0])
    }

    pub fn market_price_of_risk(&self, t: f64) -> Vec<f64> {
        self.segment_at(t).theta.clone()
    }

    /// `∫_{t0}^{t1} f(segment) ds` over the piecewise-constant coefficients.
    pub fn integrate<F>(&self, t0: f64, t1: f64, f: F) -> f64
    where
        F: Fn(&Segment) -> f64,
    {
        self.segments
            .iter()
            .map(|s| {
                let len = t1.min(s.t_end) - t0.max(s.t_start);
                if len > 0.0 {
                    len * f(s)
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn deflator_moments(&self, t: f64) -> DeflatorMoments {
        let (mean, var) = self.log_deflator_increment(t, self.horizon);
        DeflatorMoments {
            t,
            m: mean,
            nu: var.sqrt(),
        }
    }

    /// Mean and variance of `ln(z(t1)/z(t0))`.
    pub fn log_deflator_increment(&self, t0: f64, t1: f64) -> (f64, f64) {
        let mean = -self.integrate(t0, t1, |s| s.r + 0.5 * s.theta_sq);
        let var = self.integrate(t0, t1, |s| s.theta_sq);
        (mean, var)
    }

    /// `exp(-∫_{t0}^{t1} r)`.
    pub fn expected_deflator(&self, t0: f64, t1: f64) -> f64 {
        (-self.integrate(t0, t1, |s| s.r)).exp()
    }

    /// Growth factor of the bank account over `[t0, t1]`.
    pub fn bond_growth(&self, t0: f64, t1: f64) -> f64 {
        self.integrate(t0, t1, |s| s.r).exp()
    }

    /// Dollar allocation `s (sigma sigma')^{-1} b` at time `t`.
    pub fn allocation(&self, t: f64, scale: f64) -> Vec<f64> {
        self.segment_at(t)
            .direction
            .iter()
            .map(|d| d * scale)
            .collect()
    }

    /// Least-squares rate `r` such that `sigma theta ≈ mu - r 1`, with the
    /// spread of the per-asset implied rates.
    pub fn implied_rate(mu: &[f64], sigma: &[Vec<f64>], theta: &[f64]) -> (f64, f64) {
        let implied: Vec<f64> = mu
            .iter()
            .zip(sigma)
            .map(|(m, row)| m - row.iter().zip(theta).map(|(s, t)| s * t).sum::<f64>())
            .collect();
        let mean = implied.iter().sum::<f64>() / implied.len() as f64;
        let max = implied.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = implied.iter().copied().fold(f64::INFINITY, f64::min);
        (mean, max - min)
    }
}
