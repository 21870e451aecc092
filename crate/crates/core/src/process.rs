//! Shared evaluation of optimal wealth processes driven by the deflator.

use thiserror::Error;

use crate::market::MarketModel;
use crate::payoff::Payoff;

/// Below this deflator volatility the wealth is taken at its terminal limit.
pub const EPS_T: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("policy is undefined at the terminal time (t = {t})")]
pub struct PolicyUndefinedAtTerminal {
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackRow {
    pub z: f64,
    pub x: f64,
    pub pi: Vec<f64>,
    /// Proportions `pi / x`.
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackCurve {
    pub t: f64,
    /// Sorted by wealth.
    pub rows: Vec<FeedbackRow>,
    /// Set when wealth is not strictly monotone along the deflator grid.
    pub monotonicity_warning: bool,
}

/// A solved problem whose terminal wealth is a function of `z(T)`.
pub trait OptimalProcess: Sync {
    fn market(&self) -> &MarketModel;
    fn payoff(&self) -> &Payoff;

    fn terminal_wealth(&self, z: f64) -> f64 {
        self.payoff().value(z)
    }

    fn wealth(&self, t: f64, z: f64) -> f64 {
        let mom = self
            .market()
            .deflator_moments(t.min(self.market().horizon()));
        let nu = if mom.nu < EPS_T { 0.0 } else { mom.nu };
        self.payoff().wealth(mom.m, nu, z)
    }

    /// Scalar `s(t, z) = -z ∂x/∂z`; the policy is `s (sigma sigma')^{-1} b`.
    fn exposure(&self, t: f64, z: f64) -> f64 {
        let mom = self.market().deflator_moments(t);
        if mom.nu < EPS_T {
            return 0.0;
        }
        self.payoff().exposure(mom.m, mom.nu, z)
    }

    fn policy(&self, t: f64, z: f64) -> Result<Vec<f64>, PolicyUndefinedAtTerminal> {
        if t >= self.market().horizon() {
            return Err(PolicyUndefinedAtTerminal { t });
        }
        Ok(self.market().allocation(t, self.exposure(t, z)))
    }

    fn feedback_curve(
        &self,
        t: f64,
        z_grid: &[f64],
    ) -> Result<FeedbackCurve, PolicyUndefinedAtTerminal> {
        let mut rows = Vec::with_capacity(z_grid.len());
        for &z in z_grid {
            let x = self.wealth(t, z);
            let pi = self.policy(t, z)?;
            let w = pi
                .iter()
                .map(|p| if x != 0.0 { p / x } else { f64::NAN })
                .collect();
            rows.push(FeedbackRow { z, x, pi, w });
        }
        let decreasing = rows.windows(2).all(|p| p[1].x < p[0].x);
        let increasing = rows.windows(2).all(|p| p[1].x > p[0].x);
        let monotonicity_warning = !(decreasing || increasing);
        rows.sort_by(|a, b| a.x.total_cmp(&b.x));
        Ok(FeedbackCurve {
            t,
            rows,
            monotonicity_warning,
        })
    }
}
