//! Dynamic mean–variance benchmark with a no-bankruptcy constraint.
//!
//! The optimal terminal wealth is `X = (lambda - eta z)_+ / 2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{KernelError, PartialMomentContext};
use crate::market::MarketModel;
use crate::payoff::{Payoff, Piece};
use crate::process::{OptimalProcess, EPS_T};
use crate::solvers::{expand_bracket, find_root_1d, solve_2d_with, NewtonOptions, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MvError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("multiplier solve diverged: {0}")]
    SolverDiverged(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvProblem {
    pub x0: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvMultipliers {
    pub lambda: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvSolution {
    pub problem: MvProblem,
    pub market: MarketModel,
    pub multipliers: MvMultipliers,
    pub variance: f64,
    payoff: Payoff,
}

fn payoff_of(lambda: f64, eta: f64) -> Payoff {
    let kink = lambda / eta;
    Payoff::new(vec![
        Piece {
            lo: 0.0,
            hi: kink,
            a: 0.5 * lambda,
            b: -0.5 * eta,
        },
        Piece {
            lo: kink,
            hi: f64::INFINITY,
            a: 0.0,
            b: 0.0,
        },
    ])
}

fn context(problem: &MvProblem, model: &MarketModel) -> Result<PartialMomentContext, MvError> {
    if !(problem.x0 > 0.0) {
        return Err(MvError::InvalidProblem(format!(
            "x0 must be positive, got {}",
            problem.x0
        )));
    }
    let riskless = problem.x0 * model.bond_growth(0.0, model.horizon());
    if !(problem.d > riskless) {
        return Err(MvError::InvalidProblem(format!(
            "target {} must exceed the riskless terminal value {riskless}",
            problem.d
        )));
    }
    let mom = model.deflator_moments(0.0);
    if mom.nu < EPS_T {
        return Err(MvError::InvalidProblem("market has no risk premium".into()));
    }
    Ok(PartialMomentContext::new(mom.m, mom.nu)?)
}

/// Kink `lambda/eta` from the ratio of the two constraints, then `eta` from the budget.
fn reduce_to_kink(p: &MvProblem, ctx: &PartialMomentContext) -> Result<MvMultipliers, MvError> {
    let ratio = |lk: f64| {
        let k = lk.exp();
        let mean = k * ctx.h_log(0.0, lk) - ctx.h_log(1.0, lk);
        let cost = k * ctx.h_log(1.0, lk) - ctx.h_log(2.0, lk);
        mean / cost - p.d / p.x0
    };
    let (lo, hi) = expand_bracket(ratio, ctx.m0 - ctx.nu0, ctx.m0 + ctx.nu0, 100)
        .ok_or_else(|| MvError::SolverDiverged("no bracket for the kink".into()))?;
    let lk = find_root_1d(ratio, lo, hi, 1e-15)?.value();
    let k = lk.exp();
    let cost = k * ctx.h_log(1.0, lk) - ctx.h_log(2.0, lk);
    let eta = 2.0 * p.x0 / cost;
    Ok(MvMultipliers {
        lambda: k * eta,
        eta,
    })
}

pub fn solve_mv(problem: &MvProblem, model: &MarketModel) -> Result<MvSolution, MvError> {
    let ctx = context(problem, model)?;
    let f = |u: [f64; 2]| {
        let pay = payoff_of(u[0].exp(), u[1].exp());
        [pay.mean(&ctx) - problem.d, pay.cost(&ctx) - problem.x0]
    };
    let kink0 = (ctx.m0 + ctx.nu0).exp();
    let eta0 = {
        let lk = kink0.ln();
        2.0 * problem.x0 / (kink0 * ctx.h_log(1.0, lk) - ctx.h_log(2.0, lk))
    };
    let start = [(kink0 * eta0).ln(), eta0.ln()];
    let multipliers = match solve_2d_with(f, start, NewtonOptions::default()) {
        Ok(r) => MvMultipliers {
            lambda: r.x[0].exp(),
            eta: r.x[1].exp(),
        },
        Err(_) => reduce_to_kink(problem, &ctx)?,
    };
    let payoff = payoff_of(multipliers.lambda, multipliers.eta);
    let variance = payoff.second_moment(&ctx) - problem.d * problem.d;
    Ok(MvSolution {
        problem: *problem,
        market: model.clone(),
        multipliers,
        variance,
        payoff,
    })
}

impl MvSolution {
    pub fn from_parts(
        problem: &MvProblem,
        model: &MarketModel,
        multipliers: MvMultipliers,
    ) -> Result<Self, MvError> {
        let ctx = context(problem, model)?;
        let payoff = payoff_of(multipliers.lambda, multipliers.eta);
        let variance = payoff.second_moment(&ctx) - problem.d * problem.d;
        Ok(Self {
            problem: *problem,
            market: model.clone(),
            multipliers,
            variance,
            payoff,
        })
    }

    /// Residuals of the mean and budget equations.
    pub fn residuals(&self) -> [f64; 2] {
        let mom = self.market.deflator_moments(0.0);
        let ctx = PartialMomentContext {
            m0: mom.m,
            nu0: mom.nu,
        };
        [
            self.payoff.mean(&ctx) - self.problem.d,
            self.payoff.cost(&ctx) - self.problem.x0,
        ]
    }
}

impl OptimalProcess for MvSolution {
    fn market(&self) -> &MarketModel {
        &self.market
    }

    fn payoff(&self) -> &Payoff {
        &self.payoff
    }
}
