//! Mean–lower-partial-moment problem with a terminal wealth cap.
//!
//! Thresholds are carried as `delta = lambda/eta` (the cap region
//! `z <= delta`) and a width `rho`, so that the benchmark region is
//! `delta < z <= delta + rho`. For `q <= 1` the width is `gamma^{q-1}/eta`,
//! for `q = 2` it is `2 gamma/eta`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{KernelError, PartialMomentContext};
use crate::market::{DeflatorMoments, MarketModel};
use crate::payoff::{Payoff, Piece};
use crate::process::{OptimalProcess, PolicyUndefinedAtTerminal, EPS_T};
use crate::solvers::{find_root_1d, solve_2d_with, NewtonOptions, SolveReport, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpmError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("budget {x0} cannot be financed below the cap (x0/B = {ratio} >= E[z(T)] = {mean_deflator})")]
    InfeasibleBudget {
        x0: f64,
        ratio: f64,
        mean_deflator: f64,
    },
    #[error("target exceeds d_upper (d = {d}, d_upper = {d_upper})")]
    TargetTooHigh { d: f64, d_upper: f64 },
    #[error("multiplier solve diverged: {0}")]
    SolverDiverged(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Terminal(#[from] PolicyUndefinedAtTerminal),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpmProblem {
    pub x0: f64,
    /// Minimum expected terminal wealth.
    pub d: f64,
    /// Benchmark level.
    pub gamma: f64,
    /// Terminal wealth cap `B`.
    pub cap: f64,
    /// Moment order: 0, any value in (0, 1], or 2.
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    Regular,
    DegenerateLowTarget,
    DegenerateRich,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda: f64,
    pub eta: f64,
    pub case: Case,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Thresholds {
    delta: f64,
    rho: f64,
}

fn order_supported(q: f64) -> bool {
    q == 0.0 || (q > 0.0 && q <= 1.0) || q == 2.0
}

fn validate(p: &LpmProblem) -> Result<(), LpmError> {
    let finite = [p.x0, p.d, p.gamma, p.cap, p.q]
        .iter()
        .all(|v| v.is_finite());
    if !finite {
        return Err(LpmError::InvalidProblem("non-finite input".into()));
    }
    if !(p.x0 > 0.0) {
        return Err(LpmError::InvalidProblem(format!(
            "x0 must be positive, got {}",
            p.x0
        )));
    }
    if !(p.gamma > 0.0) {
        return Err(LpmError::InvalidProblem(format!(
            "gamma must be positive, got {}",
            p.gamma
        )));
    }
    if !(p.cap > p.gamma) {
        return Err(LpmError::InvalidProblem(format!(
            "cap {} must exceed gamma {}",
            p.cap, p.gamma
        )));
    }
    if !order_supported(p.q) {
        return Err(LpmError::InvalidProblem(format!(
            "unsupported moment order q = {}",
            p.q
        )));
    }
    Ok(())
}

/// Terminal deflator law, or `None` when the market carries no risk premium.
fn context(model: &MarketModel) -> Option<PartialMomentContext> {
    let d0 = model.deflator_moments(0.0);
    if d0.nu < EPS_T {
        None
    } else {
        PartialMomentContext::new(d0.m, d0.nu).ok()
    }
}

fn check_budget(p: &LpmProblem, ez: f64) -> Result<(), LpmError> {
    let ratio = p.x0 / p.cap;
    if ratio >= ez {
        return Err(LpmError::InfeasibleBudget {
            x0: p.x0,
            ratio,
            mean_deflator: ez,
        });
    }
    Ok(())
}

/// Feasibility bounds `(d_lower, d_upper)` on the target.
pub fn d_bounds(problem: &LpmProblem, model: &MarketModel) -> Result<(f64, f64), LpmError> {
    validate(problem)?;
    let ez = model.expected_deflator(0.0, model.horizon());
    check_budget(problem, ez)?;
    let Some(ctx) = context(model) else {
        let riskless = problem.x0 / ez;
        return Ok((riskless, riskless));
    };
    let (x0, g, b) = (problem.x0, problem.gamma, problem.cap);
    let upper = b * ctx.h(0.0, ctx.invert_h1(x0 / b)?)?;
    let lower = if x0 >= g * ez {
        let surplus = (x0 - g * ez) / (b - g);
        let mass = if surplus > 0.0 {
            ctx.h(0.0, ctx.invert_h1(surplus)?)?
        } else {
            0.0
        };
        (b - g) * mass + g
    } else if problem.q == 2.0 {
        g * ctx.j(1.0, ctx.invert_k(1.0, x0 / g)?)?
    } else {
        g * ctx.h(0.0, ctx.invert_h1(x0 / g)?)?
    };
    Ok((lower, upper))
}

fn classify_with(problem: &LpmProblem, ez: f64, bounds: (f64, f64)) -> Result<Case, LpmError> {
    let (lower, upper) = bounds;
    if problem.d <= lower {
        if problem.x0 < problem.gamma * ez {
            Ok(Case::DegenerateLowTarget)
        } else {
            Ok(Case::DegenerateRich)
        }
    } else if problem.d >= upper {
        Err(LpmError::TargetTooHigh {
            d: problem.d,
            d_upper: upper,
        })
    } else {
        Ok(Case::Regular)
    }
}

/// Classification against precomputed bounds.
pub fn classify_bounds(
    problem: &LpmProblem,
    model: &MarketModel,
    bounds: (f64, f64),
) -> Result<Case, LpmError> {
    classify_with(
        problem,
        model.expected_deflator(0.0, model.horizon()),
        bounds,
    )
}

pub fn classify(problem: &LpmProblem, model: &MarketModel) -> Result<Case, LpmError> {
    let bounds = d_bounds(problem, model)?;
    classify_with(
        problem,
        model.expected_deflator(0.0, model.horizon()),
        bounds,
    )
}

fn build_payoff(p: &LpmProblem, case: Case, t: Thresholds) -> Payoff {
    let (g, b) = (p.gamma, p.cap);
    let end = t.delta + t.rho;
    let mut pieces = match case {
        Case::DegenerateRich => {
            return Payoff::new(vec![
                Piece {
                    lo: 0.0,
                    hi: t.delta,
                    a: b,
                    b: 0.0,
                },
                Piece {
                    lo: t.delta,
                    hi: f64::INFINITY,
                    a: g,
                    b: 0.0,
                },
            ])
        }
        Case::Regular => vec![Piece {
            lo: 0.0,
            hi: t.delta,
            a: b,
            b: 0.0,
        }],
        Case::DegenerateLowTarget => Vec::new(),
    };
    if p.q == 2.0 {
        pieces.push(Piece {
            lo: t.delta,
            hi: end,
            a: g * end / t.rho,
            b: -g / t.rho,
        });
    } else {
        pieces.push(Piece {
            lo: t.delta,
            hi: end,
            a: g,
            b: 0.0,
        });
    }
    pieces.push(Piece {
        lo: end,
        hi: f64::INFINITY,
        a: 0.0,
        b: 0.0,
    });
    Payoff::new(pieces)
}

fn eta_from_width(p: &LpmProblem, rho: f64) -> f64 {
    if p.q == 2.0 {
        2.0 * p.gamma / rho
    } else {
        p.gamma.powf(p.q - 1.0) / rho
    }
}

fn width_from_eta(p: &LpmProblem, eta: f64) -> f64 {
    if p.q == 2.0 {
        2.0 * p.gamma / eta
    } else {
        p.gamma.powf(p.q - 1.0) / eta
    }
}

fn residuals(p: &LpmProblem, ctx: &PartialMomentContext, t: Thresholds) -> [f64; 2] {
    let pay = build_payoff(p, Case::Regular, t);
    [pay.mean(ctx) - p.d, pay.cost(ctx) - p.x0]
}

/// Log-spaced search range for thresholds that are effectively 0 or infinite.
fn log_floor(ctx: &PartialMomentContext) -> f64 {
    ctx.m0 - 40.0 * ctx.nu0
}

fn log_ceiling(ctx: &PartialMomentContext) -> f64 {
    ctx.m0 + 40.0 * ctx.nu0
}

fn nested_small_order(
    p: &LpmProblem,
    ctx: &PartialMomentContext,
    ez: f64,
) -> Result<Thresholds, LpmError> {
    let (x0, g, b, d) = (p.x0, p.gamma, p.cap, p.d);
    let upper = ctx.invert_h1(x0 / b)?.ln();
    let lower = if x0 >= g * ez {
        let surplus = (x0 - g * ez) / (b - g);
        if surplus > 0.0 {
            ctx.invert_h1(surplus)?.ln()
        } else {
            log_floor(ctx)
        }
    } else {
        log_floor(ctx)
    };
    let end_of = |ld: f64| -> Result<f64, KernelError> {
        let target = (x0 - (b - g) * ctx.h_log(1.0, ld)) / g;
        ctx.invert_h1(target)
    };
    let gap = |ld: f64| match end_of(ld) {
        Ok(end) => (b - g) * ctx.h_log(0.0, ld) + g * ctx.h(0.0, end).unwrap_or(1.0) - d,
        Err(_) => f64::NAN,
    };
    let span = upper - lower;
    let (lo, hi) = (lower + 1e-12 * span.max(1.0), upper - 1e-12 * span.max(1.0));
    let root = find_root_1d(gap, lo, hi, 1e-14)?;
    let delta = root.value().exp();
    let end = end_of(root.value())?;
    Ok(Thresholds {
        delta,
        rho: (end - delta).max(0.0),
    })
}

fn nested_quadratic(
    p: &LpmProblem,
    ctx: &PartialMomentContext,
    ez: f64,
) -> Result<Thresholds, LpmError> {
    let (x0, g, b, d) = (p.x0, p.gamma, p.cap, p.d);
    let delta_max = ctx.invert_h1(x0 / b)?.ln();
    let inner = |rho: f64| -> Result<f64, LpmError> {
        let budget = |ld: f64| {
            let t = Thresholds {
                delta: ld.exp(),
                rho,
            };
            build_payoff(p, Case::Regular, t).cost(ctx) - x0
        };
        let r = find_root_1d(budget, log_floor(ctx), delta_max, 1e-14)?;
        Ok(r.value().exp())
    };
    let rho_max = if x0 < g * ez {
        ctx.invert_k(1.0, x0 / g)?.ln()
    } else {
        log_ceiling(ctx)
    };
    let outer = |lr: f64| match inner(lr.exp()) {
        Ok(delta) => {
            build_payoff(
                p,
                Case::Regular,
                Thresholds {
                    delta,
                    rho: lr.exp(),
                },
            )
            .mean(ctx)
                - d
        }
        Err(_) => f64::NAN,
    };
    let lo = delta_max - 30.0;
    let hi = rho_max - 1e-12 * rho_max.abs().max(1.0);
    let root = find_root_1d(outer, lo, hi, 1e-14)?;
    let rho = root.value().exp();
    Ok(Thresholds {
        delta: inner(rho)?,
        rho,
    })
}

fn solve_regular(
    p: &LpmProblem,
    ctx: &PartialMomentContext,
    ez: f64,
) -> Result<Thresholds, LpmError> {
    let delta0 = ctx.invert_h1(p.x0 / p.cap)?;
    let f = |u: [f64; 2]| {
        residuals(
            p,
            ctx,
            Thresholds {
                delta: u[0].exp(),
                rho: u[1].exp(),
            },
        )
    };
    let newton = solve_2d_with(f, [delta0.ln(), 0.0], NewtonOptions::default());
    if let Ok(SolveReport { x, .. }) = newton {
        let t = Thresholds {
            delta: x[0].exp(),
            rho: x[1].exp(),
        };
        if t.delta.is_finite() && t.rho.is_finite() && t.rho > 0.0 {
            return Ok(t);
        }
    }
    let nested = if p.q == 2.0 {
        nested_quadratic(p, ctx, ez)
    } else {
        nested_small_order(p, ctx, ez)
    };
    nested.map_err(|e| LpmError::SolverDiverged(e.to_string()))
}

fn thresholds(
    p: &LpmProblem,
    ctx: &PartialMomentContext,
    ez: f64,
    case: Case,
) -> Result<Thresholds, LpmError> {
    match case {
        Case::Regular => solve_regular(p, ctx, ez),
        Case::DegenerateLowTarget => {
            let rho = if p.q == 2.0 {
                ctx.invert_k(1.0, p.x0 / p.gamma)?
            } else {
                ctx.invert_h1(p.x0 / p.gamma)?
            };
            Ok(Thresholds { delta: 0.0, rho })
        }
        Case::DegenerateRich => {
            let surplus = (p.x0 - p.gamma * ez) / (p.cap - p.gamma);
            let delta = if surplus > 0.0 {
                ctx.invert_h1(surplus)?
            } else {
                0.0
            };
            Ok(Thresholds {
                delta,
                rho: f64::INFINITY,
            })
        }
    }
}

fn multipliers_of(p: &LpmProblem, case: Case, t: Thresholds) -> Multipliers {
    match case {
        Case::Regular => {
            let eta = eta_from_width(p, t.rho);
            Multipliers {
                lambda: t.delta * eta,
                eta,
                case,
            }
        }
        Case::DegenerateLowTarget => Multipliers {
            lambda: 0.0,
            eta: eta_from_width(p, t.rho),
            case,
        },
        Case::DegenerateRich => Multipliers {
            lambda: 0.0,
            eta: 0.0,
            case,
        },
    }
}

/// Lagrange multipliers of the problem, after classification.
pub fn solve_multipliers(
    problem: &LpmProblem,
    model: &MarketModel,
) -> Result<Multipliers, LpmError> {
    Ok(solve(problem, model)?.multipliers)
}

/// Everything needed to evaluate the optimal policy of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySolution {
    pub problem: LpmProblem,
    pub market: MarketModel,
    pub moments0: DeflatorMoments,
    pub multipliers: Multipliers,
    pub objective_value: f64,
    pub hit_probability: f64,
    pub d_lower: f64,
    pub d_upper: f64,
    /// The degenerate-rich case has a set of optimal payoffs; the stored
    /// payoff is its canonical member.
    pub multiple_optima: bool,
    /// No risk premium: the payoff is the riskless terminal value.
    pub riskless: bool,
    payoff: Payoff,
}

pub fn solve(problem: &LpmProblem, model: &MarketModel) -> Result<PolicySolution, LpmError> {
    let bounds = d_bounds(problem, model)?;
    let ez = model.expected_deflator(0.0, model.horizon());
    let case = classify_with(problem, ez, bounds)?;
    finish(problem, model, bounds, case, None)
}

/// Solve with bounds and case already known.
pub fn solve_classified(
    problem: &LpmProblem,
    model: &MarketModel,
    bounds: (f64, f64),
    case: Case,
) -> Result<PolicySolution, LpmError> {
    finish(problem, model, bounds, case, None)
}

fn finish(
    problem: &LpmProblem,
    model: &MarketModel,
    bounds: (f64, f64),
    case: Case,
    given: Option<Multipliers>,
) -> Result<PolicySolution, LpmError> {
    let ez = model.expected_deflator(0.0, model.horizon());
    let moments0 = model.deflator_moments(0.0);
    let Some(ctx) = context(model) else {
        let level = problem.x0 / ez;
        let shortfall = (problem.gamma - level).max(0.0);
        return Ok(PolicySolution {
            problem: *problem,
            market: model.clone(),
            moments0,
            multipliers: Multipliers {
                lambda: 0.0,
                eta: 0.0,
                case,
            },
            objective_value: if shortfall > 0.0 {
                shortfall.powf(problem.q)
            } else {
                0.0
            },
            hit_probability: 0.0,
            d_lower: bounds.0,
            d_upper: bounds.1,
            multiple_optima: false,
            riskless: true,
            payoff: Payoff::constant(level),
        });
    };
    let t = match given {
        Some(m) if case == Case::Regular => Thresholds {
            delta: m.lambda / m.eta,
            rho: width_from_eta(problem, m.eta),
        },
        Some(m) if case == Case::DegenerateLowTarget => Thresholds {
            delta: 0.0,
            rho: width_from_eta(problem, m.eta),
        },
        _ => thresholds(problem, &ctx, ez, case)?,
    };
    let payoff = build_payoff(problem, case, t);
    let multipliers = given.unwrap_or_else(|| multipliers_of(problem, case, t));
    Ok(PolicySolution {
        problem: *problem,
        market: model.clone(),
        moments0,
        multipliers,
        objective_value: payoff.shortfall(&ctx, problem.gamma, problem.q),
        hit_probability: payoff.mass_at(&ctx, problem.cap),
        d_lower: bounds.0,
        d_upper: bounds.1,
        multiple_optima: case == Case::DegenerateRich,
        riskless: false,
        payoff,
    })
}

impl PolicySolution {
    /// Rebuilds a solution from stored multipliers, e.g. after reading JSON.
    pub fn from_parts(
        problem: &LpmProblem,
        model: &MarketModel,
        multipliers: Multipliers,
    ) -> Result<Self, LpmError> {
        let bounds = d_bounds(problem, model)?;
        finish(problem, model, bounds, multipliers.case, Some(multipliers))
    }

    /// Closed-form `E[X*]`.
    pub fn expected_terminal_wealth(&self) -> f64 {
        match context(&self.market) {
            Some(ctx) => self.payoff.mean(&ctx),
            None => self.payoff.value(1.0),
        }
    }

    /// Closed-form `E[z(T) X*]`.
    pub fn initial_cost(&self) -> f64 {
        match context(&self.market) {
            Some(ctx) => self.payoff.cost(&ctx),
            None => {
                self.payoff.value(1.0) * self.market.expected_deflator(0.0, self.market.horizon())
            }
        }
    }

    pub fn wealth_envelope(&self, t: f64) -> (f64, f64) {
        wealth_envelope(&self.problem, &self.market, t)
    }
}

impl OptimalProcess for PolicySolution {
    fn market(&self) -> &MarketModel {
        &self.market
    }

    fn payoff(&self) -> &Payoff {
        &self.payoff
    }
}

/// Bounds on the optimal wealth process at `t`.
pub fn wealth_envelope(problem: &LpmProblem, model: &MarketModel, t: f64) -> (f64, f64) {
    (
        0.0,
        problem.cap * model.expected_deflator(t, model.horizon()),
    )
}

/// Probability that the optimal terminal wealth sits at the cap.
pub fn hit_probability(solution: &PolicySolution) -> f64 {
    solution.hit_probability
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{validate_market, RawMarket};

    fn market() -> MarketModel {
        validate_market(&RawMarket::constant(
            1.0,
            0.06,
            vec![0.12],
            vec![vec![0.15]],
        ))
        .unwrap()
    }

    fn problem(q: f64) -> LpmProblem {
        LpmProblem {
            x0: 1.0,
            d: 1.3,
            gamma: 1.0618,
            cap: 10.0,
            q,
        }
    }

    #[test]
    fn bounds_for_example_one() {
        for q in [1.0, 2.0] {
            let (lo, hi) = d_bounds(&problem(q), &market()).unwrap();
            assert!((lo - 1.0618).abs() < 1e-3, "{lo}");
            assert!((hi - 1.98474615).abs() < 1e-6, "{hi}");
        }
    }

    #[test]
    fn classification() {
        let m = market();
        assert_eq!(classify(&problem(2.0), &m).unwrap(), Case::Regular);
        let rich = LpmProblem {
            d: 0.0,
            ..problem(1.0)
        };
        assert_eq!(classify(&rich, &m).unwrap(), Case::DegenerateRich);
        let high = LpmProblem {
            d: 2.5,
            ..problem(2.0)
        };
        assert!(matches!(
            classify(&high, &m),
            Err(LpmError::TargetTooHigh { .. })
        ));
        let low = LpmProblem {
            gamma: 1.5,
            d: 0.5,
            ..problem(2.0)
        };
        assert_eq!(classify(&low, &m).unwrap(), Case::DegenerateLowTarget);
    }

    #[test]
    fn infeasible_budget() {
        let p = LpmProblem {
            x0: 9.5,
            ..problem(1.0)
        };
        assert!(matches!(
            d_bounds(&p, &market()),
            Err(LpmError::InfeasibleBudget { .. })
        ));
    }

    #[test]
    fn regular_solves_satisfy_both_constraints() {
        let m = market();
        for q in [0.0, 0.5, 1.0, 2.0] {
            let s = solve(&problem(q), &m).unwrap();
            assert_eq!(s.multipliers.case, Case::Regular);
            assert!((s.expected_terminal_wealth() - 1.3).abs() < 1e-9, "q={q}");
            assert!((s.wealth(0.0, 1.0) - 1.0).abs() < 1e-9, "q={q}");
            assert!(s.multipliers.lambda > 0.0 && s.multipliers.eta > 0.0);
        }
    }

    #[test]
    fn q1_multipliers_match_the_table() {
        let s = solve(&problem(1.0), &market()).unwrap();
        assert!((s.multipliers.lambda / 0.3261 - 1.0).abs() < 1e-2);
        assert!((s.multipliers.eta / 0.7852 - 1.0).abs() < 1e-2);
    }

    #[test]
    fn nested_fallbacks_agree_with_newton() {
        let m = market();
        let ctx = context(&m).unwrap();
        let ez = m.expected_deflator(0.0, 1.0);
        for q in [0.5, 2.0] {
            let p = problem(q);
            let a = solve_regular(&p, &ctx, ez).unwrap();
            let b = if q == 2.0 {
                nested_quadratic(&p, &ctx, ez)
            } else {
                nested_small_order(&p, &ctx, ez)
            }
            .unwrap();
            assert!(
                (a.delta / b.delta - 1.0).abs() < 1e-8 && (a.rho / b.rho - 1.0).abs() < 1e-8,
                "q={q}"
            );
        }
    }

    #[test]
    fn degenerate_cases_are_budget_feasible() {
        let m = market();
        let low = LpmProblem {
            gamma: 1.5,
            d: 0.5,
            ..problem(2.0)
        };
        for q in [0.5, 2.0] {
            let s = solve(&LpmProblem { q, ..low }, &m).unwrap();
            assert_eq!(s.multipliers.lambda, 0.0);
            assert!((s.initial_cost() - 1.0).abs() < 1e-10);
            assert!(s.expected_terminal_wealth() >= 0.5);
            assert_eq!(s.hit_probability, 0.0);
        }
        let rich = solve(
            &LpmProblem {
                d: 0.0,
                ..problem(1.0)
            },
            &m,
        )
        .unwrap();
        assert!((rich.initial_cost() - 1.0).abs() < 1e-10);
        assert_eq!(rich.objective_value, 0.0);
        assert!(rich.multiple_optima);
    }

    #[test]
    fn terminal_wealth_extremes() {
        let s = solve(&problem(2.0), &market()).unwrap();
        assert_eq!(s.terminal_wealth(1e-9), 10.0);
        assert_eq!(s.terminal_wealth(1e9), 0.0);
    }

    #[test]
    fn rebuild_from_multipliers() {
        let m = market();
        let s = solve(&problem(2.0), &m).unwrap();
        let r = PolicySolution::from_parts(&s.problem, &m, s.multipliers).unwrap();
        assert!((r.wealth(0.0, 1.0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn envelope_and_terminal_policy() {
        let m = market();
        let s = solve(&problem(1.0), &m).unwrap();
        let (lo, hi) = s.wealth_envelope(0.0);
        assert_eq!(lo, 0.0);
        assert!((hi - 10.0 * (-0.06f64).exp()).abs() < 1e-12);
        assert_eq!(s.wealth_envelope(1.0), (0.0, 10.0));
        assert!(s.policy(1.0, 1.0).is_err());
    }

    #[test]
    fn riskless_market_gives_zero_policy() {
        let m = validate_market(&RawMarket::constant(
            1.0,
            0.06,
            vec![0.06],
            vec![vec![0.15]],
        ))
        .unwrap();
        let p = LpmProblem {
            d: 1.0,
            ..problem(2.0)
        };
        let s = solve(&p, &m).unwrap();
        assert!(s.riskless);
        assert_eq!(s.policy(0.5, 1.0).unwrap(), vec![0.0]);
        assert!((s.wealth(0.0, 1.0) - 1.0).abs() < 1e-12);
    }
}
