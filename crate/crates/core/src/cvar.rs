//! Mean–CVaR problem, reduced to a one-parameter family of first-order
//! partial-moment problems with benchmark `gamma = xbar - alpha`.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::lpm::{self, Case, LpmError, LpmProblem, PolicySolution};
use crate::market::MarketModel;
use crate::payoff::Payoff;
use crate::process::OptimalProcess;
use crate::solvers::{minimize_scalar_convex_with, MinimizeOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CvarError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("target exceeds d_upper (d = {d}, d_upper = {d_upper})")]
    TargetTooHigh { d: f64, d_upper: f64 },
    #[error("alpha search failed: {0}")]
    Search(String),
    #[error(transparent)]
    Lpm(#[from] LpmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvarProblem {
    pub x0: f64,
    pub d: f64,
    pub cap: f64,
    /// Confidence level.
    pub beta: f64,
    /// Safe terminal level; defaults to the riskless growth of `x0`.
    pub xbar: Option<f64>,
}

impl CvarProblem {
    pub fn safe_level(&self, model: &MarketModel) -> f64 {
        self.xbar
            .unwrap_or_else(|| self.x0 * model.bond_growth(0.0, model.horizon()))
    }

    /// The embedded partial-moment instance at level `alpha`.
    pub fn embedded(&self, model: &MarketModel, alpha: f64) -> LpmProblem {
        LpmProblem {
            x0: self.x0,
            d: self.d,
            gamma: self.safe_level(model) - alpha,
            cap: self.cap,
            q: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SearchMethod {
    PaperGradient,
    #[default]
    GoldenSection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSearchOptions {
    pub method: SearchMethod,
    /// Forward-difference step; `None` means `1e-5 * xbar`.
    pub zeta: Option<f64>,
    /// Initial step size of the gradient search, adapted by backtracking.
    pub step: f64,
    /// Gradient tolerance.
    pub eps: f64,
    pub alpha0: f64,
    /// Interval width for the golden-section search.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AlphaSearchOptions {
    fn default() -> Self {
        Self {
            method: SearchMethod::GoldenSection,
            zeta: None,
            step: 1.0,
            eps: 1e-7,
            alpha0: 0.0,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSearchTrace {
    pub evaluations: Vec<(f64, f64)>,
    pub alpha_star: f64,
    pub j_star: f64,
    pub method: SearchMethod,
}

#[derive(Debug, Clone, Copy)]
enum Embedded {
    TooHigh,
    Classified { bounds: (f64, f64), case: Case },
}

/// Evaluates `J(alpha)`, caching the classification of the embedded
/// problem on a 1e-12 grid of `alpha`.
pub struct CvarEvaluator<'a> {
    problem: CvarProblem,
    model: &'a MarketModel,
    xbar: f64,
    cache: RefCell<HashMap<i64, Embedded>>,
    trace: RefCell<Vec<(f64, f64)>>,
}

impl<'a> CvarEvaluator<'a> {
    pub fn new(problem: &CvarProblem, model: &'a MarketModel) -> Self {
        Self {
            problem: *problem,
            model,
            xbar: problem.safe_level(model),
            cache: RefCell::new(HashMap::new()),
            trace: RefCell::new(Vec::new()),
        }
    }

    pub fn xbar(&self) -> f64 {
        self.xbar
    }

    /// Search window `[xbar - B, xbar]`.
    pub fn window(&self) -> (f64, f64) {
        (self.xbar - self.problem.cap, self.xbar)
    }

    fn classify(&self, alpha: f64) -> Result<Embedded, LpmError> {
        let key = (alpha * 1e12).round() as i64;
        if let Some(e) = self.cache.borrow().get(&key) {
            return Ok(*e);
        }
        let emb = self.problem.embedded(self.model, alpha);
        let bounds = lpm::d_bounds(&emb, self.model)?;
        let e = match lpm::classify_bounds(&emb, self.model, bounds) {
            Ok(case) => Embedded::Classified { bounds, case },
            Err(LpmError::TargetTooHigh { .. }) => Embedded::TooHigh,
            Err(e) => return Err(e),
        };
        self.cache.borrow_mut().insert(key, e);
        Ok(e)
    }

    /// Embedded solution at `alpha`, `None` when its benchmark is not positive.
    pub fn embedded_solution(&self, alpha: f64) -> Result<Option<PolicySolution>, LpmError> {
        let emb = self.problem.embedded(self.model, alpha);
        if emb.gamma <= 0.0 {
            return Ok(None);
        }
        match self.classify(alpha)? {
            Embedded::TooHigh => Err(LpmError::TargetTooHigh {
                d: emb.d,
                d_upper: lpm::d_bounds(&emb, self.model)?.1,
            }),
            Embedded::Classified { bounds, case } => {
                lpm::solve_classified(&emb, self.model, bounds, case).map(Some)
            }
        }
    }

    /// `J(alpha) = alpha + E[(xbar - alpha - X)_+] / (1 - beta)` at the
    /// optimal embedded payoff; `+inf` when the embedded target is out of reach.
    pub fn j(&self, alpha: f64) -> Result<f64, LpmError> {
        let gamma = self.xbar - alpha;
        let value = if gamma <= 0.0 {
            alpha
        } else if gamma >= self.problem.cap {
            f64::INFINITY
        } else {
            match self.classify(alpha)? {
                Embedded::TooHigh => f64::INFINITY,
                Embedded::Classified {
                    case: Case::DegenerateRich,
                    ..
                } => alpha,
                Embedded::Classified { bounds, case } => {
                    let emb = self.problem.embedded(self.model, alpha);
                    let sol = lpm::solve_classified(&emb, self.model, bounds, case)?;
                    alpha + sol.objective_value / (1.0 - self.problem.beta)
                }
            }
        };
        self.trace.borrow_mut().push((alpha, value));
        Ok(value)
    }

    fn take_trace(&self) -> Vec<(f64, f64)> {
        std::mem::take(&mut *self.trace.borrow_mut())
    }
}

fn validate(problem: &CvarProblem, model: &MarketModel) -> Result<f64, CvarError> {
    if !(problem.beta > 0.0 && problem.beta < 1.0) {
        return Err(CvarError::InvalidProblem(format!(
            "beta must lie in (0, 1), got {}",
            problem.beta
        )));
    }
    if !(problem.x0 > 0.0) {
        return Err(CvarError::InvalidProblem(format!(
            "x0 must be positive, got {}",
            problem.x0
        )));
    }
    let xbar = problem.safe_level(model);
    if !(problem.cap > xbar) {
        return Err(CvarError::InvalidProblem(format!(
            "cap {} must exceed the safe level {xbar}",
            problem.cap
        )));
    }
    Ok(xbar)
}

/// `d_lower` of the embedded problem at `alpha`; 0 once the benchmark is not positive.
pub fn underline_d_of_alpha(
    problem: &CvarProblem,
    model: &MarketModel,
    alpha: f64,
) -> Result<f64, CvarError> {
    let xbar = validate(problem, model)?;
    if alpha >= xbar {
        return Ok(0.0);
    }
    Ok(lpm::d_bounds(&problem.embedded(model, alpha), model)?.0)
}

pub fn j_value(problem: &CvarProblem, model: &MarketModel, alpha: f64) -> Result<f64, CvarError> {
    validate(problem, model)?;
    Ok(CvarEvaluator::new(problem, model).j(alpha)?)
}

fn upper_target(problem: &CvarProblem, model: &MarketModel, xbar: f64) -> Result<f64, CvarError> {
    // d_upper does not depend on the benchmark
    let probe = LpmProblem {
        x0: problem.x0,
        d: problem.d,
        gamma: 0.5 * xbar,
        cap: problem.cap,
        q: 1.0,
    };
    Ok(lpm::d_bounds(&probe, model)?.1)
}

pub fn search_alpha(
    problem: &CvarProblem,
    model: &MarketModel,
    options: &AlphaSearchOptions,
) -> Result<AlphaSearchTrace, CvarError> {
    let xbar = validate(problem, model)?;
    let d_upper = upper_target(problem, model, xbar)?;
    if problem.d >= d_upper {
        return Err(CvarError::TargetTooHigh {
            d: problem.d,
            d_upper,
        });
    }
    let eval = CvarEvaluator::new(problem, model);
    search_with(&eval, options)
}

fn search_with(
    eval: &CvarEvaluator<'_>,
    options: &AlphaSearchOptions,
) -> Result<AlphaSearchTrace, CvarError> {
    let failure: RefCell<Option<LpmError>> = RefCell::new(None);
    let j = |a: f64| match eval.j(a) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::INFINITY
        }
    };
    let (lo, hi) = eval.window();
    let (alpha_star, j_star) = match options.method {
        SearchMethod::GoldenSection => {
            let opts = MinimizeOptions {
                tol: options.tol,
                max_iter: options.max_iter,
            };
            let r = minimize_scalar_convex_with(j, lo, hi, opts)
                .map_err(|e| CvarError::Search(e.to_string()))?;
            let a = r.value();
            (a, j(a))
        }
        SearchMethod::PaperGradient => gradient_search(&j, lo, hi, eval.xbar, options),
    };
    if let Some(e) = failure.into_inner() {
        if !j_star.is_finite() {
            return Err(e.into());
        }
    }
    if !j_star.is_finite() {
        return Err(CvarError::Search(format!(
            "no finite J found (best alpha {alpha_star})"
        )));
    }
    Ok(AlphaSearchTrace {
        evaluations: eval.take_trace(),
        alpha_star,
        j_star,
        method: options.method,
    })
}

/// Forward-difference descent `alpha <- alpha - step * kappa`, with the step
/// halved until `J` decreases.
fn gradient_search<F>(j: &F, lo: f64, hi: f64, xbar: f64, o: &AlphaSearchOptions) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let zeta = o.zeta.unwrap_or(1e-5 * xbar);
    let mut alpha = o.alpha0.clamp(lo, hi);
    let mut value = j(alpha);
    let mut step = o.step;
    for _ in 0..o.max_iter {
        let kappa = (j(alpha + zeta) - value) / zeta;
        if !kappa.is_finite() || kappa.abs() < o.eps {
            break;
        }
        let mut moved = false;
        for _ in 0..60 {
            let trial = (alpha - step * kappa).clamp(lo, hi);
            let jt = j(trial);
            if jt < value {
                alpha = trial;
                value = jt;
                moved = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (alpha, value)
}

/// Optimal mean–CVaR policy.
#[derive(Debug, Clone, PartialEq)]
pub struct CvarSolution {
    pub problem: CvarProblem,
    pub xbar: f64,
    pub alpha_star: f64,
    /// Minimal CVaR, equal to `J(alpha*)`.
    pub cvar: f64,
    pub trace: AlphaSearchTrace,
    /// Embedded partial-moment solution at `alpha*`.
    pub lpm: PolicySolution,
}

impl OptimalProcess for CvarSolution {
    fn market(&self) -> &MarketModel {
        &self.lpm.market
    }

    fn payoff(&self) -> &Payoff {
        self.lpm.payoff()
    }
}

pub fn solve_cvar(
    problem: &CvarProblem,
    model: &MarketModel,
    options: &AlphaSearchOptions,
) -> Result<CvarSolution, CvarError> {
    let xbar = validate(problem, model)?;
    let d_upper = upper_target(problem, model, xbar)?;
    if problem.d >= d_upper {
        return Err(CvarError::TargetTooHigh {
            d: problem.d,
            d_upper,
        });
    }
    let eval = CvarEvaluator::new(problem, model);
    let trace = search_with(&eval, options)?;
    let alpha = trace.alpha_star;
    let lpm = match eval.embedded_solution(alpha)? {
        Some(s) => s,
        None => {
            // benchmark at or below zero: hold the riskless payoff
            let emb = LpmProblem {
                gamma: f64::MIN_POSITIVE,
                ..problem.embedded(model, alpha)
            };
            lpm::solve(&emb, model)?
        }
    };
    Ok(CvarSolution {
        problem: *problem,
        xbar,
        alpha_star: alpha,
        cvar: trace.j_star,
        trace,
        lpm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Infeasible,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub d: f64,
    pub alpha_star: f64,
    pub cvar: f64,
    pub status: RowStatus,
}

/// One solve per target level; infeasible targets are kept with a status.
pub fn frontier(
    template: &CvarProblem,
    model: &MarketModel,
    d_grid: &[f64],
    options: &AlphaSearchOptions,
    exec: Execution,
) -> Vec<FrontierRow> {
    let mut rows = exec.map(d_grid, |&d| {
        let p = CvarProblem { d, ..*template };
        match solve_cvar(&p, model, options) {
            Ok(s) => FrontierRow {
                d,
                alpha_star: s.alpha_star,
                cvar: s.cvar,
                status: RowStatus::Ok,
            },
            Err(CvarError::TargetTooHigh { .. })
            | Err(CvarError::Lpm(LpmError::TargetTooHigh { .. })) => FrontierRow {
                d,
                alpha_star: f64::NAN,
                cvar: f64::NAN,
                status: RowStatus::Infeasible,
            },
            Err(_) => FrontierRow {
                d,
                alpha_star: f64::NAN,
                cvar: f64::NAN,
                status: RowStatus::Failed,
            },
        }
    });
    rows.sort_by(|a, b| a.d.total_cmp(&b.d));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{validate_market, RawMarket};

    fn market() -> MarketModel {
        let mu = vec![0.1346, 0.0530, 0.1722];
        let sigma = vec![
            vec![0.1428, 0.0094, 0.1002],
            vec![0.0094, 0.0728, 0.0031],
            vec![0.1002, 0.0031, 0.2353],
        ];
        validate_market(&RawMarket::constant(1.0, 0.016, mu, sigma)).unwrap()
    }

    fn problem(d: f64, beta: f64) -> CvarProblem {
        CvarProblem {
            x0: 10.0,
            d,
            cap: 100.0,
            beta,
            xbar: None,
        }
    }

    #[test]
    fn j_limits() {
        let m = market();
        let p = problem(12.0, 0.95);
        let xbar = p.safe_level(&m);
        assert_eq!(j_value(&p, &m, xbar).unwrap(), xbar);
        assert_eq!(j_value(&p, &m, xbar + 1.0).unwrap(), xbar + 1.0);
        assert_eq!(underline_d_of_alpha(&p, &m, xbar).unwrap(), 0.0);
        for k in 0..50 {
            let a = -20.0 + 0.6 * k as f64;
            assert!(j_value(&p, &m, a).unwrap() >= a);
        }
    }

    #[test]
    fn lower_bound_at_zero_matches_the_embedded_bounds() {
        let m = market();
        let p = problem(12.0, 0.95);
        let xbar = p.safe_level(&m);
        let direct = lpm::d_bounds(
            &LpmProblem {
                x0: 10.0,
                d: 12.0,
                gamma: xbar,
                cap: 100.0,
                q: 1.0,
            },
            &m,
        )
        .unwrap()
        .0;
        assert!((underline_d_of_alpha(&p, &m, 0.0).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn seam_is_continuous() {
        let m = market();
        let p = problem(12.0, 0.95);
        let a = underline_d_of_alpha(&p, &m, 1e-9).unwrap();
        let b = underline_d_of_alpha(&p, &m, -1e-9).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} {b}");
    }

    #[test]
    fn j_is_convex_on_a_grid() {
        let m = market();
        let p = problem(12.0, 0.95);
        let e = CvarEvaluator::new(&p, &m);
        let vals: Vec<f64> = (0..50)
            .map(|k| e.j(-6.0 + 0.16 * k as f64).unwrap())
            .collect();
        for w in vals.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-6);
        }
    }

    #[test]
    fn methods_agree() {
        let m = market();
        let p = problem(12.0, 0.95);
        let g = search_alpha(&p, &m, &AlphaSearchOptions::default()).unwrap();
        let opts = AlphaSearchOptions {
            method: SearchMethod::PaperGradient,
            ..Default::default()
        };
        let pg = search_alpha(&p, &m, &opts).unwrap();
        let xbar = p.safe_level(&m);
        assert!(
            (g.alpha_star - pg.alpha_star).abs() < 1e-4 * xbar,
            "{} vs {}",
            g.alpha_star,
            pg.alpha_star
        );
        assert!((g.j_star - pg.j_star).abs() < 1e-6);
    }

    #[test]
    fn synthetic_quadratic_by_both_searches() {
        let j = |a: f64| (a - 1.7) * (a - 1.7);
        let o = AlphaSearchOptions::default();
        let (a, _) = gradient_search(&j, -5.0, 5.0, 10.0, &o);
        assert!((a - 1.7).abs() < 1e-3);
        let r = minimize_scalar_convex_with(j, -5.0, 5.0, MinimizeOptions::default()).unwrap();
        assert!((r.value() - 1.7).abs() < 1e-7);
    }

    #[test]
    fn cvar_matches_the_discrete_terminal_distribution() {
        let m = market();
        let p = problem(12.0, 0.95);
        let s = solve_cvar(&p, &m, &AlphaSearchOptions::default()).unwrap();
        assert!((s.wealth(0.0, 1.0) - 10.0).abs() < 1e-6);
        // atoms of the loss xbar - X*
        let ctx =
            crate::kernels::PartialMomentContext::new(s.lpm.moments0.m, s.lpm.moments0.nu).unwrap();
        let atoms: Vec<(f64, f64)> = s
            .payoff()
            .pieces()
            .iter()
            .map(|pc| (s.xbar - pc.a, ctx.h_between(0.0, pc.lo, pc.hi)))
            .collect();
        let ru = |a: f64| {
            a + atoms.iter().map(|(l, w)| w * (l - a).max(0.0)).sum::<f64>() / (1.0 - p.beta)
        };
        let best = atoms
            .iter()
            .map(|(l, _)| ru(*l))
            .fold(f64::INFINITY, f64::min);
        assert!((best - s.cvar).abs() < 1e-6, "{best} vs {}", s.cvar);
    }

    #[test]
    fn frontier_rows_and_statuses() {
        let m = market();
        let t = problem(0.0, 0.95);
        let rows = frontier(
            &t,
            &m,
            &[11.0, 12.0, 40.0],
            &AlphaSearchOptions::default(),
            Execution::Parallel,
        );
        assert_eq!(rows.len(), 3);
        assert!(rows[0].cvar <= rows[1].cvar);
        assert_eq!(rows[2].status, RowStatus::Infeasible);
        let single = frontier(
            &t,
            &m,
            &[11.0],
            &AlphaSearchOptions::default(),
            Execution::Sequential,
        );
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn small_beta_tends_to_expected_loss() {
        let m = market();
        let p = problem(11.0, 1e-3);
        let s = solve_cvar(&p, &m, &AlphaSearchOptions::default()).unwrap();
        let expected_loss = s.xbar - s.lpm.expected_terminal_wealth();
        assert!(s.cvar <= expected_loss.max(0.0) + 0.05 * s.xbar);
    }
}
