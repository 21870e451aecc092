//! Static buy-and-hold CVaR baseline.
//!
//! Gross returns over `[0, T]` are sampled from the exact lognormal law of
//! the price model and the Rockafellar–Uryasev program
//!
//! ```text
//! min  alpha + sum_k u_k / ((1 - beta) N)
//! s.t. u_k >= xbar - R_k'w - alpha,  u_k >= 0
//!      sum w = x0,  mean(R)'w >= d,   w and alpha free
//! ```
//!
//! is solved for the dollar holdings `w` (risky assets then the bond).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::market::{MarketModel, RawMarket, RawSegment};
use crate::rng::CounterNormals;
use crate::simplex::{simplex_solve, LinearProgram, LpError, LpStatus, RelOp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Distinguishes scenario draws from path draws under the same seed.
const SCENARIO_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    /// Risky assets; each row also carries the bond as its last entry.
    pub n_assets: usize,
    /// Row-major `n_scenarios x (n_assets + 1)` gross returns.
    pub returns: Vec<f64>,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn from_rows(rows: &[Vec<f64>], seed: u64) -> Result<Self, BaselineError> {
        let width = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| BaselineError::InvalidInput("no scenarios".into()))?;
        if width < 2 || rows.iter().any(|r| r.len() != width) {
            return Err(BaselineError::InvalidInput(
                "ragged or too narrow scenario rows".into(),
            ));
        }
        if rows.iter().flatten().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(BaselineError::InvalidInput(
                "gross returns must be positive and finite".into(),
            ));
        }
        Ok(Self {
            n_assets: width - 1,
            returns: rows.concat(),
            seed,
        })
    }

    pub fn n_scenarios(&self) -> usize {
        self.returns.len() / self.width()
    }

    /// Columns per row, bond included.
    pub fn width(&self) -> usize {
        self.n_assets + 1
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.returns[k * self.width()..(k + 1) * self.width()]
    }

    pub fn probability(&self) -> f64 {
        1.0 / self.n_scenarios() as f64
    }

    pub fn mean_returns(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.width()];
        for k in 0..self.n_scenarios() {
            for (a, r) in m.iter_mut().zip(self.row(k)) {
                *a += r;
            }
        }
        let n = self.n_scenarios() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Terminal wealth `R_k'w` per scenario.
    pub fn terminal_wealth(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n_scenarios())
            .map(|k| self.row(k).iter().zip(w).map(|(r, x)| r * x).sum())
            .collect()
    }
}

/// Exact multivariate lognormal gross returns over `[0, T]`, one
/// independent Gaussian vector per coefficient segment.
pub fn generate_scenarios(
    model: &MarketModel,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<ScenarioSet, BaselineError> {
    generate_scenarios_raw(model.raw(), n, seed, exec)
}

/// As [`generate_scenarios`] on unvalidated coefficients, so degenerate
/// (for instance zero-volatility) markets can be sampled too.
pub fn generate_scenarios_raw(
    raw: &RawMarket,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<ScenarioSet, BaselineError> {
    if n == 0 {
        return Err(BaselineError::InvalidInput(
            "need at least one scenario".into(),
        ));
    }
    let na = raw.segments.first().map(|s| s.mu.len()).unwrap_or(0);
    let square = |s: &RawSegment| {
        s.mu.len() == na && s.sigma.len() == na && s.sigma.iter().all(|r| r.len() == na)
    };
    if na == 0 || !raw.segments.iter().all(square) || !(raw.horizon > 0.0) {
        return Err(BaselineError::InvalidInput(
            "inconsistent market dimensions".into(),
        ));
    }
    let spans: Vec<f64> = raw
        .segments
        .iter()
        .enumerate()
        .map(|(k, s)| raw.segments.get(k + 1).map_or(raw.horizon, |n| n.t_start) - s.t_start)
        .collect();
    let bond = raw
        .segments
        .iter()
        .zip(&spans)
        .map(|(s, h)| s.r * h)
        .sum::<f64>()
        .exp();
    let per = na * raw.segments.len();
    let rows = exec.map_indexed(n, |k| {
        let mut g = vec![0.0; per];
        CounterNormals::new(seed, SCENARIO_STREAM | k as u64, per).fill(0, &mut g);
        let mut log_r = vec![0.0; na];
        for (s, (seg, &h)) in raw.segments.iter().zip(&spans).enumerate() {
            let sq = h.sqrt();
            for (i, lr) in log_r.iter_mut().enumerate() {
                let row = &seg.sigma[i];
                let var: f64 = row.iter().map(|v| v * v).sum();
                let shock: f64 = row
                    .iter()
                    .zip(&g[s * na..(s + 1) * na])
                    .map(|(a, b)| a * b)
                    .sum();
                *lr += (seg.mu[i] - 0.5 * var) * h + sq * shock;
            }
        }
        let mut row: Vec<f64> = log_r.into_iter().map(f64::exp).collect();
        row.push(bond);
        row
    });
    Ok(ScenarioSet {
        n_assets: na,
        returns: rows.concat(),
        seed,
    })
}

fn check(beta: f64, n: usize) -> Result<(), BaselineError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(BaselineError::InvalidInput(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    if n == 0 {
        return Err(BaselineError::InvalidInput("no scenarios".into()));
    }
    Ok(())
}

/// Full primal program. Variable order: `w` (n+1), `alpha`, then one `u_k`
/// per scenario; rows: one per scenario, the budget, the mean constraint.
pub fn build_ru_lp(
    sc: &ScenarioSet,
    beta: f64,
    d: f64,
    x0: f64,
    xbar: f64,
) -> Result<LinearProgram, BaselineError> {
    let n = sc.n_scenarios();
    check(beta, n)?;
    let width = sc.width();
    let ia = width;
    let mut lp = LinearProgram::new(width + 1 + n);
    for j in 0..=width {
        lp.set_free(j);
    }
    lp.set_cost(ia, 1.0);
    let weight = 1.0 / ((1.0 - beta) * n as f64);
    for k in 0..n {
        lp.set_cost(ia + 1 + k, weight);
        let mut row: Vec<(usize, f64)> = sc.row(k).iter().copied().enumerate().collect();
        row.push((ia, 1.0));
        row.push((ia + 1 + k, 1.0));
        lp.add_row(&row, RelOp::Ge, xbar);
    }
    let budget: Vec<_> = (0..width).map(|j| (j, 1.0)).collect();
    lp.add_row(&budget, RelOp::Eq, x0);
    let mean: Vec<_> = sc.mean_returns().into_iter().enumerate().collect();
    lp.add_row(&mean, RelOp::Ge, d);
    Ok(lp)
}

/// Dual of [`build_ru_lp`], with `n + 2` rows however many scenarios there
/// are. Variables: `p_k in [0, 1/((1-beta)N)]`, `q >= 0`, `s` free; rows
/// are the `w_j` columns and the `alpha` column of the primal.
pub fn build_ru_dual(
    sc: &ScenarioSet,
    beta: f64,
    d: f64,
    x0: f64,
    xbar: f64,
) -> Result<LinearProgram, BaselineError> {
    let n = sc.n_scenarios();
    check(beta, n)?;
    let width = sc.width();
    let (iq, is) = (n, n + 1);
    let mut lp = LinearProgram::new(n + 2);
    let cap = 1.0 / ((1.0 - beta) * n as f64);
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); width + 1];
    for k in 0..n {
        lp.set_cost(k, -xbar);
        lp.set_bounds(k, 0.0, cap);
        for (j, r) in sc.row(k).iter().enumerate() {
            cols[j].push((k, *r));
        }
        cols[width].push((k, 1.0));
    }
    lp.set_cost(iq, -d);
    lp.set_cost(is, -x0);
    lp.set_free(is);
    let mean = sc.mean_returns();
    for j in 0..width {
        let mut row = std::mem::take(&mut cols[j]);
        row.push((iq, mean[j]));
        row.push((is, 1.0));
        lp.add_row(&row, RelOp::Eq, 0.0);
    }
    lp.add_row(&cols[width], RelOp::Eq, 1.0);
    Ok(lp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Dollar holdings, risky assets then the bond (empty unless optimal).
    pub weights: Vec<f64>,
    /// VaR level at the optimum.
    pub alpha: f64,
    /// CVaR of `xbar - R'w`.
    pub objective: f64,
    pub n_scenarios: usize,
    pub seed: u64,
    pub iterations: usize,
}

/// Scenario CVaR of the loss `xbar - R'w` as `min_alpha` of the R–U function.
pub fn scenario_cvar(sc: &ScenarioSet, w: &[f64], beta: f64, xbar: f64) -> f64 {
    let losses: Vec<f64> = sc
        .terminal_wealth(w)
        .into_iter()
        .map(|x| xbar - x)
        .collect();
    crate::sim::ru_minimum(&losses, beta).unwrap_or(f64::NAN)
}

/// Solves the program through its small dual; `w` and `alpha` are read off
/// the dual's row multipliers.
pub fn solve_ru(
    sc: &ScenarioSet,
    beta: f64,
    d: f64,
    x0: f64,
    xbar: f64,
) -> Result<LpSolution, BaselineError> {
    let lp = build_ru_dual(sc, beta, d, x0, xbar)?;
    let s = simplex_solve(&lp)?;
    let width = sc.width();
    // an infeasible dual means an unbounded primal and vice versa
    let status = match s.status {
        LpStatus::Optimal => LpStatus::Optimal,
        LpStatus::Infeasible => LpStatus::Unbounded,
        LpStatus::Unbounded => LpStatus::Infeasible,
    };
    if status != LpStatus::Optimal {
        return Ok(LpSolution {
            status,
            weights: Vec::new(),
            alpha: f64::NAN,
            objective: f64::NAN,
            n_scenarios: sc.n_scenarios(),
            seed: sc.seed,
            iterations: s.iterations,
        });
    }
    let weights: Vec<f64> = s.duals[..width].iter().map(|v| -v).collect();
    let alpha = -s.duals[width];
    Ok(LpSolution {
        status,
        weights,
        alpha,
        objective: -s.objective,
        n_scenarios: sc.n_scenarios(),
        seed: sc.seed,
        iterations: s.iterations,
    })
}

/// Scenario generation and the R–U solve; `xbar` defaults to `x0 e^{rT}`.
#[allow(clippy::too_many_arguments)]
pub fn solve_static_cvar(
    model: &MarketModel,
    beta: f64,
    d: f64,
    x0: f64,
    xbar: Option<f64>,
    n_scenarios: usize,
    seed: u64,
    exec: Execution,
) -> Result<LpSolution, BaselineError> {
    let sc = generate_scenarios(model, n_scenarios, seed, exec)?;
    let xbar = xbar.unwrap_or(x0 * model.bond_growth(0.0, model.horizon()));
    solve_ru(&sc, beta, d, x0, xbar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{validate_market, RawMarket};

    fn example_two() -> MarketModel {
        let mu = vec![0.1346, 0.0530, 0.1722];
        let sigma = vec![
            vec![0.1428, 0.0094, 0.1002],
            vec![0.0094, 0.0728, 0.0031],
            vec![0.1002, 0.0031, 0.2353],
        ];
        validate_market(&RawMarket::constant(1.0, 0.016, mu, sigma)).unwrap()
    }

    fn toy() -> ScenarioSet {
        ScenarioSet::from_rows(&[vec![0.9, 1.0], vec![1.0, 1.0], vec![1.2, 1.0]], 0).unwrap()
    }

    #[test]
    fn deterministic_prices() {
        let raw = RawMarket::constant(
            2.0,
            0.03,
            vec![0.07, 0.05],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        );
        let sc = generate_scenarios_raw(&raw, 10, 1, Execution::Sequential).unwrap();
        for k in 0..10 {
            assert_eq!(sc.row(k), &[0.14f64.exp(), 0.1f64.exp(), 0.06f64.exp()]);
        }
    }

    #[test]
    fn sample_moments_follow_the_model() {
        let m = example_two();
        let sc = generate_scenarios(&m, 100_000, 17, Execution::Parallel).unwrap();
        let x: Vec<f64> = (0..sc.n_scenarios()).map(|k| sc.row(k)[0]).collect();
        let est = crate::sim::estimate_mean(&x).unwrap();
        assert!((est.value - 0.1346f64.exp()).abs() < 3.0 * est.std_error);
        assert!(sc.row(5)[3] == 0.016f64.exp());
        // log-return correlation of assets 1 and 3
        let l: Vec<[f64; 2]> = (0..sc.n_scenarios())
            .map(|k| [sc.row(k)[0].ln(), sc.row(k)[2].ln()])
            .collect();
        let mean = |i: usize| l.iter().map(|v| v[i]).sum::<f64>() / l.len() as f64;
        let (m0, m2) = (mean(0), mean(1));
        let cov = |i: usize, j: usize, a: f64, b: f64| {
            l.iter().map(|v| (v[i] - a) * (v[j] - b)).sum::<f64>() / l.len() as f64
        };
        let corr = cov(0, 1, m0, m2) / (cov(0, 0, m0, m0) * cov(1, 1, m2, m2)).sqrt();
        let s = [[0.1428, 0.0094, 0.1002], [0.1002, 0.0031, 0.2353]];
        let dot = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let exact = dot(&s[0], &s[1]) / (dot(&s[0], &s[0]) * dot(&s[1], &s[1])).sqrt();
        assert!((corr - exact).abs() < 0.02);
    }

    #[test]
    fn dimensions() {
        let sc = toy();
        let lp = build_ru_lp(&sc, 0.5, 1.0, 1.0, 1.0).unwrap();
        assert_eq!((lp.n_vars(), lp.n_rows()), (3 + 2 + 1, 3 + 2));
    }

    #[test]
    fn toy_matches_grid_search() {
        let sc = toy();
        let (beta, x0, xbar) = (0.5, 1.0, 1.0);
        let sol = solve_ru(&sc, beta, x0, x0, xbar).unwrap();
        // grid over the risky dollar amount and alpha at 1e-3
        let mut best = f64::INFINITY;
        for i in -2000..=2000 {
            let a = i as f64 * 1e-3;
            let w = [a, x0 - a];
            let mean: f64 = sc.mean_returns().iter().zip(&w).map(|(r, x)| r * x).sum();
            if mean < x0 - 1e-12 {
                continue;
            }
            for k in -1000..=1000 {
                let alpha = k as f64 * 1e-3;
                let tail: f64 = sc
                    .terminal_wealth(&w)
                    .iter()
                    .map(|x| (xbar - x - alpha).max(0.0))
                    .sum::<f64>();
                best = best.min(alpha + tail / (3.0 * (1.0 - beta)));
            }
        }
        assert!(
            (sol.objective - best).abs() < 2e-3,
            "{} vs {best}",
            sol.objective
        );
        let primal = simplex_solve(&build_ru_lp(&sc, beta, x0, x0, xbar).unwrap()).unwrap();
        assert!((primal.objective - sol.objective).abs() < 1e-10);
    }

    #[test]
    fn single_scenario_gives_the_deterministic_loss() {
        let sc = ScenarioSet::from_rows(&[vec![1.1, 1.02]], 0).unwrap();
        // one scenario with a risky premium: shorting the bond is unbounded
        assert_eq!(
            solve_ru(&sc, 0.9, 1.0, 1.0, 1.02).unwrap().status,
            LpStatus::Unbounded
        );
        let flat = ScenarioSet::from_rows(&[vec![1.02, 1.02]], 0).unwrap();
        let s = solve_ru(&flat, 0.9, 1.0, 1.0, 1.02).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.objective.abs() < 1e-12);
    }

    #[test]
    fn target_above_every_portfolio_is_infeasible() {
        let sc = ScenarioSet::from_rows(&[vec![1.02, 1.02], vec![1.02, 1.02]], 0).unwrap();
        assert_eq!(
            solve_ru(&sc, 0.9, 2.0, 1.0, 1.02).unwrap().status,
            LpStatus::Infeasible
        );
    }

    #[test]
    fn dual_and_primal_agree_and_match_the_estimator() {
        let m = example_two();
        let sc = generate_scenarios(&m, 300, 3, Execution::Sequential).unwrap();
        let xbar = 10.0 * 0.016f64.exp();
        let dual = solve_ru(&sc, 0.95, 11.5, 10.0, xbar).unwrap();
        let lp = build_ru_lp(&sc, 0.95, 11.5, 10.0, xbar).unwrap();
        let primal = simplex_solve(&lp).unwrap();
        assert_eq!(primal.status, LpStatus::Optimal);
        assert!((primal.objective - dual.objective).abs() < 1e-8 * (1.0 + dual.objective.abs()));
        assert!((scenario_cvar(&sc, &dual.weights, 0.95, xbar) - dual.objective).abs() < 1e-8);
        assert!((dual.weights.iter().sum::<f64>() - 10.0).abs() < 1e-8);
    }

    #[test]
    fn lp_beats_random_feasible_portfolios() {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let m = example_two();
        let sc = generate_scenarios(&m, 1000, 8, Execution::Parallel).unwrap();
        let (beta, d, x0) = (0.9, 11.0, 10.0);
        let xbar = x0 * 0.016f64.exp();
        let sol = solve_ru(&sc, beta, d, x0, xbar).unwrap();
        assert!((scenario_cvar(&sc, &sol.weights, beta, xbar) - sol.objective).abs() < 1e-8);
        let mean = sc.mean_returns();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut u = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 40.0 - 20.0;
        let mut tested = 0;
        while tested < 50 {
            let mut w = [u(), u(), u(), 0.0];
            w[3] = x0 - w[0] - w[1] - w[2];
            let m_w: f64 = mean.iter().zip(&w).map(|(a, b)| a * b).sum();
            if m_w < d {
                continue;
            }
            tested += 1;
            assert!(sol.objective <= scenario_cvar(&sc, &w, beta, xbar) + 1e-10);
        }
    }

    #[test]
    fn riskless_target_with_small_beta() {
        let m = example_two();
        let x0 = 10.0;
        let xbar = x0 * 0.016f64.exp();
        let sc = generate_scenarios(&m, 500, 2, Execution::Parallel).unwrap();
        assert_eq!(scenario_cvar(&sc, &[0.0, 0.0, 0.0, x0], 1e-6, xbar), 0.0);
        // near beta = 0 the CVaR is the mean loss, which shorting drives to -inf
        let s = solve_ru(&sc, 1e-6, xbar, x0, xbar).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
        let s = solve_ru(&sc, 0.5, xbar, x0, xbar).unwrap();
        assert!(s.objective <= 1e-12);
    }

    #[test]
    fn modes_give_identical_scenarios() {
        let m = example_two();
        let a = generate_scenarios(&m, 777, 4, Execution::Sequential).unwrap();
        let b = generate_scenarios(&m, 777, 4, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
