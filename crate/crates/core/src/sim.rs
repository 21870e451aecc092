//! Monte-Carlo engine: exact deflator paths, discretized wealth under a
//! policy, and sample risk estimators.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::market::{MarketModel, Segment};
use crate::process::OptimalProcess;
use crate::rng::CounterNormals;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("empty sample")]
    EmptySample,
    #[error("at least two samples are needed, got {0}")]
    TooFewSamples(usize),
    #[error("beta must lie in (0, 1), got {0}")]
    InvalidBeta(f64),
    #[error("need at least one path and one step")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Euler,
    /// Euler plus the Itô correction of the single effective noise direction.
    Milstein,
}

/// Part of one time step that lies inside a single coefficient segment.
#[derive(Debug, Clone, Copy)]
struct SubStep {
    seg: usize,
    h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    /// Row-major `n_paths x (n_steps + 1)`.
    pub z_paths: Vec<f64>,
    /// Wealth under the simulated policy, same layout as `z_paths`.
    pub x_paths: Option<Vec<f64>>,
    n_assets: usize,
    normals_per_step: usize,
}

impl PathEnsemble {
    pub fn z_path(&self, i: usize) -> &[f64] {
        let w = self.n_steps + 1;
        &self.z_paths[i * w..(i + 1) * w]
    }

    pub fn x_path(&self, i: usize) -> Option<&[f64]> {
        let w = self.n_steps + 1;
        self.x_paths.as_ref().map(|x| &x[i * w..(i + 1) * w])
    }

    pub fn z_terminal(&self) -> Vec<f64> {
        (0..self.n_paths)
            .map(|i| self.z_path(i)[self.n_steps])
            .collect()
    }

    pub fn x_terminal(&self) -> Option<Vec<f64>> {
        self.x_paths.as_ref().map(|_| {
            (0..self.n_paths)
                .map(|i| self.x_path(i).unwrap()[self.n_steps])
                .collect()
        })
    }
}

fn sub_steps(model: &MarketModel, t0: f64, t1: f64) -> Vec<SubStep> {
    model
        .segments()
        .iter()
        .enumerate()
        .filter_map(|(k, s)| {
            let h = t1.min(s.t_end) - t0.max(s.t_start);
            (h > 0.0).then_some(SubStep { seg: k, h })
        })
        .collect()
}

/// Gaussian increments of one step: the Brownian increment `dw` and the
/// exact `∫ theta' dW` (which differs from `theta' dw` across breakpoints).
fn step_noise(model: &MarketModel, subs: &[SubStep], g: &[f64], dw: &mut [f64]) -> (f64, f64) {
    let n = model.n_assets();
    dw.iter_mut().for_each(|v| *v = 0.0);
    let (mut drift, mut theta_dw) = (0.0, 0.0);
    for (j, sub) in subs.iter().enumerate() {
        let seg = &model.segments()[sub.seg];
        let sq = sub.h.sqrt();
        drift -= (seg.r + 0.5 * seg.theta_sq) * sub.h;
        for i in 0..n {
            let inc = sq * g[j * n + i];
            dw[i] += inc;
            theta_dw += seg.theta[i] * inc;
        }
    }
    (drift, theta_dw)
}

fn grid(model: &MarketModel, n_steps: usize) -> (Vec<f64>, Vec<Vec<SubStep>>) {
    let t_end = model.horizon();
    let times: Vec<f64> = (0..=n_steps)
        .map(|k| t_end * k as f64 / n_steps as f64)
        .collect();
    let subs = times
        .windows(2)
        .map(|w| sub_steps(model, w[0], w[1]))
        .collect();
    (times, subs)
}

/// Exact lognormal deflator paths on a uniform grid.
pub fn simulate_deflator(
    model: &MarketModel,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    exec: Execution,
) -> Result<PathEnsemble, SimError> {
    if n_paths == 0 || n_steps == 0 {
        return Err(SimError::EmptyGrid);
    }
    let n = model.n_assets();
    let (times, subs) = grid(model, n_steps);
    let per_step = n * subs.iter().map(Vec::len).max().unwrap_or(1);
    let rows = exec.map_indexed(n_paths, |p| {
        let mut rng = CounterNormals::new(seed, p as u64, per_step);
        let mut g = vec![0.0; per_step];
        let mut dw = vec![0.0; n];
        let mut row = Vec::with_capacity(n_steps + 1);
        let mut log_z = 0.0;
        row.push(1.0);
        for (k, s) in subs.iter().enumerate() {
            rng.fill(k as u64, &mut g);
            let (drift, theta_dw) = step_noise(model, s, &g, &mut dw);
            log_z += drift - theta_dw;
            row.push(log_z.exp());
        }
        row
    });
    Ok(PathEnsemble {
        n_paths,
        n_steps,
        seed,
        times,
        z_paths: rows.concat(),
        x_paths: None,
        n_assets: n,
        normals_per_step: per_step,
    })
}

/// Wealth dynamics `dx = (r x + b'pi) dt + pi' sigma dW` driven by the same
/// Brownian increments as the deflator paths. The policy is evaluated at
/// `min(t_k, T - dt)`.
pub fn run_policy<P>(
    model: &MarketModel,
    process: &P,
    ensemble: &PathEnsemble,
    scheme: Scheme,
    exec: Execution,
) -> PathEnsemble
where
    P: OptimalProcess + ?Sized,
{
    let x0 = process.wealth(0.0, 1.0);
    run_strategy(model, ensemble, x0, scheme, exec, |t, z| {
        process.exposure(t, z)
    })
}

/// As [`run_policy`] for any exposure law `s(t, z)`, with allocation
/// `s (sigma sigma')^{-1} b`.
pub fn run_strategy<S>(
    model: &MarketModel,
    ensemble: &PathEnsemble,
    x0: f64,
    scheme: Scheme,
    exec: Execution,
    exposure: S,
) -> PathEnsemble
where
    S: Fn(f64, f64) -> f64 + Sync + Send,
{
    let n = ensemble.n_assets;
    let (times, subs) = grid(model, ensemble.n_steps);
    let dt = model.horizon() / ensemble.n_steps as f64;
    let t_cap = model.horizon() - dt;
    let rows = exec.map_indexed(ensemble.n_paths, |p| {
        let z = ensemble.z_path(p);
        let mut rng = CounterNormals::new(ensemble.seed, p as u64, ensemble.normals_per_step);
        let mut g = vec![0.0; ensemble.normals_per_step];
        let mut dw = vec![0.0; n];
        let mut row = Vec::with_capacity(ensemble.n_steps + 1);
        let mut x = x0;
        row.push(x);
        for (k, s) in subs.iter().enumerate() {
            rng.fill(k as u64, &mut g);
            step_noise(model, s, &g, &mut dw);
            let t = times[k].min(t_cap);
            let seg: &Segment = model.segment_at(times[k]);
            let scale = exposure(t, z[k]);
            let pi: Vec<f64> = seg.direction.iter().map(|d| d * scale).collect();
            let excess: f64 = pi.iter().zip(&seg.mu).map(|(p, m)| p * (m - seg.r)).sum();
            let mut diffusion = 0.0;
            for (i, dwi) in dw.iter().enumerate() {
                let vol_i: f64 = (0..n).map(|j| pi[j] * seg.sigma[(j, i)]).sum();
                diffusion += vol_i * dwi;
            }
            let mut next = x + (seg.r * x + excess) * dt + diffusion;
            if scheme == Scheme::Milstein {
                let zk = z[k];
                let h = 1e-4 * zk;
                let slope = (exposure(t, zk + h) - exposure(t, zk - h)) / (2.0 * h);
                let theta_dw: f64 = seg.theta.iter().zip(&dw).map(|(a, b)| a * b).sum();
                next += -zk * slope * 0.5 * (theta_dw * theta_dw - seg.theta_sq * dt);
            }
            x = next;
            row.push(x);
        }
        row
    });
    PathEnsemble {
        x_paths: Some(rows.concat()),
        ..ensemble.clone()
    }
}

/// Mean absolute gap between simulated and closed-form terminal wealth.
pub fn replication_error<P>(ensemble: &PathEnsemble, process: &P) -> Option<f64>
where
    P: OptimalProcess + ?Sized,
{
    let x = ensemble.x_terminal()?;
    let z = ensemble.z_terminal();
    let total: f64 = x
        .iter()
        .zip(&z)
        .map(|(xv, zv)| (xv - process.terminal_wealth(*zv)).abs())
        .sum();
    Some(total / ensemble.n_paths as f64)
}

/// Sample mean of `z(t) x*(t, z(t))` per grid time, with its standard error.
pub fn martingale_profile<P>(ensemble: &PathEnsemble, process: &P) -> Vec<(f64, f64, f64)>
where
    P: OptimalProcess + ?Sized,
{
    ensemble
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let v: Vec<f64> = (0..ensemble.n_paths)
                .map(|p| {
                    let z = ensemble.z_path(p)[k];
                    z * process.wealth(t, z)
                })
                .collect();
            let (m, se) = mean_and_se(&v);
            (t, m, se)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Measure {
    Lpm { q: f64, gamma: f64 },
    Cvar { beta: f64 },
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
    pub measure: Measure,
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_len(samples: &[f64]) -> Result<(), SimError> {
    match samples.len() {
        0 => Err(SimError::EmptySample),
        1 => Err(SimError::TooFewSamples(1)),
        _ => Ok(()),
    }
}

pub fn estimate_mean(samples: &[f64]) -> Result<RiskEstimate, SimError> {
    check_len(samples)?;
    let (value, std_error) = mean_and_se(samples);
    Ok(RiskEstimate {
        value,
        std_error,
        n: samples.len(),
        measure: Measure::Mean,
    })
}

/// `E[(gamma - x)_+^q]`; for a sample mean the jackknife error equals `s/sqrt(n)`.
pub fn estimate_lpm(samples: &[f64], gamma: f64, q: f64) -> Result<RiskEstimate, SimError> {
    check_len(samples)?;
    let v: Vec<f64> = samples
        .iter()
        .map(|x| {
            let gap = gamma - x;
            if gap > 0.0 {
                gap.powf(q)
            } else {
                0.0
            }
        })
        .collect();
    let (value, std_error) = mean_and_se(&v);
    Ok(RiskEstimate {
        value,
        std_error,
        n: samples.len(),
        measure: Measure::Lpm { q, gamma },
    })
}

/// CVaR of equally weighted losses: mean of the worst `(1 - beta)` mass,
/// splitting the atom at the VaR.
pub fn cvar_of_losses(losses: &[f64], beta: f64) -> Result<(f64, f64), SimError> {
    if losses.is_empty() {
        return Err(SimError::EmptySample);
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SimError::InvalidBeta(beta));
    }
    let mut sorted = losses.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len() as f64;
    let tail = (1.0 - beta) * n;
    let full = (tail.floor() as usize).min(sorted.len());
    let mut sum: f64 = sorted[..full].iter().sum();
    if full < sorted.len() {
        sum += (tail - full as f64) * sorted[full];
    }
    // lower beta-quantile; the slack absorbs rounding in beta * n
    let rank = ((beta * n - 1e-9).ceil() as usize).clamp(1, sorted.len());
    let var = sorted[sorted.len() - rank];
    Ok((sum / tail, var))
}

/// `min_alpha alpha + mean((f - alpha)_+)/(1 - beta)`, attained at a sample point.
pub fn ru_minimum(losses: &[f64], beta: f64) -> Result<f64, SimError> {
    if losses.is_empty() {
        return Err(SimError::EmptySample);
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SimError::InvalidBeta(beta));
    }
    let n = losses.len() as f64;
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    // suffix sums make each candidate O(1)
    let mut suffix = vec![0.0; sorted.len() + 1];
    for i in (0..sorted.len()).rev() {
        suffix[i] = suffix[i + 1] + sorted[i];
    }
    let mut best = f64::INFINITY;
    for (i, &a) in sorted.iter().enumerate() {
        let above = suffix[i + 1] - a * (sorted.len() - i - 1) as f64;
        best = best.min(a + above / (n * (1.0 - beta)));
    }
    Ok(best)
}

/// CVaR of the loss `xbar - x`, with an influence-function standard error.
pub fn estimate_cvar(samples: &[f64], beta: f64, xbar: f64) -> Result<RiskEstimate, SimError> {
    check_len(samples)?;
    let losses: Vec<f64> = samples.iter().map(|x| xbar - x).collect();
    let (value, var) = cvar_of_losses(&losses, beta)?;
    let infl: Vec<f64> = losses
        .iter()
        .map(|f| var + (f - var).max(0.0) / (1.0 - beta))
        .collect();
    let (_, std_error) = mean_and_se(&infl);
    Ok(RiskEstimate {
        value,
        std_error,
        n: samples.len(),
        measure: Measure::Cvar { beta },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub mean_z_t: f64,
    pub mean_log_z_t: f64,
    pub terminal_wealth: Option<RiskEstimate>,
    pub replication_error: Option<f64>,
}

pub fn summarize<P>(ensemble: &PathEnsemble, process: Option<&P>) -> EnsembleSummary
where
    P: OptimalProcess + ?Sized,
{
    let z = ensemble.z_terminal();
    let n = z.len() as f64;
    EnsembleSummary {
        n_paths: ensemble.n_paths,
        n_steps: ensemble.n_steps,
        seed: ensemble.seed,
        mean_z_t: z.iter().sum::<f64>() / n,
        mean_log_z_t: z.iter().map(|v| v.ln()).sum::<f64>() / n,
        terminal_wealth: ensemble.x_terminal().and_then(|x| estimate_mean(&x).ok()),
        replication_error: process.and_then(|p| replication_error(ensemble, p)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpm::{self, LpmProblem};
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

    #[test]
    fn riskless_deflator_is_deterministic() {
        let m = validate_market(&RawMarket::constant(
            1.0,
            0.06,
            vec![0.06],
            vec![vec![0.15]],
        ))
        .unwrap();
        let e = simulate_deflator(&m, 50, 10, 3, Execution::Sequential).unwrap();
        for z in e.z_terminal() {
            assert!((z - (-0.06f64).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn deflator_moments_match() {
        let m = market();
        let e = simulate_deflator(&m, 200_000, 1, 11, Execution::Parallel).unwrap();
        let z = e.z_terminal();
        let mean = estimate_mean(&z).unwrap();
        assert!((mean.value - (-0.06f64).exp()).abs() < 3.0 * mean.std_error);
        let logs: Vec<f64> = z.iter().map(|v| v.ln()).collect();
        let lm = estimate_mean(&logs).unwrap();
        assert!((lm.value + 0.14).abs() < 3.0 * lm.std_error);
    }

    #[test]
    fn zero_policy_grows_at_the_rate() {
        let m = market();
        let e = simulate_deflator(&m, 20, 50, 5, Execution::Sequential).unwrap();
        let out = run_strategy(&m, &e, 2.0, Scheme::Euler, Execution::Sequential, |_, _| {
            0.0
        });
        for x in out.x_terminal().unwrap() {
            assert!((x - 2.0 * (1.0f64 + 0.06 / 50.0).powi(50)).abs() < 1e-12);
        }
    }

    #[test]
    fn modes_are_bit_identical() {
        let m = market();
        let s = lpm::solve(
            &LpmProblem {
                x0: 1.0,
                d: 1.3,
                gamma: 1.0618,
                cap: 10.0,
                q: 2.0,
            },
            &m,
        )
        .unwrap();
        let a = simulate_deflator(&m, 300, 16, 9, Execution::Sequential).unwrap();
        let b = simulate_deflator(&m, 300, 16, 9, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let xa = run_policy(&m, &s, &a, Scheme::Euler, Execution::Sequential);
        let xb = run_policy(&m, &s, &b, Scheme::Euler, Execution::Parallel);
        assert_eq!(xa.x_paths, xb.x_paths);
    }

    #[test]
    fn closed_form_wealth_is_a_martingale_after_deflation() {
        let m = market();
        let s = lpm::solve(
            &LpmProblem {
                x0: 1.0,
                d: 1.3,
                gamma: 1.0618,
                cap: 10.0,
                q: 1.0,
            },
            &m,
        )
        .unwrap();
        let e = simulate_deflator(&m, 20_000, 8, 21, Execution::Parallel).unwrap();
        for (_, mean, se) in martingale_profile(&e, &s) {
            assert!((mean - 1.0).abs() < 4.0 * se.max(1e-12));
        }
    }

    #[test]
    fn piecewise_market_deflator_is_exact() {
        let raw = RawMarket {
            horizon: 1.0,
            segments: vec![
                crate::market::RawSegment {
                    t_start: 0.0,
                    r: 0.02,
                    mu: vec![0.1],
                    sigma: vec![vec![0.2]],
                },
                crate::market::RawSegment {
                    t_start: 0.37,
                    r: 0.05,
                    mu: vec![0.05],
                    sigma: vec![vec![0.1]],
                },
            ],
        };
        let m = validate_market(&raw).unwrap();
        let e = simulate_deflator(&m, 100_000, 3, 4, Execution::Parallel).unwrap();
        let logs: Vec<f64> = e.z_terminal().iter().map(|v| v.ln()).collect();
        let lm = estimate_mean(&logs).unwrap();
        let mom = m.deflator_moments(0.0);
        assert!((lm.value - mom.m).abs() < 4.0 * lm.std_error);
        let var =
            logs.iter().map(|l| (l - lm.value).powi(2)).sum::<f64>() / (logs.len() - 1) as f64;
        assert!((var / (mom.nu * mom.nu) - 1.0).abs() < 0.02);
    }

    #[test]
    fn cvar_of_point_mass_and_hand_example() {
        let r = estimate_cvar(&[2.0; 10], 0.9, 5.0).unwrap();
        assert!((r.value - 3.0).abs() < 1e-15);
        let losses: Vec<f64> = (0..100).map(f64::from).collect();
        let (c, var) = cvar_of_losses(&losses, 0.95).unwrap();
        assert!((c - 97.0).abs() < 1e-12);
        assert_eq!(var, 94.0);
        assert!((ru_minimum(&losses, 0.95).unwrap() - 97.0).abs() < 1e-12);
    }

    #[test]
    fn cvar_splits_the_var_atom() {
        let losses = [1.0, 2.0, 3.0];
        // tail mass 1.5 observations: 3 + 0.5 * 2
        let (c, _) = cvar_of_losses(&losses, 0.5).unwrap();
        assert!((c - 4.0 / 1.5).abs() < 1e-15);
        assert!((ru_minimum(&losses, 0.5).unwrap() - c).abs() < 1e-15);
    }

    #[test]
    fn lpm_estimate_and_errors() {
        let r = estimate_lpm(&[0.0, 1.0, 2.0, 3.0], 2.0, 2.0).unwrap();
        assert!((r.value - 5.0 / 4.0).abs() < 1e-15);
        assert_eq!(
            estimate_lpm(&[], 1.0, 1.0).unwrap_err(),
            SimError::EmptySample
        );
        assert!(estimate_cvar(&[1.0, 2.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn standard_error_shrinks_with_paths() {
        let m = market();
        let a = simulate_deflator(&m, 20_000, 1, 1, Execution::Parallel).unwrap();
        let b = simulate_deflator(&m, 40_000, 1, 1, Execution::Parallel).unwrap();
        let sa = estimate_mean(&a.z_terminal()).unwrap().std_error;
        let sb = estimate_mean(&b.z_terminal()).unwrap().std_error;
        assert!(((sa / sb) / 2f64.sqrt() - 1.0).abs() < 0.2);
    }
}
