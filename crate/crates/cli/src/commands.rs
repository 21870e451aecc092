use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shortfall_core::baseline::{self, LpSolution, ScenarioSet};
use shortfall_core::cvar::{self, CvarSolution, RowStatus};
use shortfall_core::lpm::{self, Case, LpmProblem, Multipliers, PolicySolution};
use shortfall_core::mv::{self, MvMultipliers, MvSolution};
use shortfall_core::payoff::Piece;
use shortfall_core::sim::{self, EnsembleSummary, RiskEstimate};
use shortfall_core::simplex::LpStatus;
use shortfall_core::{validate_market, MarketModel, OptimalProcess, RawMarket};

use crate::config::{ProblemConfig, RunConfig};
use crate::output::{prepare_dir, read_scenarios, sig12, write_json, write_scenarios, Table};
use crate::{Cli, CliError, Command};

/// Parses the configuration, applies overrides and runs one command.
/// Returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = RunConfig::load(&cli.config)?;
    cfg.apply(&cli.overrides())?;
    execute(cli.cmd, &cfg)
}

pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    match cmd {
        Command::Solve => cmd_solve(cfg),
        Command::PolicyTable => cmd_policy_table(cfg),
        Command::Frontier => cmd_frontier(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::CompareStatic => cmd_compare_static(cfg),
    }
}

/// A solved instance of any kind.
pub enum Solved {
    Lpm(PolicySolution),
    Cvar(Box<CvarSolution>),
    Mv(MvSolution),
}

impl Solved {
    pub fn process(&self) -> &dyn OptimalProcess {
        match self {
            Solved::Lpm(s) => s,
            Solved::Cvar(s) => s.as_ref(),
            Solved::Mv(s) => s,
        }
    }
}

pub fn solve_problem(cfg: &RunConfig, model: &MarketModel) -> Result<Solved, CliError> {
    Ok(match cfg.problem {
        ProblemConfig::Lpm { .. } => Solved::Lpm(lpm::solve(&cfg.problem.lpm().unwrap(), model)?),
        ProblemConfig::Cvar { .. } => Solved::Cvar(Box::new(cvar::solve_cvar(
            &cfg.problem.cvar().unwrap(),
            model,
            &cfg.run.alpha_options(),
        )?)),
        ProblemConfig::Mv { .. } => Solved::Mv(mv::solve_mv(&cfg.problem.mv().unwrap(), model)?),
    })
}

/// Contents of `solution.json`; enough to rebuild the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub kind: String,
    pub market: RawMarket,
    pub problem: ProblemConfig,
    pub lambda: f64,
    pub eta: f64,
    pub case: Option<Case>,
    pub d_lower: Option<f64>,
    pub d_upper: Option<f64>,
    /// Partial moment (lpm), CVaR (cvar) or variance (mv).
    pub objective: f64,
    pub hit_probability: Option<f64>,
    pub alpha_star: Option<f64>,
    pub cvar: Option<f64>,
    /// Partial-moment instance embedded at `alpha*` (cvar).
    pub embedded: Option<LpmProblem>,
    pub expected_terminal_wealth: f64,
    pub initial_wealth: f64,
    pub multiple_optima: bool,
    /// The market offers no risk premium, so the policy is identically zero.
    pub zero_policy: bool,
    pub payoff: Vec<Piece>,
}

impl SolutionFile {
    pub fn new(cfg: &RunConfig, model: &MarketModel, solved: &Solved) -> Self {
        let p = solved.process();
        let zero_policy = model.deflator_moments(0.0).nu < shortfall_core::process::EPS_T;
        let base = |lambda, eta, objective| SolutionFile {
            kind: cfg.problem.kind().into(),
            market: cfg.market.clone(),
            problem: cfg.problem,
            lambda,
            eta,
            case: None,
            d_lower: None,
            d_upper: None,
            objective,
            hit_probability: None,
            alpha_star: None,
            cvar: None,
            embedded: None,
            expected_terminal_wealth: f64::NAN,
            initial_wealth: p.wealth(0.0, 1.0),
            multiple_optima: false,
            zero_policy,
            payoff: p.payoff().pieces().to_vec(),
        };
        let lpm_part = |s: &PolicySolution, objective| SolutionFile {
            case: Some(s.multipliers.case),
            d_lower: Some(s.d_lower),
            d_upper: Some(s.d_upper),
            hit_probability: Some(s.hit_probability),
            expected_terminal_wealth: s.expected_terminal_wealth(),
            multiple_optima: s.multiple_optima,
            ..base(s.multipliers.lambda, s.multipliers.eta, objective)
        };
        match solved {
            Solved::Lpm(s) => lpm_part(s, s.objective_value),
            Solved::Cvar(s) => SolutionFile {
                alpha_star: Some(s.alpha_star),
                cvar: Some(s.cvar),
                embedded: Some(s.lpm.problem),
                ..lpm_part(&s.lpm, s.cvar)
            },
            Solved::Mv(s) => {
                let mom = model.deflator_moments(0.0);
                let ctx = shortfall_core::kernels::PartialMomentContext {
                    m0: mom.m,
                    nu0: mom.nu,
                };
                SolutionFile {
                    expected_terminal_wealth: s.payoff().mean(&ctx),
                    ..base(s.multipliers.lambda, s.multipliers.eta, s.variance)
                }
            }
        }
    }

    /// Rebuilds the optimal process from the stored multipliers.
    pub fn rebuild(&self) -> Result<Box<dyn OptimalProcess>, CliError> {
        let model = validate_market(&self.market)?;
        let case = self.case.unwrap_or(Case::Regular);
        let m = Multipliers {
            lambda: self.lambda,
            eta: self.eta,
            case,
        };
        Ok(match self.problem {
            ProblemConfig::Lpm { .. } => Box::new(PolicySolution::from_parts(
                &self.problem.lpm().unwrap(),
                &model,
                m,
            )?),
            ProblemConfig::Cvar { .. } => {
                let emb = self.embedded.ok_or_else(|| {
                    CliError::Config("cvar solution without embedded problem".into())
                })?;
                Box::new(PolicySolution::from_parts(&emb, &model, m)?)
            }
            ProblemConfig::Mv { .. } => Box::new(MvSolution::from_parts(
                &self.problem.mv().unwrap(),
                &model,
                MvMultipliers {
                    lambda: self.lambda,
                    eta: self.eta,
                },
            )?),
        })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    prepare_dir(&cfg.run.out)
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let model = validate_market(&cfg.market)?;
    let solved = solve_problem(cfg, &model)?;
    let path = out_dir(cfg)?.join("solution.json");
    write_json(&path, &SolutionFile::new(cfg, &model, &solved))?;
    Ok(vec![path])
}

fn z_grid(cfg: &RunConfig, model: &MarketModel, t: f64) -> Result<Vec<f64>, CliError> {
    let n = cfg.run.z_points;
    if n == 0 {
        return Err(CliError::Config("z_points must be positive".into()));
    }
    // default range: +-4 standard deviations of log z(t)
    let (mean, var) = model.log_deflator_increment(0.0, t);
    let sd = var.sqrt().max(0.05);
    let lo = cfg.run.z_min.unwrap_or((mean - 4.0 * sd).exp());
    let hi = cfg.run.z_max.unwrap_or((mean + 4.0 * sd).exp());
    if !(lo > 0.0 && hi >= lo) {
        return Err(CliError::Config(format!("bad z range [{lo}, {hi}]")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect())
}

pub fn cmd_policy_table(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let model = validate_market(&cfg.market)?;
    let t = cfg.run.t;
    if !(t >= 0.0 && t < model.horizon()) {
        return Err(CliError::Config(format!(
            "policy time {t} must lie in [0, T)"
        )));
    }
    let solved = solve_problem(cfg, &model)?;
    let p = solved.process();
    let n = model.n_assets();
    let mut header = vec!["z".to_string(), "x".to_string()];
    header.extend((1..=n).map(|i| format!("pi_{i}")));
    header.extend((1..=n).map(|i| format!("w_{i}")));
    let mut table = Table::new(&header);
    for z in z_grid(cfg, &model, t)? {
        let x = p.wealth(t, z);
        let pi = p
            .policy(t, z)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let mut row = vec![sig12(z), sig12(x)];
        row.extend(pi.iter().map(|v| sig12(*v)));
        row.extend(
            pi.iter()
                .map(|v| sig12(if x != 0.0 { v / x } else { f64::NAN })),
        );
        table.push(row);
    }
    let path = out_dir(cfg)?.join("policy_table.csv");
    table.write(&path)?;
    Ok(vec![path])
}

/// Modelling choices written next to comparison artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionLedger {
    pub assumptions: Vec<String>,
    pub horizon: f64,
    pub rates: Vec<f64>,
    pub problem: ProblemConfig,
    pub safe_level: Option<f64>,
    pub seed: u64,
    pub scenarios: usize,
    pub search: crate::config::Search,
}

fn ledger(cfg: &RunConfig, model: &MarketModel) -> AssumptionLedger {
    AssumptionLedger {
        assumptions: cfg.run.assumptions.clone(),
        horizon: model.horizon(),
        rates: cfg.market.segments.iter().map(|s| s.r).collect(),
        problem: cfg.problem,
        safe_level: cfg.problem.cvar().map(|p| p.safe_level(model)),
        seed: cfg.run.seed,
        scenarios: cfg.run.scenarios,
        search: cfg.run.search,
    }
}

fn status_str(s: RowStatus) -> &'static str {
    match s {
        RowStatus::Ok => "ok",
        RowStatus::Infeasible => "infeasible",
        RowStatus::Failed => "failed",
    }
}

pub fn cmd_frontier(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let template = cfg.problem.cvar().ok_or_else(|| {
        CliError::Config(format!(
            "frontier needs a cvar problem, got {}",
            cfg.problem.kind()
        ))
    })?;
    let model = validate_market(&cfg.market)?;
    let rows = cvar::frontier(
        &template,
        &model,
        &cfg.run.d_grid,
        &cfg.run.alpha_options(),
        cfg.run.execution,
    );
    let mut table = Table::new(&["d", "alpha_star", "cvar", "status"]);
    for r in &rows {
        table.push(vec![
            sig12(r.d),
            sig12(r.alpha_star),
            sig12(r.cvar),
            status_str(r.status).into(),
        ]);
    }
    let dir = out_dir(cfg)?;
    let (csv, led) = (dir.join("frontier.csv"), dir.join("assumptions.json"));
    table.write(&csv)?;
    write_json(&led, &ledger(cfg, &model))?;
    Ok(vec![csv, led])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub kind: String,
    pub scheme: sim::Scheme,
    pub summary: EnsembleSummary,
    /// Risk of the simulated terminal wealth, in the problem's own measure.
    pub risk: Option<RiskEstimate>,
    /// Closed-form value of the same measure.
    pub risk_closed_form: Option<f64>,
    pub martingale_max_deviation: f64,
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let model = validate_market(&cfg.market)?;
    let solved = solve_problem(cfg, &model)?;
    let p = solved.process();
    let exec = cfg.run.execution;
    let ens = sim::simulate_deflator(&model, cfg.run.paths, cfg.run.steps, cfg.run.seed, exec)?;
    let ens = sim::run_policy(&model, p, &ens, cfg.run.scheme, exec);
    let x = ens.x_terminal().unwrap_or_default();
    let (risk, closed) = match &solved {
        Solved::Lpm(s) => (
            sim::estimate_lpm(&x, s.problem.gamma, s.problem.q).ok(),
            Some(s.objective_value),
        ),
        Solved::Cvar(s) => (
            sim::estimate_cvar(&x, s.problem.beta, s.xbar).ok(),
            Some(s.cvar),
        ),
        Solved::Mv(s) => (None, Some(s.variance)),
    };
    let profile = sim::martingale_profile(&ens, p);
    let x0 = cfg.problem.x0();
    let report = SimulationReport {
        kind: cfg.problem.kind().into(),
        scheme: cfg.run.scheme,
        summary: sim::summarize(&ens, Some(p)),
        risk,
        risk_closed_form: closed,
        martingale_max_deviation: profile
            .iter()
            .map(|(_, m, _)| (m - x0).abs())
            .fold(0.0, f64::max),
    };
    let dir = out_dir(cfg)?;
    let json = dir.join("ensemble_summary.json");
    write_json(&json, &report)?;
    let mut table = Table::new(&["path", "z_T", "x_sim", "x_closed"]);
    for (i, (z, xs)) in ens.z_terminal().iter().zip(&x).enumerate() {
        table.push(vec![
            i.to_string(),
            sig12(*z),
            sig12(*xs),
            sig12(p.terminal_wealth(*z)),
        ]);
    }
    let csv = dir.join("terminal.csv");
    table.write(&csv)?;
    let mut mart = Table::new(&["t", "mean_zx", "std_error"]);
    for (t, m, se) in profile {
        mart.push(vec![sig12(t), sig12(m), sig12(se)]);
    }
    let mcsv = dir.join("martingale.csv");
    mart.write(&mcsv)?;
    Ok(vec![json, csv, mcsv])
}

fn lp_status_str(s: LpStatus) -> &'static str {
    match s {
        LpStatus::Optimal => "optimal",
        LpStatus::Infeasible => "infeasible",
        LpStatus::Unbounded => "unbounded",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub d: f64,
    pub beta: f64,
    pub static_solution: LpSolution,
    pub dynamic_cvar: f64,
    pub dynamic_status: RowStatus,
}

/// Static and dynamic CVaR over the configured `d x beta` grid.
pub fn compare_rows(
    cfg: &RunConfig,
    model: &MarketModel,
    sc: &ScenarioSet,
) -> Result<Vec<CompareRow>, CliError> {
    let template = cfg.problem.cvar().ok_or_else(|| {
        CliError::Config(format!(
            "compare-static needs a cvar problem, got {}",
            cfg.problem.kind()
        ))
    })?;
    let betas = if cfg.run.betas.is_empty() {
        vec![template.beta]
    } else {
        cfg.run.betas.clone()
    };
    let cells: Vec<(f64, f64)> = cfg
        .run
        .d_grid
        .iter()
        .flat_map(|&d| betas.iter().map(move |&b| (d, b)))
        .collect();
    let xbar = template.safe_level(model);
    let opts = cfg.run.alpha_options();
    let rows = cfg.run.execution.map(&cells, |&(d, beta)| {
        let st = baseline::solve_ru(sc, beta, d, template.x0, xbar)?;
        let p = cvar::CvarProblem {
            d,
            beta,
            ..template
        };
        let (dynamic_cvar, dynamic_status) = match cvar::solve_cvar(&p, model, &opts) {
            Ok(s) => (s.cvar, RowStatus::Ok),
            Err(e) => match CliError::from(e) {
                CliError::Infeasible(_) => (f64::NAN, RowStatus::Infeasible),
                _ => (f64::NAN, RowStatus::Failed),
            },
        };
        Ok(CompareRow {
            d,
            beta,
            static_solution: st,
            dynamic_cvar,
            dynamic_status,
        })
    });
    rows.into_iter()
        .collect::<Result<Vec<_>, baseline::BaselineError>>()
        .map_err(CliError::from)
}

pub fn cmd_compare_static(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let model = validate_market(&cfg.market)?;
    let sc = match &cfg.run.scenarios_file {
        Some(f) => read_scenarios(f, cfg.run.seed)?,
        None if cfg.run.d_grid.is_empty() => ScenarioSet {
            n_assets: model.n_assets(),
            returns: Vec::new(),
            seed: cfg.run.seed,
        },
        None => baseline::generate_scenarios(
            &model,
            cfg.run.scenarios,
            cfg.run.seed,
            cfg.run.execution,
        )?,
    };
    let rows = compare_rows(cfg, &model, &sc)?;
    let mut table = Table::new(&[
        "d",
        "beta",
        "static_cvar",
        "dynamic_cvar",
        "static_status",
        "dynamic_status",
    ]);
    for r in &rows {
        table.push(vec![
            sig12(r.d),
            sig12(r.beta),
            sig12(r.static_solution.objective),
            sig12(r.dynamic_cvar),
            lp_status_str(r.static_solution.status).into(),
            status_str(r.dynamic_status).into(),
        ]);
    }
    let dir = out_dir(cfg)?;
    let csv = dir.join("compare.csv");
    table.write(&csv)?;
    let lp = dir.join("lp_solutions.json");
    write_json(&lp, &rows)?;
    let led = dir.join("assumptions.json");
    write_json(&led, &ledger(cfg, &model))?;
    let mut files = vec![csv, lp, led];
    if cfg.run.export_scenarios {
        let f = dir.join("scenarios.csv");
        write_scenarios(&f, &sc)?;
        files.push(f);
    }
    Ok(files)
}
