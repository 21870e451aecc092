//! Run configuration: a TOML file with `market`, `problem` and `run`
//! blocks, plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shortfall_core::cvar::{AlphaSearchOptions, CvarProblem, SearchMethod};
use shortfall_core::exec::Execution;
use shortfall_core::mv::MvProblem;
use shortfall_core::sim::Scheme;
use shortfall_core::{LpmProblem, RawMarket};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: RawMarket,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub run: RunBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemConfig {
    Lpm {
        x0: f64,
        d: f64,
        gamma: f64,
        cap: f64,
        q: f64,
    },
    Cvar {
        x0: f64,
        d: f64,
        cap: f64,
        beta: f64,
        xbar: Option<f64>,
    },
    Mv {
        x0: f64,
        d: f64,
    },
}

impl ProblemConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemConfig::Lpm { .. } => "lpm",
            ProblemConfig::Cvar { .. } => "cvar",
            ProblemConfig::Mv { .. } => "mv",
        }
    }

    pub fn x0(&self) -> f64 {
        match *self {
            ProblemConfig::Lpm { x0, .. }
            | ProblemConfig::Cvar { x0, .. }
            | ProblemConfig::Mv { x0, .. } => x0,
        }
    }

    pub fn with_d(self, value: f64) -> Self {
        match self {
            ProblemConfig::Lpm {
                x0, gamma, cap, q, ..
            } => ProblemConfig::Lpm {
                x0,
                d: value,
                gamma,
                cap,
                q,
            },
            ProblemConfig::Cvar {
                x0,
                cap,
                beta,
                xbar,
                ..
            } => ProblemConfig::Cvar {
                x0,
                d: value,
                cap,
                beta,
                xbar,
            },
            ProblemConfig::Mv { x0, .. } => ProblemConfig::Mv { x0, d: value },
        }
    }

    pub fn lpm(&self) -> Option<LpmProblem> {
        match *self {
            ProblemConfig::Lpm {
                x0,
                d,
                gamma,
                cap,
                q,
            } => Some(LpmProblem {
                x0,
                d,
                gamma,
                cap,
                q,
            }),
            _ => None,
        }
    }

    pub fn cvar(&self) -> Option<CvarProblem> {
        match *self {
            ProblemConfig::Cvar {
                x0,
                d,
                cap,
                beta,
                xbar,
            } => Some(CvarProblem {
                x0,
                d,
                cap,
                beta,
                xbar,
            }),
            _ => None,
        }
    }

    pub fn mv(&self) -> Option<MvProblem> {
        match *self {
            ProblemConfig::Mv { x0, d } => Some(MvProblem { x0, d }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Search {
    #[default]
    Golden,
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunBlock {
    pub seed: u64,
    pub paths: usize,
    pub steps: usize,
    pub scheme: Scheme,
    pub scenarios: usize,
    pub execution: Execution,
    pub search: Search,
    /// Golden-section interval width / gradient tolerance.
    pub tol: f64,
    /// Target grid for `frontier` and `compare-static`.
    pub d_grid: Vec<f64>,
    /// Confidence levels for `compare-static`; empty means the problem's own.
    pub betas: Vec<f64>,
    /// Time and deflator grid of `policy-table`.
    pub t: f64,
    pub z_points: usize,
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
    /// Scenario file to use instead of sampling.
    pub scenarios_file: Option<PathBuf>,
    pub export_scenarios: bool,
    /// Free-text modelling assumptions copied into the ledger artifact.
    pub assumptions: Vec<String>,
    pub out: PathBuf,
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            seed: 42,
            paths: 10_000,
            steps: 128,
            scheme: Scheme::Euler,
            scenarios: 20_000,
            execution: Execution::Parallel,
            search: Search::Golden,
            tol: 1e-8,
            d_grid: Vec::new(),
            betas: Vec::new(),
            t: 0.0,
            z_points: 400,
            z_min: None,
            z_max: None,
            scenarios_file: None,
            export_scenarios: false,
            assumptions: Vec::new(),
            out: PathBuf::from("out"),
        }
    }
}

impl RunBlock {
    pub fn alpha_options(&self) -> AlphaSearchOptions {
        let mut o = AlphaSearchOptions::default();
        match self.search {
            Search::Golden => {
                o.method = SearchMethod::GoldenSection;
                o.tol = self.tol;
            }
            Search::Gradient => {
                o.method = SearchMethod::PaperGradient;
                o.eps = self.tol;
            }
        }
        o
    }
}

/// Flag overrides; `None` leaves the file value alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub q: Option<f64>,
    pub beta: Option<f64>,
    pub d: Option<f64>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub scenarios: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative paths in the file are relative to the file
        if let Some(dir) = path.parent() {
            if cfg.run.out.is_relative() {
                cfg.run.out = dir.join(&cfg.run.out);
            }
            if let Some(f) = cfg.run.scenarios_file.as_mut().filter(|f| f.is_relative()) {
                *f = dir.join(&*f);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(d) = o.d {
            self.problem = self.problem.with_d(d);
        }
        if let Some(v) = o.q {
            match &mut self.problem {
                ProblemConfig::Lpm { q, .. } => *q = v,
                p => {
                    return Err(CliError::Config(format!(
                        "--q applies to lpm problems, not {}",
                        p.kind()
                    )))
                }
            }
        }
        if let Some(v) = o.beta {
            match &mut self.problem {
                ProblemConfig::Cvar { beta, .. } => *beta = v,
                p => {
                    return Err(CliError::Config(format!(
                        "--beta applies to cvar problems, not {}",
                        p.kind()
                    )))
                }
            }
        }
        let r = &mut self.run;
        r.seed = o.seed.unwrap_or(r.seed);
        r.paths = o.paths.unwrap_or(r.paths);
        r.steps = o.steps.unwrap_or(r.steps);
        r.scenarios = o.scenarios.unwrap_or(r.scenarios);
        if let Some(out) = &o.out {
            r.out = out.clone();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[market]
horizon = 1.0
[[market.segments]]
t_start = 0.0
r = 0.06
mu = [0.12]
sigma = [[0.15]]

[problem]
kind = "lpm"
x0 = 1.0
d = 1.3
gamma = 1.0618
cap = 10.0
q = 2.0
"#;

    #[test]
    fn parses_with_run_defaults() {
        let c = RunConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(c.problem.kind(), "lpm");
        assert_eq!(c.run, RunBlock::default());
    }

    #[test]
    fn overrides() {
        let mut c = RunConfig::from_toml(EXAMPLE).unwrap();
        c.apply(&Overrides {
            q: Some(1.0),
            d: Some(1.2),
            seed: Some(7),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(c.problem.lpm().unwrap().q, 1.0);
        assert_eq!(c.problem.lpm().unwrap().d, 1.2);
        assert_eq!(c.run.seed, 7);
        assert!(matches!(
            c.apply(&Overrides {
                beta: Some(0.9),
                ..Default::default()
            }),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn unknown_run_key_is_rejected() {
        let text = format!("{EXAMPLE}\n[run]\nsede = 3\n");
        assert!(matches!(
            RunConfig::from_toml(&text),
            Err(CliError::Config(_))
        ));
    }
}
