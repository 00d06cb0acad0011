pub mod climate;
pub mod ess;
pub mod fitness;
pub mod simulate;
pub mod sweep;

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use soft_ess_core::solver::solve_ess;
use soft_ess_core::{CompetitionParams, Disturbance, EssSolution, MixedStrategy};

use crate::error::{CliError, CliResult};
use crate::scenario::{read_json, Scenario};

pub fn params(a: f64, p: f64) -> CliResult<CompetitionParams> {
    CompetitionParams::new(a, p).map_err(|e| CliError::usage(format!("--a {a} --p {p}: {e}")))
}

/// A strategy on disk: an atom at 0 plus knots of the continuous part's CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyFile {
    #[serde(default)]
    pub atom: f64,
    pub knots: Vec<(f64, f64)>,
}

impl StrategyFile {
    pub fn load(path: &Path) -> CliResult<MixedStrategy> {
        let file: StrategyFile = read_json(path)?;
        MixedStrategy::new(file.atom, file.knots)
            .map_err(|e| CliError::usage(format!("{}: invalid strategy: {e}", path.display())))
    }
}

/// Where the strategy under study comes from.
#[derive(Debug, Clone, Args)]
pub struct StrategySource {
    /// Use the equilibrium for the scenario (the default).
    #[arg(long, conflicts_with = "strategy")]
    pub from_ess: bool,
    /// JSON file `{"atom": γ, "knots": [[x, F], ...]}`.
    #[arg(long)]
    pub strategy: Option<PathBuf>,
}

pub struct Resolved {
    pub params: CompetitionParams,
    pub disturbance: Disturbance,
    pub ess: Option<EssSolution>,
    pub strategy: MixedStrategy,
}

impl StrategySource {
    pub fn resolve(&self, scenario: &Scenario) -> CliResult<Resolved> {
        let params = params(scenario.a()?, scenario.p()?)?;
        let disturbance = scenario.disturbance()?;
        match &self.strategy {
            Some(path) => Ok(Resolved {
                params,
                disturbance,
                ess: None,
                strategy: StrategyFile::load(path)?,
            }),
            None => {
                let ess = solve_ess(&params, &disturbance, scenario.grid, &scenario.tol)?;
                Ok(Resolved {
                    params,
                    disturbance,
                    strategy: ess.strategy.clone(),
                    ess: Some(ess),
                })
            }
        }
    }
}
