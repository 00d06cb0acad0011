//! Scenario files and the flags that override them.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use soft_ess_core::{Disturbance, Tolerances};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceSpec {
    Uniform { low: f64, high: f64 },
    Piecewise { knots: Vec<(f64, f64)> },
}

/// Contents of a `piecewise:@file.json` file.
#[derive(Deserialize)]
#[serde(untagged)]
enum PiecewiseFile {
    Spec(DisturbanceSpec),
    Knots { knots: Vec<(f64, f64)> },
    Bare(Vec<(f64, f64)>),
}

impl DisturbanceSpec {
    /// `uniform:LOW,HIGH` or `piecewise:@path.json`.
    pub fn parse(text: &str) -> CliResult<Self> {
        let (kind, rest) = text
            .split_once(':')
            .ok_or_else(|| CliError::usage(format!("disturbance `{text}`: expected uniform:LOW,HIGH or piecewise:@FILE")))?;
        match kind {
            "uniform" => {
                let (lo, hi) = rest
                    .split_once(',')
                    .ok_or_else(|| CliError::usage(format!("disturbance `{text}`: expected uniform:LOW,HIGH")))?;
                Ok(DisturbanceSpec::Uniform {
                    low: parse_f64(lo, "uniform low")?,
                    high: parse_f64(hi, "uniform high")?,
                })
            }
            "piecewise" => {
                let path = rest
                    .strip_prefix('@')
                    .ok_or_else(|| CliError::usage(format!("disturbance `{text}`: expected piecewise:@FILE")))?;
                Self::from_file(Path::new(path))
            }
            other => Err(CliError::usage(format!("unknown disturbance kind `{other}`"))),
        }
    }

    fn from_file(path: &Path) -> CliResult<Self> {
        let parsed: PiecewiseFile = read_json(path)?;
        Ok(match parsed {
            PiecewiseFile::Spec(spec) => spec,
            PiecewiseFile::Knots { knots } | PiecewiseFile::Bare(knots) => DisturbanceSpec::Piecewise { knots },
        })
    }

    pub fn build(&self) -> CliResult<Disturbance> {
        let d = match self {
            DisturbanceSpec::Uniform { low, high } => Disturbance::uniform(*low, *high),
            DisturbanceSpec::Piecewise { knots } => Disturbance::piecewise_linear(knots),
        };
        d.map_err(|e| CliError::usage(format!("invalid disturbance: {e}")))
    }
}

fn parse_f64(s: &str, what: &str) -> CliResult<f64> {
    s.trim()
        .parse()
        .map_err(|_| CliError::usage(format!("{what}: `{s}` is not a number")))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesFile {
    pub abs: Option<f64>,
    pub rel: Option<f64>,
}

/// `scenario.json`; every field is optional and flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub a: Option<f64>,
    pub p: Option<f64>,
    pub disturbance: Option<DisturbanceSpec>,
    pub disturbance2: Option<DisturbanceSpec>,
    pub grid: Option<usize>,
    pub tolerances: Option<TolerancesFile>,
    pub seed: Option<u64>,
    pub probes: Option<usize>,
    pub population: Option<usize>,
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON; flags given on the command line override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Competition strength.
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Survival probability of an individual present at the disturbance.
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    /// `uniform:LOW,HIGH` or `piecewise:@FILE.json`.
    #[arg(long)]
    pub disturbance: Option<String>,
    /// Number of equally spaced mass levels used to tabulate the equilibrium.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Exit with status 4 when a certificate or monotonicity check fails.
    #[arg(long)]
    pub strict: bool,
}

pub const DEFAULT_GRID: usize = 2001;

/// Flags merged over the scenario file.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub a: Option<f64>,
    pub p: Option<f64>,
    pub disturbance: Option<DisturbanceSpec>,
    pub grid: usize,
    pub tol: Tolerances,
    pub out_dir: PathBuf,
    pub strict: bool,
}

impl Scenario {
    pub fn resolve(args: &ScenarioArgs) -> CliResult<Self> {
        let file: ScenarioFile = match &args.config {
            Some(path) => read_json(path)?,
            None => ScenarioFile::default(),
        };
        let disturbance = match &args.disturbance {
            Some(text) => Some(DisturbanceSpec::parse(text)?),
            None => file.disturbance.clone(),
        };
        let file_tol = file.tolerances.clone().unwrap_or_default();
        let defaults = Tolerances::default();
        let abs = args.abs_tol.or(file_tol.abs).unwrap_or(defaults.abs_tol);
        let rel = args.rel_tol.or(file_tol.rel).unwrap_or(defaults.rel_tol);
        let tol = Tolerances::new(abs, rel, defaults.max_iter).map_err(|e| CliError::usage(format!("tolerances: {e}")))?;
        let grid = args.grid.or(file.grid).unwrap_or(DEFAULT_GRID);
        if grid < 3 {
            return Err(CliError::usage("--grid must be at least 3"));
        }
        Ok(Scenario {
            a: args.a.or(file.a),
            p: args.p.or(file.p),
            disturbance,
            grid,
            tol,
            out_dir: args.out_dir.clone(),
            strict: args.strict,
            file,
        })
    }

    pub fn a(&self) -> CliResult<f64> {
        self.a.ok_or_else(|| CliError::usage("missing --a"))
    }

    pub fn p(&self) -> CliResult<f64> {
        self.p.ok_or_else(|| CliError::usage("missing --p"))
    }

    /// The disturbance, defaulting to uniform on `[0, 1]`.
    pub fn disturbance(&self) -> CliResult<Disturbance> {
        self.disturbance
            .clone()
            .unwrap_or(DisturbanceSpec::Uniform { low: 0.0, high: 1.0 })
            .build()
    }
}
