use clap::Args;
use serde::Serialize;
use soft_ess_core::fitness::{ess_certificate, CERTIFY_TOL};
use soft_ess_core::solver::{degenerate_cases, solve_ess, Residuals};
use soft_ess_core::{EssSolution, PhaseThreshold};

use super::params;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, out_path, write_csv, write_json, Cell};
use crate::scenario::{Scenario, ScenarioArgs};

/// Largest residual accepted under `--strict`.
pub const RESIDUAL_LIMIT: f64 = 1e-8;

#[derive(Debug, Args)]
pub struct EssArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Serialize)]
struct ResidualsOut {
    threshold: f64,
    gamma: f64,
    x_c: f64,
    endpoint: f64,
    knots: f64,
    max: f64,
}

impl From<Residuals> for ResidualsOut {
    fn from(r: Residuals) -> Self {
        ResidualsOut {
            threshold: r.threshold,
            gamma: r.gamma,
            x_c: r.x_c,
            endpoint: r.endpoint,
            knots: r.knots,
            max: r.max(),
        }
    }
}

#[derive(Serialize)]
struct Summary {
    a: f64,
    p: f64,
    #[serde(rename = "a_M")]
    a_m: Option<f64>,
    regime: String,
    gamma: f64,
    x_c: f64,
    lambda: f64,
    disturbance: String,
    grid: usize,
    knots: usize,
    residuals: ResidualsOut,
    #[serde(skip_serializing_if = "Option::is_none")]
    certified: Option<bool>,
}

#[derive(Serialize)]
struct DegenerateSummary {
    a: f64,
    p: f64,
    regime: &'static str,
    ess: String,
}

pub fn a_m_value(a_m: PhaseThreshold) -> Option<f64> {
    match a_m {
        PhaseThreshold::Finite(v) => Some(v),
        PhaseThreshold::Unbounded => None,
    }
}

/// Rows `x, F_ν, F_μ, g` at the knots, starting from 0.
fn ess_rows(ess: &EssSolution, d: &soft_ess_core::Disturbance) -> Vec<Vec<Cell>> {
    let s = &ess.strategy;
    let knots = s.ac_knots();
    let mut xs: Vec<f64> = Vec::with_capacity(knots.len() + 1);
    if knots[0].0 > 0.0 {
        xs.push(0.0);
    }
    xs.extend(knots.iter().map(|k| k.0));
    xs.iter()
        .map(|&x| {
            vec![
                Cell::Num(x),
                Cell::Num(s.f_nu(x)),
                Cell::Num(s.f_mu(x)),
                Cell::Num(ess.density(d, x)),
            ]
        })
        .collect()
}

pub fn run(args: &EssArgs) -> CliResult<()> {
    let scn = Scenario::resolve(&args.scenario)?;
    let (a, p) = (scn.a()?, scn.p()?);
    let d = scn.disturbance()?;
    ensure_dir(&scn.out_dir)?;
    if a == 0.0 || p == 1.0 {
        let which = degenerate_cases(a, p, &d).map_err(|e| CliError::usage(e.to_string()))?;
        let summary = DegenerateSummary {
            a,
            p,
            regime: "degenerate",
            ess: which.to_string(),
        };
        return write_json(&out_path(&scn.out_dir, "summary.json"), &summary);
    }
    let pr = params(a, p)?;
    let ess = solve_ess(&pr, &d, scn.grid, &scn.tol)?;
    write_csv(&out_path(&scn.out_dir, "ess.csv"), &["x", "F_nu", "F_mu", "g"], ess_rows(&ess, &d))?;

    let certified = if scn.strict {
        let cert = ess_certificate(&ess.strategy, &pr, &d, scn.grid, &scn.tol)?;
        Some(cert.is_certified(CERTIFY_TOL) && ess.residuals.max() <= RESIDUAL_LIMIT)
    } else {
        None
    };
    let summary = Summary {
        a,
        p,
        a_m: a_m_value(ess.a_m),
        regime: ess.regime.to_string(),
        gamma: ess.gamma,
        x_c: ess.x_c,
        lambda: ess.lambda,
        disturbance: d.to_string(),
        grid: scn.grid,
        knots: ess.strategy.ac_knots().len(),
        residuals: ess.residuals.into(),
        certified,
    };
    write_json(&out_path(&scn.out_dir, "summary.json"), &summary)?;
    if certified == Some(false) {
        return Err(CliError::Certification(format!(
            "equilibrium failed its certificate (residual {:.3e})",
            ess.residuals.max()
        )));
    }
    Ok(())
}
