use clap::Args;
use serde::Serialize;
use soft_ess_core::fitness::{average_fitness, ess_certificate, max_average_fitness, CERTIFY_TOL};

use super::StrategySource;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, fmt_num, out_path, write_csv, write_json, Cell};
use crate::scenario::{Scenario, ScenarioArgs};

#[derive(Debug, Args)]
pub struct FitnessArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub source: StrategySource,
    /// Number of evenly spaced probes (strategy and density knots are added).
    #[arg(long)]
    pub probes: Option<usize>,
    /// Print the largest average fitness any strategy can reach, `(1 - e^-a)/a`, and exit.
    #[arg(long)]
    pub max_average: bool,
}

#[derive(Serialize)]
struct Certificate {
    level: f64,
    lambda_hat: f64,
    support_deviation: f64,
    off_support_excess: f64,
    tolerance: f64,
    certified: bool,
    average_fitness: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
}

pub fn run(args: &FitnessArgs) -> CliResult<()> {
    let scn = Scenario::resolve(&args.scenario)?;
    if args.max_average {
        let a = scn.a()?;
        if !(a >= 0.0) {
            return Err(CliError::usage("--max-average needs a ≥ 0"));
        }
        println!("{}", fmt_num(max_average_fitness(a)));
        return Ok(());
    }
    let r = args.source.resolve(&scn)?;
    let probes = args.probes.or(scn.file.probes).unwrap_or(2001);
    let profile = ess_certificate(&r.strategy, &r.params, &r.disturbance, probes, &scn.tol)?;
    let lambda_bar = average_fitness(&r.strategy, &r.params, &r.disturbance, &scn.tol)?;

    ensure_dir(&scn.out_dir)?;
    write_csv(
        &out_path(&scn.out_dir, "profile.csv"),
        &["y", "phi", "on_support"],
        profile
            .probes
            .iter()
            .map(|pr| vec![Cell::Num(pr.y), Cell::Num(pr.phi), Cell::Bool(pr.on_support)]),
    )?;
    let certified = profile.is_certified(CERTIFY_TOL);
    write_json(
        &out_path(&scn.out_dir, "certificate.json"),
        &Certificate {
            level: profile.level,
            lambda_hat: profile.lambda_hat,
            support_deviation: profile.support_deviation,
            off_support_excess: profile.off_support_excess,
            tolerance: CERTIFY_TOL,
            certified,
            average_fitness: lambda_bar,
            lambda: r.ess.as_ref().map(|e| e.lambda),
        },
    )?;
    if scn.strict && !certified {
        return Err(CliError::Certification(format!(
            "profile is not flat on the support (spread {:.3e}, excess {:.3e})",
            profile.support_deviation, profile.off_support_excess
        )));
    }
    Ok(())
}
