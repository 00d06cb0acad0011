use clap::Args;
use serde::Serialize;
use soft_ess_core::climate::{compare_profiles, dp_average_fitness, uniform_crossing_point, DP_STEP};
use soft_ess_core::fitness::average_fitness;
use soft_ess_core::{DisturbanceKind, Error};

use super::StrategySource;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, out_path, write_csv, write_json, Cell};
use crate::scenario::{DisturbanceSpec, Scenario, ScenarioArgs};

#[derive(Debug, Args)]
pub struct ClimateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub source: StrategySource,
    /// The disturbance the population meets instead of `--disturbance`.
    #[arg(long)]
    pub disturbance2: Option<String>,
    /// Also write the derivative of the average fitness in p.
    #[arg(long)]
    pub dp: bool,
    /// Half-step of the central difference in p.
    #[arg(long, default_value_t = DP_STEP)]
    pub h: f64,
    #[arg(long)]
    pub probes: Option<usize>,
}

#[derive(Serialize)]
struct Delta {
    lambda_bar_1: f64,
    lambda_bar_2: f64,
    delta: f64,
    crossings: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uniform_crossing_point: Option<f64>,
}

#[derive(Serialize)]
struct Dp {
    a: f64,
    p: f64,
    h: f64,
    dp: f64,
}

pub fn run(args: &ClimateArgs) -> CliResult<()> {
    let scn = Scenario::resolve(&args.scenario)?;
    let d2 = match &args.disturbance2 {
        Some(text) => Some(DisturbanceSpec::parse(text)?),
        None => scn.file.disturbance2.clone(),
    };
    if d2.is_none() && !args.dp {
        return Err(CliError::usage("climate needs --disturbance2, --dp, or both"));
    }
    let r = args.source.resolve(&scn)?;
    ensure_dir(&scn.out_dir)?;

    if let Some(spec) = d2 {
        let d1 = &r.disturbance;
        let d2 = spec.build()?;
        let probes = args.probes.or(scn.file.probes).unwrap_or(2001);
        let cmp = compare_profiles(&r.strategy, &r.params, d1, &d2, probes, &scn.tol)?;
        write_csv(
            &out_path(&scn.out_dir, "compare.csv"),
            &["y", "phi_1", "phi_2", "diff"],
            cmp.probes
                .iter()
                .map(|pb| vec![Cell::Num(pb.y), Cell::Num(pb.phi_1), Cell::Num(pb.phi_2), Cell::Num(pb.diff())]),
        )?;
        let lambda_bar_1 = average_fitness(&r.strategy, &r.params, d1, &scn.tol)?;
        let lambda_bar_2 = average_fitness(&r.strategy, &r.params, &d2, &scn.tol)?;
        let both_uniform = d1.kind() == DisturbanceKind::Uniform && d2.kind() == DisturbanceKind::Uniform;
        write_json(
            &out_path(&scn.out_dir, "delta.json"),
            &Delta {
                lambda_bar_1,
                lambda_bar_2,
                delta: lambda_bar_2 - lambda_bar_1,
                crossings: cmp.crossings,
                uniform_crossing_point: both_uniform
                    .then(|| uniform_crossing_point(d1.t_low(), d1.t_high(), d2.t_low(), d2.t_high()))
                    .flatten(),
            },
        )?;
    }
    if args.dp {
        let (a, p) = (r.params.a(), r.params.p());
        let dp = dp_average_fitness(&r.strategy, a, p, &r.disturbance, args.h)
            .map_err(|e| match e {
                Error::InvalidDomain(_) => CliError::usage(format!("--dp: {e}")),
                other => other.into(),
            })?;
        write_json(&out_path(&scn.out_dir, "dp.json"), &Dp { a, p, h: args.h, dp })?;
    }
    Ok(())
}
