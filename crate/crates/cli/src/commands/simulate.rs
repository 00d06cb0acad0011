use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use soft_ess_core::oracle::{
    best_response_iterate, mc_average_fitness_replication, mc_phi_replication, summarize, McConfig, McEstimate,
};
use soft_ess_core::solver::solve_ess;

use super::StrategySource;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, out_path, write_csv, write_json, Cell};
use crate::scenario::{Scenario, ScenarioArgs};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub source: StrategySource,
    /// Seed of the random stream; required here or in the scenario file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Individuals per replication.
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Number of evenly spaced arrival dates at which φ is estimated.
    #[arg(long)]
    pub probes: Option<usize>,
    /// Do not let individuals sharing the atom at 0 compete with each other.
    #[arg(long)]
    pub no_atom_self_competition: bool,
    /// Also run the discretised best-response dynamic.
    #[arg(long)]
    pub best_response: bool,
    #[arg(long, default_value_t = 200)]
    pub br_grid: usize,
    #[arg(long, default_value_t = 10_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    pub damping: f64,
}

#[derive(Serialize)]
struct McSummary {
    seed: u64,
    population: usize,
    replications: usize,
    mean: f64,
    ci_half_width: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    within_3ci: Option<bool>,
}

#[derive(Serialize)]
struct BrSummary {
    grid: usize,
    iterations: usize,
    damping: f64,
    atom: f64,
    residual: f64,
    ks_to_ess: f64,
}

/// Replications run in parallel and are reduced in index order.
fn estimate(cfg: &McConfig, one: impl Fn(usize) -> f64 + Sync + Send) -> McEstimate {
    let values: Vec<f64> = (0..cfg.replications).into_par_iter().map(one).collect();
    summarize(&values)
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let scn = Scenario::resolve(&args.scenario)?;
    let seed = args
        .seed
        .or(scn.file.seed)
        .ok_or_else(|| CliError::usage("simulate needs --seed"))?;
    let defaults = McConfig::default();
    let cfg = McConfig::new(
        args.population.or(scn.file.population).unwrap_or(defaults.population),
        args.replications.or(scn.file.replications).unwrap_or(defaults.replications),
        seed,
    )
    .map_err(|e| CliError::usage(e.to_string()))?
    .with_atom_self_competition(!args.no_atom_self_competition);
    let r = args.source.resolve(&scn)?;
    let (s, pr, d) = (&r.strategy, &r.params, &r.disturbance);
    ensure_dir(&scn.out_dir)?;

    let probes = args.probes.or(scn.file.probes).unwrap_or(21).max(2);
    let reach = d.t_high().max(s.ac_knots().last().map_or(0.0, |k| k.0));
    let ys: Vec<f64> = (0..probes).map(|i| 1.1 * reach * i as f64 / (probes - 1) as f64).collect();
    let rows: Vec<Vec<Cell>> = ys
        .iter()
        .map(|&y| {
            let est = estimate(&cfg, |rep| mc_phi_replication(y, s, pr, d, &cfg, rep));
            vec![Cell::Num(y), Cell::Num(est.mean), Cell::Num(est.ci_half_width)]
        })
        .collect();
    write_csv(&out_path(&scn.out_dir, "mc.csv"), &["y", "mean", "ci"], rows)?;

    let avg = estimate(&cfg, |rep| mc_average_fitness_replication(s, pr, d, &cfg, rep));
    let lambda = r.ess.as_ref().map(|e| e.lambda);
    let within = lambda.map(|l| (avg.mean - l).abs() <= 3.0 * avg.ci_half_width);
    write_json(
        &out_path(&scn.out_dir, "mc_summary.json"),
        &McSummary {
            seed,
            population: cfg.population,
            replications: cfg.replications,
            mean: avg.mean,
            ci_half_width: avg.ci_half_width,
            lambda,
            within_3ci: within,
        },
    )?;

    if args.best_response {
        let br = best_response_iterate(pr, d, args.br_grid, args.iterations, args.damping)
            .map_err(|e| CliError::usage(format!("--best-response: {e}")))?;
        let ess = match &r.ess {
            Some(e) => e.clone(),
            None => solve_ess(pr, d, scn.grid, &scn.tol)?,
        };
        let cdf = br.cdf_at_edges();
        let ks = br
            .edges
            .iter()
            .zip(&cdf)
            .map(|(&x, f)| (f - ess.strategy.f_mu(x)).abs())
            .fold(0.0, f64::max);
        write_csv(
            &out_path(&scn.out_dir, "br.csv"),
            &["x", "F"],
            br.edges.iter().zip(&cdf).map(|(&x, &f)| vec![Cell::Num(x), Cell::Num(f)]),
        )?;
        write_csv(
            &out_path(&scn.out_dir, "br_history.csv"),
            &["iteration", "ks_to_previous", "residual"],
            br.history
                .iter()
                .map(|h| vec![Cell::Int(h.iteration), Cell::Num(h.ks_to_previous), Cell::Num(h.residual)]),
        )?;
        write_json(
            &out_path(&scn.out_dir, "br_summary.json"),
            &BrSummary {
                grid: args.br_grid,
                iterations: args.iterations,
                damping: args.damping,
                atom: br.weights[0],
                residual: br.residual,
                ks_to_ess: ks,
            },
        )?;
    }
    if scn.strict && within == Some(false) {
        return Err(CliError::Certification(format!(
            "simulated average fitness {} ± {} misses λ = {}",
            avg.mean,
            avg.ci_half_width,
            lambda.unwrap_or(f64::NAN)
        )));
    }
    Ok(())
}
