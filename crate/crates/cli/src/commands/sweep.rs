use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use soft_ess_core::solver::{compute_a_m, compute_gamma, compute_lambda, compute_x_c};
use soft_ess_core::{Disturbance, Regime, Tolerances};

use super::ess::a_m_value;
use super::params;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, out_path, write_csv, Cell};
use crate::scenario::{Scenario, ScenarioArgs};

/// Slack allowed before a monotonicity check counts as violated.
const MONOTONE_SLACK: f64 = 1e-8;

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Values of a: `LO:HI:N` for N evenly spaced points, or a comma list.
    #[arg(long = "a")]
    pub a_values: Option<String>,
    /// Values of p, same grammar as `--a`.
    #[arg(long = "p")]
    pub p_values: Option<String>,
    #[arg(long)]
    pub disturbance: Option<String>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Exit with status 4 if λ, γ, x_c or a_M move the wrong way anywhere on the grid.
    #[arg(long)]
    pub check_monotonicity: bool,
}

/// `LO:HI:N` or `v1,v2,...`.
pub fn parse_values(spec: &str) -> CliResult<Vec<f64>> {
    let num = |s: &str| -> CliResult<f64> {
        s.trim()
            .parse()
            .map_err(|_| CliError::usage(format!("`{s}` is not a number in `{spec}`")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [lo, hi, n] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("`{n}` is not a count in `{spec}`")))?;
            match n {
                0 => Err(CliError::usage(format!("`{spec}` has no points"))),
                1 => Ok(vec![lo]),
                _ => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
            }
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(CliError::usage(format!("`{spec}`: expected LO:HI:N or a comma list"))),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub a: f64,
    pub p: f64,
    pub a_m: Option<f64>,
    pub gamma: f64,
    pub x_c: f64,
    pub lambda: f64,
    pub regime: Regime,
}

fn evaluate(a: f64, p: f64, d: &Disturbance, tol: &Tolerances) -> CliResult<SweepRow> {
    let pr = params(a, p)?;
    let a_m = compute_a_m(p, tol)?;
    Ok(SweepRow {
        a,
        p,
        a_m: a_m_value(a_m),
        gamma: compute_gamma(&pr, tol)?,
        x_c: compute_x_c(&pr, d, tol)?,
        lambda: compute_lambda(&pr, tol)?,
        regime: a_m.classify(a),
    })
}

/// Every point of the grid, in `(a, p)` order whatever order they finish in.
pub fn sweep(a_values: &[f64], p_values: &[f64], d: &Disturbance, tol: &Tolerances) -> CliResult<Vec<SweepRow>> {
    let points: Vec<(f64, f64)> = a_values
        .iter()
        .flat_map(|&a| p_values.iter().map(move |&p| (a, p)))
        .collect();
    let mut rows = points
        .par_iter()
        .map(|&(a, p)| evaluate(a, p, d, tol))
        .collect::<CliResult<Vec<_>>>()?;
    rows.sort_by(|x, y| x.a.total_cmp(&y.a).then(x.p.total_cmp(&y.p)));
    Ok(rows)
}

/// Descriptions of every monotonicity or bound violation.
pub fn monotonicity_violations(rows: &[SweepRow]) -> Vec<String> {
    let mut out = Vec::new();
    let mut ps: Vec<f64> = rows.iter().map(|r| r.p).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let mut as_: Vec<f64> = rows.iter().map(|r| r.a).collect();
    as_.sort_by(f64::total_cmp);
    as_.dedup();

    for &p in &ps {
        let line: Vec<&SweepRow> = rows.iter().filter(|r| r.p == p).collect();
        for w in line.windows(2) {
            let (x, y) = (w[0], w[1]);
            if y.lambda > x.lambda + MONOTONE_SLACK {
                out.push(format!("λ rises in a at p={p}: {} -> {}", x.a, y.a));
            }
            if y.x_c > x.x_c + MONOTONE_SLACK {
                out.push(format!("x_c rises in a at p={p}: {} -> {}", x.a, y.a));
            }
            if y.gamma < x.gamma - MONOTONE_SLACK {
                out.push(format!("γ falls in a at p={p}: {} -> {}", x.a, y.a));
            }
        }
    }
    for &a in &as_ {
        let line: Vec<&SweepRow> = rows.iter().filter(|r| r.a == a).collect();
        for w in line.windows(2) {
            let (x, y) = (w[0], w[1]);
            if y.lambda > x.lambda + MONOTONE_SLACK {
                out.push(format!("λ rises in p at a={a}: {} -> {}", x.p, y.p));
            }
            if y.x_c > x.x_c + MONOTONE_SLACK {
                out.push(format!("x_c rises in p at a={a}: {} -> {}", x.p, y.p));
            }
            if y.gamma < x.gamma - MONOTONE_SLACK {
                out.push(format!("γ falls in p at a={a}: {} -> {}", x.p, y.p));
            }
            let (mx, my) = (x.a_m.unwrap_or(f64::INFINITY), y.a_m.unwrap_or(f64::INFINITY));
            if my > mx + MONOTONE_SLACK {
                out.push(format!("a_M rises in p: {} -> {}", x.p, y.p));
            }
        }
    }
    for r in rows {
        if r.lambda < (-r.a).exp() - MONOTONE_SLACK || r.lambda > 1.0 / (1.0 + r.a) + MONOTONE_SLACK {
            out.push(format!("λ={} outside [e^-a, 1/(1+a)] at a={} p={}", r.lambda, r.a, r.p));
        }
    }
    out
}

pub fn run(args: &SweepArgs) -> CliResult<()> {
    let shared = ScenarioArgs {
        config: args.config.clone(),
        a: None,
        p: None,
        disturbance: args.disturbance.clone(),
        grid: None,
        abs_tol: args.abs_tol,
        rel_tol: args.rel_tol,
        out_dir: args.out_dir.clone(),
        strict: false,
    };
    let scn = Scenario::resolve(&shared)?;
    let values = |flag: &Option<String>, from_file: Option<f64>, name: &str| -> CliResult<Vec<f64>> {
        match (flag, from_file) {
            (Some(spec), _) => parse_values(spec),
            (None, Some(v)) => Ok(vec![v]),
            (None, None) => Err(CliError::usage(format!("missing --{name}"))),
        }
    };
    let a_values = values(&args.a_values, scn.file.a, "a")?;
    let p_values = values(&args.p_values, scn.file.p, "p")?;
    let d = scn.disturbance()?;
    let rows = sweep(&a_values, &p_values, &d, &scn.tol)?;

    ensure_dir(&scn.out_dir)?;
    write_csv(
        &out_path(&scn.out_dir, "sweep.csv"),
        &["a", "p", "a_M", "gamma", "x_c", "lambda", "regime"],
        rows.iter().map(|r| {
            vec![
                Cell::Num(r.a),
                Cell::Num(r.p),
                Cell::Num(r.a_m.unwrap_or(f64::INFINITY)),
                Cell::Num(r.gamma),
                Cell::Num(r.x_c),
                Cell::Num(r.lambda),
                Cell::Text(r.regime.to_string()),
            ]
        }),
    )?;
    if args.check_monotonicity {
        let violations = monotonicity_violations(&rows);
        for v in &violations {
            eprintln!("{v}");
        }
        if !violations.is_empty() {
            return Err(CliError::Certification(format!("{} monotonicity violations", violations.len())));
        }
    }
    Ok(())
}
