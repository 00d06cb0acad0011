//! How a population adapted to one disturbance fares under another.

use alloc::vec::Vec;

use crate::disturbance::Disturbance;
use crate::error::{Error, Result};
use crate::fitness::{average_fitness, phi, phi_sorted};
use crate::numerics::{bracketed_root, Tolerances};
use crate::solver::{solve_ess, CompetitionParams};
use crate::strategy::MixedStrategy;

/// Grid used for the equilibrium whose fitness is compared.
pub const DELTA_GRID: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedProbe {
    pub y: f64,
    pub phi_1: f64,
    pub phi_2: f64,
}

impl PairedProbe {
    pub fn diff(&self) -> f64 {
        self.phi_2 - self.phi_1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileComparison {
    pub probes: Vec<PairedProbe>,
    /// Dates where `φ⁽²⁾ - φ⁽¹⁾` changes sign.
    pub crossings: Vec<f64>,
}

/// `φ_μ` under two densities on a shared probe grid.
///
/// The grid is uniform over `[0, 1.1·reach]`, where `reach` is the latest
/// knot of either density or of the strategy, merged with all those knots.
pub fn compare_profiles(
    s: &MixedStrategy,
    params: &CompetitionParams,
    d1: &Disturbance,
    d2: &Disturbance,
    probe_count: usize,
    tol: &Tolerances,
) -> Result<ProfileComparison> {
    let n = probe_count.max(2);
    let knots = s.ac_knots();
    let reach = d1.t_high().max(d2.t_high()).max(knots[knots.len() - 1].0);
    let upper = 1.1 * reach;
    let mut ys: Vec<f64> = (0..n).map(|i| upper * i as f64 / (n - 1) as f64).collect();
    ys.extend(s.breakpoints());
    ys.extend(d1.breakpoints());
    ys.extend(d2.breakpoints());
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let phi_1 = phi_sorted(&ys, s, params, d1, tol)?;
    let phi_2 = phi_sorted(&ys, s, params, d2, tol)?;
    let probes: Vec<PairedProbe> = ys
        .iter()
        .zip(phi_1.iter().zip(&phi_2))
        .map(|(&y, (&phi_1, &phi_2))| PairedProbe { y, phi_1, phi_2 })
        .collect();

    let diff_at = |y: f64| -> f64 {
        match (phi(y, s, params, d2, tol), phi(y, s, params, d1, tol)) {
            (Ok(b), Ok(a)) => b - a,
            _ => f64::NAN,
        }
    };
    let mut crossings = Vec::new();
    for w in probes.windows(2) {
        let (l, r) = (w[0].diff(), w[1].diff());
        if l == 0.0 || l.signum() == r.signum() || r == 0.0 {
            if r == 0.0 && l != 0.0 {
                crossings.push(w[1].y);
            }
            continue;
        }
        crossings.push(bracketed_root(diff_at, w[0].y, w[1].y, tol)?);
    }
    Ok(ProfileComparison { probes, crossings })
}

/// `(t̲₁t̄₂ - t̲₂t̄₁)/(t̲₁ + t̄₂ - t̲₂ - t̄₁)`: for nested uniform densities,
/// the date after which the narrower one gives at least as much fitness.
/// `None` when both supports have the same width.
pub fn uniform_crossing_point(low_1: f64, high_1: f64, low_2: f64, high_2: f64) -> Option<f64> {
    let denom = low_1 + high_2 - low_2 - high_1;
    if denom == 0.0 {
        None
    } else {
        Some((low_1 * high_2 - low_2 * high_1) / denom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessDelta {
    pub lambda_bar_1: f64,
    pub lambda_bar_2: f64,
    pub delta: f64,
}

/// Average fitness of the equilibrium for `d1` when the disturbance follows
/// `d2` instead, relative to `d1`.
pub fn average_fitness_delta(
    params: &CompetitionParams,
    d1: &Disturbance,
    d2: &Disturbance,
    tol: &Tolerances,
) -> Result<FitnessDelta> {
    let ess = solve_ess(params, d1, DELTA_GRID, tol)?;
    let lambda_bar_1 = average_fitness(&ess.strategy, params, d1, tol)?;
    let lambda_bar_2 = average_fitness(&ess.strategy, params, d2, tol)?;
    Ok(FitnessDelta {
        lambda_bar_1,
        lambda_bar_2,
        delta: lambda_bar_2 - lambda_bar_1,
    })
}

/// Default step for [`dp_average_fitness`].
pub const DP_STEP: f64 = 1e-4;

/// Central difference `(λ̄(p+h) - λ̄(p-h))/(2h)` of the average fitness of `s`.
///
/// The two averages are computed with tolerances of 1e-13 so quadrature
/// noise stays far below the step.
pub fn dp_average_fitness(s: &MixedStrategy, a: f64, p: f64, d: &Disturbance, h: f64) -> Result<f64> {
    if !(h > 0.0) || !(p - h > 0.0) || !(p + h < 1.0) {
        return Err(Error::InvalidDomain("finite difference in p needs 0 < p - h and p + h < 1"));
    }
    let tight = Tolerances::new(1e-13, 1e-13, 2000)?;
    let up = average_fitness(s, &CompetitionParams::with_edges(a, p + h)?, d, &tight)?;
    let down = average_fitness(s, &CompetitionParams::with_edges(a, p - h)?, d, &tight)?;
    Ok((up - down) / (2.0 * h))
}

/// The same density delayed by `delta`.
pub fn shift_disturbance(d: &Disturbance, delta: f64) -> Result<Disturbance> {
    if delta == 0.0 {
        return Ok(d.clone());
    }
    if !(d.t_low() + delta >= 0.0) {
        return Err(Error::InvalidDomain("a shifted density must stay at nonnegative times"));
    }
    d.rescale(d.t_low() + delta, d.t_high() + delta)
}
