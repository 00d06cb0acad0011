//! Finite-population simulation of the arrival game.
//!
//! One replication draws a disturbance date `X ~ f` and `N` arrival dates
//! from the strategy. Everyone present at `X` survives it independently with
//! probability `p`. An individual arriving at `y` pays `e^(-a·n/N)`, where `n`
//! counts the competitors alive when it arrives: all earlier arrivals if
//! `y ≤ X`, otherwise the survivors among arrivals up to `X` plus everyone
//! arriving in `(X, y)`.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::disturbance::Disturbance;
use crate::error::{Error, Result};
use crate::solver::CompetitionParams;
use crate::strategy::MixedStrategy;

/// Two-sided 99% standard normal quantile.
pub const CI_Z99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub population: usize,
    pub replications: usize,
    pub seed: u64,
    /// Whether individuals sharing an arrival date (the atom at 0) compete
    /// with each other. `true` matches the right-continuous `F_μ(y)`;
    /// `false` counts only strictly earlier arrivals, i.e. `F_μ(y⁻)`.
    pub atom_self_competition: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            population: 100_000,
            replications: 200,
            seed: 0,
            atom_self_competition: true,
        }
    }
}

impl McConfig {
    pub fn new(population: usize, replications: usize, seed: u64) -> Result<Self> {
        let cfg = McConfig {
            population,
            replications,
            seed,
            ..McConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_atom_self_competition(mut self, on: bool) -> Self {
        self.atom_self_competition = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.population < 100 || self.replications == 0 {
            return Err(Error::InvalidDomain("simulation needs N ≥ 100 and at least one replication"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Half-width of the 99% normal confidence interval for the mean.
    pub ci_half_width: f64,
}

/// Mean and 99% half-width of per-replication values, summed in order.
pub fn summarize(values: &[f64]) -> McEstimate {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return McEstimate {
            mean,
            ci_half_width: f64::INFINITY,
        };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0);
    McEstimate {
        mean,
        ci_half_width: CI_Z99 * libm::sqrt(var / r),
    }
}

struct Draw {
    rng: ChaCha8Rng,
    disturbance_at: f64,
    /// Ascending arrival dates.
    arrivals: Vec<f64>,
}

fn draw(s: &MixedStrategy, d: &Disturbance, cfg: &McConfig, replication: usize) -> Draw {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(replication as u64);
    let disturbance_at = d.quantile(rng.gen::<f64>()).unwrap_or(d.t_high());
    // Sorted uniforms from normalised partial sums of exponential spacings,
    // pushed through the monotone inverse CDF.
    let n = cfg.population;
    let mut sums = Vec::with_capacity(n);
    let mut total = 0.0;
    for _ in 0..n {
        total += -libm::log(1.0 - rng.gen::<f64>());
        sums.push(total);
    }
    total += -libm::log(1.0 - rng.gen::<f64>());
    let arrivals = sums.into_iter().map(|c| s.quantile(c / total)).collect();
    Draw {
        rng,
        disturbance_at,
        arrivals,
    }
}

/// Fitness of one focal individual at `y` in replication `replication`.
pub fn mc_phi_replication(
    y: f64,
    s: &MixedStrategy,
    params: &CompetitionParams,
    d: &Disturbance,
    cfg: &McConfig,
    replication: usize,
) -> f64 {
    let (a, p) = (params.a(), params.p());
    let Draw {
        mut rng,
        disturbance_at: x,
        arrivals,
    } = draw(s, d, cfg, replication);
    let n = cfg.population as f64;
    let before_y = if cfg.atom_self_competition {
        arrivals.partition_point(|&t| t <= y)
    } else {
        arrivals.partition_point(|&t| t < y)
    };
    if y <= x {
        let alive = rng.gen::<f64>() < p;
        if alive {
            libm::exp(-a * before_y as f64 / n)
        } else {
            0.0
        }
    } else {
        let exposed = arrivals.partition_point(|&t| t <= x);
        let survivors = (0..exposed).filter(|_| rng.gen::<f64>() < p).count();
        let later = before_y.saturating_sub(exposed);
        libm::exp(-a * (survivors + later) as f64 / n)
    }
}

/// Population-average fitness in replication `replication`.
pub fn mc_average_fitness_replication(
    s: &MixedStrategy,
    params: &CompetitionParams,
    d: &Disturbance,
    cfg: &McConfig,
    replication: usize,
) -> f64 {
    let (a, p) = (params.a(), params.p());
    let Draw {
        mut rng,
        disturbance_at: x,
        arrivals,
    } = draw(s, d, cfg, replication);
    let n = arrivals.len();
    let scale = -a / n as f64;
    let exposed = arrivals.partition_point(|&t| t <= x);

    // Competitors of arrival i among a sorted run, given the run's tie group.
    let count = |group_start: usize, group_end: usize| -> usize {
        if cfg.atom_self_competition {
            group_end - 1
        } else {
            group_start
        }
    };

    let mut total = 0.0;
    let mut survivors = 0usize;
    let mut i = 0;
    while i < exposed {
        let mut j = i + 1;
        while j < exposed && arrivals[j] == arrivals[i] {
            j += 1;
        }
        let weight = libm::exp(scale * count(i, j) as f64);
        for _ in i..j {
            if rng.gen::<f64>() < p {
                survivors += 1;
                total += weight;
            }
        }
        i = j;
    }
    while i < n {
        let mut j = i + 1;
        while j < n && arrivals[j] == arrivals[i] {
            j += 1;
        }
        let earlier = count(i - exposed, j - exposed);
        total += (j - i) as f64 * libm::exp(scale * (survivors + earlier) as f64);
        i = j;
    }
    total / n as f64
}

/// Monte Carlo estimate of `φ_μ(y)`.
pub fn mc_phi(
    y: f64,
    s: &MixedStrategy,
    params: &CompetitionParams,
    d: &Disturbance,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.validate()?;
    if !(y >= 0.0) {
        return Err(Error::InvalidDomain("arrival dates must be nonnegative"));
    }
    let values: Vec<f64> = (0..cfg.replications)
        .map(|r| mc_phi_replication(y, s, params, d, cfg, r))
        .collect();
    Ok(summarize(&values))
}

/// Monte Carlo estimate of the average fitness `λ̄_μ`.
pub fn mc_average_fitness(
    s: &MixedStrategy,
    params: &CompetitionParams,
    d: &Disturbance,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.validate()?;
    let values: Vec<f64> = (0..cfg.replications)
        .map(|r| mc_average_fitness_replication(s, params, d, cfg, r))
        .collect();
    Ok(summarize(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::{average_fitness, max_average_fitness, phi};
    use crate::numerics::Tolerances;

    fn params(a: f64, p: f64) -> CompetitionParams {
        CompetitionParams::with_edges(a, p).unwrap()
    }

    fn small(seed: u64) -> McConfig {
        McConfig::new(2_000, 400, seed).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(99, 10, 0).is_err());
        assert!(McConfig::new(100, 0, 0).is_err());
        let d = McConfig::default();
        assert_eq!((d.population, d.replications, d.atom_self_competition), (100_000, 200, true));
    }

    #[test]
    fn atom_conventions_at_zero() {
        let s = MixedStrategy::point_mass_at_zero();
        let d = Disturbance::uniform(0.2, 0.8).unwrap();
        let pr = params(2.0, 0.5);
        let strict = mc_phi(0.0, &s, &pr, &d, &small(1).with_atom_self_competition(false)).unwrap();
        assert!((strict.mean - 0.5).abs() < 3.0 * strict.ci_half_width);
        let own = mc_phi(0.0, &s, &pr, &d, &small(1)).unwrap();
        let expect = 0.5 * libm::exp(-2.0);
        assert!((own.mean - expect).abs() < 3.0 * own.ci_half_width);
        let avg = mc_average_fitness(&s, &pr, &d, &small(2)).unwrap();
        assert!((avg.mean - expect).abs() < 3.0 * avg.ci_half_width + 2.0 * 2.0 / 2000.0);
    }

    #[test]
    fn no_competition_limit() {
        let s = MixedStrategy::uniform(0.0, 1.0).unwrap();
        let d = Disturbance::uniform(0.3, 0.9).unwrap();
        let pr = params(1e-12, 0.3);
        for &y in &[0.2, 0.5, 1.0] {
            let est = mc_phi(y, &s, &pr, &d, &small(5)).unwrap();
            let expect = 1.0 - 0.7 * d.tail(y);
            assert!((est.mean - expect).abs() <= 3.0 * est.ci_half_width.max(1e-12), "y={y} {est:?}");
        }
    }

    #[test]
    fn matches_quadrature_phi() {
        let s = MixedStrategy::new(0.1, alloc::vec![(0.2, 0.0), (0.9, 1.0)]).unwrap();
        let d = Disturbance::uniform(0.3, 0.8).unwrap();
        let pr = params(2.0, 0.4);
        let tol = Tolerances::default();
        for &y in &[0.1, 0.5, 0.95] {
            let est = mc_phi(y, &s, &pr, &d, &McConfig::new(5_000, 2_000, 9).unwrap()).unwrap();
            let exact = phi(y, &s, &pr, &d, &tol).unwrap();
            assert!((est.mean - exact).abs() < 3.0 * est.ci_half_width + 1e-3, "y={y}: {est:?} vs {exact}");
        }
        let est = mc_average_fitness(&s, &pr, &d, &small(11)).unwrap();
        let exact = average_fitness(&s, &pr, &d, &tol).unwrap();
        assert!((est.mean - exact).abs() < 3.0 * est.ci_half_width + 2e-3);
    }

    #[test]
    fn late_arrivals_reach_the_bound() {
        let s = MixedStrategy::uniform(1.0, 1.5).unwrap();
        let d = Disturbance::uniform(0.0, 1.0).unwrap();
        let est = mc_average_fitness(&s, &params(3.0, 0.2), &d, &small(3)).unwrap();
        // Deterministic apart from O(1/N) discretisation: everybody survives.
        assert!((est.mean - max_average_fitness(3.0)).abs() < 3.0 / 2000.0);
    }

    #[test]
    fn hard_disturbance_kills_early_arrivals() {
        let s = MixedStrategy::uniform(0.0, 0.2).unwrap();
        let d = Disturbance::uniform(0.5, 0.9).unwrap();
        let est = mc_average_fitness(&s, &params(1.0, 0.0), &d, &small(4)).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn seeded_runs_repeat() {
        let s = MixedStrategy::uniform(0.0, 1.0).unwrap();
        let d = Disturbance::uniform(0.3, 0.9).unwrap();
        let cfg = McConfig::new(500, 20, 77).unwrap();
        let a = mc_average_fitness(&s, &params(1.0, 0.3), &d, &cfg).unwrap();
        let b = mc_average_fitness(&s, &params(1.0, 0.3), &d, &cfg).unwrap();
        assert_eq!(a, b);
        let c = mc_average_fitness(&s, &params(1.0, 0.3), &d, &McConfig { seed: 78, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn interval_shrinks_with_replications() {
        let s = MixedStrategy::uniform(0.0, 1.0).unwrap();
        let d = Disturbance::uniform(0.3, 0.9).unwrap();
        let pr = params(1.0, 0.3);
        let r1 = mc_average_fitness(&s, &pr, &d, &McConfig::new(500, 400, 1).unwrap()).unwrap();
        let r2 = mc_average_fitness(&s, &pr, &d, &McConfig::new(500, 800, 1).unwrap()).unwrap();
        let ratio = r2.ci_half_width / r1.ci_half_width;
        assert!((ratio - core::f64::consts::FRAC_1_SQRT_2).abs() < 0.2 * core::f64::consts::FRAC_1_SQRT_2, "{ratio}");
    }

    #[test]
    fn single_replication_has_unbounded_interval() {
        assert_eq!(summarize(&[0.3]).ci_half_width, f64::INFINITY);
    }
}
