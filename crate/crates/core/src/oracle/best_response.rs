//! Discretised best-response dynamics.
//!
//! Arrival dates are restricted to an atom at 0 plus `G` equal cells covering
//! `[0, t_high]`, each spreading its mass uniformly. Every iteration computes
//! the payoff `φ` of each option (the atom at 0, the cells at their
//! midpoints) under the current mixture and moves mass from worse options to
//! better ones at a rate proportional to the payoff gap. The fixed points are
//! exactly the mixtures whose supported options all earn the best payoff, so
//! the dynamic approximates the equilibrium without using its closed form.

use alloc::vec::Vec;

use crate::disturbance::Disturbance;
use crate::error::{Error, Result};
use crate::numerics::GL8;
use crate::solver::CompetitionParams;
use crate::strategy::MixedStrategy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    /// Largest change of the CDF at the cell edges during this iteration.
    pub ks_to_previous: f64,
    /// Payoff-weighted regret `Σ w_j (π_max - π_j) / π_max` before the update.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub strategy: MixedStrategy,
    /// Mass at 0 followed by the mass of each cell.
    pub weights: Vec<f64>,
    /// Cell edges `0 = x_0 < … < x_G = t_high`.
    pub edges: Vec<f64>,
    pub history: Vec<HistoryRow>,
    /// Regret of the returned mixture.
    pub residual: f64,
}

impl BestResponse {
    /// `F_μ` at each cell edge.
    pub fn cdf_at_edges(&self) -> Vec<f64> {
        let mut cum = self.weights[0];
        let mut out = Vec::with_capacity(self.edges.len());
        out.push(cum);
        for w in &self.weights[1..] {
            cum += w;
            out.push(cum.min(1.0));
        }
        out
    }
}

/// Quadrature nodes for half-cells: offset within the cell as a fraction of
/// its width, and quadrature weight times the density there.
struct Nodes {
    frac: Vec<f64>,
    weight: Vec<f64>,
    /// `[first_half_start, second_half_start, end)` offsets per cell.
    offsets: Vec<[usize; 3]>,
}

fn build_nodes(d: &Disturbance, edges: &[f64]) -> Nodes {
    let mut frac = Vec::new();
    let mut weight = Vec::new();
    let mut offsets = Vec::with_capacity(edges.len() - 1);
    let breaks: Vec<f64> = d.breakpoints().collect();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let width = hi - lo;
        let mid = 0.5 * (lo + hi);
        let mut start = [0usize; 3];
        for (half, (a, b)) in [(lo, mid), (mid, hi)].into_iter().enumerate() {
            start[half] = frac.len();
            let mut cuts: Vec<f64> = core::iter::once(a)
                .chain(breaks.iter().copied().filter(|&x| x > a && x < b))
                .chain(core::iter::once(b))
                .collect();
            cuts.dedup();
            for c in cuts.windows(2) {
                let (u, v) = (c[0], c[1]);
                let center = 0.5 * (u + v);
                let radius = 0.5 * (v - u);
                for &(node, wt) in GL8.iter() {
                    let x = center + radius * node;
                    let f = d.density(x);
                    if f > 0.0 {
                        frac.push((x - lo) / width);
                        weight.push(wt * radius * f);
                    }
                }
            }
        }
        start[2] = frac.len();
        offsets.push(start);
    }
    Nodes { frac, weight, offsets }
}

/// Payoff of the atom and of each cell under `weights`.
fn payoffs(weights: &[f64], nodes: &Nodes, a: f64, p: f64, out: &mut [f64]) {
    let c = a * (1.0 - p);
    let integrate = |range: core::ops::Range<usize>, base: f64, mass: f64| -> f64 {
        range
            .map(|k| nodes.weight[k] * (libm::exp(c * (base + mass * nodes.frac[k])) - p))
            .sum()
    };
    out[0] = p * libm::exp(-a * weights[0]);
    let mut cum = weights[0];
    let mut integral = 0.0;
    for (j, &[first, second, end]) in nodes.offsets.iter().enumerate() {
        let w = weights[j + 1];
        let at_mid = integral + integrate(first..second, cum, w);
        out[j + 1] = libm::exp(-a * (cum + 0.5 * w)) * (at_mid + p);
        integral = at_mid + integrate(second..end, cum, w);
        cum += w;
    }
}

/// Iterate the best-response dynamic from the uniform mixture.
///
/// Mass flows from option `j` to a better option `k` at rate
/// `(π_k - π_j) / (a·π_max·n)`; each step is `damping` time units, shortened
/// when needed so no option loses more than half its mass.
pub fn best_response_iterate(
    params: &CompetitionParams,
    d: &Disturbance,
    grid: usize,
    iterations: usize,
    damping: f64,
) -> Result<BestResponse> {
    if grid < 50 {
        return Err(Error::InvalidDomain("best response needs at least 50 cells"));
    }
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidDomain("damping must lie in (0, 1]"));
    }
    let (a, p) = (params.a(), params.p());
    if !(a > 0.0) {
        return Err(Error::InvalidDomain("best response needs a > 0"));
    }
    let t_high = d.t_high();
    let edges: Vec<f64> = (0..=grid).map(|j| t_high * j as f64 / grid as f64).collect();
    let nodes = build_nodes(d, &edges);
    let n = grid + 1;
    let mut weights = alloc::vec![1.0 / n as f64; n];
    let mut pi = alloc::vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut inflow = alloc::vec![0.0; n];
    let mut outflow = alloc::vec![0.0; n];
    let mut history = Vec::with_capacity(iterations);

    let regret = |weights: &[f64], pi: &[f64]| -> f64 {
        let max = pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        weights.iter().zip(pi).map(|(w, q)| w * (max - q)).sum::<f64>() / max
    };

    for iteration in 1..=iterations {
        payoffs(&weights, &nodes, a, p, &mut pi);
        let max = pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let residual = regret(&weights, &pi);
        let norm = a * max * n as f64;

        order.sort_by(|&i, &j| pi[i].total_cmp(&pi[j]));
        let (mut mass_below, mut pay_below) = (0.0, 0.0);
        for &k in &order {
            inflow[k] = (pi[k] * mass_below - pay_below) / norm;
            mass_below += weights[k];
            pay_below += weights[k] * pi[k];
        }
        let (mut count_above, mut pay_above) = (0.0, 0.0);
        for &j in order.iter().rev() {
            outflow[j] = (pay_above - pi[j] * count_above) / norm;
            count_above += 1.0;
            pay_above += pi[j];
        }
        let fastest = outflow.iter().copied().fold(0.0, f64::max);
        let step = if fastest > 0.0 { damping.min(0.5 / fastest) } else { damping };

        let mut ks: f64 = 0.0;
        let (mut old_cum, mut new_cum) = (0.0, 0.0);
        for k in 0..n {
            let w = (weights[k] + step * (inflow[k] - weights[k] * outflow[k])).max(0.0);
            old_cum += weights[k];
            new_cum += w;
            ks = ks.max((new_cum - old_cum).abs());
            weights[k] = w;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        history.push(HistoryRow {
            iteration,
            ks_to_previous: ks,
            residual,
        });
    }
    payoffs(&weights, &nodes, a, p, &mut pi);
    let residual = regret(&weights, &pi);
    let strategy = to_strategy(&weights, &edges)?;
    Ok(BestResponse {
        strategy,
        weights,
        edges,
        history,
        residual,
    })
}

fn to_strategy(weights: &[f64], edges: &[f64]) -> Result<MixedStrategy> {
    let atom = weights[0];
    let rest = 1.0 - atom;
    if rest < 1e-9 {
        return Ok(MixedStrategy::point_mass_at_zero());
    }
    let mut cum = 0.0;
    let mut knots = Vec::with_capacity(edges.len());
    knots.push((edges[0], 0.0));
    for (x, w) in edges[1..].iter().zip(&weights[1..]) {
        cum += w;
        knots.push((*x, (cum / rest).min(1.0)));
    }
    let last = knots.len() - 1;
    knots[last].1 = 1.0;
    MixedStrategy::new(atom.clamp(0.0, 1.0), knots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::phi_sorted;
    use crate::numerics::Tolerances;

    #[test]
    fn payoffs_match_quadrature() {
        let d = Disturbance::piecewise_linear(&[(0.1, 1.0), (0.55, 2.0), (0.9, 0.5)]).unwrap();
        let pr = CompetitionParams::new(2.0, 0.3).unwrap();
        let grid = 60;
        let edges: Vec<f64> = (0..=grid).map(|j| 0.9 * j as f64 / grid as f64).collect();
        let nodes = build_nodes(&d, &edges);
        let mut weights: Vec<f64> = (0..=grid).map(|j| 1.0 + libm::fabs(libm::sin(j as f64 * 0.37))).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut pi = alloc::vec![0.0; grid + 1];
        payoffs(&weights, &nodes, 2.0, 0.3, &mut pi);

        let s = to_strategy(&weights, &edges).unwrap();
        let mut ys = alloc::vec![0.0];
        ys.extend(edges.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        let exact = phi_sorted(&ys, &s, &pr, &d, &Tolerances::default()).unwrap();
        for (a, b) in pi.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn no_disturbance_losses_pull_everyone_to_zero() {
        let d = Disturbance::uniform(0.0, 1.0).unwrap();
        let pr = CompetitionParams::with_edges(2.0, 1.0).unwrap();
        let br = best_response_iterate(&pr, &d, 50, 20_000, 0.5).unwrap();
        assert!(br.weights[0] > 0.98, "{}", br.weights[0]);
        let early = best_response_iterate(&pr, &d, 50, 2_000, 0.5).unwrap();
        assert!(early.weights[0] < br.weights[0]);
    }

    #[test]
    fn regret_falls() {
        let d = Disturbance::uniform(0.0, 1.0).unwrap();
        let pr = CompetitionParams::new(0.2, 0.2).unwrap();
        let br = best_response_iterate(&pr, &d, 50, 500, 0.1).unwrap();
        assert!(br.history[499].residual < br.history[0].residual);
        assert_eq!(br.history.len(), 500);
        assert!((br.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let d = Disturbance::uniform(0.0, 1.0).unwrap();
        let pr = CompetitionParams::new(0.2, 0.2).unwrap();
        assert!(best_response_iterate(&pr, &d, 49, 1, 0.1).is_err());
        assert!(best_response_iterate(&pr, &d, 50, 1, 0.0).is_err());
        assert!(best_response_iterate(&pr, &d, 50, 1, 1.5).is_err());
    }
}
