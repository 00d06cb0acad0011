//! Fitness of arrival dates and of whole strategies.
//!
//! An individual arriving at `y` in a population playing `μ` has expected
//! fitness
//!
//! ```text
//! φ_μ(y) = e^(-aF_μ(y)) · [ ∫_0^y (e^(a(1-p)F_μ(x)) - p) f(x) dx + p ].
//! ```
//!
//! The bracketed integral is accumulated panel by panel between the knots of
//! both `F_μ` and `f`, so every quadrature panel sees a smooth integrand.

use alloc::vec::Vec;

use crate::disturbance::Disturbance;
use crate::error::{Error, Result};
use crate::numerics::{integrate, Tolerances};
use crate::solver::CompetitionParams;
use crate::strategy::MixedStrategy;

/// Default bound on how far an equilibrium profile may stray from flat.
pub const CERTIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub y: f64,
    pub phi: f64,
    pub on_support: bool,
}

/// `φ_μ` sampled on a probe grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessProfile {
    pub probes: Vec<Probe>,
    /// Largest `φ` over all probes.
    pub lambda_hat: f64,
    /// Largest `φ` over probes on the support of `μ`.
    pub level: f64,
    /// Spread `max - min` of `φ` over probes on the support.
    pub support_deviation: f64,
    /// Largest `φ` off the support minus `level`.
    pub off_support_excess: f64,
}

impl FitnessProfile {
    pub fn is_certified(&self, tol_certify: f64) -> bool {
        self.support_deviation <= tol_certify && self.off_support_excess <= tol_certify
    }

    /// `(max |φ - λ| on the support, max (φ - λ) off it)` for a given level.
    pub fn deviations_from(&self, lambda: f64) -> (f64, f64) {
        self.probes.iter().fold((0.0f64, f64::NEG_INFINITY), |(on, off), pr| {
            if pr.on_support {
                (on.max((pr.phi - lambda).abs()), off)
            } else {
                (on, off.max(pr.phi - lambda))
            }
        })
    }
}

/// Conditional fitness of an arrival at `y` when the disturbance strikes at `x`.
pub fn psi(y: f64, x: f64, s: &MixedStrategy, params: &CompetitionParams) -> f64 {
    let (a, p) = (params.a(), params.p());
    let fy = s.f_mu(y);
    if y <= x {
        p * libm::exp(-a * fy)
    } else {
        let fx = s.f_mu(x);
        libm::exp(-a * p * fx - a * fy + a * fx)
    }
}

/// Sorted union of the knots of `F_μ` and `f`.
fn panel_edges(s: &MixedStrategy, d: &Disturbance) -> Vec<f64> {
    let mut edges: Vec<f64> = s.breakpoints().chain(d.breakpoints()).collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges
}

/// Running value of `∫_0^y (e^(a(1-p)F_μ) - p) f` for increasing `y`.
struct Accumulator<'a> {
    s: &'a MixedStrategy,
    d: &'a Disturbance,
    a: f64,
    p: f64,
    tol: &'a Tolerances,
    edges: Vec<f64>,
    next_edge: usize,
    at: f64,
    value: f64,
}

impl<'a> Accumulator<'a> {
    fn new(s: &'a MixedStrategy, params: &CompetitionParams, d: &'a Disturbance, tol: &'a Tolerances) -> Self {
        Accumulator {
            s,
            d,
            a: params.a(),
            p: params.p(),
            tol,
            edges: panel_edges(s, d),
            next_edge: 0,
            at: d.t_low(),
            value: 0.0,
        }
    }

    fn panel(&self, lo: f64, hi: f64) -> Result<f64> {
        // Evaluate f on the panel's own segment so a jump at `hi` is not seen.
        let mid = 0.5 * (lo + hi);
        let segs = self.d.segments();
        let seg = segs.get(segs.partition_point(|sg| sg.x1 < mid)).filter(|sg| sg.x0 <= mid);
        match seg {
            None => Ok(0.0),
            Some(sg) if sg.mass() == 0.0 => Ok(0.0),
            Some(sg) => integrate(
                |x| (libm::exp(self.a * (1.0 - self.p) * self.s.f_mu(x)) - self.p) * sg.density(x),
                lo,
                hi,
                self.tol,
            ),
        }
    }

    /// Advance to `y` (must not decrease) and return the integral up to `y`.
    fn advance(&mut self, y: f64) -> Result<f64> {
        let target = y.min(self.d.t_high());
        while self.next_edge < self.edges.len() && self.edges[self.next_edge] <= self.at {
            self.next_edge += 1;
        }
        while target > self.at {
            let stop = match self.edges.get(self.next_edge) {
                Some(&e) if e < target => {
                    self.next_edge += 1;
                    e
                }
                _ => target,
            };
            self.value += self.panel(self.at, stop)?;
            self.at = stop;
        }
        Ok(self.value)
    }
}

fn check_probe(y: f64) -> Result<()> {
    if y >= 0.0 && y.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidDomain("arrival dates must be finite and nonnegative"))
    }
}

/// `φ_μ(y)`.
pub fn phi(y: f64, s: &MixedStrategy, params: &CompetitionParams, d: &Disturbance, tol: &Tolerances) -> Result<f64> {
    Ok(phi_sorted(&[y], s, params, d, tol)?[0])
}

/// `φ_μ` at ascending arrival dates, sharing one pass of the quadrature.
pub fn phi_sorted(
    ys: &[f64],
    s: &MixedStrategy,
    params: &CompetitionParams,
    d: &Disturbance,
    tol: &Tolerances,
) -> Result<Vec<f64>> {
    if ys.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidDomain("probe dates must be sorted"));
    }
    let (a, p) = (params.a(), params.p());
    if a == 0.0 {
        return ys
            .iter()
            .map(|&y| check_probe(y).map(|_| 1.0 - (1.0 - p) * d.tail(y)))
            .collect();
    }
    let mut acc = Accumulator::new(s, params, d, tol);
    ys.iter()
        .map(|&y| {
            check_probe(y)?;
            let integral = acc.advance(y)?;
            Ok(libm::exp(-a * s.f_mu(y)) * (integral + p))
        })
        .collect()
}

/// `λ̄_μ = ∫ φ_μ dμ = γ₀·φ_μ(0) + (1 - γ₀)·∫ φ_μ dF_ν`.
pub fn average_fitness(
    s: &MixedStrategy,
    params: &CompetitionParams,
    d: &Disturbance,
    tol: &Tolerances,
) -> Result<f64> {
    let (a, p) = (params.a(), params.p());
    let atom = s.atom_at_zero();
    let atom_term = if atom > 0.0 { atom * phi(0.0, s, params, d, tol)? } else { 0.0 };
    if atom >= 1.0 {
        return Ok(atom_term);
    }
    let mut acc = Accumulator::new(s, params, d, tol);
    let edges = acc.edges.clone();
    let mut continuous = 0.0;
    let mut failure: Option<Error> = None;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let slope = s.nu_density(0.5 * (lo + hi));
        if slope > 0.0 {
            let base = acc.advance(lo)?;
            let from = lo.max(d.t_low());
            let outer = integrate(
                |y| {
                    let to = y.min(d.t_high()).max(from);
                    match acc.panel(from, to) {
                        Ok(v) => libm::exp(-a * s.f_mu(y)) * (base + v + p) * slope,
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    }
                },
                lo,
                hi,
                tol,
            )?;
            if let Some(e) = failure.take() {
                return Err(e);
            }
            continuous += outer;
        }
    }
    Ok(atom_term + (1.0 - atom) * continuous)
}

/// `sup_μ λ̄_μ = (1 - e^(-a))/a`, approached by arriving after the disturbance.
pub fn max_average_fitness(a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else {
        -libm::expm1(-a) / a
    }
}

/// Probe `φ_μ` and measure how far it is from an equilibrium profile.
///
/// Probes are a uniform grid of `probe_count` points over
/// `[0, 1.1·max(t_high, last strategy knot)]` together with every knot of the
/// strategy and of the density, and 0.
pub fn ess_certificate(
    s: &MixedStrategy,
    params: &CompetitionParams,
    d: &Disturbance,
    probe_count: usize,
    tol: &Tolerances,
) -> Result<FitnessProfile> {
    let n = probe_count.max(10);
    let knots = s.ac_knots();
    let reach = d.t_high().max(knots[knots.len() - 1].0);
    let upper = 1.1 * reach;
    let mut ys: Vec<f64> = (0..n).map(|i| upper * i as f64 / (n - 1) as f64).collect();
    ys.extend(s.breakpoints());
    ys.extend(d.breakpoints());
    ys.push(0.0);
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    profile_at(&ys, s, params, d, tol)
}

/// Profile on caller-supplied ascending probes.
pub fn profile_at(
    ys: &[f64],
    s: &MixedStrategy,
    params: &CompetitionParams,
    d: &Disturbance,
    tol: &Tolerances,
) -> Result<FitnessProfile> {
    let phis = phi_sorted(ys, s, params, d, tol)?;
    let probes: Vec<Probe> = ys
        .iter()
        .zip(phis)
        .map(|(&y, phi)| Probe {
            y,
            phi,
            on_support: s.on_support(y),
        })
        .collect();
    let lambda_hat = probes.iter().map(|p| p.phi).fold(f64::NEG_INFINITY, f64::max);
    let (hi_on, lo_on, hi_off) = probes.iter().fold(
        (f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(hi, lo, off), pr| {
            if pr.on_support {
                (hi.max(pr.phi), lo.min(pr.phi), off)
            } else {
                (hi, lo, off.max(pr.phi))
            }
        },
    );
    let (level, support_deviation) = if hi_on.is_finite() { (hi_on, hi_on - lo_on) } else { (f64::NAN, f64::INFINITY) };
    let off_support_excess = if hi_off.is_finite() { hi_off - level } else { f64::NEG_INFINITY };
    Ok(FitnessProfile {
        probes,
        lambda_hat,
        level,
        support_deviation,
        off_support_excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve_ess;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn params(a: f64, p: f64) -> CompetitionParams {
        CompetitionParams::with_edges(a, p).unwrap()
    }

    /// `λ̄` by exchanging the order of integration (continuous `ν` only):
    /// `p[γ₀e^(-aγ₀) + (e^(-aγ₀) - e^(-a))/a]
    ///  + ∫ (e^(a(1-p)F(z)) - p) f(z) (e^(-aF(z)) - e^(-a))/a dz`.
    fn average_by_exchange(s: &MixedStrategy, a: f64, p: f64, d: &Disturbance) -> f64 {
        let g0 = s.atom_at_zero();
        let ea = libm::exp(-a);
        let head = p * (g0 * libm::exp(-a * g0) + (libm::exp(-a * g0) - ea) / a);
        let mut edges: Vec<f64> = s.breakpoints().chain(d.breakpoints()).collect();
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let body: f64 = edges
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let seg = d.segments().iter().find(|sg| sg.x0 <= mid && mid <= sg.x1);
                match seg {
                    Some(sg) => integrate(
                        |z| {
                            let f = s.f_mu(z);
                            (libm::exp(a * (1.0 - p) * f) - p) * sg.density(z) * (libm::exp(-a * f) - ea) / a
                        },
                        w[0],
                        w[1],
                        &tol(),
                    )
                    .unwrap(),
                    None => 0.0,
                }
            })
            .sum();
        head + body
    }

    #[test]
    fn psi_examples() {
        let s = MixedStrategy::uniform(0.5, 0.9).unwrap();
        assert_eq!(psi(0.2, 0.4, &s, &params(2.0, 0.3)), 0.3);
        assert_eq!(psi(0.2, 0.4, &s, &params(0.0, 0.3)), 0.3);
        assert_eq!(psi(0.6, 0.4, &s, &params(0.0, 0.3)), 1.0);
        let y = psi(1.5, 1.2, &s, &params(2.0, 0.3));
        assert!((y - libm::exp(-0.6)).abs() < 1e-15);
    }

    #[test]
    fn phi_before_anything_is_p() {
        let s = MixedStrategy::uniform(0.5, 0.9).unwrap();
        let d = Disturbance::uniform(0.4, 1.0).unwrap();
        assert!((phi(0.3, &s, &params(2.0, 0.35), &d, &tol()).unwrap() - 0.35).abs() < 1e-15);
    }

    #[test]
    fn phi_without_competition() {
        let s = MixedStrategy::uniform(0.2, 0.6).unwrap();
        let d = Disturbance::piecewise_linear(&[(0.0, 0.0), (0.5, 2.0), (1.0, 0.0)]).unwrap();
        for &y in &[0.1, 0.4, 0.7, 1.2] {
            let expect = 1.0 - 0.6 * d.tail(y);
            let tiny = phi(y, &s, &params(1e-12, 0.4), &d, &tol()).unwrap();
            let zero = phi(y, &s, &params(0.0, 0.4), &d, &tol()).unwrap();
            assert!((tiny - expect).abs() < 1e-10);
            assert!((zero - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_agrees_with_psi_quadrature() {
        let s = MixedStrategy::new(0.15, alloc::vec![(0.1, 0.0), (0.4, 0.5), (0.9, 1.0)]).unwrap();
        let d = Disturbance::piecewise_linear(&[(0.2, 1.0), (0.7, 3.0), (1.1, 0.5)]).unwrap();
        let pr = params(2.5, 0.3);
        for &y in &[0.0, 0.15, 0.4, 0.65, 1.0, 1.3] {
            let direct = phi(y, &s, &pr, &d, &tol()).unwrap();
            let mut edges: Vec<f64> = d.breakpoints().chain([y]).collect();
            edges.sort_by(f64::total_cmp);
            let oracle: f64 = edges
                .windows(2)
                .map(|w| integrate(|x| psi(y, x, &s, &pr) * d.density(x), w[0], w[1], &tol()).unwrap())
                .sum();
            assert!((direct - oracle).abs() < 1e-9, "y={y}: {direct} vs {oracle}");
        }
    }

    #[test]
    fn average_matches_exchange_of_integration() {
        let s = MixedStrategy::new(0.2, alloc::vec![(0.1, 0.0), (0.5, 0.3), (0.6, 0.3), (1.2, 1.0)]).unwrap();
        let d = Disturbance::piecewise_linear(&[(0.2, 1.0), (0.7, 3.0), (0.7, 0.0), (0.8, 0.0), (0.8, 1.0), (1.1, 0.5)])
            .unwrap();
        for &(a, p) in &[(0.5, 0.1), (3.0, 0.6), (8.0, 0.0)] {
            let direct = average_fitness(&s, &params(a, p), &d, &tol()).unwrap();
            let oracle = average_by_exchange(&s, a, p, &d);
            assert!((direct - oracle).abs() < 1e-9, "a={a} p={p}: {direct} vs {oracle}");
        }
    }

    #[test]
    fn average_of_late_arrivals_hits_bound() {
        let d = Disturbance::uniform(0.0, 1.0).unwrap();
        let s = MixedStrategy::uniform(1.0, 1.5).unwrap();
        let v = average_fitness(&s, &params(5.0, 0.2), &d, &tol()).unwrap();
        assert!((v - max_average_fitness(5.0)).abs() < 1e-10);
        assert!((max_average_fitness(5.0) - 0.198652).abs() < 1e-6);
        assert!((max_average_fitness(1e-8) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ess_is_certified_and_uniform_is_not() {
        let d = Disturbance::uniform(0.5, 0.9).unwrap();
        let pr = CompetitionParams::new(5.0, 0.2).unwrap();
        let ess = solve_ess(&pr, &d, 2001, &tol()).unwrap();
        let cert = ess_certificate(&ess.strategy, &pr, &d, 2001, &tol()).unwrap();
        assert!(cert.is_certified(CERTIFY_TOL), "{:?} {:?}", cert.support_deviation, cert.off_support_excess);
        let (on, off) = cert.deviations_from(ess.lambda);
        assert!(on < 1e-6 && off < 1e-6);
        let avg = average_fitness(&ess.strategy, &pr, &d, &tol()).unwrap();
        assert!((avg - ess.lambda).abs() < 1e-6);

        let u = MixedStrategy::uniform(0.0, 1.0).unwrap();
        let cert = ess_certificate(&u, &pr, &d, 501, &tol()).unwrap();
        assert!(!cert.is_certified(CERTIFY_TOL));
        assert!(cert.support_deviation > 0.01);
    }

    #[test]
    fn point_mass_certified_without_disturbance_losses() {
        let d = Disturbance::uniform(0.5, 0.9).unwrap();
        let cert = ess_certificate(&MixedStrategy::point_mass_at_zero(), &params(2.0, 1.0), &d, 101, &tol()).unwrap();
        assert!(cert.is_certified(CERTIFY_TOL));
        assert!((cert.level - libm::exp(-2.0)).abs() < 1e-15);
    }

    #[test]
    fn phi_rises_across_a_strategy_gap_with_disturbance_mass() {
        let d = Disturbance::uniform(0.0, 1.0).unwrap();
        let s = MixedStrategy::new(0.1, alloc::vec![(0.0, 0.0), (0.4, 0.5), (0.7, 0.5), (1.0, 1.0)]).unwrap();
        let (a, p) = (3.0, 0.2);
        let pr = params(a, p);
        let before = phi(0.4, &s, &pr, &d, &tol()).unwrap();
        let after = phi(0.7, &s, &pr, &d, &tol()).unwrap();
        let f = s.f_mu(0.4);
        let jump = libm::exp(-a * f) * (libm::exp(a * (1.0 - p) * f) - p) * 0.3;
        assert!(after > before);
        assert!((after - before - jump).abs() < 1e-12);

        // Without disturbance mass on the gap the profile stays flat.
        let gapped = Disturbance::piecewise_linear(&[(0.0, 1.0), (0.4, 1.0), (0.4, 0.0), (0.7, 0.0), (0.7, 1.0), (1.0, 1.0)])
            .unwrap();
        let b = phi(0.4, &s, &pr, &gapped, &tol()).unwrap();
        let e = phi(0.7, &s, &pr, &gapped, &tol()).unwrap();
        assert!((b - e).abs() < 1e-14);
    }

    #[test]
    fn rejects_negative_dates() {
        let d = Disturbance::uniform(0.0, 1.0).unwrap();
        let s = MixedStrategy::uniform(0.0, 1.0).unwrap();
        assert!(phi(-0.1, &s, &params(1.0, 0.5), &d, &tol()).is_err());
    }
}
