//! The evolutionarily stable strategy and its coefficients.
//!
//! Writing `K(s₀, s₁) = ∫_{e^s₀}^{e^s₁} dz / (z^(1-p) - p)` and
//! `C = K(0, a)`:
//!
//! * the phase threshold `a_M(p)` solves `K(0, a_M) = 1/p`;
//! * above it the atom `γ` solves `p·e^(-aγ)·K(aγ, a) = 1`;
//! * the common fitness is `λ = 1/(1 + (1-p)C)` up to the threshold and
//!   `p·e^(-aγ)` beyond it;
//! * below the threshold the continuous part starts at the largest `x_c`
//!   with `tail(x_c) = 1/(1 - p + 1/C)`;
//! * `F_ν` solves `λ·K(aγ, a((1-γ)F_ν(x) + γ)) = cdf(x) - cdf(x_c)`.

use alloc::vec::Vec;
use core::fmt;

use crate::disturbance::Disturbance;
use crate::error::{Error, Result};
use crate::numerics::{bracketed_root, kernel_log, Tolerances};
use crate::strategy::MixedStrategy;

/// Competition strength `a` and disturbance survival probability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompetitionParams {
    a: f64,
    p: f64,
}

impl CompetitionParams {
    /// `a > 0`, `0 ≤ p < 1`: the range in which a unique nontrivial ESS exists.
    pub fn new(a: f64, p: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidDomain("competition strength a must be positive and finite"));
        }
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidDomain("survival probability p must lie in [0, 1)"));
        }
        Ok(CompetitionParams { a, p })
    }

    /// Also admits `a = 0` and `p = 1`, where there is no competition or no
    /// disturbance. Fitness evaluation accepts these; the solver does not.
    pub fn with_edges(a: f64, p: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::InvalidDomain("competition strength a must be nonnegative and finite"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidDomain("survival probability p must lie in [0, 1]"));
        }
        Ok(CompetitionParams { a, p })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == 0.0 || self.p == 1.0
    }

    fn require_regular(&self) -> Result<()> {
        if self.is_degenerate() {
            Err(Error::InvalidDomain(
                "a = 0 or p = 1 has no interior equilibrium; use degenerate_cases",
            ))
        } else {
            Ok(())
        }
    }
}

/// The phase-transition level `a_M(p)`; unbounded when `p = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseThreshold {
    Finite(f64),
    Unbounded,
}

impl PhaseThreshold {
    /// Value as a float, `+∞` when unbounded.
    pub fn value(&self) -> f64 {
        match *self {
            PhaseThreshold::Finite(v) => v,
            PhaseThreshold::Unbounded => f64::INFINITY,
        }
    }

    pub fn classify(&self, a: f64) -> Regime {
        match *self {
            PhaseThreshold::Unbounded => Regime::Subcritical,
            PhaseThreshold::Finite(am) if (a - am).abs() <= CRITICAL_BAND * am => Regime::Critical,
            PhaseThreshold::Finite(am) if a < am => Regime::Subcritical,
            PhaseThreshold::Finite(_) => Regime::Supercritical,
        }
    }
}

const CRITICAL_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        })
    }
}

/// Largest absolute residuals of the equations solved along the way, each
/// in units where the equation's right side is of order one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// `p·K(0, a_M) - 1`.
    pub threshold: f64,
    /// `p·e^(-aγ)·K(aγ, a) - 1`.
    pub gamma: f64,
    /// `tail(x_c) - 1/(1 - p + 1/C)`.
    pub x_c: f64,
    /// `λ·K(aγ, a) - (1 - cdf(x_c))` before the last knot is pinned to 1.
    pub endpoint: f64,
    /// Worst `λ·K(aγ, s_i) - (cdf(x_i) - cdf(x_c))` over the tabulated knots.
    pub knots: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        [self.threshold, self.gamma, self.x_c, self.endpoint, self.knots]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EssSolution {
    pub params: CompetitionParams,
    pub a_m: PhaseThreshold,
    pub regime: Regime,
    pub gamma: f64,
    pub x_c: f64,
    pub lambda: f64,
    pub strategy: MixedStrategy,
    pub residuals: Residuals,
}

impl EssSolution {
    /// Exact density of the continuous part,
    /// `f(y)·(e^(-apF_μ) - p·e^(-aF_μ)) / (a(1-γ)λ)`, zero off its support.
    pub fn density(&self, d: &Disturbance, y: f64) -> f64 {
        let knots = self.strategy.ac_knots();
        if y < knots[0].0 || y > knots[knots.len() - 1].0 {
            return 0.0;
        }
        let (a, p) = (self.params.a, self.params.p);
        let fm = self.strategy.f_mu(y);
        let bracket = libm::exp(-a * p * fm) - p * libm::exp(-a * fm);
        d.density(y) * bracket / (a * (1.0 - self.gamma) * self.lambda)
    }
}

/// Remark-level answers for `a = 0` or `p = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DegenerateEss {
    /// Any arrival law is stable (`a = 0`, `p = 1`).
    EveryStrategy,
    /// Exactly the laws supported on `[t, ∞)` with `t = t_high` (`a = 0`, `p < 1`).
    SupportedFrom(f64),
    /// Everyone arrives at time 0 (`a > 0`, `p = 1`).
    PointMassAtZero,
}

impl fmt::Display for DegenerateEss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegenerateEss::EveryStrategy => f.write_str("every strategy"),
            DegenerateEss::SupportedFrom(t) => write!(f, "any strategy supported at or after {t}"),
            DegenerateEss::PointMassAtZero => f.write_str("point mass at 0"),
        }
    }
}

pub fn degenerate_cases(a: f64, p: f64, d: &Disturbance) -> Result<DegenerateEss> {
    let params = CompetitionParams::with_edges(a, p)?;
    match (params.a == 0.0, params.p == 1.0) {
        (true, true) => Ok(DegenerateEss::EveryStrategy),
        (true, false) => Ok(DegenerateEss::SupportedFrom(d.t_high())),
        (false, true) => Ok(DegenerateEss::PointMassAtZero),
        (false, false) => Err(Error::InvalidDomain(
            "a > 0 and p < 1 is not degenerate; use solve_ess",
        )),
    }
}

/// `C = K(1, e^a, p)`.
pub fn kernel_c(params: &CompetitionParams, tol: &Tolerances) -> Result<f64> {
    params.require_regular()?;
    kernel_log(0.0, params.a, params.p, tol)
}

pub fn compute_a_m(p: f64, tol: &Tolerances) -> Result<PhaseThreshold> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidDomain("survival probability p must lie in [0, 1)"));
    }
    if p == 0.0 {
        return Ok(PhaseThreshold::Unbounded);
    }
    // K(0, s) ≥ s, so the root lies below 1/p.
    let root = bracketed_root(|s| kernel_residual(0.0, s, p, tol) * p - 1.0, 0.0, 1.0 / p, tol)?;
    Ok(PhaseThreshold::Finite(root))
}

/// Inverse of `a_M`: the `p` whose threshold equals `a`.
pub fn compute_p_m(a: f64, tol: &Tolerances) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidDomain("p_M needs a > 0"));
    }
    if a == f64::INFINITY {
        return Ok(0.0);
    }
    // K(0,a,p) ≤ (e^(pa) - 1)/(p(1-p)) keeps the low end negative and
    // K(0,a,p) ≥ a/((1-p)(1+a)) keeps the high end positive.
    let lo = (0.3 / a).min(0.25);
    let hi = 1.0 - 0.25 * a / (1.0 + a);
    bracketed_root(|p| p * kernel_residual(0.0, a, p, tol) - 1.0, lo, hi, tol)
}

fn kernel_residual(s_lo: f64, s_hi: f64, p: f64, tol: &Tolerances) -> f64 {
    kernel_log(s_lo, s_hi, p, tol).unwrap_or(f64::NAN)
}

pub fn compute_gamma(params: &CompetitionParams, tol: &Tolerances) -> Result<f64> {
    params.require_regular()?;
    let a_m = compute_a_m(params.p, tol)?;
    gamma_given_threshold(params, a_m, tol).map(|(g, _)| g)
}

fn gamma_given_threshold(
    params: &CompetitionParams,
    a_m: PhaseThreshold,
    tol: &Tolerances,
) -> Result<(f64, f64)> {
    if a_m.classify(params.a) != Regime::Supercritical {
        return Ok((0.0, 0.0));
    }
    let (a, p) = (params.a, params.p);
    let h = |g: f64| p * libm::exp(-a * g) * kernel_residual(a * g, a, p, tol) - 1.0;
    let upper = (1.0 - a_m.value() / a).min(p);
    let g = match bracketed_root(h, 0.0, upper, tol) {
        Ok(g) => g,
        Err(Error::NoBracket { .. }) => bracketed_root(h, 0.0, 1.0, tol)?,
        Err(e) => return Err(e),
    };
    Ok((g, h(g).abs()))
}

pub fn compute_lambda(params: &CompetitionParams, tol: &Tolerances) -> Result<f64> {
    params.require_regular()?;
    let a_m = compute_a_m(params.p, tol)?;
    let (gamma, _) = gamma_given_threshold(params, a_m, tol)?;
    lambda_given(params, a_m, gamma, tol)
}

fn lambda_given(params: &CompetitionParams, a_m: PhaseThreshold, gamma: f64, tol: &Tolerances) -> Result<f64> {
    let (a, p) = (params.a, params.p);
    if a_m.classify(a) == Regime::Supercritical {
        Ok(p * libm::exp(-a * gamma))
    } else {
        let c = kernel_log(0.0, a, p, tol)?;
        Ok(1.0 / (1.0 + (1.0 - p) * c))
    }
}

/// `α = (1 - pC)/(1 + (1-p)C)` and `R = 1/(1 - p + 1/C)`: for a uniform
/// disturbance the continuous part starts at `t_low + α(t_high - t_low)`,
/// and `R` is the disturbance mass after that start.
pub fn uniform_alpha_r(params: &CompetitionParams, tol: &Tolerances) -> Result<(f64, f64)> {
    params.require_regular()?;
    let a_m = compute_a_m(params.p, tol)?;
    if a_m.classify(params.a) == Regime::Supercritical {
        return Err(Error::InvalidRegime("α and R are defined only for a ≤ a_M(p)"));
    }
    let (a, p) = (params.a, params.p);
    let c = kernel_log(0.0, a, p, tol)?;
    Ok(((1.0 - p * c) / (1.0 + (1.0 - p) * c), 1.0 / (1.0 - p + 1.0 / c)))
}

pub fn compute_x_c(params: &CompetitionParams, d: &Disturbance, tol: &Tolerances) -> Result<f64> {
    params.require_regular()?;
    let a_m = compute_a_m(params.p, tol)?;
    x_c_given(params, a_m, d, tol).map(|(x, _)| x)
}

fn x_c_given(
    params: &CompetitionParams,
    a_m: PhaseThreshold,
    d: &Disturbance,
    tol: &Tolerances,
) -> Result<(f64, f64)> {
    match a_m.classify(params.a) {
        Regime::Supercritical => Ok((0.0, 0.0)),
        Regime::Critical => Ok((d.t_low(), 0.0)),
        Regime::Subcritical => {
            let c = kernel_log(0.0, params.a, params.p, tol)?;
            let r = 1.0 / (1.0 - params.p + 1.0 / c);
            let x = d.upper_quantile(1.0 - r)?;
            Ok((x, (d.tail(x) - r).abs()))
        }
    }
}

/// Solve for the equilibrium and tabulate `F_ν` on about `grid_points` knots.
///
/// Knots sit at equally spaced levels of `cdf(x) - cdf(x_c)` on
/// `[max(x_c, t_low), t_high]`, merged with every breakpoint of the density,
/// and spans wider than 1.5 times the even spacing are split.
/// Each knot is found by inverting the kernel independently, so errors do
/// not accumulate along the grid.
pub fn solve_ess(
    params: &CompetitionParams,
    d: &Disturbance,
    grid_points: usize,
    tol: &Tolerances,
) -> Result<EssSolution> {
    params.require_regular()?;
    if grid_points < 3 {
        return Err(Error::InvalidDomain("the ESS grid needs at least 3 points"));
    }
    let (a, p) = (params.a, params.p);
    let a_m = compute_a_m(p, tol)?;
    let regime = a_m.classify(a);
    let threshold_residual = match a_m {
        PhaseThreshold::Finite(v) => (p * kernel_log(0.0, v, p, tol)? - 1.0).abs(),
        PhaseThreshold::Unbounded => 0.0,
    };
    let (gamma, gamma_residual) = gamma_given_threshold(params, a_m, tol)?;
    let lambda = lambda_given(params, a_m, gamma, tol)?;
    let (x_c, x_c_residual) = x_c_given(params, a_m, d, tol)?;

    let start = x_c.max(d.t_low());
    let end = d.t_high();
    let base = d.cdf(x_c);
    let s0 = a * gamma;
    let mass = 1.0 - base;

    let endpoint = (lambda * kernel_log(s0, a, p, tol)? - mass).abs();
    if endpoint > 100.0 * tol.abs_tol {
        return Err(Error::InconsistentSolution { residual: endpoint });
    }

    let xs = ess_grid(d, start, end, base, grid_points)?;
    let mut knots = Vec::with_capacity(xs.len());
    let mut knot_residual: f64 = 0.0;
    let mut prev: Option<(f64, f64)> = None; // (target, s)
    for (i, &x) in xs.iter().enumerate() {
        let target = ((d.cdf(x) - base) / lambda).max(0.0);
        let s = if i + 1 == xs.len() {
            a
        } else if i == 0 && target == 0.0 {
            s0
        } else if let Some((_, s_prev)) = prev.filter(|&(t, _)| t == target) {
            s_prev
        } else if p == 0.0 {
            (s0 + target).min(a)
        } else {
            let lo = prev.map_or(s0, |(_, s)| s);
            let s = bracketed_root(|s| kernel_residual(s0, s, p, tol) - target, lo, a, tol)?;
            knot_residual = knot_residual.max((lambda * kernel_log(s0, s, p, tol)? - lambda * target).abs());
            s
        };
        prev = Some((target, s));
        let w = if i + 1 == xs.len() {
            1.0
        } else {
            ((s / a - gamma) / (1.0 - gamma)).clamp(0.0, 1.0)
        };
        knots.push((x, w));
    }
    // Monotone by construction up to root tolerance; enforce it exactly.
    for i in 1..knots.len() {
        if knots[i].1 < knots[i - 1].1 {
            knots[i].1 = knots[i - 1].1;
        }
    }
    let strategy = MixedStrategy::new(gamma, knots)?;
    Ok(EssSolution {
        params: *params,
        a_m,
        regime,
        gamma,
        x_c,
        lambda,
        strategy,
        residuals: Residuals {
            threshold: threshold_residual,
            gamma: gamma_residual,
            x_c: x_c_residual,
            endpoint,
            knots: knot_residual,
        },
    })
}

fn ess_grid(d: &Disturbance, start: f64, end: f64, base: f64, n: usize) -> Result<Vec<f64>> {
    let mass = 1.0 - base;
    let mut xs: Vec<f64> = Vec::with_capacity(n + d.segments().len() + 2);
    xs.push(start);
    xs.push(end);
    for i in 1..n - 1 {
        let q = base + mass * (i as f64) / ((n - 1) as f64);
        xs.push(d.quantile(q.min(1.0))?);
    }
    xs.extend(d.breakpoints());
    xs.retain(|&x| x >= start && x <= end);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    // Where the density is thin, mass quantiles drift far apart; split those spans.
    let widest = 1.5 * (end - start) / ((n - 1) as f64);
    let mut out = Vec::with_capacity(xs.len());
    for w in xs.windows(2) {
        out.push(w[0]);
        let pieces = libm::ceil((w[1] - w[0]) / widest);
        if pieces > 1.0 {
            let k = pieces as usize;
            out.extend((1..k).map(|j| w[0] + (w[1] - w[0]) * j as f64 / k as f64));
        }
    }
    out.push(end);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn params(a: f64, p: f64) -> CompetitionParams {
        CompetitionParams::new(a, p).unwrap()
    }

    fn rel(x: f64, y: f64) -> f64 {
        ((x - y) / y).abs()
    }

    #[test]
    fn params_validation() {
        assert!(CompetitionParams::new(0.0, 0.2).is_err());
        assert!(CompetitionParams::new(1.0, 1.0).is_err());
        assert!(CompetitionParams::new(1.0, -0.1).is_err());
        assert!(CompetitionParams::with_edges(0.0, 1.0).unwrap().is_degenerate());
        let edge = CompetitionParams::with_edges(0.0, 0.5).unwrap();
        assert!(solve_ess(&edge, &Disturbance::uniform(0.0, 1.0).unwrap(), 11, &tol()).is_err());
    }

    #[test]
    fn threshold_values() {
        assert_eq!(compute_a_m(0.0, &tol()).unwrap(), PhaseThreshold::Unbounded);
        assert!(rel(compute_a_m(0.2, &tol()).unwrap().value(), 3.30447) < 0.01);
        let half = compute_a_m(0.5, &tol()).unwrap().value();
        assert!((half - 0.944964).abs() < 1e-5);
        assert!(compute_a_m(1.0, &tol()).is_err());
    }

    #[test]
    fn threshold_inverse() {
        let a = compute_a_m(0.3, &tol()).unwrap().value();
        assert!((compute_p_m(a, &tol()).unwrap() - 0.3).abs() < 1e-8);
        assert!(compute_p_m(1e-4, &tol()).unwrap() > 0.99);
        // 0.296549 from an independent 30-digit quadrature.
        assert!((compute_p_m(2.075, &tol()).unwrap() - 0.296549).abs() < 1e-6);
        assert_eq!(compute_p_m(f64::INFINITY, &tol()).unwrap(), 0.0);
        assert!(compute_p_m(0.0, &tol()).is_err());
    }

    #[test]
    fn lambda_values() {
        assert!(rel(compute_lambda(&params(0.2, 0.2), &tol()).unwrap(), 0.833158) < 0.005);
        assert!(rel(compute_lambda(&params(5.0, 0.2), &tol()).unwrap(), 0.120448) < 0.005);
        assert_eq!(compute_lambda(&params(3.0, 0.0), &tol()).unwrap(), 1.0 / 4.0);
        let am = compute_a_m(0.4, &tol()).unwrap().value();
        assert!((compute_lambda(&params(am, 0.4), &tol()).unwrap() - 0.4).abs() < 1e-9);
    }

    #[test]
    fn gamma_values() {
        assert!(rel(compute_gamma(&params(5.0, 0.2), &tol()).unwrap(), 0.10142) < 0.005);
        assert!(rel(compute_gamma(&params(5.0, 0.5), &tol()).unwrap(), 0.456433) < 0.005);
        assert_eq!(compute_gamma(&params(1.0, 0.2), &tol()).unwrap(), 0.0);
    }

    #[test]
    fn x_c_values() {
        let u = Disturbance::uniform(0.0, 1.0).unwrap();
        assert!(rel(compute_x_c(&params(0.2, 0.2), &u, &tol()).unwrap(), 0.791448) < 0.005);
        assert_eq!(compute_x_c(&params(5.0, 0.2), &u, &tol()).unwrap(), 0.0);
        let d = Disturbance::uniform(0.3, 0.8).unwrap();
        let am = compute_a_m(0.3, &tol()).unwrap().value();
        assert_eq!(compute_x_c(&params(am, 0.3), &d, &tol()).unwrap(), 0.3);
    }

    #[test]
    fn x_c_takes_right_end_of_flat_tail() {
        // Mass 1/2 on [0,1], gap on (1,2), mass 1/2 on [2,3]. Choose p = 0 and
        // a = 1 so R = a/(1+a) = 1/2 lands exactly on the flat level.
        let d = Disturbance::piecewise_linear(&[(0.0, 1.0), (1.0, 1.0), (1.0, 0.0), (2.0, 0.0), (2.0, 1.0), (3.0, 1.0)])
            .unwrap();
        let x = compute_x_c(&params(1.0, 0.0), &d, &tol()).unwrap();
        assert!((x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_r() {
        let (alpha, r) = uniform_alpha_r(&params(0.2, 0.2), &tol()).unwrap();
        assert!(rel(r, 0.208552) < 0.005);
        assert!((alpha - (1.0 - r)).abs() < 1e-14);
        let (_, r0) = uniform_alpha_r(&params(1.5, 0.0), &tol()).unwrap();
        assert!((r0 - 1.5 / 2.5).abs() < 1e-14);
        assert!(matches!(uniform_alpha_r(&params(5.0, 0.2), &tol()), Err(Error::InvalidRegime(_))));
    }

    #[test]
    fn degenerate() {
        let d = Disturbance::uniform(0.2, 0.7).unwrap();
        assert_eq!(degenerate_cases(0.0, 0.5, &d).unwrap(), DegenerateEss::SupportedFrom(0.7));
        assert_eq!(degenerate_cases(1.0, 1.0, &d).unwrap(), DegenerateEss::PointMassAtZero);
        assert_eq!(degenerate_cases(0.0, 1.0, &d).unwrap(), DegenerateEss::EveryStrategy);
        assert!(degenerate_cases(1.0, 0.5, &d).is_err());
    }

    #[test]
    fn p_zero_cdf_is_linear_in_disturbance_cdf() {
        let d = Disturbance::piecewise_linear(&[(0.0, 0.0), (0.5, 2.0), (1.0, 0.0)]).unwrap();
        let a = 1.3;
        let ess = solve_ess(&params(a, 0.0), &d, 101, &tol()).unwrap();
        let base = d.cdf(ess.x_c);
        for &(x, f) in ess.strategy.ac_knots() {
            let expect = (1.0 + a) / a * (d.cdf(x) - base);
            assert!((f - expect).abs() < 1e-12, "{x}: {f} vs {expect}");
        }
        assert!((d.tail(ess.x_c) - a / (1.0 + a)).abs() < 1e-12);
    }

    #[test]
    fn supercritical_solution_shape() {
        let d = Disturbance::uniform(0.5, 0.9).unwrap();
        let ess = solve_ess(&params(5.0, 0.2), &d, 201, &tol()).unwrap();
        assert_eq!(ess.regime, Regime::Supercritical);
        assert_eq!(ess.x_c, 0.0);
        let knots = ess.strategy.ac_knots();
        assert_eq!(knots[0], (0.5, 0.0));
        assert_eq!(knots[knots.len() - 1], (0.9, 1.0));
        assert!(ess.residuals.max() < 1e-8);
    }

    #[test]
    fn tabulated_cdf_matches_ode() {
        // z' = f(z^(1-p) - p)/λ with z = e^(aF_μ), integrated by RK4.
        let d = Disturbance::piecewise_linear(&[(0.1, 0.5), (0.6, 2.0), (1.0, 0.3)]).unwrap();
        for &(a, p) in &[(0.7, 0.3), (4.0, 0.25)] {
            let ess = solve_ess(&params(a, p), &d, 401, &tol()).unwrap();
            let rhs = |x: f64, z: f64| d.density(x) * (libm::pow(z, 1.0 - p) - p) / ess.lambda;
            let knots = ess.strategy.ac_knots();
            let mut z = libm::exp(a * ess.gamma);
            let mut worst: f64 = 0.0;
            for w in knots.windows(2) {
                let steps = 20;
                let h = (w[1].0 - w[0].0) / steps as f64;
                for i in 0..steps {
                    // Nodes are recomputed, not accumulated, so the last one
                    // never drifts past the end of the support.
                    let x = w[0].0 + h * i as f64;
                    let x_end = if i + 1 == steps { w[1].0 } else { x + h };
                    let k1 = rhs(x, z);
                    let k2 = rhs(x + 0.5 * h, z + 0.5 * h * k1);
                    let k3 = rhs(x + 0.5 * h, z + 0.5 * h * k2);
                    let k4 = rhs(x_end, z + h * k3);
                    z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
                worst = worst.max((libm::log(z) / a - ess.strategy.f_mu(w[1].0)).abs());
            }
            assert!(worst < 1e-9, "a={a} p={p}: {worst}");
        }
    }

    #[test]
    fn density_integrates_to_the_tabulated_cdf() {
        let d = Disturbance::uniform(0.0, 1.0).unwrap();
        let ess = solve_ess(&params(0.2, 0.2), &d, 2001, &tol()).unwrap();
        let x = 0.9;
        let integral = crate::numerics::integrate(|y| ess.density(&d, y), ess.x_c, x, &tol()).unwrap();
        assert!((integral - ess.strategy.f_nu(x)).abs() < 1e-8);
        assert_eq!(ess.density(&d, 0.5), 0.0);
    }

    #[test]
    fn gap_knots_are_flat() {
        let d = Disturbance::piecewise_linear(&[(0.0, 1.0), (0.4, 1.0), (0.4, 0.0), (0.7, 0.0), (0.7, 1.0), (1.0, 1.0)])
            .unwrap();
        let ess = solve_ess(&params(4.0, 0.3), &d, 101, &tol()).unwrap();
        assert_eq!(ess.strategy.f_nu(0.4), ess.strategy.f_nu(0.7));
        assert!(!ess.strategy.on_support(0.55));
    }
}
