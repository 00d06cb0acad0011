//! Arrival-time strategies: an atom at time 0 plus a tabulated continuous part.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::disturbance::SupportGap;
use crate::error::{Error, Result};

/// The law `μ = γ₀·δ₀ + (1 − γ₀)·ν`, where `ν` has the piecewise-linear CDF
/// through `ac_knots`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy {
    atom: f64,
    knots: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportSummary {
    pub min_support: f64,
    pub max_support: f64,
    pub gaps: Vec<SupportGap>,
}

const ENDPOINT_SLACK: f64 = 1e-9;

impl MixedStrategy {
    /// `ac_knots` are `(x, F_ν(x))` with strictly increasing `x ≥ 0`,
    /// nondecreasing `F_ν`, first value 0 and last value 1. Endpoint values
    /// within 1e-9 of 0 and 1 are snapped.
    pub fn new(atom_at_zero: f64, ac_knots: Vec<(f64, f64)>) -> Result<Self> {
        if !(0.0..=1.0).contains(&atom_at_zero) {
            return Err(Error::InvalidDomain("atom mass must lie in [0, 1]"));
        }
        let mut knots = ac_knots;
        if knots.len() < 2 {
            return Err(Error::InvalidDomain("a strategy CDF needs at least two knots"));
        }
        if knots.iter().any(|&(x, f)| !x.is_finite() || !f.is_finite() || x < 0.0) {
            return Err(Error::InvalidDomain("strategy knots must be finite with x ≥ 0"));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
            return Err(Error::InvalidDomain(
                "strategy knots need increasing x and nondecreasing CDF values",
            ));
        }
        let n = knots.len();
        if knots[0].1.abs() > ENDPOINT_SLACK || (knots[n - 1].1 - 1.0).abs() > ENDPOINT_SLACK {
            return Err(Error::InvalidDomain("strategy CDF must run from 0 to 1"));
        }
        knots[0].1 = 0.0;
        knots[n - 1].1 = 1.0;
        for k in knots.iter_mut() {
            k.1 = k.1.clamp(0.0, 1.0);
        }
        Ok(MixedStrategy {
            atom: atom_at_zero,
            knots,
        })
    }

    /// No atom; `ν` uniform on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(0.0, alloc::vec![(lo, 0.0), (hi, 1.0)])
    }

    /// Everyone arrives at time 0.
    pub fn point_mass_at_zero() -> Self {
        MixedStrategy {
            atom: 1.0,
            knots: alloc::vec![(0.0, 0.0), (1.0, 1.0)],
        }
    }

    /// Uniform arrivals on the last `1/n` of `[0, t_high]`.
    pub fn late_arrival_family(n: u32, t_high: f64) -> Result<Self> {
        if n == 0 || !(t_high > 0.0) {
            return Err(Error::InvalidDomain("late-arrival family needs n ≥ 1 and t_high > 0"));
        }
        Self::uniform(t_high - t_high / f64::from(n), t_high)
    }

    pub fn atom_at_zero(&self) -> f64 {
        self.atom
    }

    pub fn ac_knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Knot positions of the continuous part.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().map(|k| k.0)
    }

    pub fn f_nu(&self, x: f64) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if x <= first.0 {
            return 0.0;
        }
        if x >= last.0 {
            return 1.0;
        }
        let i = self.knots.partition_point(|k| k.0 <= x);
        let (x0, f0) = self.knots[i - 1];
        let (x1, f1) = self.knots[i];
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }

    /// Right-continuous CDF of `μ`.
    pub fn f_mu(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.atom + (1.0 - self.atom) * self.f_nu(x)
        }
    }

    /// `F_μ(x⁻)`, the mass strictly before `x`.
    pub fn f_mu_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.f_mu(x)
        }
    }

    /// Density of `ν` (slope of the tabulated CDF), right-continuous.
    pub fn nu_density(&self, x: f64) -> f64 {
        let i = self.knots.partition_point(|k| k.0 <= x);
        if i == 0 || i == self.knots.len() {
            return 0.0;
        }
        let (x0, f0) = self.knots[i - 1];
        let (x1, f1) = self.knots[i];
        (f1 - f0) / (x1 - x0)
    }

    /// Minimal `x` with `F_ν(x) ≥ q`.
    pub fn nu_quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let i = self.knots.partition_point(|k| k.1 < q);
        if i == 0 {
            return self.knots[0].0;
        }
        if i == self.knots.len() {
            return self.knots[i - 1].0;
        }
        let (x0, f0) = self.knots[i - 1];
        let (x1, f1) = self.knots[i];
        x0 + (x1 - x0) * (q - f0) / (f1 - f0)
    }

    /// Inverse CDF of `μ` at `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        if u < self.atom {
            0.0
        } else {
            self.nu_quantile((u - self.atom) / (1.0 - self.atom))
        }
    }

    /// Whether `y` belongs to the support of `μ`.
    pub fn on_support(&self, y: f64) -> bool {
        if y == 0.0 && self.atom > 0.0 {
            return true;
        }
        if self.atom >= 1.0 {
            return false;
        }
        self.knots
            .windows(2)
            .any(|w| w[1].1 > w[0].1 && y >= w[0].0 && y <= w[1].0)
    }

    pub fn support_summary(&self) -> SupportSummary {
        let rising: Vec<(f64, f64)> = if self.atom < 1.0 {
            self.knots
                .windows(2)
                .filter(|w| w[1].1 > w[0].1)
                .map(|w| (w[0].0, w[1].0))
                .collect()
        } else {
            Vec::new()
        };
        let mut spans: Vec<(f64, f64)> = Vec::with_capacity(rising.len() + 1);
        if self.atom > 0.0 {
            spans.push((0.0, 0.0));
        }
        for (lo, hi) in rising {
            match spans.last_mut() {
                Some(s) if s.1 >= lo => s.1 = hi,
                _ => spans.push((lo, hi)),
            }
        }
        let gaps = spans
            .windows(2)
            .map(|w| SupportGap {
                lo: w[0].1,
                hi: w[1].0,
            })
            .collect();
        SupportSummary {
            min_support: spans.first().map_or(0.0, |s| s.0),
            max_support: spans.last().map_or(0.0, |s| s.1),
            gaps,
        }
    }

    /// `n` independent arrival times, reproducible from `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.quantile(rng.gen::<f64>())).collect()
    }
}
