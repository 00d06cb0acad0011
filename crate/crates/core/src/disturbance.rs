//! Disturbance-time densities.
//!
//! A density is stored as a list of linear segments. Repeated knot positions
//! encode jumps and zero-density spans encode gaps in the support, so the
//! CDF, quantile and quadrature splitting are all exact.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisturbanceKind {
    Uniform,
    PiecewiseLinear,
}

/// Open span `(lo, hi)` inside `[t_low, t_high]` on which the density vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportGap {
    pub lo: f64,
    pub hi: f64,
}

/// One linear piece of the density, `d0` at `x0` to `d1` at `x1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub x0: f64,
    pub x1: f64,
    pub d0: f64,
    pub d1: f64,
    /// CDF at `x0`.
    cum: f64,
}

impl Segment {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn mass(&self) -> f64 {
        0.5 * (self.d0 + self.d1) * self.width()
    }

    fn slope(&self) -> f64 {
        (self.d1 - self.d0) / self.width()
    }

    pub fn density(&self, x: f64) -> f64 {
        let t = (x - self.x0) / self.width();
        self.d0 + (self.d1 - self.d0) * t
    }

    fn mass_to(&self, x: f64) -> f64 {
        let t = x - self.x0;
        t * (self.d0 + 0.5 * self.slope() * t)
    }

    /// Offset `t` into the segment at which the accumulated mass equals `r`.
    fn offset_for_mass(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let slope = self.slope();
        let disc = (self.d0 * self.d0 + 2.0 * slope * r).max(0.0);
        let denom = self.d0 + libm::sqrt(disc);
        let t = if denom > 0.0 { 2.0 * r / denom } else { self.width() };
        t.clamp(0.0, self.width())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance {
    kind: DisturbanceKind,
    knots: Vec<(f64, f64)>,
    segments: Vec<Segment>,
    t_low: f64,
    t_high: f64,
    normalization: f64,
}

impl Disturbance {
    /// Uniform density on `[t_low, t_high]`.
    pub fn uniform(t_low: f64, t_high: f64) -> Result<Self> {
        if !(t_low.is_finite() && t_high.is_finite()) || t_low < 0.0 || t_low >= t_high {
            return Err(Error::InvalidDomain("uniform disturbance needs 0 ≤ t_low < t_high"));
        }
        let h = 1.0 / (t_high - t_low);
        let mut d = Self::build(&[(t_low, h), (t_high, h)])?;
        d.kind = DisturbanceKind::Uniform;
        Ok(d)
    }

    /// Piecewise-linear density through `(x, density)` knots.
    ///
    /// Positions must be nonnegative and nondecreasing; a repeated position is
    /// a jump. The density is renormalised to unit mass and the factor applied
    /// is kept in [`Disturbance::normalization`].
    pub fn piecewise_linear(knots: &[(f64, f64)]) -> Result<Self> {
        Self::build(knots)
    }

    fn build(raw: &[(f64, f64)]) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::InvalidDomain("a density needs at least two knots"));
        }
        if raw.iter().any(|&(x, d)| !x.is_finite() || !d.is_finite() || x < 0.0 || d < 0.0) {
            return Err(Error::InvalidDomain(
                "density knots must be finite with x ≥ 0 and density ≥ 0",
            ));
        }
        if raw.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::InvalidDomain("density knots must be sorted by position"));
        }
        let total: f64 = raw
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDomain("density must have positive finite mass"));
        }
        let scale = 1.0 / total;
        let knots: Vec<(f64, f64)> = raw.iter().map(|&(x, d)| (x, d * scale)).collect();
        let mut segments = Vec::with_capacity(knots.len() - 1);
        let mut cum = 0.0;
        for w in knots.windows(2) {
            if w[1].0 > w[0].0 {
                let seg = Segment {
                    x0: w[0].0,
                    x1: w[1].0,
                    d0: w[0].1,
                    d1: w[1].1,
                    cum,
                };
                cum += seg.mass();
                segments.push(seg);
            }
        }
        let first = segments.iter().find(|s| s.mass() > 0.0).map(|s| s.x0);
        let last = segments.iter().rev().find(|s| s.mass() > 0.0).map(|s| s.x1);
        let (t_low, t_high) = match (first, last) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => return Err(Error::InvalidDomain("density must have positive mass")),
        };
        // Keep only the pieces inside the support so lookups never see the
        // zero-mass leading or trailing spans.
        segments.retain(|s| s.x0 >= t_low && s.x1 <= t_high);
        Ok(Disturbance {
            kind: DisturbanceKind::PiecewiseLinear,
            knots,
            segments,
            t_low,
            t_high,
            normalization: scale,
        })
    }

    pub fn kind(&self) -> DisturbanceKind {
        self.kind
    }

    pub fn t_low(&self) -> f64 {
        self.t_low
    }

    pub fn t_high(&self) -> f64 {
        self.t_high
    }

    /// Normalised `(x, density)` knots as supplied.
    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Factor the supplied densities were multiplied by to reach unit mass.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Distinct breakpoints of the density within `[t_low, t_high]`, ascending.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        let first = self.segments.first().map(|s| s.x0);
        first
            .into_iter()
            .chain(self.segments.iter().map(|s| s.x1))
    }

    /// Segment containing `x`, taking the right-hand piece at a shared endpoint.
    fn segment_at(&self, x: f64) -> Option<&Segment> {
        if x < self.t_low || x > self.t_high {
            return None;
        }
        let i = self.segments.partition_point(|s| s.x0 <= x);
        self.segments.get(i.saturating_sub(1))
    }

    pub fn density(&self, x: f64) -> f64 {
        self.segment_at(x).map_or(0.0, |s| s.density(x).max(0.0))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.t_low {
            return 0.0;
        }
        if x >= self.t_high {
            return 1.0;
        }
        self.segment_at(x)
            .map_or(0.0, |s| (s.cum + s.mass_to(x)).clamp(0.0, 1.0))
    }

    /// `1 - cdf(x)`: probability that the disturbance has not struck by `x`.
    pub fn tail(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// Minimal `x` with `cdf(x) ≥ q`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidDomain("quantile level must lie in [0, 1]"));
        }
        if q == 0.0 {
            return Ok(self.t_low);
        }
        let seg = self
            .segments
            .iter()
            .find(|s| s.mass() > 0.0 && s.cum + s.mass() >= q);
        Ok(match seg {
            Some(s) => s.x0 + s.offset_for_mass(q - s.cum),
            None => self.t_high,
        })
    }

    /// Maximal `x` with `cdf(x) ≤ q`: the right end of any flat span at level `q`.
    pub fn upper_quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidDomain("quantile level must lie in [0, 1]"));
        }
        let seg = self
            .segments
            .iter()
            .find(|s| s.mass() > 0.0 && s.cum + s.mass() > q);
        Ok(match seg {
            Some(s) => s.x0 + s.offset_for_mass(q - s.cum),
            None => self.t_high,
        })
    }

    /// Zero-density spans strictly inside the support, merged.
    pub fn gaps(&self) -> Vec<SupportGap> {
        let mut gaps: Vec<SupportGap> = Vec::new();
        for s in self.segments.iter().filter(|s| s.mass() == 0.0) {
            match gaps.last_mut() {
                Some(g) if g.hi == s.x0 => g.hi = s.x1,
                _ => gaps.push(SupportGap { lo: s.x0, hi: s.x1 }),
            }
        }
        gaps
    }

    /// Affine image of the density carrying `[t_low, t_high]` onto
    /// `[new_low, new_high]`.
    pub fn rescale(&self, new_low: f64, new_high: f64) -> Result<Self> {
        if !(new_low.is_finite() && new_high.is_finite()) || new_low < 0.0 || new_low >= new_high {
            return Err(Error::InvalidDomain("rescale needs 0 ≤ new_low < new_high"));
        }
        if self.kind == DisturbanceKind::Uniform {
            return Self::uniform(new_low, new_high);
        }
        let ratio = (new_high - new_low) / (self.t_high - self.t_low);
        let map = |x: f64| {
            if x == self.t_high {
                new_high
            } else {
                new_low + (x - self.t_low) * ratio
            }
        };
        let mut knots = Vec::with_capacity(2 * self.segments.len());
        for s in &self.segments {
            knots.push((map(s.x0), s.d0 / ratio));
            knots.push((map(s.x1), s.d1 / ratio));
        }
        knots.dedup();
        Self::build(&knots)
    }
}

impl fmt::Display for Disturbance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DisturbanceKind::Uniform => write!(f, "uniform({}, {})", self.t_low, self.t_high),
            DisturbanceKind::PiecewiseLinear => {
                write!(f, "piecewise({} knots on [{}, {}])", self.knots.len(), self.t_low, self.t_high)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Disturbance {
        Disturbance::piecewise_linear(&[(0.0, 0.0), (0.5, 2.0), (1.0, 0.0)]).unwrap()
    }

    fn gapped() -> Disturbance {
        Disturbance::piecewise_linear(&[
            (0.1, 1.0),
            (0.3, 1.0),
            (0.3, 0.0),
            (0.6, 0.0),
            (0.6, 2.0),
            (0.8, 2.0),
        ])
        .unwrap()
    }

    #[test]
    fn uniform_density_and_cdf() {
        let u = Disturbance::uniform(0.5, 0.9).unwrap();
        assert!((u.density(0.7) - 2.5).abs() < 1e-12);
        assert_eq!(u.density(0.2), 0.0);
        assert_eq!(u.density(1.0), 0.0);
        assert_eq!(u.cdf(0.9), 1.0);
        assert_eq!(u.tail(0.5), 1.0);
        assert!((u.cdf(0.7) - 0.5).abs() < 1e-14);
        assert!((u.quantile(0.5).unwrap() - 0.7).abs() < 1e-14);
        assert_eq!(u.quantile(0.0).unwrap(), 0.5);
        assert_eq!(u.kind(), DisturbanceKind::Uniform);
    }

    #[test]
    fn uniform_tail_at_reference_point() {
        let u = Disturbance::uniform(0.0, 1.0).unwrap();
        assert!((u.tail(0.791448) - 0.208552).abs() < 1e-12);
    }

    #[test]
    fn support_may_start_at_zero() {
        let u = Disturbance::uniform(0.0, 2.0).unwrap();
        assert_eq!(u.t_low(), 0.0);
        assert_eq!(u.cdf(0.0), 0.0);
        assert!((u.density(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn triangle_values() {
        let t = triangle();
        assert!((t.density(0.5) - 2.0).abs() < 1e-14);
        assert!((t.cdf(0.25) - 0.125).abs() < 1e-14);
        assert!((t.cdf(0.5) - 0.5).abs() < 1e-14);
        assert!((t.quantile(0.5).unwrap() - 0.5).abs() < 1e-12);
        assert!((t.quantile(0.125).unwrap() - 0.25).abs() < 1e-12);
        assert!((t.quantile(0.875).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_input_is_rescaled() {
        let d = Disturbance::piecewise_linear(&[(1.0, 3.0), (2.0, 3.0)]).unwrap();
        assert!((d.density(1.5) - 1.0).abs() < 1e-15);
        assert!((d.normalization() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn leading_zero_span_is_not_support() {
        let d = Disturbance::piecewise_linear(&[(0.0, 0.0), (0.4, 0.0), (0.4, 1.0), (1.4, 1.0)]).unwrap();
        assert_eq!(d.t_low(), 0.4);
        assert_eq!(d.t_high(), 1.4);
        assert!(d.gaps().is_empty());
    }

    #[test]
    fn gaps_and_flat_cdf() {
        let g = gapped();
        assert_eq!(g.gaps(), alloc::vec![SupportGap { lo: 0.3, hi: 0.6 }]);
        let level = g.cdf(0.3);
        assert!((g.cdf(0.45) - level).abs() < 1e-15);
        assert!((g.upper_quantile(level).unwrap() - 0.6).abs() < 1e-12);
        assert!((g.quantile(level).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(g.density(0.3), 0.0);
        assert!(g.density(0.6) > 0.0);
    }

    #[test]
    fn rescale_examples() {
        let u = Disturbance::uniform(0.0, 1.0).unwrap();
        assert_eq!(u.rescale(0.5, 0.9).unwrap(), Disturbance::uniform(0.5, 0.9).unwrap());
        let t = triangle();
        let same = t.rescale(0.0, 1.0).unwrap();
        assert_eq!(same.knots(), t.knots());
        let moved = t.rescale(0.3, 1.0).unwrap();
        let peak = moved
            .knots()
            .iter()
            .fold((0.0, 0.0), |m, &k| if k.1 > m.1 { k } else { m });
        assert!((peak.0 - 0.65).abs() < 1e-14);
        assert!(matches!(t.rescale(0.5, 0.5), Err(Error::InvalidDomain(_))));
        assert!(matches!(t.rescale(-0.1, 0.5), Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Disturbance::uniform(0.9, 0.5).is_err());
        assert!(Disturbance::uniform(-0.1, 0.5).is_err());
        assert!(Disturbance::piecewise_linear(&[(0.0, 1.0)]).is_err());
        assert!(Disturbance::piecewise_linear(&[(0.0, 1.0), (1.0, -1.0)]).is_err());
        assert!(Disturbance::piecewise_linear(&[(1.0, 1.0), (0.0, 1.0)]).is_err());
        assert!(Disturbance::piecewise_linear(&[(0.0, 0.0), (1.0, 0.0)]).is_err());
        assert!(triangle().quantile(1.5).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn density_strategy() -> impl Strategy<Value = Disturbance> {
            proptest::collection::vec((0.01f64..1.0, 0.0f64..3.0), 2..8).prop_filter_map(
                "needs mass",
                |steps| {
                    let mut x = 0.2;
                    let knots: Vec<(f64, f64)> = steps
                        .iter()
                        .map(|&(dx, d)| {
                            x += dx;
                            (x, if d < 0.5 { 0.0 } else { d })
                        })
                        .collect();
                    Disturbance::piecewise_linear(&knots).ok()
                },
            )
        }

        proptest! {
            #[test]
            fn normalized(d in density_strategy()) {
                let mass: f64 = d.segments().iter().map(|s| s.mass()).sum();
                prop_assert!((mass - 1.0).abs() < 1e-9);
                prop_assert_eq!(d.cdf(d.t_low()), 0.0);
                prop_assert_eq!(d.cdf(d.t_high()), 1.0);
            }

            #[test]
            fn quantile_cdf_galois(d in density_strategy(), q in 0.0f64..=1.0, u in 0.0f64..1.0) {
                let x = d.quantile(q).unwrap();
                prop_assert!(d.cdf(x) >= q - 1e-12);
                let y = d.t_low() + u * (d.t_high() - d.t_low());
                prop_assert!(d.quantile(d.cdf(y)).unwrap() <= y + 1e-9);
                prop_assert!(d.upper_quantile(d.cdf(y)).unwrap() >= y - 1e-9);
            }

            #[test]
            fn cdf_nondecreasing(d in density_strategy(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
                let (lo, hi) = if u < v { (u, v) } else { (v, u) };
                let span = d.t_high() - d.t_low();
                prop_assert!(d.cdf(d.t_low() + lo * span) <= d.cdf(d.t_low() + hi * span));
            }

            #[test]
            fn rescale_is_affine(d in density_strategy(), lo in 0.0f64..2.0, w in 0.1f64..3.0, u in 0.0f64..1.0) {
                let r = d.rescale(lo, lo + w).unwrap();
                prop_assert!((r.t_low() - lo).abs() < 1e-12);
                prop_assert_eq!(r.t_high(), lo + w);
                let mass: f64 = r.segments().iter().map(|s| s.mass()).sum();
                prop_assert!((mass - 1.0).abs() < 1e-9);
                let x = d.t_low() + u * (d.t_high() - d.t_low());
                let y = lo + u * w;
                prop_assert!((d.cdf(x) - r.cdf(y)).abs() < 1e-9);
                prop_assert_eq!(d.gaps().len(), r.gaps().len());
            }
        }
    }
}
