//! Quadrature, the recurring kernel integral and bracketed root finding.
//!
//! Every implicit equation of the model is a statement about
//!
//! ```text
//! K(u, v, p) = ∫_u^v dz / (z^(1-p) - p),      1 ≤ u ≤ v, 0 ≤ p < 1.
//! ```
//!
//! The limits are usually of the form `e^(a·something)` with `a` up to ~50, so
//! the kernel is evaluated after the substitution `z = e^s`:
//!
//! ```text
//! K = ∫_{ln u}^{ln v} e^(ps) / ((1-p) - p·expm1(-(1-p)s)) ds,
//! ```
//!
//! whose denominator is a sum of two non-negative terms. The integrand grows
//! like `e^(ps)` instead of `e^s` and never materialises `v` itself.

use alloc::vec::Vec;

use crate::disturbance::Disturbance;
use crate::error::{Error, Result};

/// Convergence controls shared by quadrature and root finding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_iter: 200,
        }
    }
}

impl Tolerances {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self> {
        if !(abs_tol > 0.0) || !(rel_tol > 0.0) || max_iter == 0 {
            return Err(Error::InvalidDomain(
                "tolerances must be positive and max_iter at least 1",
            ));
        }
        Ok(Tolerances {
            abs_tol,
            rel_tol,
            max_iter,
        })
    }

    /// Same budget, both tolerances multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Tolerances {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            max_iter: self.max_iter,
        }
    }
}

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Single Gauss–Kronrod 15-point panel: returns (estimate, error estimate).
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(WGK[..7].iter()).enumerate() {
        let dx = half * x;
        let sum = f(center - dx) + f(center + dx);
        kronrod += w * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the summed
/// estimate falls below `max(abs_tol, rel_tol·|I|)`; `max_iter` bounds the
/// number of bisections.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: &Tolerances) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidDomain("integration limits must be finite"));
    }
    let (first, err) = gk15(&mut f, a, b);
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(16);
    panels.push((a, b, first, err));
    let mut total = first;
    let mut total_err = err;
    let mut splits = 0;
    loop {
        if !total.is_finite() {
            return Err(Error::NoConvergence {
                iterations: splits,
                estimate: total,
            });
        }
        if total_err <= tol.abs_tol.max(tol.rel_tol * total.abs()) {
            return Ok(total);
        }
        if splits >= tol.max_iter {
            return Err(Error::NoConvergence {
                iterations: splits,
                estimate: total,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, value, error) = panels[worst];
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Panel cannot be split further in floating point; accept it.
            total_err -= error;
            panels[worst].3 = 0.0;
            continue;
        }
        let (left, left_err) = gk15(&mut f, lo, mid);
        let (right, right_err) = gk15(&mut f, mid, hi);
        total += left + right - value;
        total_err += left_err + right_err - error;
        panels[worst] = (lo, mid, left, left_err);
        panels.push((mid, hi, right, right_err));
        splits += 1;
    }
}

/// Integrand of the kernel in log coordinates, `e^s / (e^((1-p)s) - p)`.
#[inline]
pub fn kernel_integrand_log(s: f64, p: f64) -> f64 {
    let q = 1.0 - p;
    libm::exp(p * s) / (q - p * libm::expm1(-q * s))
}

/// `∫_{e^s_lo}^{e^s_hi} dz / (z^(1-p) - p)` with the limits given by their
/// logarithms, `0 ≤ s_lo ≤ s_hi`.
pub fn kernel_log(s_lo: f64, s_hi: f64, p: f64, tol: &Tolerances) -> Result<f64> {
    if !(s_lo >= 0.0) || !(s_hi >= s_lo) {
        return Err(Error::InvalidDomain("kernel needs 0 ≤ ln u ≤ ln v"));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidDomain("kernel needs p in [0, 1)"));
    }
    if p == 0.0 {
        return Ok(s_hi - s_lo);
    }
    integrate(|s| kernel_integrand_log(s, p), s_lo, s_hi, tol)
}

/// `K(u, v, p) = ∫_u^v dz / (z^(1-p) - p)` for `1 ≤ u ≤ v`, `0 ≤ p < 1`.
pub fn kernel_k(u: f64, v: f64, p: f64, tol: &Tolerances) -> Result<f64> {
    if !(u >= 1.0) || !(v >= u) {
        return Err(Error::InvalidDomain("kernel needs 1 ≤ u ≤ v"));
    }
    kernel_log(libm::log(u), libm::log(v), p, tol)
}

/// Brent's bracketed root search.
///
/// `f(lo)` and `f(hi)` must differ in sign, unless one of them is already
/// within `abs_tol` of zero, in which case that endpoint is returned. The
/// search stops once the bracket is narrower than `rel_tol·|x| + abs_tol`.
pub fn bracketed_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: &Tolerances) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        if fa.abs() <= tol.abs_tol && fa.abs() <= fb.abs() {
            return Ok(a);
        }
        if fb.abs() <= tol.abs_tol {
            return Ok(b);
        }
        return Err(Error::NoBracket {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let (mut c, mut fc) = (b, fb);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * (tol.rel_tol * b.abs() + tol.abs_tol);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation, or secant when only two points are distinct.
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::NoConvergence {
                iterations: tol.max_iter,
                estimate: b,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: tol.max_iter,
        estimate: b,
    })
}

/// `∫_lo^hi weight(x)·f(x) dx` for the disturbance density `f`.
///
/// The interval is cut at every knot of the density so each panel sees a
/// smooth integrand.
pub fn integrate_density_product<W: FnMut(f64) -> f64>(
    d: &Disturbance,
    mut weight: W,
    lo: f64,
    hi: f64,
    tol: &Tolerances,
) -> Result<f64> {
    if !(lo <= hi) {
        return Err(Error::InvalidDomain("integration needs lo ≤ hi"));
    }
    let mut total = 0.0;
    for seg in d.segments() {
        let a = seg.x0.max(lo);
        let b = seg.x1.min(hi);
        if a >= b || seg.mass() == 0.0 {
            continue;
        }
        total += integrate(|x| weight(x) * seg.density(x), a, b, tol)?;
    }
    Ok(total)
}

/// Eight-point Gauss–Legendre rule on [-1, 1] (nodes, weights).
pub(crate) const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];
