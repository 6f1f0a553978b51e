//! Certified lattice sums: exact inner sums plus rigorous intervals for the
//! tail `|k| > R`, obtained by comparing the lattice sum of a nonincreasing
//! radial profile against one- and two-dimensional integrals.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::{isqrt, max_norm2, Momentum};
use crate::error::{Error, Result};

/// A closed real interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan(), "bad interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    /// `[−r, r]`.
    pub fn symmetric(r: f64) -> Self {
        Interval { lo: -r, hi: r }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn radius(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn widen(&self, eps: f64) -> Self {
        Interval::new(self.lo - eps, self.hi + eps)
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn clamp_nonneg(&self) -> Self {
        Interval::new(self.lo.max(0.0), self.hi.max(0.0))
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval::new(self.lo - o.hi, self.hi - o.lo)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, s: f64) -> Interval {
        if s >= 0.0 {
            Interval::new(self.lo * s, self.hi * s)
        } else {
            Interval::new(self.hi * s, self.lo * s)
        }
    }
}

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
    abs: f64,
    count: usize,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs += x.abs();
        self.count += 1;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Sum of absolute values of the terms.
    pub fn abs_total(&self) -> f64 {
        self.abs
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Bound on the accumulated rounding error, allowing a few ulps of
    /// evaluation error in every term.
    pub fn rounding_bound(&self) -> f64 {
        8.0 * f64::EPSILON * self.abs + 2.0 * f64::EPSILON * self.value().abs()
    }
}

/// A nonnegative radial function `f(t)` on `[0, ∞)`, nonincreasing from
/// [`RadialProfile::monotone_from`] on, with enclosures of its tail integrals.
pub trait RadialProfile {
    fn value(&self, t: f64) -> f64;
    fn monotone_from(&self) -> f64;
    /// Encloses `∫_a^∞ f(t) dt`.
    fn line_integral(&self, a: f64) -> Interval;
    /// Encloses `∫_a^∞ f(t) t dt`.
    fn area_integral(&self, a: f64) -> Interval;
    /// A radial majorant of `max(|f''(t)|, |f'(t)|/t)`, the operator norm of
    /// the Hessian of `x ↦ f(|x|)`, valid for `t ≥ t_min`.
    fn hessian_majorant(&self, _t_min: f64) -> Option<InversePower> {
        None
    }
}

/// `coeff · (t² + shift)^(−power)` with `power > 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InversePower {
    pub coeff: f64,
    pub shift: f64,
    pub power: f64,
}

impl InversePower {
    pub fn new(coeff: f64, shift: f64, power: f64) -> Result<Self> {
        if power <= 1.0 {
            return Err(Error::TailNotSummable(format!(
                "majorant decays like |k|^-{} which is not summable in two dimensions",
                2.0 * power
            )));
        }
        if !(coeff >= 0.0 && coeff.is_finite() && shift.is_finite()) {
            return Err(Error::TailNotSummable(format!(
                "invalid majorant coefficients ({coeff}, {shift})"
            )));
        }
        Ok(InversePower { coeff, shift, power })
    }

    pub fn zero() -> Self {
        InversePower {
            coeff: 0.0,
            shift: 1.0,
            power: 2.0,
        }
    }

    fn line_from_regular(&self, a: f64) -> Interval {
        let p = self.power;
        let base = self.coeff * a.powf(1.0 - 2.0 * p) / (2.0 * p - 1.0);
        let factor = (1.0 + self.shift / (a * a)).powf(-p);
        if self.shift >= 0.0 {
            Interval::new(base * factor, base)
        } else {
            Interval::new(base, base * factor)
        }
    }
}

impl RadialProfile for InversePower {
    fn value(&self, t: f64) -> f64 {
        if self.coeff == 0.0 {
            return 0.0;
        }
        self.coeff * (t * t + self.shift).powf(-self.power)
    }

    fn monotone_from(&self) -> f64 {
        if self.coeff == 0.0 {
            0.0
        } else {
            (-self.shift).max(0.0).sqrt()
        }
    }

    fn line_integral(&self, a: f64) -> Interval {
        if self.coeff == 0.0 {
            return Interval::ZERO;
        }
        if a * a + self.shift <= 0.0 {
            return Interval::new(f64::INFINITY, f64::INFINITY);
        }
        let s = self.shift.max(0.0).sqrt();
        if self.shift > 0.0 && a < s {
            let head = self.value(a) * (s - a);
            let rest = self.line_from_regular(s);
            return Interval::new(rest.lo, rest.hi + head);
        }
        self.line_from_regular(a)
    }

    fn area_integral(&self, a: f64) -> Interval {
        if self.coeff == 0.0 {
            return Interval::ZERO;
        }
        let u = a * a + self.shift;
        if u <= 0.0 {
            return Interval::new(f64::INFINITY, f64::INFINITY);
        }
        let v = self.coeff * u.powf(1.0 - self.power) / (2.0 * (self.power - 1.0));
        Interval::new(v, v).widen(4.0 * f64::EPSILON * v)
    }

    fn hessian_majorant(&self, t_min: f64) -> Option<InversePower> {
        let p = self.power;
        let m = if self.shift >= 0.0 {
            1.0
        } else {
            let u = t_min * t_min + self.shift;
            if u <= 0.0 {
                return None;
            }
            t_min * t_min / u
        };
        Some(InversePower {
            coeff: self.coeff * (2.0 * p + 4.0 * p * (p + 1.0) * m),
            shift: self.shift,
            power: p + 1.0,
        })
    }
}

/// `1 + min(u, 0)/(c T²)`, so that `c t² + u ≥ θ c t²` for `t ≥ T`.
fn dominance_factor(c: f64, u: f64, t_min: f64) -> Option<f64> {
    let theta = 1.0 + u.min(0.0) / (c * t_min * t_min);
    (theta > 0.0 && t_min > 0.0).then_some(theta)
}

/// `|1/(c t² + a) − 1/(c t² + b)|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolventDifference {
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

/// `∫_x^∞ dt / (c t² + u)`.
fn inverse_quadratic_line(c: f64, u: f64, x: f64) -> f64 {
    if u > 0.0 {
        (u / c).sqrt().atan2(x) / (c * u).sqrt()
    } else if u == 0.0 {
        1.0 / (c * x)
    } else {
        let w = (-u / c).sqrt();
        if x <= w {
            return f64::INFINITY;
        }
        (2.0 * w / (x - w)).ln_1p() / (2.0 * c * w)
    }
}

impl RadialProfile for ResolventDifference {
    fn value(&self, t: f64) -> f64 {
        let x = self.c * t * t;
        ((self.b - self.a) / ((x + self.a) * (x + self.b))).abs()
    }

    fn monotone_from(&self) -> f64 {
        ((-self.a).max(-self.b).max(0.0) / self.c).sqrt()
    }

    fn line_integral(&self, x: f64) -> Interval {
        if self.a == self.b {
            return Interval::ZERO;
        }
        let la = inverse_quadratic_line(self.c, self.a, x);
        let lb = inverse_quadratic_line(self.c, self.b, x);
        let v = (la - lb).abs();
        let slack = 8.0 * f64::EPSILON * (la.abs() + lb.abs());
        Interval::new((v - slack).max(0.0), v + slack)
    }

    fn area_integral(&self, x: f64) -> Interval {
        if self.a == self.b {
            return Interval::ZERO;
        }
        let base = self.c * x * x + self.a;
        if base <= 0.0 || self.c * x * x + self.b <= 0.0 {
            return Interval::new(f64::INFINITY, f64::INFINITY);
        }
        let v = ((self.b - self.a) / base).ln_1p().abs() / (2.0 * self.c);
        Interval::new(v, v).widen(8.0 * f64::EPSILON * v)
    }

    fn hessian_majorant(&self, t_min: f64) -> Option<InversePower> {
        let theta = dominance_factor(self.c, self.a.min(self.b), t_min)?;
        let ct = self.c * theta;
        Some(InversePower {
            coeff: (self.b - self.a).abs() * self.c * (4.0 + 24.0 / theta) / (ct * ct * ct),
            shift: 0.0,
            power: 3.0,
        })
    }
}

/// `coeff · t² / (c t² + d)³`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticOverCubic {
    pub coeff: f64,
    pub c: f64,
    pub d: f64,
}

impl QuadraticOverCubic {
    fn line_from_regular(&self, a: f64) -> Interval {
        let inner = self.c + self.d / (a * a);
        if inner <= 0.0 {
            return Interval::new(f64::INFINITY, f64::INFINITY);
        }
        let x = self.coeff / (3.0 * self.c.powi(3) * a.powi(3));
        let y = self.coeff / (3.0 * inner.powi(3) * a.powi(3));
        Interval::new(x.min(y), x.max(y))
    }
}

impl RadialProfile for QuadraticOverCubic {
    fn value(&self, t: f64) -> f64 {
        let u = self.c * t * t + self.d;
        self.coeff * t * t / (u * u * u)
    }

    fn monotone_from(&self) -> f64 {
        if self.coeff == 0.0 {
            return 0.0;
        }
        let m = if self.d >= 0.0 {
            self.d / (2.0 * self.c)
        } else {
            -self.d / self.c
        };
        m.sqrt()
    }

    fn line_integral(&self, a: f64) -> Interval {
        if self.coeff == 0.0 {
            return Interval::ZERO;
        }
        if self.d > 0.0 {
            let a1 = (self.d / self.c).sqrt();
            if a < a1 {
                let tm2 = self.d / (2.0 * self.c);
                let peak = self.coeff * tm2 / (1.5 * self.d).powi(3);
                let rest = self.line_from_regular(a1);
                return Interval::new(rest.lo, rest.hi + peak * (a1 - a));
            }
        }
        self.line_from_regular(a)
    }

    fn area_integral(&self, a: f64) -> Interval {
        if self.coeff == 0.0 {
            return Interval::ZERO;
        }
        let u = self.c * a * a + self.d;
        if u <= 0.0 {
            return Interval::new(f64::INFINITY, f64::INFINITY);
        }
        let v = self.coeff / (2.0 * self.c * self.c) * (1.0 / u - self.d / (2.0 * u * u));
        let slack = 8.0 * f64::EPSILON * self.coeff / (self.c * self.c) * (1.0 / u + (self.d / (u * u)).abs());
        Interval::new((v - slack).max(0.0), v + slack)
    }

    fn hessian_majorant(&self, t_min: f64) -> Option<InversePower> {
        let theta = dominance_factor(self.c, self.d, t_min)?;
        let ct = self.c * theta;
        Some(InversePower {
            coeff: self.coeff * (2.0 + 30.0 / theta + 48.0 / (theta * theta)) / (ct * ct * ct),
            shift: 0.0,
            power: 3.0,
        })
    }
}

fn is_sum_of_two_squares(n: i64) -> bool {
    let mut x = 0;
    while 2 * x * x <= n {
        let y = isqrt(n - x * x);
        if y * y == n - x * x {
            return true;
        }
        x += 1;
    }
    false
}

/// Number of lattice points with `x² + y² ≤ n2max`.
pub(crate) fn ball_count(n2max: i64) -> u64 {
    if n2max < 0 {
        return 0;
    }
    let n = isqrt(n2max);
    (-n..=n).map(|x| 2 * isqrt(n2max - x * x) as u64 + 1).sum()
}

/// Comparison with one- and two-dimensional integrals over shifted regions.
fn crude_tail(profile: &dyn RadialProfile, kappa: f64, n2max: i64) -> Option<Interval> {
    let n0 = isqrt(n2max) + 1;
    let rt = kappa * ((n2max + 1) as f64).sqrt();
    let inner_edge = (rt - SQRT_2 * kappa).max(0.0);
    let start = profile.monotone_from();
    if start > inner_edge * (1.0 + 1e-12) && start != 0.0 {
        return None;
    }
    // The origin is a tail point only when n2max < 0.
    let origin = if n2max < 0 { profile.value(0.0) } else { 0.0 };
    let axis_hi = profile.line_integral(((n0 - 1) as f64) * kappa).hi;
    let axis_lo = profile.line_integral((n0 as f64) * kappa).lo;
    let quad_hi = profile.area_integral(inner_edge).hi;
    let rho = rt + SQRT_2 * kappa;
    let quad_lo = (FRAC_PI_2 * profile.area_integral(rho).lo
        - 2.0 * kappa * profile.line_integral(rho - kappa).hi)
        .max(0.0);
    let hi = origin + 4.0 / kappa * axis_hi + 2.0 * PI / (kappa * kappa) * quad_hi;
    let lo = origin + 4.0 / kappa * axis_lo + 4.0 / (kappa * kappa) * quad_lo;
    if !hi.is_finite() {
        return None;
    }
    Some(Interval::new(lo.min(hi), hi))
}

/// Cell-average comparison: every tail point is matched with its unit cell,
/// the cell union is compared with the complement of the equal-area disk,
/// and the midpoint-rule defect is bounded through the Hessian.
fn refined_tail(profile: &dyn RadialProfile, kappa: f64, n2max: i64) -> Option<Interval> {
    if n2max < 0 {
        return None;
    }
    let n_in = (0..=n2max).rev().find(|&n| is_sum_of_two_squares(n))?;
    let n_out = (n2max + 1..).find(|&n| is_sum_of_two_squares(n))?;
    let half_diag = kappa / SQRT_2;
    let rt = kappa * (n_out as f64).sqrt();
    let rho_lo = rt - half_diag;
    let rho_hi = kappa * (n_in as f64).sqrt() + half_diag;
    let rho = kappa * (ball_count(n2max) as f64 / PI).sqrt();
    if rho_lo <= 0.0 || !(rho_lo <= rho && rho <= rho_hi) {
        return None;
    }
    if profile.monotone_from() > rho_lo {
        return None;
    }
    let h = profile.hessian_majorant(rho_lo)?;
    let omega = PI * (rho * rho - rho_lo * rho_lo);
    let area = profile.area_integral(rho);
    let drop = (profile.value(rho_lo) - profile.value(rho_hi)).max(0.0);
    let k2 = kappa * kappa;
    let integral = Interval::new(2.0 * PI * area.lo / k2, (2.0 * PI * area.hi + omega * drop) / k2);
    let shrink = 1.0 - half_diag / rt;
    let shifted = InversePower {
        coeff: h.coeff * shrink.powf(-2.0 * h.power),
        shift: h.shift / (shrink * shrink),
        power: h.power,
    };
    let defect = k2 / 12.0 * crude_tail(&shifted, kappa, n2max)?.hi;
    let out = integral.widen(defect + 4.0 * f64::EPSILON * integral.hi.abs());
    out.is_finite().then(|| out.clamp_nonneg())
}

/// Encloses `Σ_{k ∈ κℤ², k² > κ²·n2max} f(|k|)`, intersecting the available
/// comparison bounds.
pub fn lattice_tail(profile: &dyn RadialProfile, kappa: f64, n2max: i64) -> Result<Interval> {
    let n2max = n2max.max(-1);
    let crude = crude_tail(profile, kappa, n2max);
    let refined = refined_tail(profile, kappa, n2max);
    match (crude, refined) {
        (Some(c), Some(r)) => {
            let lo = c.lo.max(r.lo);
            let hi = c.hi.min(r.hi);
            Ok(if lo <= hi { Interval::new(lo, hi) } else { c })
        }
        (Some(c), None) => Ok(c),
        (None, Some(r)) => Ok(r),
        (None, None) => Err(Error::TailNotSummable(format!(
            "majorant is not monotone or not integrable beyond squared radius {} (lattice units)",
            n2max + 1
        ))),
    }
}

/// Calls `f` on every lattice point with `|k| ≤ radius`.
pub fn for_each_in_ball(kappa: f64, radius: f64, mut f: impl FnMut(Momentum)) {
    let n2max = max_norm2(radius, kappa);
    if n2max < 0 {
        return;
    }
    let n = isqrt(n2max);
    for x in -n..=n {
        let ymax = isqrt(n2max - x * x);
        for y in -ymax..=ymax {
            f(Momentum::new(x, y));
        }
    }
}

/// A lattice sum with a rigorous error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSum {
    pub value: f64,
    pub error_bound: f64,
    pub inner_radius: f64,
    pub points: usize,
}

impl LatticeSum {
    pub fn interval(&self) -> Interval {
        Interval::new(self.value - self.error_bound, self.value + self.error_bound)
    }
}

/// Sign information on the unmodelled remainder of a split tail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RemainderSign {
    NonNegative,
    NonPositive,
    Either,
}

/// Sums `summand` exactly over `|k| ≤ inner_radius` and bounds the rest by
/// `majorant`, which must dominate `|summand(k)|` for `|k| > inner_radius`.
pub fn tail_corrected_sum(
    kappa: f64,
    inner_radius: f64,
    summand: impl Fn(Momentum) -> f64,
    majorant: &dyn RadialProfile,
) -> Result<LatticeSum> {
    tail_corrected_sum_split(
        kappa,
        inner_radius,
        summand,
        &[],
        Some((majorant, RemainderSign::Either)),
    )
}

/// Like [`tail_corrected_sum`], but on the tail the summand (after averaging
/// over the point group) equals `Σ sign_i f_i(|k|) + rest(k)` where the
/// `f_i` are radial profiles and `|rest| ≤ remainder`.
pub fn tail_corrected_sum_split(
    kappa: f64,
    inner_radius: f64,
    summand: impl Fn(Momentum) -> f64,
    parts: &[(f64, &dyn RadialProfile)],
    remainder: Option<(&dyn RadialProfile, RemainderSign)>,
) -> Result<LatticeSum> {
    let n2max = max_norm2(inner_radius, kappa);
    let mut tail = Interval::ZERO;
    for &(sign, profile) in parts {
        tail = tail + lattice_tail(profile, kappa, n2max)? * sign;
    }
    if let Some((profile, sign)) = remainder {
        let r = lattice_tail(profile, kappa, n2max)?.hi;
        tail = tail
            + match sign {
                RemainderSign::NonNegative => Interval::new(0.0, r),
                RemainderSign::NonPositive => Interval::new(-r, 0.0),
                RemainderSign::Either => Interval::symmetric(r),
            };
    }
    let mut acc = NeumaierSum::new();
    for_each_in_ball(kappa, inner_radius, |k| acc.add(summand(k)));
    let value = acc.value() + tail.mid();
    let error_bound = tail.radius() + acc.rounding_bound() + 2.0 * f64::EPSILON * value.abs();
    if !value.is_finite() || !error_bound.is_finite() {
        return Err(Error::TailNotSummable(format!(
            "lattice sum is not finite at radius {inner_radius}"
        )));
    }
    Ok(LatticeSum {
        value,
        error_bound,
        inner_radius,
        points: acc.count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(profile: &dyn RadialProfile, kappa: f64, n2min: i64, n2max: i64) -> f64 {
        let n = isqrt(n2max) + 1;
        let mut acc = NeumaierSum::new();
        for x in -n..=n {
            for y in -n..=n {
                let m = x * x + y * y;
                if m >= n2min && m <= n2max {
                    acc.add(profile.value(kappa * (m as f64).sqrt()));
                }
            }
        }
        acc.value()
    }

    #[test]
    fn interval_arithmetic() {
        let a = Interval::new(1.0, 2.0);
        let b = Interval::new(-1.0, 3.0);
        assert_eq!(a + b, Interval::new(0.0, 5.0));
        assert_eq!(a - b, Interval::new(-2.0, 3.0));
        assert_eq!(a * -2.0, Interval::new(-4.0, -2.0));
        assert_eq!(-a, Interval::new(-2.0, -1.0));
        assert!(a.contains(1.5));
    }

    #[test]
    fn neumaier_beats_naive() {
        let mut acc = NeumaierSum::new();
        acc.add(1.0);
        for _ in 0..1000 {
            acc.add(1e-16);
        }
        acc.add(-1.0);
        assert!((acc.value() - 1e-13).abs() < 1e-20);
    }

    #[test]
    fn inverse_power_integrals() {
        let p = InversePower::new(3.0, 0.0, 2.0).unwrap();
        let l = p.line_integral(2.0);
        assert!(l.contains(3.0 / (3.0 * 8.0)));
        let a = p.area_integral(2.0);
        assert!((a.mid() - 3.0 / (2.0 * 4.0)).abs() < 1e-15);
        assert!(InversePower::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn resolvent_difference_matches_quadrature() {
        let f = ResolventDifference { c: 2.0, a: 1.0, b: 5.0 };
        // Simpson on [x, X] plus analytic far tail
        let x = 1.5;
        let n = 200_000;
        let upper = 400.0;
        let h = (upper - x) / n as f64;
        let mut s_line = 0.0;
        let mut s_area = 0.0;
        for i in 0..=n {
            let t = x + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s_line += w * f.value(t);
            s_area += w * f.value(t) * t;
        }
        s_line *= h / 3.0;
        s_area *= h / 3.0;
        let far_line = 4.0 / (4.0 * 3.0 * upper.powi(3));
        let far_area = 4.0 / (4.0 * 2.0 * upper.powi(2));
        let l = f.line_integral(x);
        let a = f.area_integral(x);
        assert!((l.mid() - s_line - far_line).abs() < 1e-9, "{l:?} {s_line}");
        assert!((a.mid() - s_area - far_area).abs() < 1e-8, "{a:?} {s_area}");
    }

    #[test]
    fn quadratic_over_cubic_area_exact() {
        let f = QuadraticOverCubic { coeff: 2.0, c: 1.5, d: 0.7 };
        let x = 2.0;
        let n = 400_000;
        let upper = 2000.0;
        let h = (upper - x) / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let t = x + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * f.value(t) * t;
        }
        s *= h / 3.0;
        let far = 2.0 / (2.0 * 1.5f64.powi(3) * upper * upper);
        assert!((f.area_integral(x).mid() - s - far).abs() < 1e-9);
        let l = f.line_integral(x);
        assert!(l.lo <= l.hi);
    }

    #[test]
    fn lattice_tail_encloses_brute_force() {
        let profiles: Vec<Box<dyn RadialProfile>> = vec![
            Box::new(InversePower::new(1.0, 0.5, 2.0).unwrap()),
            Box::new(InversePower::new(1.0, -0.5, 1.5).unwrap()),
            Box::new(ResolventDifference { c: 2.0, a: 1.0, b: -0.3 }),
            Box::new(QuadraticOverCubic { coeff: 1.0, c: 2.0, d: 1.0 }),
        ];
        for kappa in [1.0, 0.7] {
            for prof in &profiles {
                for n2max in [4i64, 25, 50] {
                    let cut = 40_000i64;
                    let Ok(est) = lattice_tail(prof.as_ref(), kappa, n2max) else {
                        assert!(n2max < 25);
                        continue;
                    };
                    let far = lattice_tail(prof.as_ref(), kappa, cut).unwrap();
                    let mid = brute(prof.as_ref(), kappa, n2max + 1, cut);
                    let lo = mid + far.lo;
                    let hi = mid + far.hi;
                    assert!(
                        est.lo <= hi && lo <= est.hi,
                        "kappa {kappa} n2max {n2max}: {est:?} vs [{lo}, {hi}]"
                    );
                }
            }
        }
    }

    #[test]
    fn constant_indicator_sum_is_exact() {
        let r = 5.0;
        let s = tail_corrected_sum(
            1.0,
            r,
            |k| if k.norm2() <= 25 { 1.0 } else { 0.0 },
            &InversePower::zero(),
        )
        .unwrap();
        assert_eq!(s.value, super::super::enumerate_ball(1.0, r).len() as f64);
        assert!(s.error_bound < 1e-12);
        let z = tail_corrected_sum(1.0, 3.0, |_| 0.0, &InversePower::zero()).unwrap();
        assert_eq!(z.value, 0.0);
        assert_eq!(z.error_bound, 0.0);
    }

    #[test]
    fn inverse_quartic_sum_converges() {
        // Σ_{k ≠ 0} 1/|k|^4 over ℤ² = 4 ζ(2) β(2) with Catalan's constant.
        let exact = 4.0 * (PI * PI / 6.0) * 0.915_965_594_177_219;
        let prof = InversePower::new(1.0, 0.0, 2.0).unwrap();
        let s = tail_corrected_sum(
            1.0,
            300.0,
            |k| {
                let n = k.norm2();
                if n == 0 {
                    0.0
                } else {
                    1.0 / (n as f64 * n as f64)
                }
            },
            &prof,
        )
        .unwrap();
        // the majorant is two-sided here, the midpoint split would be tighter
        assert!((s.value - exact).abs() <= s.error_bound, "{s:?} vs {exact}");
        let t = lattice_tail(&prof, 1.0, max_norm2(300.0, 1.0)).unwrap();
        let inner = s.value;
        assert!(inner + t.lo <= exact + 1e-12 && exact <= inner + t.hi + 1e-12);
        assert!(t.hi - t.lo < 1e-6);
    }

    #[test]
    fn refined_bound_scales_like_inverse_fourth_power() {
        let f = ResolventDifference { c: 2.0, a: 1.0, b: 3.0 };
        let w1 = lattice_tail(&f, 1.0, 100 * 100).unwrap();
        let w2 = lattice_tail(&f, 1.0, 200 * 200).unwrap();
        let crude = crude_tail(&f, 1.0, 200 * 200).unwrap();
        let r1 = w1.hi - w1.lo;
        let r2 = w2.hi - w2.lo;
        assert!(r2 < 0.1 * r1, "{r1} {r2}");
        assert!(r2 < 0.05 * (crude.hi - crude.lo));
    }

    #[test]
    fn ball_count_matches_enumeration() {
        for n in [0i64, 1, 2, 5, 17, 100] {
            let r = (n as f64).sqrt();
            assert_eq!(ball_count(n) as usize, super::super::enumerate_ball(1.0, r).len());
        }
        assert!(is_sum_of_two_squares(25) && !is_sum_of_two_squares(21));
    }

    #[test]
    fn non_monotone_region_rejected() {
        let f = QuadraticOverCubic { coeff: 1.0, c: 1.0, d: 200.0 };
        assert!(matches!(
            lattice_tail(&f, 1.0, 4),
            Err(Error::TailNotSummable(_))
        ));
    }
}
