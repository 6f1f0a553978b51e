//! Scalar root bracketing and refinement.

use crate::error::{Error, Result};

/// A sign change of a sampled function between consecutive grid points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignChange {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

/// All sign changes of sampled values along an ascending grid.
pub fn sign_changes(grid: &[f64], values: &[f64]) -> Vec<SignChange> {
    grid.windows(2)
        .zip(values.windows(2))
        .filter(|(_, v)| v[0].is_finite() && v[1].is_finite() && (v[0] < 0.0) != (v[1] < 0.0))
        .map(|(x, v)| SignChange {
            lo: x[0],
            hi: x[1],
            f_lo: v[0],
            f_hi: v[1],
        })
        .collect()
}

/// Geometric grid of `n` points from `a` to `b` (both positive).
pub fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let r = (b / a).ln() / (n - 1) as f64;
    (0..n).map(|i| a * (r * i as f64).exp()).collect()
}

/// Bisection on a predicate that is `false` at `lo` and `true` at `hi`.
pub fn bisect_predicate(
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    mut pred: impl FnMut(f64) -> Result<bool>,
) -> Result<(f64, f64)> {
    for _ in 0..200 {
        if (hi - lo).abs() <= xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

/// Brent's method on a bracket with `f(a)` and `f(b)` of opposite sign.
pub fn brent(
    a: f64,
    b: f64,
    xtol: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if (fa < 0.0) == (fb < 0.0) {
        return Err(Error::BracketFailure(format!(
            "no sign change on [{a}, {b}]: f = ({fa}, {fb})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if (fb < 0.0) == (fc < 0.0) {
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
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::NoConvergence(format!("Brent iteration on [{a}, {c}]")))
}
