//! Richardson extrapolation of cutoff ladders.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An extrapolated limit with the size of the last correction as error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub value: f64,
    pub error_estimate: f64,
}

/// Extrapolates `values[i] ≈ L + Σ_j c_j h_i^(j·p)` to `h = 0` (Neville tableau in `h^p`).
pub fn richardson(h: &[f64], values: &[f64], p: f64) -> Result<Extrapolation> {
    if h.len() != values.len() || h.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "ladder of {} spacings and {} values",
            h.len(),
            values.len()
        )));
    }
    let x: Vec<f64> = h.iter().map(|v| v.powf(p)).collect();
    let n = x.len();
    let mut t = values.to_vec();
    let mut prev_diag = t[n - 1];
    let mut last_diag = t[n - 1];
    for level in 1..n {
        for i in (level..n).rev() {
            let (xa, xb) = (x[i - level], x[i]);
            if xa == xb {
                return Err(Error::InvalidParameter("repeated ladder spacing".into()));
            }
            t[i] = (xa * t[i] - xb * t[i - 1]) / (xa - xb);
        }
        prev_diag = last_diag;
        last_diag = t[n - 1];
    }
    let error_estimate = if n == 1 {
        f64::INFINITY
    } else {
        (last_diag - prev_diag).abs()
    };
    Ok(Extrapolation {
        value: last_diag,
        error_estimate,
    })
}

/// Least-squares fit of `E(Λ) = E_∞ + a/Λ + b/Λ² + c ln Λ/Λ²`, using as many
/// terms as the ladder allows. The error estimate is the change against the
/// fit with one term fewer on the largest rungs.
pub fn fit_cutoff_limit(lambdas: &[f64], values: &[f64]) -> Result<Extrapolation> {
    if lambdas.len() != values.len() || lambdas.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "ladder of {} radii and {} values",
            lambdas.len(),
            values.len()
        )));
    }
    let fit = |n_terms: usize, skip: usize| -> Result<f64> {
        let rows = lambdas.len() - skip;
        let a = DMatrix::from_fn(rows, n_terms, |i, j| {
            let l = lambdas[i + skip];
            match j {
                0 => 1.0,
                1 => 1.0 / l,
                2 => 1.0 / (l * l),
                _ => l.ln() / (l * l),
            }
        });
        let b = DVector::from_fn(rows, |i, _| values[i + skip]);
        let x = a
            .svd(true, true)
            .solve(&b, 1e-14)
            .map_err(|e| Error::InvalidParameter(format!("ladder fit: {e}")))?;
        Ok(x[0])
    };
    let n = lambdas.len();
    let terms = n.min(4);
    let value = fit(terms, 0)?;
    let error_estimate = if n == 1 {
        f64::INFINITY
    } else {
        (value - fit(terms - 1, 1)?).abs()
    };
    Ok(Extrapolation {
        value,
        error_estimate,
    })
}

/// Decay exponents `log(d_i/d_{i+1}) / log(h_i/h_{i+1})` of successive differences.
pub fn decay_exponents(h: &[f64], values: &[f64]) -> Vec<f64> {
    let d: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let hm: Vec<f64> = h.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
    d.windows(2)
        .zip(hm.windows(2))
        .map(|(dd, hh)| (dd[0] / dd[1]).ln() / (hh[0] / hh[1]).ln())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_fit_recovers_model() {
        let l = [12.0, 16.0, 24.0, 32.0];
        let v: Vec<f64> = l.iter().map(|x: &f64| -0.35 + 0.4 / x - 2.0 / (x * x) + 1.5 * x.ln() / (x * x)).collect();
        let e = fit_cutoff_limit(&l, &v).unwrap();
        assert!((e.value + 0.35).abs() < 1e-12);
        assert!(e.error_estimate > 0.0);
    }

    #[test]
    fn exact_for_polynomials() {
        let h = [1.0, 0.5, 0.25];
        let v: Vec<f64> = h.iter().map(|x| 3.0 + 2.0 * x - 5.0 * x * x).collect();
        let e = richardson(&h, &v, 1.0).unwrap();
        assert!((e.value - 3.0).abs() < 1e-13);
    }

    #[test]
    fn quadratic_leading_order() {
        let h: [f64; 3] = [0.1, 0.05, 0.025];
        let v: Vec<f64> = h.iter().map(|x| 1.0 + x * x + x.powi(4)).collect();
        let e = richardson(&h, &v, 2.0).unwrap();
        assert!((e.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_rung_passes_through() {
        let e = richardson(&[0.5], &[2.0], 1.0).unwrap();
        assert_eq!(e.value, 2.0);
        assert!(e.error_estimate.is_infinite());
    }

    #[test]
    fn exponents_of_power_law() {
        let h = [1.0, 0.5, 0.25, 0.125];
        let v: Vec<f64> = h.iter().map(|x: &f64| 1.0 + x.powi(3)).collect();
        for p in decay_exponents(&h, &v) {
            assert!((p - 3.0).abs() < 1e-10);
        }
    }
}
