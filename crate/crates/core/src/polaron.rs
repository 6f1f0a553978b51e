//! Chevy's polaron problem: `P(λ) = T(λ) − λ⁻¹|ξ⟩⟨ξ|` on the Fermi sea,
//! its largest root `μ₁(P(λ*)) = 0` and `E_P = E_μ − λ*`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FermiSea, ModelParams, Momentum};
use crate::linalg::{group_degenerate, symmetric_eigen, symmetric_eigenvalues, DEGENERACY_GAP};
use crate::renorm::{phi_limit_polaron_block, GEvaluator};
use crate::roots::{brent, geometric_grid, sign_changes};

/// `G_μ` accuracy used near the root.
pub const FINE_TOL: f64 = 1e-11;
/// `G_μ` accuracy used while scanning for brackets.
pub const SCAN_TOL: f64 = 1e-6;
/// Points of the logarithmic bracket scan.
pub const SCAN_POINTS: usize = 49;

/// Diagonal of `T(λ)`: `G_μ(λ − q², q)` over the sea.
pub fn t_lambda(eval: &GEvaluator, lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    let e = FermiSea::new(eval.params()).e_mu - lambda;
    Ok(phi_limit_polaron_block(eval, e)?.diag.iter().map(|d| d.value).collect())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// `P(λ)` as a dense symmetric matrix in Fermi-sea order.
pub fn p_lambda(eval: &GEvaluator, lambda: f64) -> Result<DMatrix<f64>> {
    let t = t_lambda(eval, lambda)?;
    let n = t.len();
    Ok(DMatrix::from_fn(n, n, |i, j| if i == j { t[i] } else { 0.0 } - 1.0 / lambda))
}

/// Lowest eigenvalue of `P(λ)`.
pub fn mu1_p(eval: &GEvaluator, lambda: f64) -> Result<f64> {
    Ok(symmetric_eigenvalues(&p_lambda(eval, lambda)?)[0])
}

/// `λ − Σ_q G_μ(λ − q², q)⁻¹`.
pub fn chevy_residual(eval: &GEvaluator, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let e = FermiSea::new(eval.params()).e_mu - lambda;
    let block = phi_limit_polaron_block(eval, e)?;
    let mut sum = 0.0;
    for (q, g) in block.modes.iter().zip(&block.diag) {
        if g.value.abs() <= 10.0 * g.error_bound {
            return Err(Error::PolaronEquationUndefined { q: *q });
        }
        sum += 1.0 / g.value;
    }
    Ok(lambda - sum)
}

/// Sign change of `μ₁(P)` found by the scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusEntry {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub mu1_lo: f64,
    pub mu1_hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolaronSolution {
    pub lambda_star: f64,
    pub e_polaron: f64,
    /// `|λ* − Σ_q G⁻¹|`.
    pub residual: f64,
    /// `α̃_q = G_μ(λ* − q², q)⁻¹`.
    pub coefficients: Vec<(Momentum, f64)>,
    pub mu1_check: f64,
    /// `‖P(λ*) α̃‖ / ‖α̃‖`.
    pub kernel_residual: f64,
    /// Largest certified `G_μ` error at the root.
    pub g_error_bound: f64,
    pub n_mu: usize,
    pub census: Vec<CensusEntry>,
}

/// JSON record `{lambda_star, e_polaron, residual, mu1_check, coefficients}`.
impl PolaronSolution {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "lambda_star": self.lambda_star,
            "e_polaron": self.e_polaron,
            "residual": self.residual,
            "mu1_check": self.mu1_check,
            "kernel_residual": self.kernel_residual,
            "g_error_bound": self.g_error_bound,
            "n_mu": self.n_mu,
            "coefficients": self
                .coefficients
                .iter()
                .map(|(q, a)| serde_json::json!([q.x, q.y, a]))
                .collect::<Vec<_>>(),
            "census": self.census,
        })
    }
}

fn scan(eval: &GEvaluator, lo: f64, hi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    use rayon::prelude::*;
    let grid = geometric_grid(lo, hi, SCAN_POINTS);
    let values = grid.par_iter().map(|&l| mu1_p(eval, l)).collect::<Result<Vec<_>>>()?;
    Ok((grid, values))
}

/// Largest `λ` with `μ₁(P(λ)) = 0`, located on a logarithmic scan over
/// `[1e−6 κ², 1e6 κ²]` (widened if needed) and refined with Brent.
pub fn solve_polaron(params: &ModelParams) -> Result<PolaronSolution> {
    if params.fermi_energy < 0.0 {
        return Err(Error::InvalidParameter("the polaron needs a nonempty Fermi sea".into()));
    }
    let kappa2 = params.kappa * params.kappa;
    let coarse = GEvaluator::new(*params, SCAN_TOL);
    let (mut lo, mut hi) = (1e-6 * kappa2, 1e6 * kappa2);
    let mut census;
    let mut widen = 0;
    loop {
        let (grid, values) = scan(&coarse, lo, hi)?;
        census = sign_changes(&grid, &values)
            .into_iter()
            .map(|s| CensusEntry {
                lambda_lo: s.lo,
                lambda_hi: s.hi,
                mu1_lo: s.f_lo,
                mu1_hi: s.f_hi,
            })
            .collect::<Vec<_>>();
        if !census.is_empty() {
            break;
        }
        widen += 1;
        if widen > 2 {
            let sample: Vec<String> = grid
                .iter()
                .zip(&values)
                .step_by(6)
                .map(|(l, v)| format!("({l:.3e}, {v:.3e})"))
                .collect();
            return Err(Error::BracketFailure(format!(
                "mu1(P(lambda)) has no sign change; samples {}",
                sample.join(" ")
            )));
        }
        lo *= 1e-3;
        hi *= 1e3;
    }
    let last = *census.last().expect("nonempty");
    let fine = GEvaluator::new(*params, FINE_TOL);
    let f = |l: f64| mu1_p(&fine, l);
    // The coarse bracket may be off by the coarse error; widen until the
    // fine function changes sign.
    let (mut a, mut b) = (last.lambda_lo, last.lambda_hi);
    for _ in 0..40 {
        if f(a)? < 0.0 {
            break;
        }
        a *= 0.9;
    }
    for _ in 0..40 {
        if f(b)? > 0.0 {
            break;
        }
        b *= 1.1;
    }
    let lambda_star = brent(a, b, 1e-13 * b.max(1.0), f)?;
    finish(&fine, lambda_star, census)
}

fn finish(eval: &GEvaluator, lambda: f64, census: Vec<CensusEntry>) -> Result<PolaronSolution> {
    let params = eval.params();
    let sea = FermiSea::new(params);
    let block = phi_limit_polaron_block(eval, sea.e_mu - lambda)?;
    let coefficients: Vec<(Momentum, f64)> = block
        .modes
        .iter()
        .zip(&block.diag)
        .map(|(&q, g)| (q, 1.0 / g.value))
        .collect();
    let p = block.matrix();
    let alpha = DVector::from_iterator(coefficients.len(), coefficients.iter().map(|c| c.1));
    let kernel_residual = (&p * &alpha).norm() / alpha.norm();
    let residual = (lambda - alpha.sum()).abs();
    Ok(PolaronSolution {
        lambda_star: lambda,
        e_polaron: sea.e_mu - lambda,
        residual,
        coefficients,
        mu1_check: symmetric_eigenvalues(&p)[0],
        kernel_residual,
        g_error_bound: block.diag.iter().map(|d| d.error_bound).fold(0.0, f64::max),
        n_mu: sea.n_mu,
        census,
    })
}

/// Interlacing of `P(λ)` against `T(λ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterlacingReport {
    pub lambda: f64,
    pub t_eigenvalues: Vec<f64>,
    pub p_eigenvalues: Vec<f64>,
    /// `μ₁(P) < μ₁(T)`.
    pub strict_lowest: bool,
    /// `μ_{ℓ−1}(T) ≤ μ_ℓ(P) ≤ μ_ℓ(T)` for `ℓ ≥ 2`.
    pub chain_holds: bool,
    /// `(value, multiplicity)` of `T`'s diagonal.
    pub t_degeneracies: Vec<(f64, usize)>,
    pub passed: bool,
}

pub fn interlacing_report(eval: &GEvaluator, lambda: f64) -> Result<InterlacingReport> {
    let mut t = t_lambda(eval, lambda)?;
    let p_eigenvalues = symmetric_eigen(&p_lambda(eval, lambda)?).0;
    t.sort_by(f64::total_cmp);
    let scale = t.iter().chain(&p_eigenvalues).fold(1.0f64, |m, v| m.max(v.abs()));
    let slack = 1e-12 * scale;
    let strict_lowest = p_eigenvalues[0] < t[0];
    let chain_holds =
        (1..t.len()).all(|l| t[l - 1] - slack <= p_eigenvalues[l] && p_eigenvalues[l] <= t[l] + slack);
    Ok(InterlacingReport {
        lambda,
        t_degeneracies: group_degenerate(&t, DEGENERACY_GAP),
        t_eigenvalues: t,
        p_eigenvalues,
        strict_lowest,
        chain_holds,
        passed: strict_lowest && chain_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renorm::g_mu_with_tol;

    #[test]
    fn single_mode_is_binding_energy() {
        let p = ModelParams::unit_lattice(1.0, -1.0, 0.5).unwrap();
        let sol = solve_polaron(&p).unwrap();
        assert_eq!(sol.n_mu, 1);
        assert!((sol.e_polaron + 1.0).abs() < 1e-9, "{sol:?}");
        assert!(sol.residual <= 1e-10);
        assert!(sol.mu1_check.abs() <= 1e-8);
    }

    #[test]
    fn scalar_case_matches_chevy() {
        let p = ModelParams::unit_lattice(2.0, -0.7, 0.5).unwrap();
        let eval = GEvaluator::new(p, 1e-11);
        let lam = 0.9;
        let g = g_mu_with_tol(&p, lam, Momentum::ZERO, 1e-11).unwrap().value;
        assert!((mu1_p(&eval, lam).unwrap() - (g - 1.0 / lam)).abs() < 1e-14);
        assert!((chevy_residual(&eval, lam).unwrap() - (lam - 1.0 / g)).abs() < 1e-13);
    }

    #[test]
    fn interlacing_five_modes() {
        let p = ModelParams::unit_lattice(1.0, -1.0, 1.2).unwrap();
        let eval = GEvaluator::new(p, 1e-8);
        for lam in [0.3, 1.0, 3.0] {
            let r = interlacing_report(&eval, lam).unwrap();
            assert_eq!(r.t_eigenvalues.len(), 5);
            assert!(r.passed, "{r:?}");
            assert!(r.t_degeneracies.iter().any(|&(_, m)| m == 4));
        }
    }
}
