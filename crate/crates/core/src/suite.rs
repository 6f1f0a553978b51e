//! Seeded verification suites over random finite models and assembled Fock
//! sectors.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fock::{build_sector, fock_count_check, CountRow, SectorKind};
use crate::lattice::{CutoffScheme, ModelParams, Momentum};
use crate::linalg::hermitian_eigenvalues;
use crate::schur::{
    bs_count_with_spectrum, inverse_phi_identity_check, phi_monotonicity_check, resolvent_identity_residual,
    schur_factorization_check, BsModel,
};

pub const DEFAULT_SEED: u64 = 20_240_917;
pub const MAX_DIM: usize = 64;
/// Bound on the resolvent and inverse-`φ` residuals.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Bound on the block factorization residuals.
pub const FACTORIZATION_TOL: f64 = 1e-12;

fn random_model(rng: &mut ChaCha8Rng) -> BsModel {
    let dim = rng.random_range(1..=MAX_DIM);
    let aux = rng.random_range(1..=dim.min(8));
    BsModel::random(rng, dim, aux)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub models: usize,
    pub max_resolvent: f64,
    pub max_inverse_phi: f64,
    pub max_factorization: f64,
    pub passed: bool,
}

/// Krein resolvent, inverse-`φ` and both block factorizations at one random
/// non-real `z` and one real `z` below `min H₀` per model.
pub fn identity_suite(seed: u64, models: usize) -> Result<IdentityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut res, mut inv, mut fac) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..models {
        let m = random_model(&mut rng);
        let zs = [
            Complex64::new(rng.random_range(-5.0..10.0), rng.random_range(0.2..2.0)),
            Complex64::new(m.min_h0() - rng.random_range(0.5..3.0), 0.0),
        ];
        for z in zs {
            res = res.max(resolvent_identity_residual(&m, z)?);
            inv = inv.max(inverse_phi_identity_check(&m, z)?);
            let (a, b) = schur_factorization_check(&m, z)?;
            fac = fac.max(a).max(b);
        }
    }
    Ok(IdentityReport {
        seed,
        models,
        max_resolvent: res,
        max_inverse_phi: inv,
        max_factorization: fac,
        passed: res <= RESIDUAL_TOL && inv <= RESIDUAL_TOL && fac <= FACTORIZATION_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    pub label: String,
    pub comparisons: usize,
    pub mismatches: Vec<CountRow>,
}

impl CountingReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// `#{eig H < E}` against `#{negative eig φ(E)}` on `energies` points per
/// random model, spread between the ground state and `min H₀`.
pub fn random_counting_suite(seed: u64, models: usize, energies: usize) -> Result<CountingReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comparisons = 0;
    let mut mismatches = Vec::new();
    for _ in 0..models {
        let m = random_model(&mut rng);
        let spectrum = hermitian_eigenvalues(&m.hamiltonian());
        let top = m.min_h0() - 1e-6;
        let bottom = spectrum[0] - 1.0;
        for i in 0..energies {
            let e = bottom + (top - bottom) * (i as f64 + rng.random_range(0.0..1.0)) / energies as f64;
            let (count_h, count_phi) = bs_count_with_spectrum(&m, &spectrum, e)?;
            comparisons += 1;
            if count_h != count_phi {
                mismatches.push(CountRow {
                    energy: e,
                    count_h,
                    count_phi,
                });
            }
        }
    }
    Ok(CountingReport {
        label: format!("random models (seed {seed})"),
        comparisons,
        mismatches,
    })
}

/// Counting on the zero-momentum sector with `n` fermions in the ball of
/// `basis_radius`, on `energies` points of `[2E_B − κ², −0.01 κ²]`.
pub fn fock_counting_suite(
    scheme: &CutoffScheme,
    params: &ModelParams,
    n: usize,
    basis_radius: f64,
    energies: usize,
) -> Result<CountingReport> {
    let sector = build_sector(params, n, SectorKind::Physical, basis_radius, Some(Momentum::ZERO))?;
    let kappa2 = params.kappa * params.kappa;
    let lo = 2.0 * params.binding_energy - kappa2;
    let hi = -0.01 * kappa2;
    let grid: Vec<f64> = (0..energies)
        .map(|i| lo + (hi - lo) * i as f64 / (energies.max(2) - 1) as f64)
        .collect();
    let rows = fock_count_check(scheme, params, &sector, &grid)?;
    let kind = scheme.kind().map_or("tabulated", |k| k.name());
    Ok(CountingReport {
        label: format!("N = {n}, {kind} cutoff {}, dimension {}", scheme.radius(), sector.dim()),
        comparisons: rows.len(),
        mismatches: rows.into_iter().filter(|r| !r.matches()).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicitySuiteReport {
    pub seed: u64,
    pub models: usize,
    pub min_psd_eigenvalue: f64,
    pub all_strictly_decreasing: bool,
    pub passed: bool,
}

/// Every `μ_ℓ(φ(τ))` on a 10-point grid below `min H₀`, for random models
/// with injective `A*`.
pub fn monotonicity_suite(seed: u64, models: usize) -> Result<MonotonicitySuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_psd = f64::INFINITY;
    let mut decreasing = true;
    let mut passed = true;
    for _ in 0..models {
        let dim = rng.random_range(2..=24);
        let aux = rng.random_range(1..=dim.min(6));
        let m = BsModel::random(&mut rng, dim, aux);
        let top = m.min_h0() - 0.05;
        let grid: Vec<f64> = (0..10).map(|i| top - 4.0 + 4.0 * i as f64 / 9.0).collect();
        for ell in 1..=aux {
            let r = phi_monotonicity_check(&m, &grid, ell)?;
            min_psd = min_psd.min(r.min_psd_eigenvalue);
            decreasing &= !r.a_star_injective || r.strictly_decreasing;
            passed &= r.passed && r.a_star_injective;
        }
    }
    Ok(MonotonicitySuiteReport {
        seed,
        models,
        min_psd_eigenvalue: min_psd,
        all_strictly_decreasing: decreasing,
        passed: passed && min_psd >= -1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(identity_suite(1, 5).unwrap().passed);
        assert!(random_counting_suite(2, 5, 6).unwrap().passed());
        assert!(monotonicity_suite(3, 3).unwrap().passed);
    }

    #[test]
    fn seeds_are_reproducible() {
        assert_eq!(identity_suite(9, 3).unwrap(), identity_suite(9, 3).unwrap());
    }

    #[test]
    fn fock_counting_one_fermion() {
        let p = ModelParams::unit_lattice(1.0, -1.0, 0.0).unwrap();
        let s = CutoffScheme::sharp(4.0, 1.0).unwrap();
        let r = fock_counting_suite(&s, &p, 1, 4.0, 8).unwrap();
        assert_eq!(r.comparisons, 8);
        assert!(r.passed(), "{r:?}");
    }
}
