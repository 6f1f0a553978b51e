//! Cutoff ladders of the two-fermion ground energy and the extrapolated
//! comparison between cutoff profiles.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fock::{two_fermion_ground_energy, TwoFermionOptions};
use crate::lattice::{CutoffKind, CutoffScheme, ModelParams, Momentum};
use crate::renorm::{mu_tau, mu_tau_n};
use crate::richardson::{decay_exponents, fit_cutoff_limit, Extrapolation};

/// Extrapolated limits of different profiles must agree to this.
pub const AGREEMENT_TOL: f64 = 1e-3;
pub const SHARP_LADDER: [f64; 4] = [16.0, 32.0, 64.0, 96.0];
pub const GAUSSIAN_LADDER: [f64; 4] = [12.0, 16.0, 24.0, 32.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub scheme: String,
    /// Cutoff radius in units of `κ`.
    pub cutoff: f64,
    pub ground_energy: f64,
    /// `μ_{τ,n}(0, 0)` at `τ = 2 E_B`.
    pub mu_tau_n: f64,
    /// `μ_{τ,n} − μ_τ`.
    pub mu_tau_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: String,
    pub decay_exponents: Vec<f64>,
    pub extrapolation: Option<Extrapolation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub summaries: Vec<SchemeSummary>,
    /// Largest distance between extrapolated limits, when at least two
    /// profiles were extrapolated.
    pub spread: Option<f64>,
    pub passed: Option<bool>,
}

/// Runs every `(kind, ladder)` pair. Ladders are in units of `κ`; a ladder
/// of one rung is tabulated without a fit.
pub fn convergence_study(params: &ModelParams, ladders: &[(CutoffKind, Vec<f64>)]) -> Result<ConvergenceReport> {
    let tau = 2.0 * params.binding_energy;
    let limit = mu_tau(params, tau, Momentum::ZERO, 0.0)?.value;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (kind, ladder) in ladders {
        let mut energies = Vec::with_capacity(ladder.len());
        for &r in ladder {
            let scheme = CutoffScheme::new(*kind, r * params.kappa, params.kappa)?;
            let e = two_fermion_ground_energy(&scheme, params, &TwoFermionOptions::ladder(&scheme))?;
            let m = mu_tau_n(&scheme, params, tau, Momentum::ZERO, 0.0)?;
            energies.push(e);
            rows.push(ConvergenceRow {
                scheme: kind.name().to_string(),
                cutoff: r,
                ground_energy: e,
                mu_tau_n: m,
                mu_tau_gap: m - limit,
            });
        }
        let extrapolation = if ladder.len() >= 2 {
            Some(fit_cutoff_limit(ladder, &energies)?)
        } else {
            None
        };
        let h: Vec<f64> = ladder.iter().map(|r| 1.0 / r).collect();
        summaries.push(SchemeSummary {
            scheme: kind.name().to_string(),
            decay_exponents: decay_exponents(&h, &energies),
            extrapolation,
        });
    }
    let limits: Vec<f64> = summaries.iter().filter_map(|s| s.extrapolation.map(|e| e.value)).collect();
    let spread = (limits.len() >= 2).then(|| {
        let max = limits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = limits.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    });
    Ok(ConvergenceReport {
        rows,
        summaries,
        passed: spread.map(|s| s <= AGREEMENT_TOL),
        spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rung_has_no_fit() {
        let p = ModelParams::unit_lattice(1.0, -1.0, 0.0).unwrap();
        let r = convergence_study(&p, &[(CutoffKind::Sharp, vec![4.0])]).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.summaries[0].extrapolation.is_none());
        assert!(r.spread.is_none() && r.passed.is_none());
    }

    #[test]
    fn short_ladders_decrease() {
        let p = ModelParams::unit_lattice(1.0, -1.0, 0.0).unwrap();
        let r = convergence_study(&p, &[(CutoffKind::Sharp, vec![4.0, 8.0, 12.0])]).unwrap();
        let e: Vec<f64> = r.rows.iter().map(|x| x.ground_energy).collect();
        assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
        let g: Vec<f64> = r.rows.iter().map(|x| x.mu_tau_gap.abs()).collect();
        assert!(g.windows(2).all(|w| w[1] < w[0]), "{g:?}");
    }
}
