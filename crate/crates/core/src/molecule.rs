//! The molecule secular problem and the polaron/molecule crossover.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FermiSea, ModelParams, Momentum};
use crate::polaron::solve_polaron;
use crate::renorm::{phi_limit_molecule_form, GEvaluator, MoleculeForm};
use crate::richardson::{richardson, Extrapolation};
use crate::fock::phi_lowest_eigenvalue;
use crate::roots::brent;

/// `G_μ` accuracy at `K = 0`; see [`crate::renorm::entry_tolerance`].
pub const G_TOL: f64 = 1e-9;
/// Root tolerance in units of `κ²`.
pub const ENERGY_TOL: f64 = 1e-9;
/// Default `K_cap` ladder in units of `κ`.
pub const DEFAULT_LADDER: [f64; 3] = [4.0, 8.0, 16.0];

/// Stationarity system `A γ = b` at energy `E`, with `b_{Kq} = −1/(c K² + E_μ − E)`.
pub fn assemble_molecule_system(
    eval: &GEvaluator,
    energy: f64,
    k_cap: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let form = phi_limit_molecule_form(eval, energy, k_cap)?;
    Ok(system_of(&form))
}

fn system_of(form: &MoleculeForm) -> (DMatrix<f64>, DVector<f64>) {
    let b = DVector::from_iterator(form.n_amplitudes(), form.linear_vector().into_iter().map(|y| -y));
    (form.amplitude_matrix(), b)
}

/// `γ(E)` and the scalar residual `G_μ(E_μ − E, 0) + Σ γ_{Kq}/(c K² + E_μ − E)`.
#[derive(Clone, Debug)]
struct Stationary {
    form: MoleculeForm,
    gamma: DVector<f64>,
    residual: f64,
}

fn stationary(form: MoleculeForm) -> Result<Stationary> {
    let (a, b) = system_of(&form);
    let gamma = a
        .clone()
        .lu()
        .solve(&b)
        .filter(|g| g.iter().all(|v| v.is_finite()))
        .ok_or(Error::StationarityDegenerate(form.energy))?;
    let residual = form.scalar.value - b.dot(&gamma);
    Ok(Stationary { form, gamma, residual })
}

pub fn molecule_scalar_residual(eval: &GEvaluator, energy: f64, k_cap: f64) -> Result<f64> {
    Ok(stationary(phi_limit_molecule_form(eval, energy, k_cap)?)?.residual)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSolution {
    pub e_molecule: f64,
    /// `(K, q, γ_{Kq})`.
    pub gamma: Vec<(Momentum, Momentum, f64)>,
    pub stationarity_residual: f64,
    pub scalar_residual: f64,
    /// `⟨M̃|φ(E_M) M̃⟩` evaluated term by term.
    pub form_value: f64,
    pub g_error_bound: f64,
    /// First-order error of the minimized form from the `G_μ` bounds.
    pub form_error: f64,
    /// `form_error` over the slope of the scalar residual.
    pub energy_error: f64,
    pub k_cap: f64,
    pub extrapolated: Option<Extrapolation>,
}

impl MoleculeSolution {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "e_molecule": self.e_molecule,
            "stationarity_residual": self.stationarity_residual,
            "scalar_residual": self.scalar_residual,
            "form_value": self.form_value,
            "g_error_bound": self.g_error_bound,
            "energy_error": self.energy_error,
            "k_cap": self.k_cap,
            "extrapolated": self.extrapolated,
            "gamma": self
                .gamma
                .iter()
                .map(|(k, q, g)| serde_json::json!([k.x, k.y, q.x, q.y, g]))
                .collect::<Vec<_>>(),
        })
    }
}

fn finish(st: Stationary, k_cap: f64) -> MoleculeSolution {
    let form = &st.form;
    let (a, b) = system_of(form);
    let stationarity_residual = (&a * &st.gamma - &b).amax();
    let nq = form.q_modes.len();
    let gamma = st
        .gamma
        .iter()
        .enumerate()
        .map(|(r, &g)| (form.k_modes[r / nq], form.q_modes[r % nq], g))
        .collect();
    MoleculeSolution {
        e_molecule: form.energy,
        gamma,
        stationarity_residual,
        scalar_residual: st.residual.abs(),
        form_value: form.value(st.gamma.as_slice()),
        g_error_bound: form.max_error_bound(),
        form_error: form.propagated_error(st.gamma.as_slice()),
        energy_error: f64::NAN,
        k_cap,
        extrapolated: None,
    }
}

/// Lowest `E < E_μ` at which `⟨M̃|φ(E)M̃⟩` stops being positive definite.
/// The form decreases in `E`, so this is the unique zero of its lowest
/// eigenvalue. `None` if the form stays positive up to `E_μ`.
pub fn solve_molecule(params: &ModelParams, k_cap: f64) -> Result<Option<MoleculeSolution>> {
    solve_molecule_with_tol(params, k_cap, G_TOL)
}

pub fn solve_molecule_with_tol(params: &ModelParams, k_cap: f64, tol: f64) -> Result<Option<MoleculeSolution>> {
    if params.fermi_energy < 0.0 {
        return Err(Error::InvalidParameter("the molecule needs a nonempty Fermi sea".into()));
    }
    let kappa2 = params.kappa * params.kappa;
    let e_mu = FermiSea::new(params).e_mu;
    let eval = GEvaluator::new(*params, tol);
    let mu1 = |e: f64| -> Result<f64> { phi_lowest_eigenvalue(&phi_limit_molecule_form(&eval, e, k_cap)?.matrix()) };
    let top = e_mu - 1e-9 * kappa2;
    if mu1(top)? >= 0.0 {
        return Ok(None);
    }
    let mut depth = kappa2 - 2.0 * params.binding_energy;
    while mu1(e_mu - depth)? <= 0.0 {
        depth *= 2.0;
        if depth > 1e12 * kappa2 {
            return Err(Error::BracketFailure("molecule form never positive".into()));
        }
    }
    let root = brent(e_mu - depth, top, ENERGY_TOL * kappa2 * 1e-3, mu1)?;
    let st = stationary(phi_limit_molecule_form(&eval, root, k_cap)?)?;
    let h = 1e-6 * kappa2;
    let slope = (molecule_scalar_residual(&eval, root + h, k_cap)?
        - molecule_scalar_residual(&eval, root - h, k_cap)?)
        / (2.0 * h);
    let mut sol = finish(st, k_cap);
    sol.energy_error = sol.form_error / slope.abs();
    Ok(Some(sol))
}

/// Solutions along a `K_cap` ladder with a Richardson estimate in `1/K_cap`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoleculeLadder {
    pub rungs: Vec<(f64, Option<MoleculeSolution>)>,
    pub extrapolated: Option<Extrapolation>,
}

impl MoleculeLadder {
    /// The solution at the largest `K_cap`, carrying the extrapolation.
    pub fn best(&self) -> Option<MoleculeSolution> {
        let mut s = self.rungs.last()?.1.clone()?;
        s.extrapolated = self.extrapolated;
        Some(s)
    }

    pub fn nonincreasing(&self) -> bool {
        let e: Vec<f64> = self.rungs.iter().filter_map(|r| r.1.as_ref().map(|s| s.e_molecule)).collect();
        e.windows(2).all(|w| w[1] <= w[0] + 1e-9)
    }
}

pub fn solve_molecule_ladder(params: &ModelParams, ladder: &[f64]) -> Result<MoleculeLadder> {
    solve_molecule_ladder_with_tol(params, ladder, G_TOL)
}

pub fn solve_molecule_ladder_with_tol(params: &ModelParams, ladder: &[f64], tol: f64) -> Result<MoleculeLadder> {
    let rungs = ladder
        .iter()
        .map(|&k| Ok((k, solve_molecule_with_tol(params, k * params.kappa, tol)?)))
        .collect::<Result<Vec<_>>>()?;
    let solved: Vec<(f64, f64)> = rungs
        .iter()
        .filter_map(|(k, s)| s.as_ref().map(|s| (1.0 / k, s.e_molecule)))
        .collect();
    let extrapolated = if solved.len() >= 2 {
        let (h, v): (Vec<f64>, Vec<f64>) = solved.into_iter().unzip();
        Some(richardson(&h, &v, 1.0)?)
    } else {
        None
    };
    Ok(MoleculeLadder { rungs, extrapolated })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Polaron,
    Molecule,
}

impl Winner {
    pub fn name(self) -> &'static str {
        match self {
            Winner::Polaron => "polaron",
            Winner::Molecule => "molecule",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossoverRow {
    pub e_b: f64,
    pub e_polaron: Option<f64>,
    pub polaron_residual: Option<f64>,
    pub e_molecule: Option<f64>,
    pub e_molecule_minus_mu: Option<f64>,
    pub stationarity_residual: Option<f64>,
    pub scalar_residual: Option<f64>,
    pub winner: Option<Winner>,
    /// Set when the winner is polaron only because no molecule root exists.
    pub no_molecule: bool,
    pub k_cap: f64,
    pub error: Option<String>,
}

pub const CROSSOVER_COLUMNS: [&str; 11] = [
    "e_b",
    "e_polaron",
    "polaron_residual",
    "e_molecule",
    "e_molecule_minus_mu",
    "stationarity_residual",
    "scalar_residual",
    "winner",
    "no_molecule",
    "k_cap",
    "error",
];

fn crossover_row(base: &ModelParams, e_b: f64, k_cap: f64, tol: f64) -> CrossoverRow {
    let mut row = CrossoverRow {
        e_b,
        e_polaron: None,
        polaron_residual: None,
        e_molecule: None,
        e_molecule_minus_mu: None,
        stationarity_residual: None,
        scalar_residual: None,
        winner: None,
        no_molecule: false,
        k_cap,
        error: None,
    };
    let params = match base.with_binding_energy(e_b) {
        Ok(p) => p,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    match solve_polaron(&params) {
        Ok(p) => {
            row.e_polaron = Some(p.e_polaron);
            row.polaron_residual = Some(p.residual);
        }
        Err(e) => row.error = Some(format!("polaron: {e}")),
    }
    match solve_molecule_with_tol(&params, k_cap * params.kappa, tol) {
        Ok(Some(m)) => {
            row.e_molecule = Some(m.e_molecule);
            row.e_molecule_minus_mu = Some(m.e_molecule - params.fermi_energy);
            row.stationarity_residual = Some(m.stationarity_residual);
            row.scalar_residual = Some(m.scalar_residual);
        }
        Ok(None) => row.no_molecule = true,
        Err(e) => {
            let msg = format!("molecule: {e}");
            row.error = Some(match row.error.take() {
                Some(prev) => format!("{prev}; {msg}"),
                None => msg,
            });
        }
    }
    row.winner = match (row.e_polaron, row.e_molecule_minus_mu) {
        (Some(p), Some(m)) => Some(if p < m { Winner::Polaron } else { Winner::Molecule }),
        (Some(_), None) if row.no_molecule => Some(Winner::Polaron),
        (None, Some(_)) => Some(Winner::Molecule),
        _ => None,
    };
    row
}

/// One row per binding energy, in grid order. Row failures are recorded in
/// the row.
pub fn crossover_sweep(base: &ModelParams, e_b_grid: &[f64], k_cap: f64) -> Vec<CrossoverRow> {
    crossover_sweep_with_tol(base, e_b_grid, k_cap, G_TOL)
}

/// Rows are evaluated on the current rayon pool and returned in grid order.
pub fn crossover_sweep_with_tol(base: &ModelParams, e_b_grid: &[f64], k_cap: f64, tol: f64) -> Vec<CrossoverRow> {
    e_b_grid.par_iter().map(|&e_b| crossover_row(base, e_b, k_cap, tol)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_system_closed_form() {
        // μ = 0: one hole mode; K_cap = κ keeps the four |K| = κ modes,
        // which by symmetry act like a single amplitude.
        let p = ModelParams::unit_lattice(1.0, -1.0, 0.0).unwrap();
        let eval = GEvaluator::new(p, 1e-12);
        let e = -1.5;
        let form = phi_limit_molecule_form(&eval, e, 1.0).unwrap();
        assert_eq!(form.n_amplitudes(), 4);
        let (a, b) = system_of(&form);
        assert_eq!(a, a.transpose());
        let s = form.linear[0];
        let g = form.diag[0].value;
        let t: f64 = form.k_modes.iter().map(|&l| form.exchange(form.k_modes[0], l, Momentum::ZERO)).sum();
        let gamma = -s / (g + t - s);
        let st = stationary(form).unwrap();
        for v in st.gamma.iter() {
            assert!((v - gamma).abs() < 1e-13 * gamma.abs());
        }
        assert!((b[0] + s).abs() == 0.0);
    }

    #[test]
    fn form_vanishes_at_root() {
        let p = ModelParams::unit_lattice(1.0, -1.0, 0.5).unwrap();
        let sol = solve_molecule(&p, 3.0).unwrap().unwrap();
        assert!(sol.e_molecule < 0.0);
        assert!(sol.stationarity_residual <= 1e-8, "{sol:?}");
        assert!(sol.scalar_residual <= 1e-8);
        assert!(sol.form_value.abs() <= 1e-7);
    }

    #[test]
    fn residual_large_far_below() {
        let p = ModelParams::unit_lattice(1.0, -1.0, 0.5).unwrap();
        let eval = GEvaluator::new(p, 1e-9);
        let r1 = molecule_scalar_residual(&eval, -50.0, 2.0).unwrap();
        let r2 = molecule_scalar_residual(&eval, -5000.0, 2.0).unwrap();
        assert!(r2 > r1 && r1 > 0.0);
    }
}
