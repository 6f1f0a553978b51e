//! One particle in the periodic box with a renormalized point interaction at
//! the origin: `H_n = −Δ − g_n|η_n⟩⟨η_n|` with `η_n` the indicator of the
//! cutoff ball and `g_n⁻¹ = Σ_{|k|≤n} 1/(k² − E_B)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    enumerate_ball, tail_corrected_sum_split, InversePower, ModelParams, NeumaierSum, RadialProfile,
    RemainderSign, ResolventDifference,
};
use crate::linalg::{davidson, LinearOperator};
use crate::renorm::{RenormSum, DEFAULT_TOL, RADIUS_CAP};
use crate::schur::BsModel;

pub const DEFAULT_LADDER: [f64; 4] = [2.0, 4.0, 8.0, 16.0];

fn certified_radial_sum(
    kappa: f64,
    tol: f64,
    summand: impl Fn(f64) -> f64,
    tail: &dyn RadialProfile,
    sign: f64,
) -> Result<RenormSum> {
    let mut radius = 8.0 * kappa;
    loop {
        let s = tail_corrected_sum_split(
            kappa,
            radius,
            |k| summand(k.ksq(kappa)),
            &[(sign, tail)],
            None::<(&dyn RadialProfile, RemainderSign)>,
        )?;
        if s.error_bound <= tol || radius >= RADIUS_CAP * kappa {
            if s.error_bound > tol {
                return Err(Error::ToleranceUnachievable {
                    requested: tol,
                    best_bound: s.error_bound,
                    radius_cap: RADIUS_CAP * kappa,
                });
            }
            return Ok(RenormSum {
                value: s.value,
                error_bound: s.error_bound,
                inner_radius: radius,
            });
        }
        radius *= 2.0;
    }
}

/// `Σ_k [1/(k² − E_B) − 1/(k² − z)]` over the whole lattice.
pub fn phi_delta(params: &ModelParams, z: f64) -> Result<RenormSum> {
    phi_delta_with_tol(params, z, DEFAULT_TOL)
}

pub fn phi_delta_with_tol(params: &ModelParams, z: f64, tol: f64) -> Result<RenormSum> {
    if !(z < 0.0) {
        return Err(Error::InvalidParameter(format!("phi_delta needs z < 0, got {z}")));
    }
    let eb = params.binding_energy;
    if z == eb {
        return Ok(RenormSum {
            value: 0.0,
            error_bound: 0.0,
            inner_radius: 0.0,
        });
    }
    let profile = ResolventDifference { c: 1.0, a: -eb, b: -z };
    certified_radial_sum(
        params.kappa,
        tol,
        |k2| 1.0 / (k2 - eb) - 1.0 / (k2 - z),
        &profile,
        (eb - z).signum(),
    )
}

/// `‖η(E_B)‖² = Σ_k (k² − E_B)⁻²`.
pub fn eta_norm2(params: &ModelParams, tol: f64) -> Result<RenormSum> {
    let eb = params.binding_energy;
    let profile = InversePower::new(1.0, -eb, 2.0)?;
    certified_radial_sum(params.kappa, tol, |k2| (k2 - eb).powi(-2), &profile, 1.0)
}

/// The finite-cutoff model on the ball `|k| ≤ radius`.
pub fn delta_model(params: &ModelParams, radius: f64) -> Result<BsModel> {
    let ball = enumerate_ball(params.kappa, radius.max(0.0));
    let eb = params.binding_energy;
    let h0: Vec<f64> = ball.iter().map(|&k| params.ksq(k)).collect();
    let mut inv = NeumaierSum::new();
    for &e in &h0 {
        inv.add(1.0 / (e - eb));
    }
    BsModel::rank_one(h0, &vec![1.0; ball.len()], 1.0 / inv.value())
}

/// `φ_n(z) = g_n⁻¹ − Σ_{|k|≤n} 1/(k² − z)`.
pub fn phi_delta_finite(model: &BsModel, z: Complex64) -> Complex64 {
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    re.add(1.0 / model.g);
    for &e in &model.h0_diag {
        let t = (Complex64::new(e, 0.0) - z).inv();
        re.add(-t.re);
        im.add(-t.im);
    }
    Complex64::new(re.value(), im.value())
}

/// `R₀ + φ_n(z)⁻¹ R₀|η⟩⟨η|R₀`, written out for the rank-one model.
pub fn delta_resolvent(model: &BsModel, z: Complex64) -> Result<DMatrix<Complex64>> {
    let phi = phi_delta_finite(model, z);
    if phi.norm() == 0.0 {
        return Err(Error::SingularPhi(format!("{z}")));
    }
    let r0: Vec<Complex64> = model.h0_diag.iter().map(|&e| (Complex64::new(e, 0.0) - z).inv()).collect();
    let n = r0.len();
    let w = phi.inv();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { r0[i] } else { Complex64::default() };
        d + w * r0[i] * r0[j]
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRung {
    pub cutoff_radius: f64,
    pub dimension: usize,
    pub ground: f64,
    pub ground_error: f64,
    /// `|φ_n(E_B)|` from `g_n⁻¹ − Σ 1/(k² − E_B)`.
    pub phi_at_binding: f64,
    /// Distance between the computed ground vector and `(k² − E_B)⁻¹` on the ball.
    pub eigenvector_residual: f64,
    /// Relative Frobenius distance of the rank-one resolvent formula to direct
    /// inversion, or its largest column defect as an inverse above the cap.
    pub resolvent_residual: f64,
    /// Distance of the normalized ground vector to the normalized `η(E_B)` on the whole lattice.
    pub distance_to_limit: f64,
}

/// Sample points for the resolvent comparison.
fn resolvent_points(eb: f64) -> [Complex64; 3] {
    [
        Complex64::new(2.0 * eb, 0.0),
        Complex64::new(0.5 * eb, 0.7),
        Complex64::new(3.3, -1.1),
    ]
}

/// Rungs up to this dimension compare against dense inversion; larger ones
/// check `‖(H − z) K − 1‖` with the rank-one structure of `H`.
pub const DIRECT_INVERSION_CAP: usize = 256;

/// `diag(k²) − g |1⟩⟨1|` as a matrix-free operator.
struct RankOne<'a> {
    model: &'a BsModel,
}

impl LinearOperator for RankOne<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let s: f64 = x.iter().sum::<f64>() * self.model.g;
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.model.h0_diag) {
            *yi = d * xi - s;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.model.h0_diag.iter().map(|d| d - self.model.g).collect()
    }
}

fn resolvent_residual(model: &BsModel, z: Complex64) -> Result<f64> {
    let k = delta_resolvent(model, z)?;
    let n = model.dim();
    let frob = |m: &DMatrix<Complex64>| m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if n <= DIRECT_INVERSION_CAP {
        let h = model.hamiltonian() - DMatrix::from_diagonal_element(n, n, z);
        let direct = h.try_inverse().ok_or_else(|| Error::ResolventPole(format!("{z}")))?;
        return Ok(frob(&(k - &direct)) / frob(&direct));
    }
    let g = Complex64::new(model.g, 0.0);
    let mut worst = 0.0f64;
    for j in 0..n {
        let col = k.column(j);
        let s: Complex64 = col.iter().sum();
        let mut err = 0.0;
        for i in 0..n {
            let v = (Complex64::new(model.h0_diag[i], 0.0) - z) * col[i] - g * s;
            let target = if i == j { 1.0 } else { 0.0 };
            err += (v - target).norm_sqr();
        }
        worst = worst.max(err);
    }
    Ok(worst.sqrt())
}

pub fn delta_ground_state_check(params: &ModelParams, cutoff_radius: f64) -> Result<DeltaRung> {
    let model = delta_model(params, cutoff_radius)?;
    let eb = params.binding_energy;
    let spectrum = davidson(&RankOne { model: &model }, 1, 1e-13, 500)?;
    let ground = spectrum.energies[0];
    let v = &spectrum.vectors[0];
    let pred: Vec<f64> = model.h0_diag.iter().map(|&e| 1.0 / (e - eb)).collect();
    let pred_norm = pred.iter().map(|x| x * x).sum::<f64>().sqrt();
    let vnorm = v.norm();
    let overlap: f64 = v.iter().zip(&pred).map(|(a, b)| a * b).sum::<f64>() / vnorm;
    let sign = if overlap < 0.0 { -1.0 } else { 1.0 };
    let eigenvector_residual = v
        .iter()
        .zip(&pred)
        .map(|(a, b)| (a * sign / vnorm - b / pred_norm).powi(2))
        .sum::<f64>()
        .sqrt();
    let resolvent_residual = resolvent_points(eb)
        .into_iter()
        .map(|z| resolvent_residual(&model, z))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let limit = eta_norm2(params, 1e-10)?;
    let cosine: f64 = (overlap.abs() / limit.value.sqrt()).min(1.0);
    Ok(DeltaRung {
        cutoff_radius,
        dimension: model.dim(),
        ground,
        ground_error: (ground - eb).abs(),
        phi_at_binding: phi_delta_finite(&model, Complex64::new(eb, 0.0)).norm(),
        eigenvector_residual,
        resolvent_residual,
        distance_to_limit: (2.0 - 2.0 * cosine).max(0.0).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub binding_energy: f64,
    pub kappa: f64,
    pub phi_at_binding: RenormSum,
    pub rungs: Vec<DeltaRung>,
    /// Distances to the limit vector shrink along the ladder.
    pub converging: bool,
}

pub fn delta_ladder(params: &ModelParams, radii: &[f64]) -> Result<DeltaReport> {
    let rungs = radii
        .iter()
        .map(|&r| delta_ground_state_check(params, r * params.kappa))
        .collect::<Result<Vec<_>>>()?;
    let converging = rungs.windows(2).all(|w| w[1].distance_to_limit < w[0].distance_to_limit);
    Ok(DeltaReport {
        binding_energy: params.binding_energy,
        kappa: params.kappa,
        phi_at_binding: phi_delta(params, params.binding_energy)?,
        rungs,
        converging,
    })
}
