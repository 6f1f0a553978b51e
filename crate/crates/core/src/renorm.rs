//! Cutoff-free limit objects: `μ_τ(q, P²)`, `G_μ(λ, q)` as certified
//! lattice sums, and the limit Birman–Schwinger forms on Fermi-sea
//! excitations.
//!
//! Both sums have the shape
//! `Σ_k [1/(c k² − E_B) − χ/((q−k)²/M + k² + λ)]`. Outside the inner ball the
//! point-group average of the summand splits exactly into two radial
//! profiles with closed-form integrals and a nonnegative `O(|k|⁻⁶)` rest.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    coupling_constant, for_each_in_ball, lattice_tail, tail_corrected_sum_split, CutoffScheme, FermiSea,
    Interval, InversePower, ModelParams, Momentum, NeumaierSum, QuadraticOverCubic, RadialProfile,
    RemainderSign, ResolventDifference,
};

pub const DEFAULT_TOL: f64 = 1e-9;
/// Inner radii are capped at this many lattice spacings.
pub const RADIUS_CAP: f64 = 4096.0;

/// A lattice sum with a certified bound on its total error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormSum {
    pub value: f64,
    pub error_bound: f64,
    pub inner_radius: f64,
}

impl RenormSum {
    pub fn interval(&self) -> Interval {
        Interval::new(self.value - self.error_bound, self.value + self.error_bound)
    }
}

/// Tail profiles valid for `|k| ≥ t`, or `None` while `t` is too small for
/// the dominance estimates.
struct TailSplit {
    resolvent: ResolventDifference,
    sign: f64,
    quadratic: QuadraticOverCubic,
    rest: InversePower,
}

fn tail_split(params: &ModelParams, q: Momentum, d: f64, t: f64) -> Option<TailSplit> {
    let c = params.mass_factor();
    let m = params.impurity_mass;
    let qn = params.ksq(q).sqrt();
    let theta1 = 1.0 + d.min(0.0) / (c * t * t);
    let theta = theta1 - 2.0 * qn / (m * c * t);
    if theta <= 0.0 {
        return None;
    }
    let q2 = qn * qn;
    Some(TailSplit {
        resolvent: ResolventDifference {
            c,
            a: -params.binding_energy,
            b: d,
        },
        sign: (d + params.binding_energy).signum(),
        quadratic: QuadraticOverCubic {
            coeff: 2.0 * q2 / (m * m),
            c,
            d,
        },
        rest: InversePower::new(
            16.0 * q2 * q2 / (m.powi(4) * c.powi(5) * theta1.powi(3) * theta * theta),
            0.0,
            3.0,
        )
        .ok()?,
    })
}

fn tail_enclosure(split: &TailSplit, kappa: f64, n2max: i64) -> Result<Interval> {
    let main = lattice_tail(&split.resolvent, kappa, n2max)? * split.sign;
    let quad = lattice_tail(&split.quadratic, kappa, n2max)?;
    let rest = lattice_tail(&split.rest, kappa, n2max)?.hi;
    Ok(main - quad + Interval::new(-rest, 0.0))
}

/// Shared engine: `Σ_k [1/(c k² − E_B) − χ(k² > excl)/((q−k)²/M + k² + λ)]`.
fn renorm_sum(params: &ModelParams, q: Momentum, lambda: f64, exclusion: Option<f64>, tol: f64) -> Result<RenormSum> {
    if !(tol > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("tolerance {tol}, lambda {lambda}")));
    }
    let kappa = params.kappa;
    let c = params.mass_factor();
    let m = params.impurity_mass;
    let eb = params.binding_energy;
    let q2 = params.ksq(q);
    let d = q2 / m + lambda;
    let excl = exclusion.unwrap_or(f64::NEG_INFINITY);

    // Radius beyond which θ ≥ 1/2, the exclusion ball is inside, and both
    // resolvent terms are monotone.
    let t_min = [
        8.0 * kappa,
        (4.0 * (-d).max(0.0) / c).sqrt(),
        8.0 * q2.sqrt() / (m * c),
        excl.max(0.0).sqrt() + 2.0 * kappa,
        (-eb / c).sqrt(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let cap = RADIUS_CAP * kappa;
    if t_min > cap {
        return Err(Error::ToleranceUnachievable {
            requested: tol,
            best_bound: f64::INFINITY,
            radius_cap: cap,
        });
    }

    let half = 0.5 * tol;
    let mut radius = t_min;
    let mut best = f64::INFINITY;
    loop {
        let n2max = crate::lattice::max_norm2(radius, kappa);
        let split = tail_split(params, q, d, radius)
            .ok_or_else(|| Error::TailNotSummable(format!("dominance fails at radius {radius}")))?;
        let width = match tail_enclosure(&split, kappa, n2max) {
            Ok(t) => t.radius(),
            Err(Error::TailNotSummable(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        best = best.min(width);
        if width <= half {
            break;
        }
        if radius >= cap {
            return Err(Error::ToleranceUnachievable {
                requested: tol,
                best_bound: best,
                radius_cap: cap,
            });
        }
        let factor = if width.is_finite() {
            (width / half).powf(0.25).clamp(1.1, 4.0) * 1.02
        } else {
            1.5
        };
        radius = (radius * factor).min(cap);
    }

    if lambda <= 0.0 {
        let mut bad = None;
        for_each_in_ball(kappa, radius, |k| {
            if bad.is_none() && k.ksq(kappa) > excl && params.ksq(q - k) / m + k.ksq(kappa) + lambda <= 0.0 {
                bad = Some(k);
            }
        });
        if let Some(k) = bad {
            return Err(Error::OutsideContinuationWindow { k });
        }
    }

    let split = tail_split(params, q, d, radius).expect("checked above");
    let summand = |k: Momentum| {
        let k2 = k.ksq(kappa);
        let first = 1.0 / (c * k2 - eb);
        if k2 > excl {
            first - 1.0 / (params.ksq(q - k) / m + k2 + lambda)
        } else {
            first
        }
    };
    let sum = tail_corrected_sum_split(
        kappa,
        radius,
        summand,
        &[(split.sign, &split.resolvent), (-1.0, &split.quadratic)],
        Some((&split.rest as &dyn RadialProfile, RemainderSign::NonPositive)),
    )?;
    Ok(RenormSum {
        value: sum.value,
        error_bound: sum.error_bound,
        inner_radius: radius,
    })
}

/// `μ_τ(q, P²) = Σ_k [1/(c k² − E_B) − 1/((q−k)²/M + k² + P² − τ)]`.
pub fn mu_tau(params: &ModelParams, tau: f64, q: Momentum, p2: f64) -> Result<RenormSum> {
    mu_tau_with_tol(params, tau, q, p2, DEFAULT_TOL)
}

pub fn mu_tau_with_tol(params: &ModelParams, tau: f64, q: Momentum, p2: f64, tol: f64) -> Result<RenormSum> {
    if !(tau < 0.0) || !(p2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("need tau < 0 and P2 >= 0, got {tau}, {p2}")));
    }
    renorm_sum(params, q.orbit_key(), p2 - tau, None, tol)
}

/// `G_μ(λ, q) = Σ_k [1/(c k² − E_B) − χ(k² > μ)/((q−k)²/M + k² + λ)]`.
pub fn g_mu(params: &ModelParams, lambda: f64, q: Momentum) -> Result<RenormSum> {
    g_mu_with_tol(params, lambda, q, DEFAULT_TOL)
}

pub fn g_mu_with_tol(params: &ModelParams, lambda: f64, q: Momentum, tol: f64) -> Result<RenormSum> {
    renorm_sum(params, q.orbit_key(), lambda, Some(params.fermi_energy), tol)
}

/// Finite-cutoff counterpart of `μ_τ`:
/// `Σ_k α(k)²[β(−k)²/(c k² − E_B) − β(q−k)²/((q−k)²/M + k² + P² − τ)]`.
pub fn mu_tau_n(scheme: &CutoffScheme, params: &ModelParams, tau: f64, q: Momentum, p2: f64) -> Result<f64> {
    if !(tau < 0.0) || !(p2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("need tau < 0 and P2 >= 0, got {tau}, {p2}")));
    }
    let c = params.mass_factor();
    let mut acc = NeumaierSum::new();
    for (k, a) in scheme.alpha_support() {
        let b0 = scheme.beta(-k);
        let bq = scheme.beta(q - k);
        let k2 = params.ksq(k);
        acc.add(a * a * b0 * b0 / (c * k2 - params.binding_energy));
        acc.add(-a * a * bq * bq / (params.ksq(q - k) / params.impurity_mass + k2 + p2 - tau));
    }
    Ok(acc.value())
}

/// The finite-cutoff `f(z, q) = g⁻¹ − Σ_k α(k)²β(q−k)²/((q−k)²/M + k² − z)`.
pub fn f_n(scheme: &CutoffScheme, params: &ModelParams, z: f64, q: Momentum) -> Result<f64> {
    let mut acc = NeumaierSum::new();
    acc.add(1.0 / coupling_constant(scheme, params)?);
    for (k, a) in scheme.alpha_support() {
        let b = scheme.beta(q - k);
        if b != 0.0 {
            acc.add(-a * a * b * b / (params.ksq(q - k) / params.impurity_mass + params.ksq(k) - z));
        }
    }
    Ok(acc.value())
}

/// Memoized `G_μ` for one parameter set and tolerance. Values are always
/// computed at the orbit representative, so caching never changes results.
#[derive(Debug)]
pub struct GEvaluator {
    params: ModelParams,
    tol: f64,
    cache: Mutex<HashMap<(Momentum, u64, u64), RenormSum>>,
}

impl GEvaluator {
    pub fn new(params: ModelParams, tol: f64) -> Self {
        GEvaluator {
            params,
            tol,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn g(&self, lambda: f64, q: Momentum) -> Result<RenormSum> {
        self.g_with_tol(lambda, q, self.tol)
    }

    /// Like [`GEvaluator::g`] with an explicit tolerance.
    pub fn g_with_tol(&self, lambda: f64, q: Momentum, tol: f64) -> Result<RenormSum> {
        let key = (q.orbit_key(), lambda.to_bits(), tol.to_bits());
        if let Some(v) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(*v);
        }
        let v = g_mu_with_tol(&self.params, lambda, q, tol)?;
        self.cache.lock().expect("cache poisoned").insert(key, v);
        Ok(v)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }
}

/// Data of `⟨P̃|φ(E)P̃⟩`: `T = diag(G_μ(E_μ − E − q², q))` over the sea and
/// the rank-one coefficient `1/(E_μ − E)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolaronBlock {
    pub modes: Vec<Momentum>,
    pub diag: Vec<RenormSum>,
    pub xi_coupling: f64,
}

impl PolaronBlock {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.modes.len();
        DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { self.diag[i].value } else { 0.0 };
            d - self.xi_coupling
        })
    }
}

pub fn phi_limit_polaron_block(eval: &GEvaluator, energy: f64) -> Result<PolaronBlock> {
    let params = eval.params();
    let sea = FermiSea::new(params);
    let lambda = sea.e_mu - energy;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "polaron block needs E < E_mu = {}, got {energy}",
            sea.e_mu
        )));
    }
    let diag = sea
        .occupied
        .iter()
        .map(|&q| eval.g(lambda - params.ksq(q), q))
        .collect::<Result<Vec<_>>>()?;
    Ok(PolaronBlock {
        modes: sea.occupied,
        diag,
        xi_coupling: 1.0 / lambda,
    })
}

/// Coefficients of `⟨M̃|φ(E)M̃⟩` as a quadratic form in `(1, γ_{Kq})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoleculeForm {
    pub energy: f64,
    /// `E_μ − E`.
    pub shift: f64,
    pub scalar: RenormSum,
    /// Particle momenta `μ < K² ≤ K_cap²`.
    pub k_modes: Vec<Momentum>,
    /// Hole momenta `q² ≤ μ`.
    pub q_modes: Vec<Momentum>,
    /// `1/(c K² + E_μ − E)` per particle mode.
    pub linear: Vec<f64>,
    /// `G_μ(K² − q² + E_μ − E, q − K)`, indexed by [`MoleculeForm::index`].
    pub diag: Vec<RenormSum>,
    kappa: f64,
    inv_mass: f64,
}

impl MoleculeForm {
    pub fn index(&self, ik: usize, iq: usize) -> usize {
        ik * self.q_modes.len() + iq
    }

    pub fn n_amplitudes(&self) -> usize {
        self.k_modes.len() * self.q_modes.len()
    }

    /// Particle-exchange kernel between `(K, q)` and `(L, q)`.
    pub fn exchange(&self, k: Momentum, l: Momentum, q: Momentum) -> f64 {
        let s = |p: Momentum| p.ksq(self.kappa);
        1.0 / ((q - k - l).ksq(self.kappa) * self.inv_mass + s(k) + s(l) - s(q) + self.shift)
    }

    /// Hole-exchange kernel between `(K, q)` and `(K, p)`.
    pub fn hole(&self, ik: usize) -> f64 {
        -self.linear[ik]
    }

    /// The amplitude block `A` of the form.
    pub fn amplitude_matrix(&self) -> DMatrix<f64> {
        let n = self.n_amplitudes();
        let nq = self.q_modes.len();
        let mut a = DMatrix::zeros(n, n);
        for (ik, &k) in self.k_modes.iter().enumerate() {
            for iq in 0..nq {
                let r = self.index(ik, iq);
                a[(r, r)] += self.diag[r].value;
                for ip in 0..nq {
                    a[(r, self.index(ik, ip))] += self.hole(ik);
                }
                for (il, &l) in self.k_modes.iter().enumerate() {
                    a[(r, self.index(il, iq))] += self.exchange(k, l, self.q_modes[iq]);
                }
            }
        }
        a
    }

    /// The linear coefficients `Y_{Kq} = 1/(c K² + E_μ − E)`.
    pub fn linear_vector(&self) -> Vec<f64> {
        let nq = self.q_modes.len();
        (0..self.n_amplitudes()).map(|r| self.linear[r / nq]).collect()
    }

    /// The full symmetric matrix `[[G₀, Yᵀ], [Y, A]]`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n_amplitudes();
        let y = self.linear_vector();
        let a = self.amplitude_matrix();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m[(0, 0)] = self.scalar.value;
        for i in 0..n {
            m[(0, i + 1)] = y[i];
            m[(i + 1, 0)] = y[i];
        }
        m.view_mut((1, 1), (n, n)).copy_from(&a);
        m
    }

    /// The form evaluated term by term at real amplitudes.
    pub fn value(&self, gamma: &[f64]) -> f64 {
        let nq = self.q_modes.len();
        let mut acc = NeumaierSum::new();
        acc.add(self.scalar.value);
        for (ik, &k) in self.k_modes.iter().enumerate() {
            for (iq, &q) in self.q_modes.iter().enumerate() {
                let g = gamma[self.index(ik, iq)];
                acc.add(2.0 * g * self.linear[ik]);
                acc.add(g * g * self.diag[self.index(ik, iq)].value);
                for (il, &l) in self.k_modes.iter().enumerate() {
                    acc.add(gamma[self.index(il, iq)] * g * self.exchange(k, l, q));
                }
                for ip in 0..nq {
                    acc.add(-g * gamma[self.index(ik, ip)] * self.linear[ik]);
                }
            }
        }
        acc.value()
    }

    /// First-order error of the form at `(1, γ)` from the `G_μ` error bounds.
    pub fn propagated_error(&self, gamma: &[f64]) -> f64 {
        self.scalar.error_bound
            + self.diag.iter().zip(gamma).map(|(d, g)| d.error_bound * g * g).sum::<f64>()
    }

    /// Largest error bound among the `G_μ` entries.
    pub fn max_error_bound(&self) -> f64 {
        self.diag.iter().map(|d| d.error_bound).fold(self.scalar.error_bound, f64::max)
    }
}

/// Tolerance of the `G_μ` entry at particle momentum `K`:
/// `tol · (1 + K²/κ²)²`. Amplitudes fall off like `K⁻²`, so every entry
/// contributes comparably to the error of the minimized form.
pub fn entry_tolerance(tol: f64, k2_over_kappa2: f64) -> f64 {
    tol * (1.0 + k2_over_kappa2).powi(2)
}

/// Particle momenta `μ < K² ≤ K_cap²` in lattice order.
pub fn particle_modes(params: &ModelParams, k_cap: f64) -> Vec<Momentum> {
    let mu = params.fermi_energy;
    crate::lattice::enumerate_ball(params.kappa, k_cap)
        .into_iter()
        .filter(|&k| params.ksq(k) > mu)
        .collect()
}

/// Entries are evaluated to [`entry_tolerance`] of the evaluator tolerance.
pub fn phi_limit_molecule_form(eval: &GEvaluator, energy: f64, k_cap: f64) -> Result<MoleculeForm> {
    let params = eval.params();
    let sea = FermiSea::new(params);
    let mu = params.fermi_energy;
    let window = sea.e_mu + mu.max(0.0);
    if !(energy < window) {
        return Err(Error::InvalidParameter(format!(
            "molecule form needs E < E_mu + mu = {window}, got {energy}"
        )));
    }
    let k_modes = particle_modes(params, k_cap);
    if k_modes.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "K_cap = {k_cap} admits no particle momentum above the Fermi level"
        )));
    }
    let shift = sea.e_mu - energy;
    let c = params.mass_factor();
    let scalar = eval.g(shift, Momentum::ZERO)?;
    let linear: Vec<f64> = k_modes.iter().map(|&k| 1.0 / (c * params.ksq(k) + shift)).collect();
    if let Some(pos) = linear.iter().position(|&y| !(y > 0.0)) {
        return Err(Error::OutsideContinuationWindow { k: k_modes[pos] });
    }
    let pairs: Vec<(Momentum, Momentum)> = k_modes
        .iter()
        .flat_map(|&k| sea.occupied.iter().map(move |&q| (k, q)))
        .collect();
    let diag = {
        use rayon::prelude::*;
        pairs
            .par_iter()
            .map(|&(k, q)| {
                let tol = entry_tolerance(eval.tol(), params.ksq(k) / (params.kappa * params.kappa));
                eval.g_with_tol(params.ksq(k) - params.ksq(q) + shift, q - k, tol)
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(MoleculeForm {
        energy,
        shift,
        scalar,
        k_modes,
        q_modes: sea.occupied,
        linear,
        diag,
        kappa: params.kappa,
        inv_mass: 1.0 / params.impurity_mass,
    })
}

/// Uncertified reference for the renormalized sums: plain summation over
/// the ball of `radius` plus the continuum tail of the circle average,
/// integrated numerically. Modes with `k² ≤ excl` drop the second term.
pub fn reference_sum(params: &ModelParams, q: Momentum, lambda: f64, excl: f64, radius: f64) -> f64 {
    let c = params.mass_factor();
    let m = params.impurity_mass;
    let mut acc = NeumaierSum::new();
    for_each_in_ball(params.kappa, radius, |k| {
        let k2 = params.ksq(k);
        let mut v = 1.0 / (c * k2 - params.binding_energy);
        if k2 > excl {
            v -= 1.0 / (params.ksq(q - k) / m + k2 + lambda);
        }
        acc.add(v);
    });
    let qn = params.ksq(q).sqrt();
    let d = qn * qn / m + lambda;
    let avg = |t: f64| {
        let a = c * t * t + d;
        let b = 2.0 * qn * t / m;
        1.0 / (c * t * t - params.binding_energy) - 1.0 / (a * a - b * b).sqrt()
    };
    // ∫_R^∞ 2πt avg(t) dt / κ² with t = R/u.
    let n = 4000;
    let mut tail = 0.0;
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        let t = radius / u;
        tail += 2.0 * std::f64::consts::PI * t * avg(t) * radius / (u * u) / n as f64;
    }
    acc.value() + tail / (params.kappa * params.kappa)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(m: f64, eb: f64, mu: f64) -> ModelParams {
        ModelParams::unit_lattice(m, eb, mu).unwrap()
    }

    #[test]
    fn cancellation_cases() {
        let p = unit(1.0, -1.0, 0.0);
        let v = mu_tau(&p, -1.0, Momentum::ZERO, 0.0).unwrap();
        assert!(v.value.abs() <= v.error_bound.max(1e-15));
        let pm = unit(1.0, -1.0, -1.0);
        let g = g_mu(&pm, 1.0, Momentum::ZERO).unwrap();
        assert!(g.value.abs() <= g.error_bound.max(1e-15));
    }

    #[test]
    fn agrees_with_reference() {
        let p = unit(1.0, -1.0, 0.0);
        let v = mu_tau(&p, -2.0, Momentum::new(1, 0), 0.0).unwrap();
        let r = reference_sum(&p, Momentum::new(1, 0), 2.0, f64::NEG_INFINITY, 10.0 * v.inner_radius);
        assert!((v.value - r).abs() <= v.error_bound + 1e-9, "{v:?} {r}");
        let p = unit(1.0, -1.0, 0.5);
        let g = g_mu(&p, 1.0, Momentum::ZERO).unwrap();
        let r = reference_sum(&p, Momentum::ZERO, 1.0, 0.5, 10.0 * g.inner_radius);
        assert!((g.value - r).abs() <= g.error_bound + 1e-9, "{g:?} {r}");
    }

    #[test]
    fn monotone_in_lambda() {
        let p = unit(2.0, -1.5, 1.0);
        let mut prev = f64::NEG_INFINITY;
        for lam in [0.5, 1.0, 2.0, 4.0] {
            let g = g_mu(&p, lam, Momentum::new(1, 1)).unwrap().value;
            assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn window_violation() {
        let p = unit(1.0, -1.0, 0.5);
        assert!(matches!(
            g_mu(&p, -3.0, Momentum::ZERO),
            Err(Error::OutsideContinuationWindow { .. })
        ));
    }

    #[test]
    fn cache_is_transparent() {
        let p = unit(1.0, -1.0, 2.0);
        let eval = GEvaluator::new(p, 1e-8);
        let a = eval.g(1.3, Momentum::new(1, 0)).unwrap();
        let b = eval.g(1.3, Momentum::new(0, -1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(eval.cache_len(), 1);
        assert_eq!(a, g_mu_with_tol(&p, 1.3, Momentum::new(0, 1), 1e-8).unwrap());
    }

    #[test]
    fn polaron_block_single_mode() {
        let p = unit(1.0, -1.0, 0.5);
        let eval = GEvaluator::new(p, 1e-9);
        let b = phi_limit_polaron_block(&eval, -2.0).unwrap();
        assert_eq!(b.modes, vec![Momentum::ZERO]);
        assert_eq!(b.xi_coupling, 0.5);
        assert_eq!(b.diag[0], g_mu(&p, 2.0, Momentum::ZERO).unwrap());
    }

    #[test]
    fn molecule_form_consistency() {
        let p = unit(1.0, -1.0, 1.0);
        let eval = GEvaluator::new(p, 1e-8);
        let form = phi_limit_molecule_form(&eval, -1.5, 2.0).unwrap();
        let m = form.matrix();
        assert!((&m - m.transpose()).abs().max() < 1e-15);
        let zeros = vec![0.0; form.n_amplitudes()];
        assert_eq!(form.value(&zeros), form.scalar.value);
        let gamma: Vec<f64> = (0..form.n_amplitudes()).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.1).collect();
        let mut v = vec![1.0];
        v.extend(&gamma);
        let v = nalgebra::DVector::from_vec(v);
        let quad = (v.transpose() * &m * &v)[(0, 0)];
        assert!((quad - form.value(&gamma)).abs() < 1e-12 * quad.abs().max(1.0));
    }
}
