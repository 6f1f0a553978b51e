//! Momentum lattice `κℤ²`, cutoff schemes, the renormalized coupling and
//! the certified lattice-summation engine used by every other module.
//!
//! Momenta are stored as integer coordinate pairs; the physical momentum is
//! `κ·(x, y)` and is only reconstructed when an energy is needed.

mod tail;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use tail::{
    for_each_in_ball, lattice_tail, tail_corrected_sum, tail_corrected_sum_split, InversePower,
    Interval, LatticeSum, NeumaierSum, QuadraticOverCubic, RadialProfile, RemainderSign,
    ResolventDifference,
};

/// A point of the momentum lattice in integer coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Momentum {
    pub x: i64,
    pub y: i64,
}

impl Momentum {
    pub const ZERO: Momentum = Momentum { x: 0, y: 0 };

    pub const fn new(x: i64, y: i64) -> Self {
        Momentum { x, y }
    }

    /// Squared length in lattice units.
    pub fn norm2(self) -> i64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, other: Momentum) -> i64 {
        self.x * other.x + self.y * other.y
    }

    /// Physical `k²` for lattice constant `kappa`.
    pub fn ksq(self, kappa: f64) -> f64 {
        kappa * kappa * self.norm2() as f64
    }

    /// Canonical representative of the point-group (C4v) orbit.
    pub fn orbit_key(self) -> Momentum {
        let (a, b) = (self.x.abs(), self.y.abs());
        Momentum::new(a.max(b), a.min(b))
    }

    /// The eight images under the lattice point group.
    pub fn point_group_images(self) -> [Momentum; 8] {
        let Momentum { x, y } = self;
        [
            Momentum::new(x, y),
            Momentum::new(-x, y),
            Momentum::new(x, -y),
            Momentum::new(-x, -y),
            Momentum::new(y, x),
            Momentum::new(-y, x),
            Momentum::new(y, -x),
            Momentum::new(-y, -x),
        ]
    }
}

impl Ord for Momentum {
    fn cmp(&self, other: &Self) -> Ordering {
        self.norm2()
            .cmp(&other.norm2())
            .then(self.x.cmp(&other.x))
            .then(self.y.cmp(&other.y))
    }
}

impl PartialOrd for Momentum {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for Momentum {
    type Output = Momentum;
    fn add(self, o: Momentum) -> Momentum {
        Momentum::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Momentum {
    type Output = Momentum;
    fn sub(self, o: Momentum) -> Momentum {
        Momentum::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Momentum {
    type Output = Momentum;
    fn neg(self) -> Momentum {
        Momentum::new(-self.x, -self.y)
    }
}

/// Physical parameters of the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub box_length: f64,
    pub impurity_mass: f64,
    pub binding_energy: f64,
    /// A negative value means an empty Fermi sea.
    pub fermi_energy: f64,
    pub kappa: f64,
}

impl ModelParams {
    pub fn new(
        box_length: f64,
        impurity_mass: f64,
        binding_energy: f64,
        fermi_energy: f64,
    ) -> Result<Self> {
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "box_length must be positive, got {box_length}"
            )));
        }
        if !(impurity_mass > 0.0 && impurity_mass.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "impurity_mass must be positive, got {impurity_mass}"
            )));
        }
        if !(binding_energy < 0.0 && binding_energy.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "binding_energy must be strictly negative, got {binding_energy}"
            )));
        }
        if !fermi_energy.is_finite() {
            return Err(Error::InvalidParameter("fermi_energy must be finite".into()));
        }
        Ok(ModelParams {
            box_length,
            impurity_mass,
            binding_energy,
            fermi_energy,
            kappa: 2.0 * PI / box_length,
        })
    }

    /// Parameters in units where `κ = 1` (`L = 2π`).
    pub fn unit_lattice(impurity_mass: f64, binding_energy: f64, fermi_energy: f64) -> Result<Self> {
        Self::new(2.0 * PI, impurity_mass, binding_energy, fermi_energy)
    }

    /// `1 + 1/M`, the reduced-mass factor of the two-body kinetic energy.
    pub fn mass_factor(&self) -> f64 {
        1.0 + 1.0 / self.impurity_mass
    }

    pub fn ksq(&self, k: Momentum) -> f64 {
        k.ksq(self.kappa)
    }

    pub fn with_binding_energy(&self, binding_energy: f64) -> Result<Self> {
        Self::new(self.box_length, self.impurity_mass, binding_energy, self.fermi_energy)
    }

    pub fn with_fermi_energy(&self, fermi_energy: f64) -> Result<Self> {
        Self::new(self.box_length, self.impurity_mass, self.binding_energy, fermi_energy)
    }

    pub fn fermi_sea(&self) -> FermiSea {
        FermiSea::new(self)
    }
}

/// Largest `x² + y²` of a lattice point within physical `radius`.
pub(crate) fn max_norm2(radius: f64, kappa: f64) -> i64 {
    if radius < 0.0 {
        return -1;
    }
    let t = radius / kappa;
    (t * t * (1.0 + 1e-12) + 1e-12).floor() as i64
}

pub(crate) fn isqrt(n: i64) -> i64 {
    if n < 0 {
        return -1;
    }
    let mut r = (n as f64).sqrt() as i64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// All lattice momenta with `|k| ≤ radius`, ordered by `k²` then lexicographically.
pub fn enumerate_ball(kappa: f64, radius: f64) -> Vec<Momentum> {
    let n2max = max_norm2(radius, kappa);
    if n2max < 0 {
        return Vec::new();
    }
    let n = isqrt(n2max);
    let mut out = Vec::new();
    for x in -n..=n {
        let ymax = isqrt(n2max - x * x);
        for y in -ymax..=ymax {
            out.push(Momentum::new(x, y));
        }
    }
    out.sort();
    out
}

/// Which built-in regularization family a scheme belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    /// `α = β = χ(|k| ≤ Λ)`.
    Sharp,
    /// `α = β = exp(−k²/2Λ²)`, truncated at `6Λ`.
    Gaussian,
    /// `β = χ(|k| ≤ Λ)` carries the regularization, `α = χ(|k| ≤ 2Λ)`.
    BetaOnly,
}

impl CutoffKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "sharp" => Some(CutoffKind::Sharp),
            "gaussian" => Some(CutoffKind::Gaussian),
            "beta_only" => Some(CutoffKind::BetaOnly),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CutoffKind::Sharp => "sharp",
            CutoffKind::Gaussian => "gaussian",
            CutoffKind::BetaOnly => "beta_only",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Profile {
    Builtin(CutoffKind),
    Table {
        alpha: BTreeMap<Momentum, f64>,
        beta: BTreeMap<Momentum, f64>,
    },
}

/// A finitely supported regularization pair `(α, β)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffScheme {
    profile: Profile,
    radius: f64,
    kappa: f64,
    support_radius: f64,
}

const GAUSSIAN_TRUNCATION: f64 = 6.0;

impl CutoffScheme {
    pub fn new(kind: CutoffKind, radius: f64, kappa: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !(kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff radius must be positive, got {radius}"
            )));
        }
        let support_radius = match kind {
            CutoffKind::Sharp => radius,
            CutoffKind::Gaussian => GAUSSIAN_TRUNCATION * radius,
            CutoffKind::BetaOnly => 2.0 * radius,
        };
        Ok(CutoffScheme {
            profile: Profile::Builtin(kind),
            radius,
            kappa,
            support_radius,
        })
    }

    pub fn sharp(radius: f64, kappa: f64) -> Result<Self> {
        Self::new(CutoffKind::Sharp, radius, kappa)
    }

    pub fn gaussian(radius: f64, kappa: f64) -> Result<Self> {
        Self::new(CutoffKind::Gaussian, radius, kappa)
    }

    /// An explicit table of values; momenta absent from a table map to zero.
    pub fn from_tables(
        alpha: BTreeMap<Momentum, f64>,
        beta: BTreeMap<Momentum, f64>,
        kappa: f64,
    ) -> Result<Self> {
        for (&k, &v) in alpha.iter().chain(beta.iter()) {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "cutoff value {v} at {k:?} outside [0, 1]"
                )));
            }
        }
        let support_radius = alpha
            .keys()
            .chain(beta.keys())
            .map(|k| k.ksq(kappa).sqrt())
            .fold(0.0, f64::max);
        Ok(CutoffScheme {
            profile: Profile::Table { alpha, beta },
            radius: support_radius,
            kappa,
            support_radius,
        })
    }

    pub fn kind(&self) -> Option<CutoffKind> {
        match self.profile {
            Profile::Builtin(kind) => Some(kind),
            Profile::Table { .. } => None,
        }
    }

    /// The nominal cutoff radius `Λ`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Radius beyond which both `α` and `β` vanish.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    fn inside(&self, k: Momentum, r: f64) -> bool {
        k.norm2() <= max_norm2(r, self.kappa)
    }

    pub fn alpha(&self, k: Momentum) -> f64 {
        match &self.profile {
            Profile::Builtin(CutoffKind::Sharp) => indicator(self.inside(k, self.radius)),
            Profile::Builtin(CutoffKind::Gaussian) => self.gaussian_value(k),
            Profile::Builtin(CutoffKind::BetaOnly) => {
                indicator(self.inside(k, 2.0 * self.radius))
            }
            Profile::Table { alpha, .. } => alpha.get(&k).copied().unwrap_or(0.0),
        }
    }

    pub fn beta(&self, k: Momentum) -> f64 {
        match &self.profile {
            Profile::Builtin(CutoffKind::Sharp) | Profile::Builtin(CutoffKind::BetaOnly) => {
                indicator(self.inside(k, self.radius))
            }
            Profile::Builtin(CutoffKind::Gaussian) => self.gaussian_value(k),
            Profile::Table { beta, .. } => beta.get(&k).copied().unwrap_or(0.0),
        }
    }

    fn gaussian_value(&self, k: Momentum) -> f64 {
        if !self.inside(k, GAUSSIAN_TRUNCATION * self.radius) {
            return 0.0;
        }
        let k2 = k.ksq(self.kappa);
        (-k2 / (2.0 * self.radius * self.radius)).exp()
    }

    /// Lattice points inside the support ball.
    pub fn support(&self) -> Vec<Momentum> {
        enumerate_ball(self.kappa, self.support_radius)
    }

    /// Support points where `α ≠ 0`, paired with `α`.
    pub fn alpha_support(&self) -> Vec<(Momentum, f64)> {
        self.support()
            .into_iter()
            .map(|k| (k, self.alpha(k)))
            .filter(|&(_, a)| a != 0.0)
            .collect()
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// The renormalized coupling `g` fixed so that `E_B` is the two-body ground
/// state at zero total momentum.
pub fn coupling_constant(scheme: &CutoffScheme, params: &ModelParams) -> Result<f64> {
    let c = params.mass_factor();
    let eb = params.binding_energy;
    let mut inv = 0.0;
    for k in scheme.support() {
        let w = scheme.alpha(k) * scheme.beta(-k);
        if w != 0.0 {
            inv += w * w / (c * params.ksq(k) - eb);
        }
    }
    if inv <= 0.0 {
        return Err(Error::DegenerateCutoff);
    }
    Ok(1.0 / inv)
}

/// `C(α,β) = sup_q Σ_k |α(k)β(q−k)|²`.
pub fn c_alpha_beta(scheme: &CutoffScheme) -> f64 {
    let support = scheme.support();
    let alphas: Vec<(Momentum, f64)> = scheme.alpha_support();
    enumerate_ball(scheme.kappa(), 2.0 * scheme.support_radius())
        .into_iter()
        .map(|q| {
            alphas
                .iter()
                .map(|&(k, a)| {
                    let b = scheme.beta(q - k);
                    a * a * b * b
                })
                .sum::<f64>()
        })
        .fold(if support.is_empty() { 0.0 } else { f64::MIN }, f64::max)
        .max(0.0)
}

/// Admissibility diagnostic `γ(q)` of a regularization sequence member.
///
/// Variant 1 weights by `|α|` and differences of `β`, variant 2 swaps the roles.
pub fn scheme_gamma(scheme: &CutoffScheme, q: Momentum, variant: u8) -> Result<f64> {
    let kappa = scheme.kappa();
    let q2 = q.ksq(kappa);
    let radius = scheme.support_radius() + q2.sqrt() + kappa;
    let (weight, diff): (&dyn Fn(Momentum) -> f64, &dyn Fn(Momentum) -> f64) = match variant {
        1 => (&|k| scheme.alpha(k), &|k| scheme.beta(k)),
        2 => (&|k| scheme.beta(k), &|k| scheme.alpha(k)),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "gamma variant must be 1 or 2, got {variant}"
            )))
        }
    };
    let mut total = 0.0;
    for k in enumerate_ball(kappa, radius) {
        let w = weight(k).abs();
        if w == 0.0 {
            continue;
        }
        let d = (diff(-k) - diff(q - k)).abs();
        total += w * d / (k.ksq(kappa) + q2 + 1.0);
    }
    Ok(total)
}

/// The non-interacting Fermi sea `{k : k² ≤ μ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FermiSea {
    pub occupied: Vec<Momentum>,
    pub n_mu: usize,
    pub e_mu: f64,
}

impl FermiSea {
    pub fn new(params: &ModelParams) -> Self {
        let occupied = if params.fermi_energy >= 0.0 {
            enumerate_ball(params.kappa, params.fermi_energy.sqrt())
        } else {
            Vec::new()
        };
        let e_mu = occupied.iter().map(|&k| params.ksq(k)).sum();
        FermiSea {
            n_mu: occupied.len(),
            occupied,
            e_mu,
        }
    }

    pub fn contains(&self, k: Momentum) -> bool {
        self.occupied.binary_search(&k).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(m: f64, eb: f64, mu: f64) -> ModelParams {
        ModelParams::unit_lattice(m, eb, mu).unwrap()
    }

    #[test]
    fn kappa_is_two_pi_over_l() {
        let p = unit(1.0, -1.0, 0.0);
        assert_eq!(p.kappa, 1.0);
        let p = ModelParams::new(3.0, 2.0, -1.0, 0.5).unwrap();
        assert!((p.kappa - 2.0 * PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ModelParams::new(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, -1.0, -1.0, 0.0).is_err());
        assert!(ModelParams::new(0.0, 1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn ball_enumeration_small_radii() {
        assert_eq!(enumerate_ball(1.0, 0.0), vec![Momentum::ZERO]);
        let b1 = enumerate_ball(1.0, 1.0);
        assert_eq!(b1.len(), 5);
        assert_eq!(b1[0], Momentum::ZERO);
        let b2 = enumerate_ball(1.0, 2.0);
        // brute force over the square [-3,3]^2
        let mut brute = 0;
        for x in -3i64..=3 {
            for y in -3i64..=3 {
                if x * x + y * y <= 4 {
                    brute += 1;
                }
            }
        }
        assert_eq!(b2.len(), brute);
        assert_eq!(b2.len(), 13);
        for w in b2.windows(2) {
            assert!(w[0] < w[1]);
        }
        for &k in &b2 {
            assert!(b2.contains(&-k));
        }
    }

    #[test]
    fn coupling_single_mode() {
        let p = unit(1.0, -2.0, 0.0);
        let mut alpha = BTreeMap::new();
        alpha.insert(Momentum::ZERO, 1.0);
        let mut beta = BTreeMap::new();
        beta.insert(Momentum::ZERO, 1.0);
        let s = CutoffScheme::from_tables(alpha, beta, 1.0).unwrap();
        assert!((coupling_constant(&s, &p).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn coupling_sharp_radius_two() {
        let p = unit(1.0, -1.0, 0.0);
        let s = CutoffScheme::sharp(2.0, 1.0).unwrap();
        let ginv = 1.0 / coupling_constant(&s, &p).unwrap();
        assert!((ginv - 161.0 / 45.0).abs() < 1e-14);
    }

    #[test]
    fn coupling_decreases_with_radius() {
        let p = unit(1.0, -1.0, 0.0);
        let mut last = f64::INFINITY;
        for r in 1..12 {
            let g = coupling_constant(&CutoffScheme::sharp(r as f64, 1.0).unwrap(), &p).unwrap();
            assert!(g < last);
            last = g;
        }
    }

    #[test]
    fn empty_support_is_degenerate() {
        let p = unit(1.0, -1.0, 0.0);
        let s = CutoffScheme::from_tables(BTreeMap::new(), BTreeMap::new(), 1.0).unwrap();
        assert!(matches!(coupling_constant(&s, &p), Err(Error::DegenerateCutoff)));
    }

    #[test]
    fn c_alpha_beta_counts_ball_for_sharp() {
        for r in [1.0, 2.0, 3.5, 6.0] {
            let s = CutoffScheme::sharp(r, 1.0).unwrap();
            assert_eq!(c_alpha_beta(&s), enumerate_ball(1.0, r).len() as f64);
        }
    }

    #[test]
    fn gamma_vanishes_at_zero() {
        let s = CutoffScheme::gaussian(3.0, 1.0).unwrap();
        assert_eq!(scheme_gamma(&s, Momentum::ZERO, 1).unwrap(), 0.0);
        assert_eq!(scheme_gamma(&s, Momentum::ZERO, 2).unwrap(), 0.0);
    }

    #[test]
    fn gamma_sharp_radius_two_by_enumeration() {
        let s = CutoffScheme::sharp(2.0, 1.0).unwrap();
        let q = Momentum::new(1, 0);
        // |k| <= 2 < |k - q| : brute force
        let mut expect = 0.0;
        for x in -2i64..=2 {
            for y in -2i64..=2 {
                let k2 = x * x + y * y;
                let kq = (x - 1) * (x - 1) + y * y;
                if k2 <= 4 && kq > 4 {
                    expect += 1.0 / (k2 as f64 + 1.0 + 1.0);
                }
            }
        }
        let got = scheme_gamma(&s, q, 1).unwrap();
        assert!((got - expect).abs() < 1e-15, "{got} vs {expect}");
        assert!(expect > 0.0);
    }

    #[test]
    fn gamma_decreases_along_ladder() {
        let q = Momentum::new(1, 1);
        let vals: Vec<f64> = [4.0, 8.0, 16.0, 32.0]
            .iter()
            .map(|&r| scheme_gamma(&CutoffScheme::sharp(r, 1.0).unwrap(), q, 1).unwrap())
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] < w[0], "{vals:?}");
        }
    }

    #[test]
    fn fermi_sea_bookkeeping() {
        let p = unit(1.0, -1.0, 1.5);
        let fs = p.fermi_sea();
        assert_eq!(fs.n_mu, 5);
        assert_eq!(fs.e_mu, 4.0);
        let total = fs.occupied.iter().fold(Momentum::ZERO, |a, &k| a + k);
        assert_eq!(total, Momentum::ZERO);
        assert_eq!(unit(1.0, -1.0, 0.5).fermi_sea().n_mu, 1);
        assert_eq!(unit(1.0, -1.0, -0.5).fermi_sea().n_mu, 0);
    }

    #[test]
    fn orbit_key_is_invariant() {
        let k = Momentum::new(-3, 2);
        for g in k.point_group_images() {
            assert_eq!(g.orbit_key(), Momentum::new(3, 2));
        }
    }
}
