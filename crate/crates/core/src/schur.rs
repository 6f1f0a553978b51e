//! Finite-dimensional models `H = H₀ − g A*A`: the Birman–Schwinger operator
//! `φ(z) = g⁻¹ − A R₀(z) A*`, both Schur factorizations of the block operator
//! `[[H₀ − z, A*], [A, g⁻¹]]`, the Krein resolvent formula, kernel
//! correspondences and eigenvalue counting below `min H₀`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    count_below, count_negative, group_degenerate, hermitian_eigen, hermitian_eigenvalues,
    DEGENERACY_GAP,
};

type CMatrix = DMatrix<Complex64>;

const POLE_TOL: f64 = 1e-14;
const SINGULAR_TOL: f64 = 1e-13;
/// Kernel vectors must satisfy their defining equations to this accuracy.
pub const KERNEL_TOL: f64 = 1e-8;
/// Identity checks are expected to hold to this relative accuracy.
pub const IDENTITY_TOL: f64 = 1e-10;

/// `H₀` (diagonal), `A` and the coupling `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct BsModel {
    pub h0_diag: Vec<f64>,
    pub a_matrix: CMatrix,
    pub g: f64,
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl BsModel {
    pub fn new(h0_diag: Vec<f64>, a_matrix: CMatrix, g: f64) -> Result<Self> {
        if let Some(&bad) = h0_diag.iter().find(|&&h| !(h >= 0.0 && h.is_finite())) {
            return Err(Error::InvalidParameter(format!("H0 entry {bad} is not a nonnegative real")));
        }
        if a_matrix.ncols() != h0_diag.len() {
            return Err(Error::DimensionMismatch(format!(
                "A has {} columns but H0 has dimension {}",
                a_matrix.ncols(),
                h0_diag.len()
            )));
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidParameter(format!("coupling must be positive, got {g}")));
        }
        Ok(BsModel { h0_diag, a_matrix, g })
    }

    /// Rank-one model `A = ⟨η|`.
    pub fn rank_one(h0_diag: Vec<f64>, eta: &[f64], g: f64) -> Result<Self> {
        let a = CMatrix::from_fn(1, eta.len(), |_, j| c(eta[j]));
        Self::new(h0_diag, a, g)
    }

    /// `H₀` uniform in `(0, 10)`, entries of `A` uniform in the unit square, `g = 1`.
    pub fn random(rng: &mut impl Rng, dim: usize, aux_dim: usize) -> Self {
        let h0_diag = (0..dim).map(|_| rng.random_range(0.0..10.0)).collect();
        let a_matrix = CMatrix::from_fn(aux_dim, dim, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        BsModel {
            h0_diag,
            a_matrix,
            g: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.h0_diag.len()
    }

    pub fn aux_dim(&self) -> usize {
        self.a_matrix.nrows()
    }

    pub fn min_h0(&self) -> f64 {
        self.h0_diag.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn hamiltonian(&self) -> CMatrix {
        let mut h = self.a_matrix.adjoint() * &self.a_matrix * c(-self.g);
        for (i, &e) in self.h0_diag.iter().enumerate() {
            h[(i, i)] += e;
        }
        h
    }

    fn r0_diag(&self, z: Complex64) -> Result<Vec<Complex64>> {
        self.h0_diag
            .iter()
            .map(|&e| {
                let d = c(e) - z;
                if d.norm() <= POLE_TOL * z.norm().max(1.0) {
                    Err(Error::ResolventPole(format!("{z}")))
                } else {
                    Ok(d.inv())
                }
            })
            .collect()
    }

    fn h0_minus(&self, z: Complex64) -> CMatrix {
        CMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j {
                c(self.h0_diag[i]) - z
            } else {
                Complex64::default()
            }
        })
    }
}

/// `φ(z) = g⁻¹ − A R₀(z) A*`.
pub fn phi_of_z(model: &BsModel, z: Complex64) -> Result<CMatrix> {
    let r0 = model.r0_diag(z)?;
    let a = &model.a_matrix;
    let scaled = CMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * r0[j]);
    let mut phi = scaled * a.adjoint() * c(-1.0);
    for i in 0..phi.nrows() {
        phi[(i, i)] += 1.0 / model.g;
    }
    Ok(phi)
}

fn checked_inverse(m: &CMatrix, what: impl Fn() -> String) -> Result<CMatrix> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 || min <= SINGULAR_TOL * max {
        return Err(Error::SingularPhi(what()));
    }
    m.clone().try_inverse().ok_or_else(|| Error::SingularPhi(what()))
}

/// `(H − z)⁻¹` by dense inversion.
pub fn direct_resolvent(model: &BsModel, z: Complex64) -> Result<CMatrix> {
    let mut h = model.hamiltonian();
    for i in 0..h.nrows() {
        h[(i, i)] -= z;
    }
    checked_inverse(&h, || format!("{z}"))
}

/// `R₀(z) + R₀(z) A* φ(z)⁻¹ A R₀(z)`.
pub fn krein_resolvent(model: &BsModel, z: Complex64) -> Result<CMatrix> {
    let r0 = model.r0_diag(z)?;
    let phi_inv = checked_inverse(&phi_of_z(model, z)?, || format!("{z}"))?;
    let a = &model.a_matrix;
    let a_r0 = CMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * r0[j]);
    let r0_astar = CMatrix::from_fn(a.ncols(), a.nrows(), |i, j| r0[i] * a[(j, i)].conj());
    let mut out = &r0_astar * phi_inv * a_r0;
    for (i, r) in r0.iter().enumerate() {
        out[(i, i)] += r;
    }
    Ok(out)
}

/// Relative Frobenius distance between the Krein formula and direct inversion.
pub fn resolvent_identity_residual(model: &BsModel, z: Complex64) -> Result<f64> {
    let k = krein_resolvent(model, z)?;
    let d = direct_resolvent(model, z)?;
    Ok(frobenius(&(&k - &d)) / frobenius(&d).max(1e-300))
}

/// `‖φ(z)⁻¹ − (g + g² A (H − z)⁻¹ A*)‖_F / max(1, ‖φ(z)⁻¹‖_F)`.
pub fn inverse_phi_identity_check(model: &BsModel, z: Complex64) -> Result<f64> {
    let phi_inv = checked_inverse(&phi_of_z(model, z)?, || format!("{z}"))?;
    let r = direct_resolvent(model, z)?;
    let a = &model.a_matrix;
    let g = model.g;
    let mut rhs = a * r * a.adjoint() * c(g * g);
    for i in 0..rhs.nrows() {
        rhs[(i, i)] += g;
    }
    Ok(frobenius(&(&phi_inv - rhs)) / frobenius(&phi_inv).max(1.0))
}

fn block(tl: &CMatrix, tr: &CMatrix, bl: &CMatrix, br: &CMatrix) -> CMatrix {
    let (n, m) = (tl.nrows(), br.nrows());
    let mut out = CMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(tl);
    out.view_mut((0, n), (n, m)).copy_from(tr);
    out.view_mut((n, 0), (m, n)).copy_from(bl);
    out.view_mut((n, n), (m, m)).copy_from(br);
    out
}

/// Reconstruction residuals of the two triangular factorizations of
/// `[[H₀ − z, A*], [A, g⁻¹]]`, relative to its Frobenius norm.
pub fn schur_factorization_check(model: &BsModel, z: Complex64) -> Result<(f64, f64)> {
    let n = model.dim();
    let m = model.aux_dim();
    let g = model.g;
    let a = &model.a_matrix;
    let a_star = a.adjoint();
    let id_n = CMatrix::identity(n, n);
    let id_m = CMatrix::identity(m, m);
    let z_nm = CMatrix::zeros(n, m);
    let z_mn = CMatrix::zeros(m, n);
    let ginv = CMatrix::identity(m, m) * c(1.0 / g);

    let h0z = model.h0_minus(z);
    let full = block(&h0z, &a_star, a, &ginv);
    let scale = frobenius(&full).max(1.0);

    let mut hz = model.hamiltonian();
    for i in 0..n {
        hz[(i, i)] -= z;
    }
    let upper1 = block(&id_n, &(&a_star * c(g)), &z_mn, &id_m);
    let mid1 = block(&hz, &z_nm, &z_mn, &ginv);
    let lower1 = block(&id_n, &z_nm, &(a * c(g)), &id_m);
    let r1 = frobenius(&(&full - upper1 * mid1 * lower1)) / scale;

    let r0 = model.r0_diag(z)?;
    let a_r0 = CMatrix::from_fn(m, n, |i, j| a[(i, j)] * r0[j]);
    let r0_astar = CMatrix::from_fn(n, m, |i, j| r0[i] * a_star[(i, j)]);
    let phi = phi_of_z(model, z)?;
    let lower2 = block(&id_n, &z_nm, &a_r0, &id_m);
    let mid2 = block(&h0z, &z_nm, &z_mn, &phi);
    let upper2 = block(&id_n, &r0_astar, &z_mn, &id_m);
    let r2 = frobenius(&(&full - lower2 * mid2 * upper2)) / scale;
    Ok((r1, r2))
}

/// Outcome of comparing `ker(H − z)` with `ker φ(z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub z: f64,
    pub dim_ker_h: usize,
    pub dim_ker_phi: usize,
    /// Rank of `A` applied to a basis of `ker(H − z)`.
    pub a_image_rank: usize,
    /// `max ‖φ(z) A v‖ / ‖A v‖` over the kernel basis.
    pub a_map_residual: f64,
    /// `max ‖(H − z) R₀ A* w‖ / ‖R₀ A* w‖` over a basis of `ker φ(z)`.
    pub r0a_map_residual: f64,
    pub passed: bool,
}

fn column_rank(m: &CMatrix, rel: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > rel * max).count()
}

/// Checks that `A` and `R₀(z)A*` map the two kernels into each other.
pub fn kernel_isomorphism_check(model: &BsModel, z: f64) -> Result<KernelReport> {
    let zc = c(z);
    let h = model.hamiltonian();
    let (energies, vectors) = hermitian_eigen(&h);
    let band = 1e-9 * z.abs().max(1.0);
    let kernel_h: Vec<usize> = (0..energies.len())
        .filter(|&i| (energies[i] - z).abs() <= band)
        .collect();
    if kernel_h.is_empty() {
        return Err(Error::NotAnEigenvalue(z));
    }
    let phi = phi_of_z(model, zc)?;
    let (mus, phi_vecs) = hermitian_eigen(&phi);
    let phi_scale = mus.iter().map(|m| m.abs()).fold(1.0, f64::max);
    let kernel_phi: Vec<usize> = (0..mus.len())
        .filter(|&i| mus[i].abs() <= KERNEL_TOL * phi_scale)
        .collect();

    let a = &model.a_matrix;
    let mut images = CMatrix::zeros(model.aux_dim(), kernel_h.len());
    let mut a_map_residual: f64 = 0.0;
    for (col, &i) in kernel_h.iter().enumerate() {
        let v = vectors.column(i).into_owned();
        let w = a * v;
        let wn = w.norm();
        if wn > 0.0 {
            a_map_residual = a_map_residual.max((&phi * &w).norm() / wn);
        }
        images.set_column(col, &w);
    }
    let a_image_rank = column_rank(&images, KERNEL_TOL);

    let r0 = model.r0_diag(zc)?;
    let mut hz = h.clone();
    for i in 0..hz.nrows() {
        hz[(i, i)] -= zc;
    }
    let mut r0a_map_residual: f64 = 0.0;
    for &i in &kernel_phi {
        let w = phi_vecs.column(i).into_owned();
        let mut u = a.adjoint() * w;
        for (k, r) in r0.iter().enumerate() {
            u[k] *= r;
        }
        let un = u.norm();
        if un > 0.0 {
            r0a_map_residual = r0a_map_residual.max((&hz * &u).norm() / un);
        }
    }
    let passed = kernel_h.len() == kernel_phi.len()
        && a_image_rank == kernel_h.len()
        && a_map_residual <= KERNEL_TOL
        && r0a_map_residual <= KERNEL_TOL;
    Ok(KernelReport {
        z,
        dim_ker_h: kernel_h.len(),
        dim_ker_phi: kernel_phi.len(),
        a_image_rank,
        a_map_residual,
        r0a_map_residual,
        passed,
    })
}

/// `(#{eig H < E}, #{negative eig φ(E)})` for `E < min H₀`.
pub fn bs_count_check(model: &BsModel, e: f64) -> Result<(usize, usize)> {
    let bound = model.min_h0();
    if e >= bound {
        return Err(Error::OutsideVariationalWindow { energy: e, bound });
    }
    let energies = hermitian_eigenvalues(&model.hamiltonian());
    bs_count_with_spectrum(model, &energies, e)
}

/// Counting with a precomputed spectrum of `H`, for energy grids.
pub fn bs_count_with_spectrum(model: &BsModel, energies: &[f64], e: f64) -> Result<(usize, usize)> {
    let bound = model.min_h0();
    if e >= bound {
        return Err(Error::OutsideVariationalWindow { energy: e, bound });
    }
    let e = nudge_off_spectrum(energies, e);
    let count_h = count_below(energies, e);
    let phi = phi_of_z(model, c(e))?;
    let count_phi = count_negative(&hermitian_eigenvalues(&phi));
    Ok((count_h, count_phi))
}

/// Moves `e` down by `1e−12` when it sits on an eigenvalue.
pub fn nudge_off_spectrum(energies: &[f64], e: f64) -> f64 {
    let band = crate::linalg::ZERO_BAND * e.abs().max(1.0);
    if energies.iter().any(|&l| (l - e).abs() <= band) {
        e - 1e-12
    } else {
        e
    }
}

/// `μ_ℓ(φ(τ))` along an ascending grid together with the PSD gaps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub ell: usize,
    pub values: Vec<f64>,
    /// Smallest eigenvalue of `φ(τ_i) − φ(τ_{i+1})` over the grid.
    pub min_psd_eigenvalue: f64,
    pub a_star_injective: bool,
    pub strictly_decreasing: bool,
    pub passed: bool,
}

/// Monotonicity of `τ ↦ φ(τ)` below `min H₀`.
pub fn phi_monotonicity_check(model: &BsModel, tau_grid: &[f64], ell: usize) -> Result<MonotonicityReport> {
    if ell == 0 || ell > model.aux_dim() {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue index {ell} outside 1..={}",
            model.aux_dim()
        )));
    }
    if tau_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("tau grid must be strictly ascending".into()));
    }
    let bound = model.min_h0();
    if let Some(&t) = tau_grid.iter().find(|&&t| t >= bound) {
        return Err(Error::OutsideVariationalWindow { energy: t, bound });
    }
    let phis: Vec<CMatrix> = tau_grid
        .iter()
        .map(|&t| phi_of_z(model, c(t)))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = phis.iter().map(|p| hermitian_eigenvalues(p)[ell - 1]).collect();
    let mut min_psd = f64::INFINITY;
    for w in phis.windows(2) {
        let diff = &w[0] - &w[1];
        if let Some(&m) = hermitian_eigenvalues(&diff).first() {
            min_psd = min_psd.min(m);
        }
    }
    let a_star_injective = column_rank(&model.a_matrix.adjoint(), 1e-10) == model.aux_dim();
    let strictly_decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let passed = min_psd >= -1e-12 && (!a_star_injective || strictly_decreasing);
    Ok(MonotonicityReport {
        ell,
        values,
        min_psd_eigenvalue: min_psd,
        a_star_injective,
        strictly_decreasing,
        passed,
    })
}

/// Degeneracy structure `(value, multiplicity)` of the spectrum of `H`.
pub fn spectrum_groups(model: &BsModel) -> Vec<(f64, usize)> {
    group_degenerate(&hermitian_eigenvalues(&model.hamiltonian()), DEGENERACY_GAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_coupling_map_gives_constant_phi() {
        let m = BsModel::new(vec![1.0, 2.0, 3.0], CMatrix::zeros(2, 3), 0.5).unwrap();
        let phi = phi_of_z(&m, c(-1.0)).unwrap();
        assert_eq!(phi, CMatrix::identity(2, 2) * c(2.0));
        let k = krein_resolvent(&m, c(-1.0)).unwrap();
        let r0 = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.5), c(1.0 / 3.0), c(0.25)]));
        assert!(frobenius(&(k - r0)) < 1e-15);
        assert_eq!(inverse_phi_identity_check(&m, c(-1.0)).unwrap(), 0.0);
        let (r1, r2) = schur_factorization_check(&m, c(-1.0)).unwrap();
        assert!(r1 == 0.0 && r2 == 0.0);
    }

    #[test]
    fn rank_one_scalar_phi() {
        let h0 = vec![0.0, 1.0, 4.0];
        let eta = [1.0, 0.5, 0.25];
        let g = 2.0;
        let m = BsModel::rank_one(h0.clone(), &eta, g).unwrap();
        let z = -0.7;
        let expect = 1.0 / g - eta.iter().zip(&h0).map(|(e, h)| e * e / (h - z)).sum::<f64>();
        let phi = phi_of_z(&m, c(z)).unwrap();
        assert!((phi[(0, 0)].re - expect).abs() < 1e-15);
        // φ⁻¹ = g + g²⟨η|(H−z)⁻¹η⟩
        let r = direct_resolvent(&m, c(z)).unwrap();
        let mut quad = Complex64::default();
        for i in 0..3 {
            for j in 0..3 {
                quad += eta[i] * r[(i, j)] * eta[j];
            }
        }
        let rhs = g + g * g * quad.re;
        assert!((1.0 / expect - rhs).abs() < 1e-12 * rhs.abs());
    }

    #[test]
    fn pole_is_rejected() {
        let m = BsModel::rank_one(vec![0.0, 1.0], &[1.0, 1.0], 1.0).unwrap();
        assert!(matches!(phi_of_z(&m, c(1.0)), Err(Error::ResolventPole(_))));
    }

    #[test]
    fn random_identities() {
        let mut r = rng(11);
        for _ in 0..10 {
            let m = BsModel::random(&mut r, 6, 3);
            let z = Complex64::new(-0.7, 0.3);
            assert!(resolvent_identity_residual(&m, z).unwrap() < 1e-10);
            assert!(inverse_phi_identity_check(&m, z).unwrap() < 1e-10);
            let (r1, r2) = schur_factorization_check(&m, z).unwrap();
            assert!(r1 < 1e-12 && r2 < 1e-12, "{r1} {r2}");
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let m = BsModel::random(&mut rng(5), 5, 2);
        let z = Complex64::new(-0.3, 0.8);
        let a = phi_of_z(&m, z).unwrap();
        let b = phi_of_z(&m, z.conj()).unwrap();
        assert!(frobenius(&(a.adjoint() - b)) < 1e-14);
    }

    #[test]
    fn rank_one_bound_state_counts() {
        let h0 = vec![0.5, 1.0, 2.0, 3.0];
        let eta = [1.0, 1.0, 1.0, 1.0];
        let m = BsModel::rank_one(h0, &eta, 2.0).unwrap();
        let spectrum = hermitian_eigenvalues(&m.hamiltonian());
        assert!(spectrum[0] < 0.5 && spectrum[1] > 0.5);
        assert_eq!(bs_count_check(&m, spectrum[0] - 0.1).unwrap(), (0, 0));
        assert_eq!(bs_count_check(&m, 0.5 * (spectrum[0] + 0.5)).unwrap(), (1, 1));
        assert!(matches!(
            bs_count_check(&m, 0.6),
            Err(Error::OutsideVariationalWindow { .. })
        ));
    }

    #[test]
    fn rank_one_kernel_vector() {
        let h0 = vec![0.5, 1.0, 2.0];
        let eta = [1.0, 0.7, 0.2];
        let m = BsModel::rank_one(h0.clone(), &eta, 3.0).unwrap();
        let lam = hermitian_eigenvalues(&m.hamiltonian())[0];
        let rep = kernel_isomorphism_check(&m, lam).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!((rep.dim_ker_h, rep.dim_ker_phi), (1, 1));
        assert!(matches!(kernel_isomorphism_check(&m, lam - 0.01), Err(Error::NotAnEigenvalue(_))));
    }

    #[test]
    fn monotone_phi() {
        let m = BsModel::random(&mut rng(8), 8, 3);
        let grid: Vec<f64> = (0..10).map(|i| -5.0 + 0.5 * i as f64).collect();
        let rep = phi_monotonicity_check(&m, &grid, 1).unwrap();
        assert!(rep.a_star_injective && rep.strictly_decreasing && rep.passed);
        let z = BsModel::new(vec![1.0; 3], CMatrix::zeros(2, 3), 1.0).unwrap();
        let rep = phi_monotonicity_check(&z, &grid[..4], 2).unwrap();
        assert!(!rep.a_star_injective && !rep.strictly_decreasing && rep.passed);
        assert!(rep.values.iter().all(|&v| v == 1.0));
    }
}
