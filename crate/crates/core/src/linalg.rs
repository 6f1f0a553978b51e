//! Dense Hermitian eigensolvers, degeneracy grouping and a block Davidson
//! solver for large real-symmetric operators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense solves are used up to this dimension.
pub const DENSE_CAP: usize = 2048;
/// Above this dimension a few lowest eigenpairs come from Davidson.
pub const DENSE_EIGENPAIR_CAP: usize = 256;
/// Eigenvalues with `|λ| ≤ ZERO_BAND` are treated as zero when counting.
pub const ZERO_BAND: f64 = 1e-10;
/// Relative gap below which eigenvalues are considered degenerate.
pub const DEGENERACY_GAP: f64 = 1e-9;
/// Residual target of the iterative solver.
pub const ITERATIVE_TOL: f64 = 1e-9;

/// Lowest eigenpairs with certified residuals `‖Hv − λv‖` for unit `v`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub energies: Vec<f64>,
    pub eigvec_residuals: Vec<f64>,
    #[serde(skip)]
    pub vectors: Vec<DVector<f64>>,
}

impl SpectralReport {
    pub fn ground(&self) -> Option<f64> {
        self.energies.first().copied()
    }

    pub fn max_residual(&self) -> f64 {
        self.eigvec_residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// A real-symmetric operator available through matrix-vector products.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            *yi = 0.0;
            for (j, xj) in x.iter().enumerate() {
                *yi += self[(i, j)] * xj;
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows()).map(|i| self[(i, i)]).collect()
    }
}

/// Ascending eigenvalues and matching eigenvector columns of a real symmetric matrix.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Ascending eigenvalues and eigenvector columns of a complex Hermitian matrix.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// `max |m − m*|` relative to `max(1, max |m|)`.
pub fn hermiticity_defect(m: &DMatrix<Complex64>) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

/// Groups an ascending sequence into clusters of relative width below `rel_gap`,
/// returning `(mean, multiplicity)` pairs.
pub fn group_degenerate(values: &[f64], rel_gap: f64) -> Vec<(f64, usize)> {
    let mut groups: Vec<(f64, usize, f64)> = Vec::new();
    for &v in values {
        match groups.last_mut() {
            Some((sum, count, last)) if (v - *last).abs() <= rel_gap * v.abs().max(last.abs()).max(1.0) => {
                *sum += v;
                *count += 1;
                *last = v;
            }
            _ => groups.push((v, 1, v)),
        }
    }
    groups.into_iter().map(|(s, c, _)| (s / c as f64, c)).collect()
}

/// Number of values strictly below `e`.
pub fn count_below(values: &[f64], e: f64) -> usize {
    values.iter().filter(|&&v| v < e).count()
}

/// Number of values below `−ZERO_BAND`.
pub fn count_negative(values: &[f64]) -> usize {
    values.iter().filter(|&&v| v < -ZERO_BAND).count()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense matrix of an operator, built column by column.
pub fn densify(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    // symmetrize rounding noise away
    (&m + m.transpose()) * 0.5
}

fn residual_norm(op: &dyn LinearOperator, v: &[f64], lambda: f64) -> f64 {
    let mut hv = vec![0.0; v.len()];
    op.apply(v, &mut hv);
    let r: f64 = hv
        .iter()
        .zip(v)
        .map(|(h, x)| (h - lambda * x).powi(2))
        .sum();
    r.sqrt() / norm(v)
}

/// The `count` lowest eigenpairs: dense up to [`DENSE_EIGENPAIR_CAP`] or when
/// more than a quarter of the spectrum is asked for, block Davidson otherwise.
pub fn lowest_eigenpairs(op: &dyn LinearOperator, count: usize) -> Result<SpectralReport> {
    let n = op.dim();
    let count = count.min(n);
    if n <= DENSE_EIGENPAIR_CAP || (4 * count > n && n <= DENSE_CAP) {
        let m = densify(op);
        let (values, vectors) = symmetric_eigen(&m);
        let mut report = SpectralReport::default();
        for i in 0..count {
            let v: Vec<f64> = vectors.column(i).iter().copied().collect();
            report.eigvec_residuals.push(residual_norm(op, &v, values[i]));
            report.energies.push(values[i]);
            report.vectors.push(DVector::from_vec(v));
        }
        return Ok(report);
    }
    davidson(op, count, ITERATIVE_TOL, 2000)
}

/// Block Davidson with diagonal preconditioning for the lowest `nev` eigenpairs.
pub fn davidson(op: &dyn LinearOperator, nev: usize, tol: f64, max_iter: usize) -> Result<SpectralReport> {
    let n = op.dim();
    let nev = nev.min(n);
    if nev == 0 {
        return Ok(SpectralReport::default());
    }
    let diag = op.diagonal();
    let block = (nev + 4).min(n);
    let max_basis = (4 * block).max(40).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    let push = |v: Vec<f64>, basis: &mut Vec<Vec<f64>>, images: &mut Vec<Vec<f64>>| -> bool {
        let mut v = v;
        let before = norm(&v);
        if before == 0.0 || !before.is_finite() {
            return false;
        }
        for _ in 0..2 {
            for b in basis.iter() {
                let c = dot(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let after = norm(&v);
        if after <= 1e-10 * before {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= after);
        let mut hv = vec![0.0; v.len()];
        op.apply(&v, &mut hv);
        basis.push(v);
        images.push(hv);
        true
    };
    for &i in order.iter().take(block) {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        // a small deterministic admixture breaks accidental symmetry
        for (j, x) in e.iter_mut().enumerate() {
            *x += 1e-3 * (((j * 7919 + i * 104729) % 1000) as f64 / 1000.0 - 0.5) / (n as f64).sqrt();
        }
        push(e, &mut basis, &mut images);
    }

    for _ in 0..max_iter {
        let m = basis.len();
        let t = DMatrix::from_fn(m, m, |i, j| 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i])));
        let (theta, s) = symmetric_eigen(&t);
        let mut ritz = Vec::with_capacity(block);
        let mut ritz_images = Vec::with_capacity(block);
        let mut residuals = Vec::with_capacity(block);
        let mut corrections = Vec::new();
        let mut all_converged = true;
        for k in 0..block.min(m) {
            let mut x = vec![0.0; n];
            let mut hx = vec![0.0; n];
            for j in 0..m {
                let c = s[(j, k)];
                x.iter_mut().zip(&basis[j]).for_each(|(a, b)| *a += c * b);
                hx.iter_mut().zip(&images[j]).for_each(|(a, b)| *a += c * b);
            }
            let r: Vec<f64> = hx.iter().zip(&x).map(|(h, v)| h - theta[k] * v).collect();
            let rn = norm(&r);
            if k < nev {
                residuals.push(rn);
                if rn > tol * 0.5 {
                    all_converged = false;
                    let c: Vec<f64> = r
                        .iter()
                        .zip(&diag)
                        .map(|(ri, di)| {
                            let d = di - theta[k];
                            let d = if d.abs() < 1e-8 { 1e-8f64.copysign(d) } else { d };
                            ri / d
                        })
                        .collect();
                    corrections.push(c);
                }
            }
            ritz.push(x);
            ritz_images.push(hx);
        }
        if all_converged {
            let mut report = SpectralReport::default();
            for k in 0..nev {
                let v = &ritz[k];
                report.eigvec_residuals.push(residual_norm(op, v, theta[k]));
                report.energies.push(theta[k]);
                report.vectors.push(DVector::from_vec(v.clone()));
            }
            if report.max_residual() <= tol {
                return Ok(report);
            }
        }
        if basis.len() + corrections.len() > max_basis {
            basis = Vec::new();
            images = Vec::new();
            for (x, hx) in ritz.into_iter().zip(ritz_images) {
                // Ritz vectors are orthonormal up to rounding; re-orthogonalize
                // cheaply by reusing their images.
                let mut v = x;
                let mut hv = hx;
                for (b, hb) in basis.iter().zip(&images) {
                    let c = dot(b, &v);
                    v.iter_mut().zip(b).for_each(|(a, y)| *a -= c * y);
                    hv.iter_mut().zip(hb).for_each(|(a, y): (&mut f64, &f64)| *a -= c * y);
                }
                let nv = norm(&v);
                if nv > 1e-10 {
                    v.iter_mut().for_each(|a| *a /= nv);
                    hv.iter_mut().for_each(|a| *a /= nv);
                    basis.push(v);
                    images.push(hv);
                }
            }
        }
        let mut added = 0;
        for c in corrections {
            if push(c, &mut basis, &mut images) {
                added += 1;
            }
        }
        if added == 0 && !all_converged {
            // stagnation: inject the raw residual directions of the worst pairs
            let k = residuals
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k)
                .unwrap_or(0);
            let mut e = vec![0.0; n];
            e[order[(block + k) % n]] = 1.0;
            if !push(e, &mut basis, &mut images) {
                break;
            }
        }
    }
    Err(Error::NoConvergence(format!(
        "Davidson did not reach residual {tol:e} for {nev} eigenpairs"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_by_two() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let r = lowest_eigenpairs(&m, 2).unwrap();
        assert!((r.energies[0] + 1.0).abs() < 1e-15);
        assert!((r.energies[1] - 1.0).abs() < 1e-15);
        assert!(r.max_residual() < 1e-14);
    }

    #[test]
    fn diagonal_sorted() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0, 2.0, 0.5]));
        let r = lowest_eigenpairs(&m, 4).unwrap();
        assert_eq!(r.energies, vec![-1.0, 0.5, 2.0, 3.0]);
    }

    #[test]
    fn grouping() {
        let g = group_degenerate(&[1.0, 1.0 + 1e-12, 2.0, 2.0, 2.0 + 1e-11, 3.0], DEGENERACY_GAP);
        assert_eq!(g.iter().map(|x| x.1).collect::<Vec<_>>(), vec![2, 3, 1]);
    }

    #[test]
    fn hermitian_matches_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let s = &a + a.transpose();
        let c = s.map(|x| Complex64::new(x, 0.0));
        let v1 = symmetric_eigenvalues(&s);
        let v2 = hermitian_eigenvalues(&c);
        for (x, y) in v1.iter().zip(&v2) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    struct Tridiag(usize);

    impl LinearOperator for Tridiag {
        fn dim(&self) -> usize {
            self.0
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            let n = self.0;
            for i in 0..n {
                let mut v = (2.0 + i as f64 * 1e-3) * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i + 1 < n {
                    v -= x[i + 1];
                }
                y[i] = v;
            }
        }
        fn diagonal(&self) -> Vec<f64> {
            (0..self.0).map(|i| 2.0 + i as f64 * 1e-3).collect()
        }
    }

    #[test]
    fn davidson_matches_dense() {
        let op = Tridiag(300);
        let dense = symmetric_eigenvalues(&densify(&op));
        let r = davidson(&op, 4, 1e-9, 5000).unwrap();
        for k in 0..4 {
            assert!((r.energies[k] - dense[k]).abs() < 1e-9, "{k}: {} {}", r.energies[k], dense[k]);
        }
        assert!(r.max_residual() <= 1e-9);
    }
}
