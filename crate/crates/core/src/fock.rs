//! Truncated second-quantized sectors: the impurity + N fermion space and
//! the angel space, with `H₀`, `V`, `W` as explicit sparse matrices and the
//! exact-diagonalization oracle.
//!
//! A physical state is `b*_p a*_{k₁} … a*_{k_N}|vac⟩` with `k₁ < … < k_N` in
//! the global momentum order; an angel state replaces `b*_p` by the angel
//! mode `m*_q`.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{coupling_constant, enumerate_ball, CutoffKind, CutoffScheme, ModelParams, Momentum, NeumaierSum};
use crate::linalg::{self, count_below, count_negative, symmetric_eigenvalues, LinearOperator, SpectralReport};
use crate::schur::{nudge_off_spectrum, BsModel};

/// Default cap on the number of states in an enumerated sector.
pub const DEFAULT_SECTOR_CAP: usize = 500_000;

const POLE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorKind {
    Physical,
    Angel,
}

impl SectorKind {
    pub fn name(self) -> &'static str {
        match self {
            SectorKind::Physical => "physical",
            SectorKind::Angel => "angel",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "physical" => Some(SectorKind::Physical),
            "angel" => Some(SectorKind::Angel),
            _ => None,
        }
    }
}

/// Extra particle (impurity or angel) plus a strictly ascending fermion set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SectorState {
    pub fermions: Vec<Momentum>,
    pub extra: Momentum,
}

impl SectorState {
    pub fn new(extra: Momentum, fermions: Vec<Momentum>) -> Self {
        SectorState { fermions, extra }
    }

    pub fn total_momentum(&self) -> Momentum {
        self.fermions.iter().fold(self.extra, |acc, &k| acc + k)
    }

    fn is_strictly_ordered(&self) -> bool {
        self.fermions.windows(2).all(|w| w[0] < w[1])
    }
}

/// The set without its entry at `pos`.
fn remove_fermion(set: &[Momentum], pos: usize) -> Vec<Momentum> {
    let mut out = Vec::with_capacity(set.len().saturating_sub(1));
    out.extend_from_slice(&set[..pos]);
    out.extend_from_slice(&set[pos + 1..]);
    out
}

/// Inserts `l`; `None` on Pauli blocking, otherwise the new set and the
/// number of momenta preceding `l`.
fn insert_fermion(set: &[Momentum], l: Momentum) -> Option<(Vec<Momentum>, usize)> {
    match set.binary_search(&l) {
        Ok(_) => None,
        Err(pos) => {
            let mut out = Vec::with_capacity(set.len() + 1);
            out.extend_from_slice(&set[..pos]);
            out.push(l);
            out.extend_from_slice(&set[pos..]);
            Some((out, pos))
        }
    }
}

fn parity(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// An enumerated sector. Immutable once built.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    pub n_fermions: usize,
    pub kind: SectorKind,
    pub momentum_block: Option<Momentum>,
    /// Every fermion momentum satisfies `|k| ≤ basis_radius`.
    pub basis_radius: f64,
    /// Bound on the extra particle's momentum.
    pub extra_radius: f64,
    pub kappa: f64,
    states: Vec<SectorState>,
    index: HashMap<SectorState, usize>,
}

impl SectorBasis {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[SectorState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &SectorState {
        &self.states[i]
    }

    pub fn index_of(&self, s: &SectorState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// A sector from an explicit state list (sorted and deduplicated here).
    pub fn from_states(
        kind: SectorKind,
        n_fermions: usize,
        kappa: f64,
        momentum_block: Option<Momentum>,
        mut states: Vec<SectorState>,
    ) -> Result<Self> {
        for s in &states {
            if s.fermions.len() != n_fermions || !s.is_strictly_ordered() {
                return Err(Error::InvalidParameter(format!(
                    "state {s:?} is not a strictly ordered set of {n_fermions} fermions"
                )));
            }
            if let Some(q) = momentum_block {
                if s.total_momentum() != q {
                    return Err(Error::InvalidParameter(format!(
                        "state {s:?} lies outside momentum block {q:?}"
                    )));
                }
            }
        }
        states.sort();
        states.dedup();
        let radius_of = |k: Momentum| k.ksq(kappa).sqrt();
        let basis_radius = states
            .iter()
            .flat_map(|s| s.fermions.iter().map(|&k| radius_of(k)))
            .fold(kappa, f64::max);
        let extra_radius = states.iter().map(|s| radius_of(s.extra)).fold(0.0, f64::max);
        Ok(Self::with_index(
            n_fermions,
            kind,
            momentum_block,
            basis_radius,
            extra_radius,
            kappa,
            states,
        ))
    }

    fn with_index(
        n_fermions: usize,
        kind: SectorKind,
        momentum_block: Option<Momentum>,
        basis_radius: f64,
        extra_radius: f64,
        kappa: f64,
        states: Vec<SectorState>,
    ) -> Self {
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        SectorBasis {
            n_fermions,
            kind,
            momentum_block,
            basis_radius,
            extra_radius,
            kappa,
            states,
            index,
        }
    }

    /// Kinetic energy of state `i`; the angel carries none.
    pub fn kinetic_energy(&self, i: usize, params: &ModelParams) -> f64 {
        let s = &self.states[i];
        let fermions: f64 = s.fermions.iter().map(|&k| params.ksq(k)).sum();
        match self.kind {
            SectorKind::Physical => fermions + params.ksq(s.extra) / params.impurity_mass,
            SectorKind::Angel => fermions,
        }
    }
}

/// All states with fermions and extra particle inside `basis_radius`.
pub fn build_sector(
    params: &ModelParams,
    n_fermions: usize,
    kind: SectorKind,
    basis_radius: f64,
    momentum_block: Option<Momentum>,
) -> Result<SectorBasis> {
    build_sector_with(
        params,
        n_fermions,
        kind,
        basis_radius,
        basis_radius,
        momentum_block,
        DEFAULT_SECTOR_CAP,
    )
}

/// Like [`build_sector`] with a separate radius for the extra particle and
/// an explicit dimension cap.
pub fn build_sector_with(
    params: &ModelParams,
    n_fermions: usize,
    kind: SectorKind,
    basis_radius: f64,
    extra_radius: f64,
    momentum_block: Option<Momentum>,
    cap: usize,
) -> Result<SectorBasis> {
    let kappa = params.kappa;
    if !(basis_radius >= kappa * (1.0 - 1e-12)) || !basis_radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "basis radius {basis_radius} is below the lattice spacing {kappa}"
        )));
    }
    if !(extra_radius >= 0.0) || !extra_radius.is_finite() {
        return Err(Error::InvalidParameter(format!("extra radius {extra_radius}")));
    }
    let modes = enumerate_ball(kappa, basis_radius);
    let extras = enumerate_ball(kappa, extra_radius);
    let extra_n2 = extras.iter().map(|k| k.norm2()).max().unwrap_or(-1);
    let mut states = Vec::new();
    let mut dimension = 0usize;
    for set in modes.iter().copied().combinations(n_fermions) {
        let total = set.iter().fold(Momentum::ZERO, |a, &k| a + k);
        match momentum_block {
            Some(q) => {
                let extra = q - total;
                if extra.norm2() <= extra_n2 {
                    dimension += 1;
                    if dimension <= cap {
                        states.push(SectorState::new(extra, set));
                    }
                }
            }
            None => {
                dimension += extras.len();
                if dimension <= cap {
                    states.extend(extras.iter().map(|&p| SectorState::new(p, set.clone())));
                }
            }
        }
    }
    if dimension > cap {
        return Err(Error::DimensionCap { dimension, cap });
    }
    states.sort();
    Ok(SectorBasis::with_index(
        n_fermions,
        kind,
        momentum_block,
        basis_radius,
        extra_radius,
        kappa,
        states,
    ))
}

/// The angel sector reached from `physical` by `V`: one fermion fewer, the
/// angel radius large enough that no target is lost.
pub fn angel_partner(params: &ModelParams, physical: &SectorBasis) -> Result<SectorBasis> {
    if physical.kind != SectorKind::Physical || physical.n_fermions == 0 {
        return Err(Error::InvalidParameter(
            "angel partner needs a physical sector with at least one fermion".into(),
        ));
    }
    build_sector_with(
        params,
        physical.n_fermions - 1,
        SectorKind::Angel,
        physical.basis_radius,
        physical.basis_radius + physical.extra_radius,
        physical.momentum_block,
        DEFAULT_SECTOR_CAP,
    )
}

/// Every physical state reachable from `angel` by `V*`, without truncation.
pub fn physical_partner(scheme: &CutoffScheme, angel: &SectorBasis) -> Result<SectorBasis> {
    let alphas = scheme.alpha_support();
    let mut states = Vec::new();
    for s in angel.states() {
        for &(l, _) in &alphas {
            if scheme.beta(s.extra - l) == 0.0 {
                continue;
            }
            if let Some((set, _)) = insert_fermion(&s.fermions, l) {
                states.push(SectorState::new(s.extra - l, set));
            }
        }
    }
    SectorBasis::from_states(
        SectorKind::Physical,
        angel.n_fermions + 1,
        angel.kappa,
        angel.momentum_block,
        states,
    )
}

/// Real sparse matrix in compressed-row form.
///
/// Cutoff functions are real, so every operator assembled here is real; the
/// triplet export still carries an imaginary column.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    pub dim_row: usize,
    pub dim_col: usize,
    /// Declared Hermitian (real symmetric).
    pub hermitian: bool,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Sums duplicate entries and drops exact zeros.
    pub fn from_triplets(
        dim_row: usize,
        dim_col: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        hermitian: bool,
    ) -> Result<Self> {
        if hermitian && dim_row != dim_col {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian operator must be square, got {dim_row}x{dim_col}"
            )));
        }
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= dim_row || c >= dim_col) {
            return Err(Error::DimensionMismatch(format!(
                "entry ({r}, {c}) outside {dim_row}x{dim_col}"
            )));
        }
        triplets.par_sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut cols = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if rows.last() == Some(&r) && cols.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                values.push(v);
            }
        }
        let mut row_ptr = vec![0usize; dim_row + 1];
        let mut kept = 0;
        for i in 0..values.len() {
            if values[i] != 0.0 {
                rows[kept] = rows[i];
                cols[kept] = cols[i];
                values[kept] = values[i];
                row_ptr[rows[i] + 1] += 1;
                kept += 1;
            }
        }
        rows.truncate(kept);
        cols.truncate(kept);
        values.truncate(kept);
        for i in 0..dim_row {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseOperator {
            dim_row,
            dim_col,
            hermitian,
            row_ptr,
            cols,
            values,
        })
    }

    pub fn diagonal_matrix(diag: &[f64]) -> Self {
        let triplets = diag.iter().enumerate().map(|(i, &d)| (i, i, d)).collect();
        Self::from_triplets(diag.len(), diag.len(), triplets, true).expect("square")
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim_row).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(i) => self.values[span.start + i],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(r, yr)| {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        });
    }

    /// `y = Aᵀ x`.
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate() {
            if xr != 0.0 {
                for (c, v) in self.row(r) {
                    y[c] += v * xr;
                }
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let t = self.entries().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.dim_col, self.dim_row, t, self.hermitian).expect("in range")
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `Σ cᵢ Aᵢ` over operators of equal shape.
    pub fn linear_combination(terms: &[(f64, &SparseOperator)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty linear combination".into()))?;
        let (rows, cols) = (first.dim_row, first.dim_col);
        let mut triplets = Vec::new();
        let mut hermitian = true;
        for &(s, op) in terms {
            if (op.dim_row, op.dim_col) != (rows, cols) {
                return Err(Error::DimensionMismatch(format!(
                    "{}x{} vs {rows}x{cols}",
                    op.dim_row, op.dim_col
                )));
            }
            hermitian &= op.hermitian;
            triplets.extend(op.entries().map(|(r, c, v)| (r, c, s * v)));
        }
        Self::from_triplets(rows, cols, triplets, hermitian)
    }

    /// `AᵀA`, assembled entrywise. Cost grows with the square of the row
    /// occupancy, so this is for small sectors.
    pub fn gram(&self) -> Self {
        let mut triplets = Vec::new();
        for r in 0..self.dim_row {
            let row: Vec<(usize, f64)> = self.row(r).collect();
            for &(i, vi) in &row {
                for &(j, vj) in &row {
                    triplets.push((i, j, vi * vj));
                }
            }
        }
        Self::from_triplets(self.dim_col, self.dim_col, triplets, true).expect("square")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim_row, self.dim_col);
        for (r, c, v) in self.entries() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn to_complex_dense(&self) -> DMatrix<Complex64> {
        self.to_dense().map(|v| Complex64::new(v, 0.0))
    }

    /// `max |A_ij − A_ji|`; infinite for non-square matrices.
    pub fn hermiticity_defect(&self) -> f64 {
        if self.dim_row != self.dim_col {
            return f64::INFINITY;
        }
        self.entries()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Writes the triplet text format:
    ///
    /// ```text
    /// # polaron sparse operator
    /// dims <rows> <cols>
    /// kind <label>
    /// block <x> <y>        (or: block none)
    /// nnz <count>
    /// <row> <col> <re> <im>
    /// ```
    ///
    /// Indices are zero-based, values printed with 17 significant digits.
    pub fn write_triplets(&self, w: &mut impl Write, kind: &str, block: Option<Momentum>) -> Result<()> {
        writeln!(w, "# polaron sparse operator")?;
        writeln!(w, "dims {} {}", self.dim_row, self.dim_col)?;
        writeln!(w, "kind {kind}")?;
        match block {
            Some(q) => writeln!(w, "block {} {}", q.x, q.y)?,
            None => writeln!(w, "block none")?,
        }
        writeln!(w, "nnz {}", self.nnz())?;
        for (r, c, v) in self.entries() {
            writeln!(w, "{r} {c} {v:.16e} 0")?;
        }
        Ok(())
    }

    /// Parses the format written by [`SparseOperator::write_triplets`].
    pub fn read_triplets(r: impl BufRead) -> Result<(Self, TripletHeader)> {
        let mut header = TripletHeader::default();
        let mut triplets = Vec::new();
        let bad = |line: usize, message: String| Error::Config { line, message };
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            let num = |i: usize| -> Result<usize> {
                fields
                    .get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(lineno, format!("expected an integer in `{t}`")))
            };
            match fields[0] {
                "dims" => header.dims = (num(1)?, num(2)?),
                "kind" => header.kind = fields.get(1).unwrap_or(&"").to_string(),
                "block" => {
                    header.block = if fields.get(1) == Some(&"none") {
                        None
                    } else {
                        let parse = |i: usize| -> Result<i64> {
                            fields
                                .get(i)
                                .and_then(|s| s.parse().ok())
                                .ok_or_else(|| bad(lineno, format!("bad block in `{t}`")))
                        };
                        Some(Momentum::new(parse(1)?, parse(2)?))
                    }
                }
                "nnz" => header.nnz = num(1)?,
                _ => {
                    let value = |i: usize| -> Result<f64> {
                        fields
                            .get(i)
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| bad(lineno, format!("bad entry `{t}`")))
                    };
                    if value(3)? != 0.0 {
                        return Err(bad(lineno, "complex entries are not supported".into()));
                    }
                    triplets.push((num(0)?, num(1)?, value(2)?));
                }
            }
        }
        if triplets.len() != header.nnz {
            return Err(bad(0, format!("header says {} entries, found {}", header.nnz, triplets.len())));
        }
        let (rows, cols) = header.dims;
        let hermitian = rows == cols;
        let mut op = Self::from_triplets(rows, cols, triplets, false)?;
        op.hermitian = hermitian && op.hermiticity_defect() == 0.0;
        Ok((op, header))
    }
}

/// Header of the triplet text format.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TripletHeader {
    pub dims: (usize, usize),
    pub kind: String,
    pub block: Option<Momentum>,
    pub nnz: usize,
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.dim_row
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.dim_row.min(self.dim_col)).map(|i| self.get(i, i)).collect()
    }
}

/// Diagonal `H₀` on a sector.
pub fn assemble_h0(basis: &SectorBasis, params: &ModelParams) -> SparseOperator {
    let diag: Vec<f64> = (0..basis.dim()).map(|i| basis.kinetic_energy(i, params)).collect();
    SparseOperator::diagonal_matrix(&diag)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum MissingTarget {
    Fail,
    Skip,
}

fn v_triplets(
    scheme: &CutoffScheme,
    physical: &SectorBasis,
    angel: &SectorBasis,
    policy: MissingTarget,
) -> Result<Vec<(usize, usize, f64)>> {
    if physical.kind != SectorKind::Physical || angel.kind != SectorKind::Angel {
        return Err(Error::InvalidParameter("V maps a physical sector to an angel sector".into()));
    }
    if angel.n_fermions + 1 != physical.n_fermions {
        return Err(Error::DimensionMismatch(format!(
            "angel sector has {} fermions, physical {}",
            angel.n_fermions, physical.n_fermions
        )));
    }
    if physical.momentum_block != angel.momentum_block {
        return Err(Error::DimensionMismatch("momentum blocks differ".into()));
    }
    let per_state: Vec<Result<Vec<(usize, usize, f64)>>> = (0..physical.dim())
        .into_par_iter()
        .map(|j| {
            let s = physical.state(j);
            let b = scheme.beta(s.extra);
            let mut out = Vec::new();
            if b == 0.0 {
                return Ok(out);
            }
            for (pos, &k) in s.fermions.iter().enumerate() {
                let a = scheme.alpha(k);
                if a == 0.0 {
                    continue;
                }
                let target = SectorState::new(k + s.extra, remove_fermion(&s.fermions, pos));
                match angel.index_of(&target) {
                    Some(i) => out.push((i, j, parity(pos) * a * b)),
                    None if policy == MissingTarget::Skip => {}
                    None => {
                        return Err(Error::DimensionMismatch(format!(
                            "angel sector lacks the image {target:?} of physical state {s:?}"
                        )))
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut triplets = Vec::new();
    for part in per_state {
        triplets.extend(part?);
    }
    Ok(triplets)
}

/// `V = Σ α(k)β(q−k) m*_q b_{q−k} a_k` from `physical` into `angel`
/// (rows index the angel sector). Every image must lie in `angel`.
pub fn assemble_v(scheme: &CutoffScheme, physical: &SectorBasis, angel: &SectorBasis) -> Result<SparseOperator> {
    let t = v_triplets(scheme, physical, angel, MissingTarget::Fail)?;
    SparseOperator::from_triplets(angel.dim(), physical.dim(), t, false)
}

/// `P_angel V`: images outside `angel` are dropped.
pub fn assemble_v_compressed(
    scheme: &CutoffScheme,
    physical: &SectorBasis,
    angel: &SectorBasis,
) -> Result<SparseOperator> {
    let t = v_triplets(scheme, physical, angel, MissingTarget::Skip)?;
    SparseOperator::from_triplets(angel.dim(), physical.dim(), t, false)
}

/// `W = Σ α(k)β(q−k)α(l)β(q−l) a*_l b*_{q−l} b_{q−k} a_k` compressed to
/// `basis`, assembled directly from its definition.
pub fn assemble_w(scheme: &CutoffScheme, basis: &SectorBasis) -> Result<SparseOperator> {
    if basis.kind != SectorKind::Physical {
        return Err(Error::InvalidParameter("W acts on physical sectors".into()));
    }
    let alphas = scheme.alpha_support();
    let per_state: Vec<Vec<(usize, usize, f64)>> = (0..basis.dim())
        .into_par_iter()
        .map(|j| {
            let s = basis.state(j);
            let b = scheme.beta(s.extra);
            let mut out = Vec::new();
            if b == 0.0 {
                return out;
            }
            for (pos, &k) in s.fermions.iter().enumerate() {
                let a = scheme.alpha(k);
                if a == 0.0 {
                    continue;
                }
                let q = k + s.extra;
                let rest = remove_fermion(&s.fermions, pos);
                for &(l, al) in &alphas {
                    let bl = scheme.beta(q - l);
                    if bl == 0.0 {
                        continue;
                    }
                    let Some((set, ins)) = insert_fermion(&rest, l) else {
                        continue;
                    };
                    if let Some(i) = basis.index_of(&SectorState::new(q - l, set)) {
                        out.push((i, j, parity(pos + ins) * a * b * al * bl));
                    }
                }
            }
            out
        })
        .collect();
    let triplets = per_state.into_iter().flatten().collect();
    SparseOperator::from_triplets(basis.dim(), basis.dim(), triplets, true)
}

/// `H₀ − g W` assembled explicitly. For large sectors prefer
/// [`FactoredHamiltonian`].
pub fn regularized_hamiltonian(
    scheme: &CutoffScheme,
    params: &ModelParams,
    basis: &SectorBasis,
) -> Result<SparseOperator> {
    let g = coupling_constant(scheme, params)?;
    let h0 = assemble_h0(basis, params);
    let w = assemble_w(scheme, basis)?;
    SparseOperator::linear_combination(&[(1.0, &h0), (-g, &w)])
}

/// `H₀ − g VᵀV` applied without forming `W`.
#[derive(Clone, Debug)]
pub struct FactoredHamiltonian {
    pub h0: Vec<f64>,
    pub v: SparseOperator,
    pub g: f64,
}

impl FactoredHamiltonian {
    pub fn new(scheme: &CutoffScheme, params: &ModelParams, physical: &SectorBasis) -> Result<Self> {
        let angel = angel_partner(params, physical)?;
        let v = assemble_v(scheme, physical, &angel)?;
        let h0 = (0..physical.dim()).map(|i| physical.kinetic_energy(i, params)).collect();
        Ok(FactoredHamiltonian {
            h0,
            v,
            g: coupling_constant(scheme, params)?,
        })
    }
}

impl LinearOperator for FactoredHamiltonian {
    fn dim(&self) -> usize {
        self.h0.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut vx = vec![0.0; self.v.dim_row];
        self.v.matvec(x, &mut vx);
        self.v.matvec_transpose(&vx, y);
        for ((yi, &hi), &xi) in y.iter_mut().zip(&self.h0).zip(x) {
            *yi = hi * xi - self.g * *yi;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = self.h0.clone();
        for (_, c, v) in self.v.entries() {
            d[c] -= self.g * v * v;
        }
        d
    }
}

/// Lowest eigenpairs of a declared-Hermitian sparse operator.
pub fn lowest_eigenpairs(op: &SparseOperator, count: usize) -> Result<SpectralReport> {
    let defect = op.hermiticity_defect();
    if !op.hermitian || defect > 1e-12 * op.max_abs().max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    linalg::lowest_eigenpairs(op, count)
}

fn resolvent_entry(h: f64, z: f64) -> Result<f64> {
    let d = h - z;
    if d.abs() <= POLE_TOL * z.abs().max(1.0) {
        return Err(Error::ResolventPole(format!("{z}")));
    }
    Ok(1.0 / d)
}

/// `φ(z) = g⁻¹ − A R₀(z) Aᵀ` for a real `A` (rows: auxiliary space).
fn phi_from_factor(a: &SparseOperator, h0: &[f64], g: f64, z: f64) -> Result<DMatrix<f64>> {
    let n = a.dim_row;
    let at = a.transpose();
    let mut phi = DMatrix::from_diagonal_element(n, n, 1.0 / g);
    for (j, &h) in h0.iter().enumerate() {
        let col: Vec<(usize, f64)> = at.row(j).collect();
        if col.is_empty() {
            continue;
        }
        let r = resolvent_entry(h, z)?;
        for &(i1, v1) in &col {
            for &(i2, v2) in &col {
                phi[(i1, i2)] -= v1 * v2 * r;
            }
        }
    }
    Ok(phi)
}

/// `φ_n(z) = g⁻¹ − V (H₀ − z)⁻¹ V*` on `angel`, built from `V` with the full
/// set of intermediate physical states.
pub fn phi_n_matrix(scheme: &CutoffScheme, params: &ModelParams, z: f64, angel: &SectorBasis) -> Result<DMatrix<f64>> {
    if angel.kind != SectorKind::Angel {
        return Err(Error::InvalidParameter("phi acts on angel sectors".into()));
    }
    let g = coupling_constant(scheme, params)?;
    let physical = physical_partner(scheme, angel)?;
    let v = assemble_v_compressed(scheme, &physical, angel)?;
    let h0: Vec<f64> = (0..physical.dim()).map(|i| physical.kinetic_energy(i, params)).collect();
    phi_from_factor(&v, &h0, g, z)
}

/// The normal-ordered split `φ_n = φ⁰ + φᴵ`: a diagonal part and an
/// exchange part.
#[derive(Clone, Debug)]
pub struct NormalOrderedPhi {
    pub diagonal: Vec<f64>,
    pub interaction: SparseOperator,
}

impl NormalOrderedPhi {
    pub fn dense(&self) -> DMatrix<f64> {
        let mut m = self.interaction.to_dense();
        for (i, &d) in self.diagonal.iter().enumerate() {
            m[(i, i)] += d;
        }
        m
    }
}

/// Independent assembly of `φ_n(z)` in normal-ordered form.
pub fn phi_n_normal_ordered(
    scheme: &CutoffScheme,
    params: &ModelParams,
    z: f64,
    angel: &SectorBasis,
) -> Result<NormalOrderedPhi> {
    normal_ordered(scheme, params, z, angel, false)
}

/// The normal-ordered form with the Pauli-forbidden diagonal terms and the
/// exchange terms cancelling them both removed. Same operator, but free of
/// spurious poles below `min H₀`.
pub fn phi_n_pauli_reduced(
    scheme: &CutoffScheme,
    params: &ModelParams,
    z: f64,
    angel: &SectorBasis,
) -> Result<NormalOrderedPhi> {
    normal_ordered(scheme, params, z, angel, true)
}

fn normal_ordered(
    scheme: &CutoffScheme,
    params: &ModelParams,
    z: f64,
    angel: &SectorBasis,
    pauli_reduced: bool,
) -> Result<NormalOrderedPhi> {
    if angel.kind != SectorKind::Angel {
        return Err(Error::InvalidParameter("phi acts on angel sectors".into()));
    }
    let g = coupling_constant(scheme, params)?;
    let alphas = scheme.alpha_support();
    let inv_m = 1.0 / params.impurity_mass;
    type Row = (f64, Vec<(usize, usize, f64)>);
    let rows: Vec<Result<Row>> = (0..angel.dim())
        .into_par_iter()
        .map(|i| {
            let s = angel.state(i);
            let q = s.extra;
            let p2: f64 = s.fermions.iter().map(|&k| params.ksq(k)).sum();
            let mut diag = NeumaierSum::default();
            diag.add(1.0 / g);
            for &(k, a) in &alphas {
                let b = scheme.beta(q - k);
                if b != 0.0 && !(pauli_reduced && s.fermions.binary_search(&k).is_ok()) {
                    let r = resolvent_entry(p2 + params.ksq(q - k) * inv_m + params.ksq(k), z)?;
                    diag.add(-a * a * b * b * r);
                }
            }
            let mut off = Vec::new();
            for (j, &pj) in s.fermions.iter().enumerate() {
                let apj = scheme.alpha(pj);
                if apj == 0.0 {
                    continue;
                }
                let rest = remove_fermion(&s.fermions, j);
                for &(l, al) in &alphas {
                    let b = scheme.beta(q - l);
                    if b == 0.0 || (pauli_reduced && l == pj) {
                        continue;
                    }
                    let Some((set, pos)) = insert_fermion(&rest, l) else {
                        continue;
                    };
                    let target = SectorState::new(q + pj - l, set);
                    if let Some(t) = angel.index_of(&target) {
                        let r = resolvent_entry(p2 + params.ksq(q - l) * inv_m + params.ksq(l), z)?;
                        off.push((t, i, parity(j + pos) * apj * al * b * b * r));
                    }
                }
            }
            Ok((diag.value(), off))
        })
        .collect();
    let mut diagonal = Vec::with_capacity(angel.dim());
    let mut triplets = Vec::new();
    for row in rows {
        let (d, off) = row?;
        diagonal.push(d);
        triplets.extend(off);
    }
    Ok(NormalOrderedPhi {
        diagonal,
        interaction: SparseOperator::from_triplets(angel.dim(), angel.dim(), triplets, true)?,
    })
}

/// The abstract model `(H₀, A = V, g)` of a physical sector, for the dense
/// checks of the operator layer.
pub fn bs_model_from_sector(scheme: &CutoffScheme, params: &ModelParams, physical: &SectorBasis) -> Result<BsModel> {
    let angel = angel_partner(params, physical)?;
    let v = assemble_v(scheme, physical, &angel)?;
    let h0 = (0..physical.dim()).map(|i| physical.kinetic_energy(i, params)).collect();
    BsModel::new(h0, v.to_complex_dense(), coupling_constant(scheme, params)?)
}

/// One energy of a counting comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub energy: f64,
    pub count_h: usize,
    pub count_phi: usize,
}

impl CountRow {
    pub fn matches(&self) -> bool {
        self.count_h == self.count_phi
    }
}

/// Eigenvalues of `op` up to and slightly beyond `e_max`, growing the number
/// of requested pairs until the window is covered.
pub fn eigenvalues_below(op: &dyn LinearOperator, e_max: f64) -> Result<Vec<f64>> {
    let n = op.dim();
    if n <= linalg::DENSE_CAP {
        return Ok(symmetric_eigenvalues(&linalg::densify(op)));
    }
    let mut nev = 8.min(n);
    loop {
        let report = linalg::lowest_eigenpairs(op, nev)?;
        let top = *report.energies.last().expect("nonempty");
        if top > e_max || nev == n {
            return Ok(report.energies);
        }
        nev = (2 * nev).min(n);
        if nev > linalg::DENSE_CAP {
            return Ok(symmetric_eigenvalues(&linalg::densify(op)));
        }
    }
}

/// Counting principle on an assembled sector: `#{eig H < E}` against the
/// negative eigenvalues of `φ(E) = g⁻¹ − V R₀(E) V*` built on the same
/// truncated space. Energies must lie below `min H₀`.
pub fn fock_count_check(
    scheme: &CutoffScheme,
    params: &ModelParams,
    physical: &SectorBasis,
    energies: &[f64],
) -> Result<Vec<CountRow>> {
    let h = FactoredHamiltonian::new(scheme, params, physical)?;
    let bound = h.h0.iter().copied().fold(f64::INFINITY, f64::min);
    let e_max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if e_max >= bound {
        return Err(Error::OutsideVariationalWindow { energy: e_max, bound });
    }
    let spectrum = eigenvalues_below(&h, e_max)?;
    energies
        .iter()
        .map(|&e| {
            let e = nudge_off_spectrum(&spectrum, e);
            let phi = phi_from_factor(&h.v, &h.h0, h.g, e)?;
            Ok(CountRow {
                energy: e,
                count_h: count_below(&spectrum, e),
                count_phi: count_negative(&symmetric_eigenvalues(&phi)),
            })
        })
        .collect()
}

/// Spectral norm of a symmetric sparse operator.
pub fn symmetric_norm(op: &SparseOperator) -> Result<f64> {
    if op.nnz() == 0 {
        return Ok(0.0);
    }
    let low = linalg::lowest_eigenpairs(op, 1)?.energies[0];
    let high = -linalg::lowest_eigenpairs(&op.scaled(-1.0), 1)?.energies[0];
    Ok(low.abs().max(high.abs()))
}

/// `‖φᴵ_n(τ)‖ / (N − 1)` on an angel sector with `N − 1 ≥ 1` fermions.
pub fn phi_interaction_norm(scheme: &CutoffScheme, params: &ModelParams, tau: f64, angel: &SectorBasis) -> Result<f64> {
    if angel.n_fermions == 0 {
        return Ok(0.0);
    }
    let phi = phi_n_normal_ordered(scheme, params, tau, angel)?;
    Ok(symmetric_norm(&phi.interaction)? / angel.n_fermions as f64)
}

/// Lowest eigenvalue of a `φ` evaluated at `e`, dense or iterative by size.
pub fn phi_lowest_eigenvalue(phi: &DMatrix<f64>) -> Result<f64> {
    if phi.nrows() <= 64 {
        return Ok(symmetric_eigenvalues(phi)[0]);
    }
    let scale = phi.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok(linalg::davidson(phi, 1, 1e-11 * scale, 2000)?.energies[0])
}

/// Ground energy from a Birman–Schwinger family: the root of
/// `E ↦ μ₁(φ(E))` in `[e_lo, e_hi]`, where `μ₁` decreases in `E`.
pub fn phi_ground_energy(
    phi_at: impl Fn(f64) -> Result<DMatrix<f64>>,
    e_lo: f64,
    e_hi: f64,
    xtol: f64,
) -> Result<f64> {
    let f = |e: f64| phi_lowest_eigenvalue(&phi_at(e)?);
    let (f_lo, f_hi) = (f(e_lo)?, f(e_hi)?);
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::BracketFailure(format!(
            "mu1(phi) = {f_lo:e} at {e_lo}, {f_hi:e} at {e_hi}"
        )));
    }
    crate::roots::brent(e_lo, e_hi, xtol, f)
}

/// Matrix elements of `φ_n(z)` between two-fermion, zero-momentum angel
/// states `m*_{−p} a*_p`.
struct TwoFermionKernel<'a> {
    scheme: &'a CutoffScheme,
    params: &'a ModelParams,
    alphas: Vec<(Momentum, f64)>,
    inv_g: f64,
    z: f64,
}

impl<'a> TwoFermionKernel<'a> {
    fn new(scheme: &'a CutoffScheme, params: &'a ModelParams, z: f64) -> Result<Self> {
        Ok(TwoFermionKernel {
            scheme,
            params,
            alphas: scheme.alpha_support(),
            inv_g: 1.0 / coupling_constant(scheme, params)?,
            z,
        })
    }

    fn energy(&self, p: Momentum, l: Momentum) -> f64 {
        let ps = self.params;
        ps.ksq(p) + ps.ksq(l) + ps.ksq(p + l) / ps.impurity_mass
    }

    fn diagonal(&self, p: Momentum) -> Result<f64> {
        let mut d = NeumaierSum::default();
        d.add(self.inv_g);
        for &(k, a) in &self.alphas {
            let b = self.scheme.beta(-p - k);
            if k != p && b != 0.0 {
                d.add(-a * a * b * b * resolvent_entry(self.energy(p, k), self.z)?);
            }
        }
        Ok(d.value())
    }

    /// Exchange part between distinct `p` and `l`, given `α(p)`, `α(l)`.
    fn exchange(&self, p: Momentum, ap: f64, l: Momentum, al: f64) -> Result<f64> {
        let b = self.scheme.beta(-p - l);
        if ap == 0.0 || al == 0.0 || b == 0.0 {
            return Ok(0.0);
        }
        Ok(ap * al * b * b * resolvent_entry(self.energy(p, l), self.z)?)
    }
}

/// `φ_n(z)` on the two-fermion, zero-momentum angel states `m*_{−p} a*_p`,
/// indexed by `p ∈ momenta`, filled densely without a state index.
pub fn two_fermion_phi(
    scheme: &CutoffScheme,
    params: &ModelParams,
    z: f64,
    momenta: &[Momentum],
) -> Result<DMatrix<f64>> {
    let kernel = TwoFermionKernel::new(scheme, params, z)?;
    let n = momenta.len();
    let alpha_of: Vec<f64> = momenta.iter().map(|&p| scheme.alpha(p)).collect();
    let columns: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|c| {
            let p = momenta[c];
            let mut col = vec![0.0; n];
            col[c] = kernel.diagonal(p)?;
            for (r, &l) in momenta.iter().enumerate() {
                if r != c {
                    col[r] = kernel.exchange(p, alpha_of[c], l, alpha_of[r])?;
                }
            }
            Ok(col)
        })
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for (c, col) in columns.into_iter().enumerate() {
        m.set_column(c, &nalgebra::DVector::from_vec(col?));
    }
    Ok(m)
}

/// Point-group orbits of a lattice ball, each with its members.
pub fn ball_orbits(kappa: f64, radius: f64) -> Vec<Vec<Momentum>> {
    let mut map: std::collections::BTreeMap<(i64, i64, i64), Vec<Momentum>> = Default::default();
    for p in enumerate_ball(kappa, radius) {
        let key = p.orbit_key();
        map.entry((key.norm2(), key.x, key.y)).or_default().push(p);
    }
    map.into_values().collect()
}

/// `φ_n(z)` restricted to point-group invariant functions of `p`, in the
/// orthonormal basis of normalized orbit sums. Needs a radial scheme.
pub fn two_fermion_phi_invariant(
    scheme: &CutoffScheme,
    params: &ModelParams,
    z: f64,
    orbits: &[Vec<Momentum>],
) -> Result<DMatrix<f64>> {
    if scheme.kind().is_none() {
        return Err(Error::InvalidParameter(
            "symmetry reduction needs a built-in radial scheme".into(),
        ));
    }
    let kernel = TwoFermionKernel::new(scheme, params, z)?;
    let n = orbits.len();
    let alpha_of: Vec<f64> = orbits.iter().map(|o| scheme.alpha(o[0])).collect();
    let columns: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|c| {
            let p = orbits[c][0];
            let mut col = vec![0.0; n];
            for (r, orbit) in orbits.iter().enumerate() {
                let mut acc = 0.0;
                for &l in orbit {
                    acc += if l == p {
                        kernel.diagonal(p)?
                    } else {
                        kernel.exchange(p, alpha_of[c], l, alpha_of[r])?
                    };
                }
                col[r] = acc * (orbits[c].len() as f64 / orbit.len() as f64).sqrt();
            }
            Ok(col)
        })
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for (c, col) in columns.into_iter().enumerate() {
        m.set_column(c, &nalgebra::DVector::from_vec(col?));
    }
    Ok(m)
}

/// Controls for [`two_fermion_ground_energy`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoFermionOptions {
    /// The angel fermion runs over `|p| ≤ angel_radius`; anything below the
    /// cutoff support radius drops weakly coupled states.
    pub angel_radius: f64,
    /// Restrict to point-group invariant states.
    pub invariant_only: bool,
    pub xtol: f64,
}

/// Angel radius, in units of the cutoff radius, used for gaussian ladders.
/// Amplitudes beyond it change the ground energy by less than 1e−11.
pub const GAUSSIAN_ANGEL_FACTOR: f64 = 1.5;

impl TwoFermionOptions {
    pub fn exact(scheme: &CutoffScheme) -> Self {
        TwoFermionOptions {
            angel_radius: scheme.support_radius(),
            invariant_only: false,
            xtol: 1e-12,
        }
    }

    /// Settings for long cutoff ladders: the point-group invariant block and,
    /// for gaussian profiles, a truncated angel space.
    pub fn ladder(scheme: &CutoffScheme) -> Self {
        let angel_radius = match scheme.kind() {
            Some(CutoffKind::Gaussian) => GAUSSIAN_ANGEL_FACTOR * scheme.radius(),
            _ => scheme.support_radius(),
        };
        TwoFermionOptions {
            angel_radius,
            invariant_only: scheme.kind().is_some(),
            xtol: 1e-12,
        }
    }
}

/// Ground energy of the two-fermion zero-momentum sector at finite cutoff
/// with an unrestricted physical space, from the angel-space family `φ_n`.
pub fn two_fermion_ground_energy(
    scheme: &CutoffScheme,
    params: &ModelParams,
    options: &TwoFermionOptions,
) -> Result<f64> {
    let radius = options.angel_radius.max(params.kappa);
    let phi_at: Box<dyn Fn(f64) -> Result<DMatrix<f64>>> = if options.invariant_only {
        let orbits = ball_orbits(params.kappa, radius);
        Box::new(move |e| two_fermion_phi_invariant(scheme, params, e, &orbits))
    } else {
        let momenta = enumerate_ball(params.kappa, radius);
        Box::new(move |e| two_fermion_phi(scheme, params, e, &momenta))
    };
    let kappa2 = params.kappa * params.kappa;
    let mut lo = 2.0 * params.binding_energy - kappa2;
    let mut tries = 0;
    while phi_lowest_eigenvalue(&phi_at(lo)?)? <= 0.0 {
        lo *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::BracketFailure("no lower bracket for the ground energy".into()));
        }
    }
    // Bottom of the unrestricted two-fermion spectrum: one fermion at rest,
    // the other and the impurity at the smallest nonzero momentum.
    let hi = kappa2 * params.mass_factor() * (1.0 - 1e-6);
    phi_ground_energy(phi_at, lo, hi, options.xtol)
}

/// Two-body check on the `N = 1`, `Q = 0` block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoBodyReport {
    pub scheme: String,
    pub cutoff_radius: f64,
    pub dimension: usize,
    pub ground: f64,
    pub ground_error: f64,
    /// `‖Hu − E_B u‖` for the unit-normalized predicted eigenvector.
    pub predicted_residual: f64,
    /// `1 − |⟨v, u⟩|` between computed and predicted eigenvectors.
    pub misalignment: f64,
    pub solver_residual: f64,
}

impl fmt::Display for TwoBodyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} R={} dim={} E0={:.15e} |E0-E_B|={:.3e} residual={:.3e}",
            self.scheme, self.cutoff_radius, self.dimension, self.ground, self.ground_error, self.predicted_residual
        )
    }
}

pub fn two_body_check(scheme: &CutoffScheme, params: &ModelParams) -> Result<TwoBodyReport> {
    let basis = build_sector(
        params,
        1,
        SectorKind::Physical,
        scheme.support_radius().max(params.kappa),
        Some(Momentum::ZERO),
    )?;
    let h = FactoredHamiltonian::new(scheme, params, &basis)?;
    let report = linalg::lowest_eigenpairs(&h, 1)?;
    let ground = report.energies[0];
    let c = params.mass_factor();
    let eb = params.binding_energy;
    let mut u: Vec<f64> = basis
        .states()
        .iter()
        .map(|s| {
            let k = s.fermions[0];
            scheme.alpha(k) * scheme.beta(-k) / (c * params.ksq(k) - eb)
        })
        .collect();
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    u.iter_mut().for_each(|x| *x /= norm);
    let mut hu = vec![0.0; u.len()];
    h.apply(&u, &mut hu);
    let predicted_residual = hu.iter().zip(&u).map(|(a, b)| (a - eb * b).powi(2)).sum::<f64>().sqrt();
    let overlap: f64 = report.vectors[0].iter().zip(&u).map(|(a, b)| a * b).sum();
    Ok(TwoBodyReport {
        scheme: scheme.kind().map_or("table", |k| k.name()).to_string(),
        cutoff_radius: scheme.radius(),
        dimension: basis.dim(),
        ground,
        ground_error: (ground - eb).abs(),
        predicted_residual,
        misalignment: 1.0 - overlap.abs(),
        solver_residual: report.max_residual(),
    })
}

/// One row of the divergence-trend diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NotinRow {
    pub cutoff_radius: f64,
    pub epsilon: f64,
    pub value: f64,
}

/// `⟨w, V_n R₀(z)(1 + εH₀)⁻¹ V_n* w⟩` for `w = m*_0|vac⟩` across a cutoff
/// ladder and a decreasing `ε` sequence. Growth without bound along the
/// diagonal of the table is the finite shadow of the form-domain statement.
pub fn notin_divergence_trend(
    schemes: &[CutoffScheme],
    params: &ModelParams,
    epsilons: &[f64],
    z: f64,
) -> Result<Vec<NotinRow>> {
    let inv_m = 1.0 / params.impurity_mass;
    let mut rows = Vec::new();
    for scheme in schemes {
        for &eps in epsilons {
            let mut sum = NeumaierSum::default();
            for (k, a) in scheme.alpha_support() {
                let b = scheme.beta(-k);
                let h = params.ksq(k) * (1.0 + inv_m);
                sum.add(a * a * b * b * resolvent_entry(h, z)? / (1.0 + eps * h));
            }
            rows.push(NotinRow {
                cutoff_radius: scheme.radius(),
                epsilon: eps,
                value: sum.value(),
            });
        }
    }
    Ok(rows)
}
