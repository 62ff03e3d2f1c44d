//! Discretized d-bar operator in coefficient space and its basis of
//! rim-normalized fundamental solutions.
//!
//! Unknowns are the Chebyshev coefficients of every Fourier mode of `ψ₁`
//! (`a`, range [`FourierRange::Psi1`]) and `ψ₂` (`b`, range
//! [`FourierRange::Psi2`]). The operator is stored as `(Nr+1)×(Nr+1)` blocks
//! keyed by (row block, column block); a potential with few Fourier modes
//! yields a block-sparse matrix that splits into independent components,
//! each factorized densely.

use std::collections::BTreeMap;
use std::sync::Arc;

use log::{debug, info};
use ndarray::Array2;
use rayon::prelude::*;

use crate::bessel::RimCondition;
use crate::error::{DbarError, Result};
use crate::linalg::Lu;
use crate::potential::fingerprint;
use crate::scalar::{cone, czero, Real, C};
use crate::spectral::{
    cheb_product_matrix, mode_operator, FourierRange, Grid, ModeSign, PhysicalField, SpectralField,
};

/// Fourier offsets of `q` whose coefficients are all below this fraction of
/// `max |q̂|` are treated as absent when building coupling blocks.
pub const COUPLING_DROP_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    A,
    B,
}

impl Component {
    pub fn range(self) -> FourierRange {
        match self {
            Component::A => FourierRange::Psi1,
            Component::B => FourierRange::Psi2,
        }
    }
}

/// Bijection `(component, bin, degree) ↔ row/column` of the assembled system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexMap {
    pub n_r: usize,
    pub n_phi: usize,
}

impl IndexMap {
    pub fn dim(&self) -> usize {
        2 * (self.n_r + 1) * self.n_phi
    }

    pub fn block_count(&self) -> usize {
        2 * self.n_phi
    }

    pub fn block(&self, comp: Component, bin: usize) -> usize {
        match comp {
            Component::A => bin,
            Component::B => self.n_phi + bin,
        }
    }

    pub fn block_of_mode(&self, comp: Component, n: i64) -> Option<usize> {
        comp.range().bin_of_mode(n, self.n_phi).map(|b| self.block(comp, b))
    }

    /// `(component, bin)` of a block index.
    pub fn split(&self, block: usize) -> (Component, usize) {
        if block < self.n_phi {
            (Component::A, block)
        } else {
            (Component::B, block - self.n_phi)
        }
    }

    pub fn mode_of_block(&self, block: usize) -> i64 {
        let (c, bin) = self.split(block);
        c.range().mode_of_bin(bin, self.n_phi)
    }

    pub fn index(&self, comp: Component, bin: usize, m: usize) -> usize {
        self.block(comp, bin) * (self.n_r + 1) + m
    }

    /// Whether the block's equations carry a rim condition: `a`-modes
    /// `0..Nφ/2−1` and `b`-modes `−Nφ/2+1..0`.
    pub fn is_constrained(&self, block: usize) -> bool {
        let n = self.mode_of_block(block);
        let h = (self.n_phi / 2) as i64;
        match self.split(block).0 {
            Component::A => (0..h).contains(&n),
            Component::B => (-h + 1..=0).contains(&n),
        }
    }
}

/// Block-sparse `2(Nr+1)Nφ` square matrix of the discretized system, with
/// optionally the highest-degree row of some blocks replaced by the rim
/// functional `Σ_m c_m`.
#[derive(Clone, Debug)]
pub struct AssembledOperator<T: Real> {
    pub grid: Grid<T>,
    pub index_map: IndexMap,
    blocks: BTreeMap<(usize, usize), Arc<Array2<C<T>>>>,
    tau_rows: Vec<bool>,
}

impl<T: Real> AssembledOperator<T> {
    pub fn block(&self, row: usize, col: usize) -> Option<&Array2<C<T>>> {
        self.blocks.get(&(row, col)).map(|b| b.as_ref())
    }

    pub fn block_keys(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.blocks.keys().copied()
    }

    pub fn has_tau_row(&self, block: usize) -> bool {
        self.tau_rows[block]
    }

    /// True when every coupling block is absent or exactly zero.
    pub fn is_block_diagonal(&self) -> bool {
        self.blocks
            .iter()
            .filter(|((r, c), _)| r != c)
            .all(|(_, b)| b.iter().all(|z| *z == czero()))
    }

    /// Entry `(row block, m)` × `(col block, α)` with tau replacement applied.
    fn entry(&self, rb: usize, m: usize, cb: usize, alpha: usize) -> C<T> {
        if self.tau_rows[rb] && m == self.index_map.n_r {
            return if rb == cb { cone() } else { czero() };
        }
        self.blocks.get(&(rb, cb)).map_or(czero(), |b| b[[m, alpha]])
    }

    /// Dense copy; only sensible for small grids.
    pub fn to_dense(&self) -> Array2<C<T>> {
        let w = self.index_map.n_r + 1;
        let n = self.index_map.dim();
        let mut out = Array2::from_elem((n, n), czero());
        let nb = self.index_map.block_count();
        for rb in 0..nb {
            for cb in 0..nb {
                if !self.blocks.contains_key(&(rb, cb)) && !(self.tau_rows[rb] && rb == cb) {
                    continue;
                }
                for m in 0..w {
                    for a in 0..w {
                        out[[rb * w + m, cb * w + a]] = self.entry(rb, m, cb, a);
                    }
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[C<T>]) -> Vec<C<T>> {
        let w = self.index_map.n_r + 1;
        assert_eq!(x.len(), self.index_map.dim());
        let mut y = vec![czero::<T>(); x.len()];
        for (&(rb, cb), b) in &self.blocks {
            let xs = &x[cb * w..(cb + 1) * w];
            let rows = if self.tau_rows[rb] { w - 1 } else { w };
            for m in 0..rows {
                let mut acc = czero::<T>();
                for (a, &xv) in xs.iter().enumerate() {
                    acc += b[[m, a]] * xv;
                }
                y[rb * w + m] += acc;
            }
        }
        for (rb, &tau) in self.tau_rows.iter().enumerate() {
            if tau {
                y[rb * w + w - 1] = x[rb * w..(rb + 1) * w].iter().copied().sum();
            }
        }
        y
    }

    /// Copy with the highest-degree row of every constrained block replaced
    /// by the rim functional.
    pub fn with_tau_rows(&self) -> Self {
        let mut out = self.clone();
        for (b, flag) in out.tau_rows.iter_mut().enumerate() {
            *flag = self.index_map.is_constrained(b);
        }
        out
    }

    /// Right-hand side column `j` (1-based): a single 1 in the tau row of the
    /// block named by the rim condition of column `j`.
    pub fn rhs_column(&self, j: usize) -> Result<Vec<C<T>>> {
        let map = self.index_map;
        let block = rhs_block(&map, j)?;
        let mut rhs = vec![czero(); map.dim()];
        rhs[block * (map.n_r + 1) + map.n_r] = cone();
        Ok(rhs)
    }
}

fn rhs_block(map: &IndexMap, j: usize) -> Result<usize> {
    let block = match RimCondition::of_column(j, map.n_phi)? {
        RimCondition::A(n) => map.block_of_mode(Component::A, n),
        RimCondition::B(n) => map.block_of_mode(Component::B, n),
    };
    Ok(block.expect("rim modes lie inside their ranges"))
}

/// Tau-modified operator together with the right-hand side for column `j`.
pub fn apply_tau<T: Real>(op: &AssembledOperator<T>, j: usize) -> Result<(AssembledOperator<T>, Vec<C<T>>)> {
    let tau = op.with_tau_rows();
    let rhs = tau.rhs_column(j)?;
    Ok((tau, rhs))
}

fn complexify<T: Real>(m: &Array2<T>) -> Array2<C<T>> {
    m.mapv(|v| C::new(v, T::zero()))
}

/// Assembles the discretized operator: `D − nR` on `a`-blocks, `D + nR` on
/// `b`-blocks, and the couplings `−𝔽(q e^{−iφ} ψ₂)`, `−𝔽(q̄ e^{iφ} ψ₁)` as
/// coefficient-space convolutions (Chebyshev product rule, circular in the
/// Fourier bins).
pub fn assemble<T: Real>(q: &PhysicalField<T>, grid: &Grid<T>) -> Result<AssembledOperator<T>> {
    grid.check_shape(q.dim(), "potential")?;
    let (n_r, n_phi) = (grid.n_r(), grid.n_phi());
    let map = IndexMap { n_r, n_phi };
    let ops = grid.operators();
    let mut blocks = BTreeMap::new();

    for bin in 0..n_phi {
        let n = FourierRange::Psi1.mode_of_bin(bin, n_phi);
        let d = mode_operator(n, ModeSign::Minus, ops);
        blocks.insert((map.block(Component::A, bin), map.block(Component::A, bin)), Arc::new(complexify(&d.matrix)));
        let n = FourierRange::Psi2.mode_of_bin(bin, n_phi);
        let d = mode_operator(n, ModeSign::Plus, ops);
        blocks.insert((map.block(Component::B, bin), map.block(Component::B, bin)), Arc::new(complexify(&d.matrix)));
    }

    let q_hat = grid.forward(q, FourierRange::Psi1)?;
    let qc_hat = grid.forward(&q.conj(), FourierRange::Psi1)?;
    let scale = q_hat.max_abs();
    let drop = scale * T::lit(COUPLING_DROP_TOL);
    let offsets = |hat: &SpectralField<T>| -> Vec<(usize, Arc<Array2<C<T>>>)> {
        (0..n_phi)
            .filter_map(|s| {
                let col: Vec<C<T>> = hat.coeffs.column(s).to_vec();
                let big = col.iter().fold(T::zero(), |m, z| m.max(z.norm()));
                (scale > T::zero() && big > drop).then(|| (s, Arc::new(cheb_product_matrix(&col, n_r).mapv(|z| -z))))
            })
            .collect()
    };
    let q_offsets = offsets(&q_hat);
    let qc_offsets = offsets(&qc_hat);
    debug!("assemble: {} / {} significant Fourier offsets in q", q_offsets.len(), n_phi);

    for bin in 0..n_phi {
        // a_n row: (q e^{−iφ} ψ₂)_n = Σ_s q̂_s b_{n+1−s}
        for (s, m) in &q_offsets {
            let col = (bin + 1 + n_phi - s) % n_phi;
            blocks.insert((map.block(Component::A, bin), map.block(Component::B, col)), Arc::clone(m));
        }
        // b_n row: (q̄ e^{iφ} ψ₁)_n = Σ_s q̄̂_s a_{n−1−s}
        for (s, m) in &qc_offsets {
            let col = (bin + 2 * n_phi - 1 - s) % n_phi;
            blocks.insert((map.block(Component::B, bin), map.block(Component::A, col)), Arc::clone(m));
        }
    }
    Ok(AssembledOperator { grid: grid.clone(), index_map: map, blocks, tau_rows: vec![false; 2 * n_phi] })
}

/// Connected components of the block graph, each sorted ascending.
fn components<T: Real>(op: &AssembledOperator<T>) -> Vec<Vec<usize>> {
    let nb = op.index_map.block_count();
    let mut parent: Vec<usize> = (0..nb).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (r, c) in op.block_keys() {
        let (a, b) = (find(&mut parent, r), find(&mut parent, c));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for b in 0..nb {
        let root = find(&mut parent, b);
        groups.entry(root).or_default().push(b);
    }
    groups.into_values().collect()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BasisDiagnostics {
    /// 1-norm condition estimate of the tau-modified operator.
    pub condition: f64,
    pub components: usize,
    pub largest_component: usize,
    /// `max |Õx − S| / (‖Õ‖∞ ‖x‖∞)` over all columns.
    pub relative_residual: f64,
}

/// `Nφ` rim-normalized solution pairs `(ψ₁^{(j)}, ψ₂^{(j)})`, `j = 1..Nφ`
/// stored at index `j − 1`.
#[derive(Clone, Debug)]
pub struct FundamentalBasis<T: Real> {
    pub grid: Grid<T>,
    pub psi1: Vec<SpectralField<T>>,
    pub psi2: Vec<SpectralField<T>>,
    pub fingerprint: u64,
    pub diagnostics: BasisDiagnostics,
}

impl<T: Real> FundamentalBasis<T> {
    pub fn len(&self) -> usize {
        self.psi1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi1.is_empty()
    }

    /// Stacked coefficient vector of column `j` (1-based) in assembled order.
    pub fn column_vector(&self, j: usize) -> Vec<C<T>> {
        let map = IndexMap { n_r: self.grid.n_r(), n_phi: self.grid.n_phi() };
        let mut x = vec![czero(); map.dim()];
        for (comp, field) in [(Component::A, &self.psi1[j - 1]), (Component::B, &self.psi2[j - 1])] {
            for ((m, bin), z) in field.coeffs.indexed_iter() {
                x[map.index(comp, bin, m)] = *z;
            }
        }
        x
    }
}

/// Solves the tau-modified system for all `Nφ` rim conditions at once.
pub fn solve_basis<T: Real>(q: &PhysicalField<T>, grid: &Grid<T>) -> Result<FundamentalBasis<T>> {
    let op = assemble(q, grid)?.with_tau_rows();
    let map = op.index_map;
    let (n_r, n_phi) = (map.n_r, map.n_phi);
    let w = n_r + 1;
    let comps = components(&op);
    let mut owner = vec![0usize; map.block_count()];
    for (ci, comp) in comps.iter().enumerate() {
        for &b in comp {
            owner[b] = ci;
        }
    }
    let mut columns_of: Vec<Vec<usize>> = vec![Vec::new(); comps.len()];
    for j in 1..=n_phi {
        columns_of[owner[rhs_block(&map, j)?]].push(j);
    }

    struct Solved<T: Real> {
        norm1: T,
        inv_norm1: T,
        columns: Vec<(usize, Vec<C<T>>)>,
    }

    let solved: Vec<Solved<T>> = comps
        .par_iter()
        .zip(columns_of.par_iter())
        .map(|(comp, cols)| -> Result<Solved<T>> {
            let size = comp.len() * w;
            let mut dense = Array2::from_elem((size, size), czero::<T>());
            for (ri, &rb) in comp.iter().enumerate() {
                for (ci, &cb) in comp.iter().enumerate() {
                    for m in 0..w {
                        for a in 0..w {
                            dense[[ri * w + m, ci * w + a]] = op.entry(rb, m, cb, a);
                        }
                    }
                }
            }
            let lu = Lu::factor(dense.view()).map_err(|_| DbarError::Singular {
                context: format!("tau-modified d-bar operator (component of {} blocks)", comp.len()),
                condition: f64::INFINITY,
            })?;
            let inv_norm1 = lu.inverse_norm1_estimate();
            let mut columns = Vec::with_capacity(cols.len());
            for &j in cols {
                let target = rhs_block(&map, j)?;
                let pos = comp.iter().position(|&b| b == target).expect("owner");
                let mut rhs = vec![czero::<T>(); size];
                rhs[pos * w + n_r] = cone();
                lu.solve_in_place(&mut rhs);
                columns.push((j, rhs));
            }
            Ok(Solved { norm1: lu.norm1(), inv_norm1, columns })
        })
        .collect::<Result<_>>()?;

    let norm1 = solved.iter().fold(T::zero(), |m, s| m.max(s.norm1));
    let inv_norm1 = solved.iter().fold(T::zero(), |m, s| m.max(s.inv_norm1));
    let condition = (norm1 * inv_norm1).to_f64_lossy();
    info!(
        "fundamental basis Nr={n_r} Nφ={n_phi}: {} components (largest {} blocks), condition ≈ {condition:.3e}",
        comps.len(),
        comps.iter().map(Vec::len).max().unwrap_or(0)
    );
    if !condition.is_finite() || condition * T::epsilon().to_f64_lossy() >= 1.0 {
        return Err(DbarError::Singular { context: "tau-modified d-bar operator".into(), condition });
    }

    let mut psi1 = vec![SpectralField::zeros(n_r, n_phi, FourierRange::Psi1); n_phi];
    let mut psi2 = vec![SpectralField::zeros(n_r, n_phi, FourierRange::Psi2); n_phi];
    for (s, comp) in solved.iter().zip(&comps) {
        for (j, x) in &s.columns {
            for (pos, &b) in comp.iter().enumerate() {
                let (c, bin) = map.split(b);
                let target = match c {
                    Component::A => &mut psi1[j - 1],
                    Component::B => &mut psi2[j - 1],
                };
                for m in 0..w {
                    target.coeffs[[m, bin]] = x[pos * w + m];
                }
            }
        }
    }

    let mut basis = FundamentalBasis {
        grid: grid.clone(),
        psi1,
        psi2,
        fingerprint: fingerprint(q),
        diagnostics: BasisDiagnostics {
            condition,
            components: comps.len(),
            largest_component: comps.iter().map(Vec::len).max().unwrap_or(0),
            relative_residual: 0.0,
        },
    };
    basis.diagnostics.relative_residual = relative_residual(&op, &basis).to_f64_lossy();
    debug!("fundamental basis residual {:.3e}", basis.diagnostics.relative_residual);
    Ok(basis)
}

/// Infinity-norm of the tau-modified operator (max absolute row sum).
fn norm_inf<T: Real>(op: &AssembledOperator<T>) -> T {
    let w = op.index_map.n_r + 1;
    let mut rows = vec![T::zero(); op.index_map.dim()];
    for (&(rb, _), b) in &op.blocks {
        let limit = if op.tau_rows[rb] { w - 1 } else { w };
        for m in 0..limit {
            rows[rb * w + m] += b.row(m).iter().fold(T::zero(), |s, z| s + z.norm());
        }
    }
    for (rb, &tau) in op.tau_rows.iter().enumerate() {
        if tau {
            rows[rb * w + w - 1] = T::from_usize_lossy(w);
        }
    }
    rows.into_iter().fold(T::zero(), T::max)
}

/// `max_j |Õ x_j − S_j|∞ / (‖Õ‖∞ ‖x_j‖∞)`.
pub fn relative_residual<T: Real>(op: &AssembledOperator<T>, basis: &FundamentalBasis<T>) -> T {
    let norm = norm_inf(op);
    (1..=basis.len())
        .into_par_iter()
        .map(|j| {
            let x = basis.column_vector(j);
            let y = op.apply(&x);
            let s = op.rhs_column(j).expect("valid column");
            let r = y.iter().zip(&s).fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm()));
            let xn = x.iter().fold(T::zero(), |m, z| m.max(z.norm()));
            r / (norm * xn)
        })
        .reduce(T::zero, T::max)
}
