//! CGO solutions from the fundamental basis: the asymptotic conditions at a
//! given `k` become an `Nφ × Nφ` system for the weights `γ_j`.

use log::debug;
use ndarray::Array2;

use crate::error::{DbarError, Result};
use crate::fundamental::FundamentalBasis;
use crate::linalg::Lu;
use crate::scalar::{cone, czero, Real, C};
use crate::spectral::{FourierRange, Grid, PhysicalField, SpectralField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gauge {
    /// `(ψ₁, ψ₂)`
    Psi,
    /// `(Φ₁, Φ₂) = (e^{−kz}ψ₁, e^{−k̄z̄}ψ₂)`
    Phi,
}

impl Gauge {
    pub fn name(self) -> &'static str {
        match self {
            Gauge::Psi => "psi",
            Gauge::Phi => "phi",
        }
    }
}

/// Asymptotic conditions evaluated on every basis column.
///
/// Rows `0..Nφ/2` are `c_n`, `n = 0..Nφ/2−1`; rows `Nφ/2 + t` are
/// `d_{−t}`. Column `j−1` belongs to basis column `j`.
#[derive(Clone, Debug)]
pub struct CgoConditionMatrix<T: Real> {
    pub matrix: Array2<C<T>>,
    pub rhs: Vec<C<T>>,
    pub d1_row: Vec<C<T>>,
    pub k: C<T>,
}

/// `c_n`: Fourier modes of `e^{−k e^{iφ}} ψ₁(1, φ)`; `d_n`: Fourier modes of
/// `e^{−k̄ e^{−iφ}} ψ₂(1, φ)`. Both are taken by a discrete transform of the
/// rim samples.
pub fn condition_rows<T: Real>(basis: &FundamentalBasis<T>, k: C<T>) -> Result<CgoConditionMatrix<T>> {
    let grid = &basis.grid;
    let n = grid.n_phi();
    let h = n / 2;
    let w1: Vec<C<T>> = grid.phi_points().iter().map(|&p| (-k * C::from_polar(T::one(), p)).exp()).collect();
    let w2: Vec<C<T>> = grid.phi_points().iter().map(|&p| (-k.conj() * C::from_polar(T::one(), -p)).exp()).collect();
    let mut matrix = Array2::from_elem((n, n), czero());
    let mut d1_row = vec![czero(); n];
    for j in 0..basis.len() {
        let c = weighted_rim_modes(grid, &basis.psi1[j], &w1)?;
        let d = weighted_rim_modes(grid, &basis.psi2[j], &w2)?;
        for t in 0..h {
            matrix[[t, j]] = c[t];
            matrix[[h + t, j]] = d[(n - t) % n];
        }
        d1_row[j] = d[1];
    }
    let mut rhs = vec![czero(); n];
    rhs[0] = cone();
    Ok(CgoConditionMatrix { matrix, rhs, d1_row, k })
}

fn weighted_rim_modes<T: Real>(grid: &Grid<T>, field: &SpectralField<T>, w: &[C<T>]) -> Result<Vec<C<T>>> {
    let ring: Vec<C<T>> = grid.rim_values(field)?.iter().zip(w).map(|(a, b)| *a * *b).collect();
    grid.ring_modes(&ring)
}

/// Solves `matrix · γ = rhs`. Singular systems are reported as possible
/// exceptional points.
pub fn solve_gamma<T: Real>(cond: &CgoConditionMatrix<T>) -> Result<Vec<C<T>>> {
    let exceptional = || DbarError::ExceptionalPoint { k_re: cond.k.re.to_f64_lossy(), k_im: cond.k.im.to_f64_lossy() };
    let lu = Lu::factor(cond.matrix.view()).map_err(|_| exceptional())?;
    let kappa = lu.condition_estimate().to_f64_lossy();
    debug!("CGO condition system at k = {}: condition ≈ {kappa:.3e}", cond.k);
    if !kappa.is_finite() || kappa * T::epsilon().to_f64_lossy() >= 1.0 {
        return Err(exceptional());
    }
    let mut gamma = cond.rhs.clone();
    lu.solve_in_place(&mut gamma);
    Ok(gamma)
}

/// `max_i |(matrix · γ − rhs)_i|`.
pub fn condition_residual<T: Real>(cond: &CgoConditionMatrix<T>, gamma: &[C<T>]) -> T {
    cond.matrix
        .rows()
        .into_iter()
        .zip(&cond.rhs)
        .map(|(row, b)| (row.iter().zip(gamma).map(|(a, g)| *a * *g).sum::<C<T>>() - *b).norm())
        .fold(T::zero(), T::max)
}

/// `R = 2 · conj(d1_row · γ)`.
pub fn reflection_from_conditions<T: Real>(cond: &CgoConditionMatrix<T>, gamma: &[C<T>]) -> C<T> {
    let d1: C<T> = cond.d1_row.iter().zip(gamma).map(|(a, g)| *a * *g).sum();
    (d1 * T::lit(2.0)).conj()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CgoDiagnostics {
    /// `max |matrix·γ − rhs|` of the condition system (basis route only).
    pub condition_residual: f64,
    /// Largest highest-degree Chebyshev coefficient of the two fields.
    pub trailing_chebyshev: f64,
    /// Largest coefficient in the Fourier bin `Nφ/2` of the two fields.
    pub trailing_fourier: f64,
}

#[derive(Clone, Debug)]
pub struct CgoSolution<T: Real> {
    pub k: C<T>,
    pub gauge: Gauge,
    pub field1: SpectralField<T>,
    pub field2: SpectralField<T>,
    /// Basis weights; `None` for solutions not built from a basis.
    pub gamma: Option<Vec<C<T>>>,
    /// `None` when the solution vanishes identically.
    pub reflection: Option<C<T>>,
    pub diagnostics: CgoDiagnostics,
}

impl<T: Real> CgoSolution<T> {
    pub(crate) fn trailing(field1: &SpectralField<T>, field2: &SpectralField<T>) -> (f64, f64) {
        let tc = field1.trailing_chebyshev().max(field2.trailing_chebyshev()).to_f64_lossy();
        let tf = field1.trailing_fourier().max(field2.trailing_fourier()).to_f64_lossy();
        (tc, tf)
    }
}

/// `e^{−kz}` and `e^{−k̄z̄}` on the grid.
pub fn gauge_factors<T: Real>(k: C<T>, grid: &Grid<T>) -> (PhysicalField<T>, PhysicalField<T>) {
    let f1 = grid.physical_from_fn(|r, p| (-k * C::from_polar(r, p)).exp());
    let f2 = grid.physical_from_fn(|r, p| (-(k * C::from_polar(r, p)).conj()).exp());
    (f1, f2)
}

/// Linear combination `Σ_j γ_j ψ^{(j)}` in coefficient space, optionally
/// converted to the `Φ` gauge pointwise.
pub fn assemble_cgo<T: Real>(
    basis: &FundamentalBasis<T>,
    gamma: &[C<T>],
    cond: &CgoConditionMatrix<T>,
    gauge: Gauge,
) -> Result<CgoSolution<T>> {
    if gamma.len() != basis.len() {
        return Err(DbarError::ShapeMismatch {
            expected: format!("{} weights", basis.len()),
            found: gamma.len().to_string(),
        });
    }
    let grid = &basis.grid;
    let mut f1 = grid.zero_spectral(FourierRange::Psi1);
    let mut f2 = grid.zero_spectral(FourierRange::Psi2);
    for (j, &g) in gamma.iter().enumerate() {
        if g != czero() {
            f1.axpy(g, &basis.psi1[j]);
            f2.axpy(g, &basis.psi2[j]);
        }
    }
    if gauge == Gauge::Phi {
        let (e1, e2) = gauge_factors(cond.k, grid);
        f1 = grid.forward(&grid.inverse(&f1)?.mul(&e1), FourierRange::Psi1)?;
        f2 = grid.forward(&grid.inverse(&f2)?.mul(&e2), FourierRange::Psi2)?;
    }
    let vanishing = gamma.iter().all(|g| *g == czero());
    let (tc, tf) = CgoSolution::trailing(&f1, &f2);
    Ok(CgoSolution {
        k: cond.k,
        gauge,
        field1: f1,
        field2: f2,
        gamma: Some(gamma.to_vec()),
        reflection: (!vanishing).then(|| reflection_from_conditions(cond, gamma)),
        diagnostics: CgoDiagnostics {
            condition_residual: condition_residual(cond, gamma).to_f64_lossy(),
            trailing_chebyshev: tc,
            trailing_fourier: tf,
        },
    })
}

/// Re-expresses a solution in the other gauge, pointwise on `grid`.
pub fn change_gauge<T: Real>(sol: &CgoSolution<T>, grid: &Grid<T>, target: Gauge) -> Result<CgoSolution<T>> {
    if sol.gauge == target {
        return Ok(sol.clone());
    }
    let (mut e1, mut e2) = gauge_factors(sol.k, grid);
    if target == Gauge::Psi {
        e1 = PhysicalField::new(e1.values.mapv(|z| z.inv()));
        e2 = PhysicalField::new(e2.values.mapv(|z| z.inv()));
    }
    let f1 = grid.forward(&grid.inverse(&sol.field1)?.mul(&e1), FourierRange::Psi1)?;
    let f2 = grid.forward(&grid.inverse(&sol.field2)?.mul(&e2), FourierRange::Psi2)?;
    let (tc, tf) = CgoSolution::trailing(&f1, &f2);
    Ok(CgoSolution {
        gauge: target,
        field1: f1,
        field2: f2,
        diagnostics: CgoDiagnostics { trailing_chebyshev: tc, trailing_fourier: tf, ..sol.diagnostics },
        ..sol.clone()
    })
}

/// Conditions, weights and assembly in one call.
pub fn solve_cgo<T: Real>(basis: &FundamentalBasis<T>, k: C<T>, gauge: Gauge) -> Result<CgoSolution<T>> {
    let cond = condition_rows(basis, k)?;
    let gamma = solve_gamma(&cond)?;
    assemble_cgo(basis, &gamma, &cond, gauge)
}

/// `R(k)` from the basis without assembling the fields.
pub fn reflection_fundamental<T: Real>(basis: &FundamentalBasis<T>, k: C<T>) -> Result<C<T>> {
    let cond = condition_rows(basis, k)?;
    let gamma = solve_gamma(&cond)?;
    Ok(reflection_from_conditions(&cond, &gamma))
}
