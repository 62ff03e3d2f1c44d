//! Coefficient-space operators in the radial variable `r = (1 + l)/2`.

use ndarray::Array2;

use crate::error::{DbarError, Result};
use crate::linalg::{self, Lu};
use crate::scalar::{czero, Real, C};

/// Chebyshev differentiation `d/dr` in coefficient space, chain-rule factor
/// `dl/dr = 2` included. Strictly upper triangular.
pub fn diff_matrix<T: Real>(n_r: usize) -> Array2<T> {
    let mut d = Array2::zeros((n_r + 1, n_r + 1));
    for m in 0..=n_r {
        let weight = if m == 0 { T::one() } else { T::lit(2.0) };
        for alpha in (m + 1..=n_r).step_by(2) {
            // d/dl T_α contributes 2α/c_m T_m for m < α, α + m odd; times 2 for d/dr.
            d[[m, alpha]] = T::lit(2.0) * weight * T::from_usize_lossy(alpha);
        }
    }
    d
}

/// Multiplication by `r = (1 + l)/2`, truncated at degree `Nr`.
pub fn mult_r_matrix<T: Real>(n_r: usize) -> Array2<T> {
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let mut m = Array2::zeros((n_r + 1, n_r + 1));
    for alpha in 0..=n_r {
        m[[alpha, alpha]] = half;
        if alpha == 0 {
            if n_r >= 1 {
                m[[1, 0]] = half;
            }
        } else {
            // l T_α = (T_{α+1} + T_{α−1})/2
            m[[alpha - 1, alpha]] += quarter;
            if alpha < n_r {
                m[[alpha + 1, alpha]] += quarter;
            }
        }
    }
    m
}

/// Division by `r` in coefficient space: the inverse of [`mult_r_matrix`].
/// Exact on coefficient vectors of `r·p(r)` with `deg p ≤ Nr − 1`.
pub fn div_matrix<T: Real>(n_r: usize) -> Result<Array2<T>> {
    let m = mult_r_matrix::<T>(n_r);
    let lu = Lu::factor(m.view()).map_err(|_| DbarError::Singular {
        context: format!("multiplication-by-r matrix, Nr = {n_r}"),
        condition: f64::INFINITY,
    })?;
    let cond = lu.condition_estimate().to_f64_lossy();
    if !(cond.is_finite() && cond < 1.0 / (T::epsilon().to_f64_lossy() * 100.0)) {
        return Err(DbarError::Singular {
            context: format!("multiplication-by-r matrix, Nr = {n_r}"),
            condition: cond,
        });
    }
    linalg::invert(m.view())
}

/// Generator matrices shared by everything built on one radial resolution.
#[derive(Clone, Debug)]
pub struct ChebOperators<T: Real> {
    pub n_r: usize,
    pub diff: Array2<T>,
    pub div: Array2<T>,
}

impl<T: Real> ChebOperators<T> {
    pub fn new(n_r: usize) -> Result<Self> {
        Ok(Self { n_r, diff: diff_matrix(n_r), div: div_matrix(n_r)? })
    }
}

/// `MINUS` builds `D − nR` (the `ψ₁`/`a_n` equations), `PLUS` builds
/// `D + nR` (the `ψ₂`/`b_n` equations).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModeSign {
    Minus,
    Plus,
}

#[derive(Clone, Debug)]
pub struct ModeOperator<T: Real> {
    pub matrix: Array2<T>,
    pub mode: i64,
    pub sign: ModeSign,
}

/// `D ∓ nR` for one Fourier mode.
pub fn mode_operator<T: Real>(n: i64, sign: ModeSign, ops: &ChebOperators<T>) -> ModeOperator<T> {
    let s = match sign {
        ModeSign::Minus => -T::from_i64_lossy(n),
        ModeSign::Plus => T::from_i64_lossy(n),
    };
    let mut matrix = ops.diff.clone();
    if n != 0 {
        matrix.zip_mut_with(&ops.div, |d, &r| *d += s * r);
    }
    ModeOperator { matrix, mode: n, sign }
}

/// Matrix of multiplication by `p(l) = Σ_μ p_μ T_μ(l)` on Chebyshev
/// coefficients, using `T_μ T_α = (T_{μ+α} + T_{|μ−α|})/2` and dropping
/// degrees above `Nr`.
pub fn cheb_product_matrix<T: Real>(p: &[C<T>], n_r: usize) -> Array2<C<T>> {
    let size = n_r + 1;
    let half = T::lit(0.5);
    let coef = |mu: usize| if mu < p.len() { p[mu] } else { czero() };
    let mut out = Array2::from_elem((size, size), czero());
    for m in 0..size {
        for alpha in 0..size {
            let mut acc = czero::<T>();
            if m >= alpha {
                acc += coef(m - alpha);
            }
            acc += coef(alpha + m);
            if alpha >= m && m > 0 {
                acc += coef(alpha - m);
            }
            out[[m, alpha]] = acc * half;
        }
    }
    out
}
