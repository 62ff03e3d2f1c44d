use ndarray::{Array2, Zip};

use crate::scalar::{czero, Real, C};

/// Which signed Fourier modes the `Nφ` stored bins stand for.
///
/// Storage is always in FFT bin order; only the interpretation of bin
/// `Nφ/2` differs between the two ranges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FourierRange {
    /// `n ∈ [−Nφ/2, Nφ/2 − 1]`, used for `ψ₁` and `Φ₁`.
    Psi1,
    /// `n ∈ [−Nφ/2 + 1, Nφ/2]`, used for `ψ₂` and `Φ₂`.
    Psi2,
}

impl FourierRange {
    pub fn min_mode(self, n_phi: usize) -> i64 {
        let h = (n_phi / 2) as i64;
        match self {
            FourierRange::Psi1 => -h,
            FourierRange::Psi2 => -h + 1,
        }
    }

    pub fn max_mode(self, n_phi: usize) -> i64 {
        self.min_mode(n_phi) + n_phi as i64 - 1
    }

    /// Signed mode number stored in `bin`.
    pub fn mode_of_bin(self, bin: usize, n_phi: usize) -> i64 {
        let b = bin as i64;
        let n = n_phi as i64;
        if b > self.max_mode(n_phi) {
            b - n
        } else {
            b
        }
    }

    /// Bin holding signed mode `n`, or `None` outside the range.
    pub fn bin_of_mode(self, n: i64, n_phi: usize) -> Option<usize> {
        if n < self.min_mode(n_phi) || n > self.max_mode(n_phi) {
            return None;
        }
        Some(n.rem_euclid(n_phi as i64) as usize)
    }

    pub fn modes(self, n_phi: usize) -> impl Iterator<Item = i64> {
        self.min_mode(n_phi)..=self.max_mode(n_phi)
    }
}

/// Complex samples on the collocation grid; rows are radial points, columns
/// angular points.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField<T: Real> {
    pub values: Array2<C<T>>,
}

impl<T: Real> PhysicalField<T> {
    pub fn new(values: Array2<C<T>>) -> Self {
        Self { values }
    }

    pub fn zeros(n_r: usize, n_phi: usize) -> Self {
        Self::new(Array2::from_elem((n_r + 1, n_phi), czero()))
    }

    pub fn from_fn(n_r: usize, n_phi: usize, f: impl FnMut((usize, usize)) -> C<T>) -> Self {
        Self::new(Array2::from_shape_fn((n_r + 1, n_phi), f))
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// `max |self − other|` over the grid.
    pub fn max_diff(&self, other: &Self) -> T {
        Zip::from(&self.values)
            .and(&other.values)
            .fold(T::zero(), |m, a, b| m.max((*a - *b).norm()))
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Self {
        Self::new(Zip::from(&self.values).and(&other.values).map_collect(|a, b| *a * *b))
    }

    pub fn conj(&self) -> Self {
        Self::new(self.values.mapv(|z| z.conj()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Chebyshev × Fourier coefficients `coeffs[[m, bin]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField<T: Real> {
    pub coeffs: Array2<C<T>>,
    pub range: FourierRange,
}

impl<T: Real> SpectralField<T> {
    pub fn zeros(n_r: usize, n_phi: usize, range: FourierRange) -> Self {
        Self { coeffs: Array2::from_elem((n_r + 1, n_phi), czero()), range }
    }

    pub fn n_r(&self) -> usize {
        self.coeffs.nrows() - 1
    }

    pub fn n_phi(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Coefficient of `T_m(l) e^{inφ}`; zero for modes outside the range.
    pub fn get(&self, m: usize, n: i64) -> C<T> {
        match self.range.bin_of_mode(n, self.n_phi()) {
            Some(bin) => self.coeffs[[m, bin]],
            None => czero(),
        }
    }

    pub fn set(&mut self, m: usize, n: i64, value: C<T>) {
        let bin = self
            .range
            .bin_of_mode(n, self.n_phi())
            .unwrap_or_else(|| panic!("mode {n} outside {:?}", self.range));
        self.coeffs[[m, bin]] = value;
    }

    /// Value of every Fourier mode at the rim `r = 1`, i.e. `Σ_m c_{mn}`
    /// since `T_m(1) = 1`. Indexed by bin.
    pub fn rim_modes(&self) -> Vec<C<T>> {
        self.coeffs.columns().into_iter().map(|c| c.sum()).collect()
    }

    /// Radial profile of one bin evaluated at `r` (Clenshaw recurrence).
    pub fn eval_mode(&self, bin: usize, r: T) -> C<T> {
        let l = r + r - T::one();
        let col = self.coeffs.column(bin);
        let mut b1 = czero::<T>();
        let mut b2 = czero::<T>();
        for m in (1..col.len()).rev() {
            let b0 = col[m] + b1 * (l + l) - b2;
            b2 = b1;
            b1 = b0;
        }
        col[0] + b1 * l - b2
    }

    /// Largest modulus in the highest Chebyshev row.
    pub fn trailing_chebyshev(&self) -> T {
        let last = self.coeffs.nrows() - 1;
        self.coeffs.row(last).iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// Largest modulus in the column of the highest `|n|` (bin `Nφ/2`).
    pub fn trailing_fourier(&self) -> T {
        let bin = self.n_phi() / 2;
        self.coeffs.column(bin).iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn max_abs(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// `self += alpha · other` (same range).
    pub fn axpy(&mut self, alpha: C<T>, other: &Self) {
        debug_assert_eq!(self.range, other.range);
        Zip::from(&mut self.coeffs).and(&other.coeffs).for_each(|a, b| *a += *b * alpha);
    }
}
