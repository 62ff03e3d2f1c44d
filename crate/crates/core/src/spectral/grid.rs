use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::{Fft, FftPlanner};

use super::field::{FourierRange, PhysicalField, SpectralField};
use super::operators::ChebOperators;
use crate::error::{DbarError, Result};
use crate::scalar::{czero, Real, C};

/// Tensor collocation grid on the disk together with its transform plans
/// and radial operators. Immutable; clones share the plans.
#[derive(Clone)]
pub struct Grid<T: Real> {
    n_r: usize,
    n_phi: usize,
    l_points: Vec<T>,
    r_points: Vec<T>,
    phi_points: Vec<T>,
    fft_forward: Arc<dyn Fft<T>>,
    fft_inverse: Arc<dyn Fft<T>>,
    // Length-2Nr FFT realizing the type-I cosine transform.
    dct: Arc<dyn Fft<T>>,
    ops: Arc<ChebOperators<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n_r", &self.n_r).field("n_phi", &self.n_phi).finish()
    }
}

/// Builds the grid `l_j = cos(jπ/Nr)`, `r_j = (1 + l_j)/2`, `φ_i = 2πi/Nφ`.
pub fn make_grid<T: Real>(n_r: usize, n_phi: usize) -> Result<Grid<T>> {
    Grid::new(n_r, n_phi)
}

impl<T: Real> Grid<T> {
    pub fn new(n_r: usize, n_phi: usize) -> Result<Self> {
        if n_r < 2 {
            return Err(DbarError::Sizing(format!("n_r must be at least 2, got {n_r}")));
        }
        if n_phi < 4 || n_phi % 2 != 0 {
            return Err(DbarError::Sizing(format!("n_phi must be even and at least 4, got {n_phi}")));
        }
        let pi = T::PI();
        let nr = T::from_usize_lossy(n_r);
        let l_points: Vec<T> = (0..=n_r)
            .map(|j| {
                // exact endpoints and symmetric midpoint
                if 2 * j == n_r {
                    T::zero()
                } else if j == 0 {
                    T::one()
                } else if j == n_r {
                    -T::one()
                } else {
                    (T::from_usize_lossy(j) * pi / nr).cos()
                }
            })
            .collect();
        let r_points = l_points.iter().map(|&l| (T::one() + l) * T::lit(0.5)).collect();
        let phi_points = (0..n_phi)
            .map(|i| T::lit(2.0) * pi * T::from_usize_lossy(i) / T::from_usize_lossy(n_phi))
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            n_r,
            n_phi,
            l_points,
            r_points,
            phi_points,
            fft_forward: planner.plan_fft_forward(n_phi),
            fft_inverse: planner.plan_fft_inverse(n_phi),
            dct: planner.plan_fft_forward(2 * n_r),
            ops: Arc::new(ChebOperators::new(n_r)?),
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn l_points(&self) -> &[T] {
        &self.l_points
    }

    pub fn r_points(&self) -> &[T] {
        &self.r_points
    }

    pub fn phi_points(&self) -> &[T] {
        &self.phi_points
    }

    pub fn operators(&self) -> &ChebOperators<T> {
        &self.ops
    }

    /// `z = r e^{iφ}` at grid point `(j, i)`.
    pub fn z(&self, j: usize, i: usize) -> C<T> {
        C::from_polar(self.r_points[j], self.phi_points[i])
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_r + 1, self.n_phi)
    }

    pub fn physical_from_fn(&self, mut f: impl FnMut(T, T) -> C<T>) -> PhysicalField<T> {
        PhysicalField::from_fn(self.n_r, self.n_phi, |(j, i)| f(self.r_points[j], self.phi_points[i]))
    }

    pub(crate) fn check_shape(&self, dim: (usize, usize), what: &str) -> Result<()> {
        if dim != self.shape() {
            return Err(DbarError::ShapeMismatch {
                expected: format!("{what} {:?}", self.shape()),
                found: format!("{dim:?}"),
            });
        }
        Ok(())
    }

    /// Samples → Chebyshev × Fourier coefficients interpolating them.
    ///
    /// The Fourier step divides by `Nφ`; the cosine step uses half weights on
    /// the `m = 0` and `m = Nr` coefficients.
    pub fn forward(&self, f: &PhysicalField<T>, range: FourierRange) -> Result<SpectralField<T>> {
        self.check_shape(f.dim(), "physical field")?;
        let mut data: Vec<C<T>> = f.values.iter().copied().collect();
        let mut scratch = vec![czero(); self.fft_forward.get_inplace_scratch_len()];
        self.fft_forward.process_with_scratch(&mut data, &mut scratch);
        let scale = T::one() / T::from_usize_lossy(self.n_phi);
        for z in &mut data {
            *z = *z * scale;
        }
        let mut coeffs = Array2::from_shape_vec(self.shape(), data).expect("shape");
        self.cosine_columns(&mut coeffs, true);
        Ok(SpectralField { coeffs, range })
    }

    /// Coefficients → samples on the grid.
    pub fn inverse(&self, s: &SpectralField<T>) -> Result<PhysicalField<T>> {
        self.check_shape(s.coeffs.dim(), "spectral field")?;
        let mut values = s.coeffs.clone();
        self.cosine_columns(&mut values, false);
        let mut data: Vec<C<T>> = values.iter().copied().collect();
        let mut scratch = vec![czero(); self.fft_inverse.get_inplace_scratch_len()];
        self.fft_inverse.process_with_scratch(&mut data, &mut scratch);
        Ok(PhysicalField::new(Array2::from_shape_vec(self.shape(), data).expect("shape")))
    }

    /// Type-I cosine transform of every column via an even extension of
    /// length `2Nr`: `G_m = f_0 + (−1)^m f_Nr + 2 Σ_{0<j<Nr} f_j cos(πmj/Nr)`.
    fn cosine_columns(&self, a: &mut Array2<C<T>>, forward: bool) {
        let n = self.n_r;
        let len = 2 * n;
        let cols = self.n_phi;
        let mut buf = vec![czero::<T>(); len * cols];
        let two = T::lit(2.0);
        for (c, chunk) in buf.chunks_exact_mut(len).enumerate() {
            for j in 0..=n {
                let mut v = a[[j, c]];
                if !forward && (j == 0 || j == n) {
                    v = v * two;
                }
                chunk[j] = v;
                if j > 0 && j < n {
                    chunk[len - j] = v;
                }
            }
        }
        let mut scratch = vec![czero(); self.dct.get_inplace_scratch_len()];
        self.dct.process_with_scratch(&mut buf, &mut scratch);
        let nr = T::from_usize_lossy(n);
        for (c, chunk) in buf.chunks_exact(len).enumerate() {
            for m in 0..=n {
                a[[m, c]] = if forward {
                    let w = if m == 0 || m == n { two * nr } else { nr };
                    chunk[m] / w
                } else {
                    chunk[m] / two
                };
            }
        }
    }

    /// Samples on the rim `r = 1` (row 0) without a full inverse transform.
    pub fn rim_values(&self, s: &SpectralField<T>) -> Result<Vec<C<T>>> {
        self.check_shape(s.coeffs.dim(), "spectral field")?;
        let mut ring = s.rim_modes();
        let mut scratch = vec![czero(); self.fft_inverse.get_inplace_scratch_len()];
        self.fft_inverse.process_with_scratch(&mut ring, &mut scratch);
        Ok(ring)
    }

    /// Fourier coefficients (bin order, divided by `Nφ`) of `Nφ` samples on a
    /// circle.
    pub fn ring_modes(&self, ring: &[C<T>]) -> Result<Vec<C<T>>> {
        if ring.len() != self.n_phi {
            return Err(DbarError::ShapeMismatch {
                expected: format!("ring of {}", self.n_phi),
                found: ring.len().to_string(),
            });
        }
        let mut data = ring.to_vec();
        let mut scratch = vec![czero(); self.fft_forward.get_inplace_scratch_len()];
        self.fft_forward.process_with_scratch(&mut data, &mut scratch);
        let scale = T::one() / T::from_usize_lossy(self.n_phi);
        Ok(data.into_iter().map(|z| z * scale).collect())
    }

    /// Fresh zero coefficient field for this grid.
    pub fn zero_spectral(&self, range: FourierRange) -> SpectralField<T> {
        SpectralField::zeros(self.n_r, self.n_phi, range)
    }
}
