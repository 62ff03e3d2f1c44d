//! Dense LU factorization with partial pivoting, generic over real and
//! complex scalars, plus a Hager-Higham 1-norm condition estimator.

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, Neg, SubAssign};

use ndarray::{Array2, ArrayView2};
use num_traits::{Float, One, Zero};

use crate::error::{DbarError, Result};
use crate::scalar::{Real, C};

/// Scalar a linear system can be solved over.
pub trait Field:
    Copy
    + Send
    + Sync
    + Debug
    + Zero
    + One
    + Neg<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Mul<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    type Real: Real;
    fn modulus(self) -> Self::Real;
    fn conjugate(self) -> Self;
    fn from_real(r: Self::Real) -> Self;
    fn is_finite_value(self) -> bool;
    fn real_part(self) -> Self::Real;
}

macro_rules! real_field {
    ($t:ty) => {
        impl Field for $t {
            type Real = $t;
            #[inline]
            fn modulus(self) -> $t {
                self.abs()
            }
            #[inline]
            fn conjugate(self) -> $t {
                self
            }
            #[inline]
            fn from_real(r: $t) -> $t {
                r
            }
            #[inline]
            fn is_finite_value(self) -> bool {
                self.is_finite()
            }
            #[inline]
            fn real_part(self) -> $t {
                self
            }
        }
    };
}
real_field!(f32);
real_field!(f64);

impl<T: Real> Field for C<T> {
    type Real = T;
    #[inline]
    fn modulus(self) -> T {
        self.norm()
    }
    #[inline]
    fn conjugate(self) -> Self {
        self.conj()
    }
    #[inline]
    fn from_real(r: T) -> Self {
        C::new(r, T::zero())
    }
    #[inline]
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    #[inline]
    fn real_part(self) -> T {
        self.re
    }
}

/// `PA = LU` with unit lower `L`, stored packed and row-major.
#[derive(Clone, Debug)]
pub struct Lu<S: Field> {
    n: usize,
    lu: Vec<S>,
    swaps: Vec<usize>,
    norm1: S::Real,
}

impl<S: Field> Lu<S> {
    /// Factorizes a square matrix. Fails on an exactly zero or non-finite pivot.
    pub fn factor(a: ArrayView2<'_, S>) -> Result<Self> {
        let (n, m) = a.dim();
        if n != m {
            return Err(DbarError::ShapeMismatch {
                expected: format!("square matrix, {n}x{n}"),
                found: format!("{n}x{m}"),
            });
        }
        let norm1 = norm1(a);
        let mut lu: Vec<S> = a.iter().copied().collect();
        let mut swaps = Vec::with_capacity(n);
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].modulus();
            for i in k + 1..n {
                let v = lu[i * n + k].modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > S::Real::zero()) || !best.is_finite() {
                return Err(DbarError::Singular {
                    context: format!("LU pivot {k} of {n}"),
                    condition: f64::INFINITY,
                });
            }
            swaps.push(p);
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
            }
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..(k + 1) * n];
            let inv = S::one() / pivot_row[k];
            for row in tail.chunks_exact_mut(n) {
                let mut l = row[k];
                if l.is_zero() {
                    continue;
                }
                l *= inv;
                row[k] = l;
                for (x, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                    let mut t = u;
                    t *= l;
                    *x -= t;
                }
            }
        }
        Ok(Self { n, lu, swaps, norm1 })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// 1-norm of the factorized matrix.
    pub fn norm1(&self) -> S::Real {
        self.norm1
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [S]) {
        let n = self.n;
        assert_eq!(b.len(), n, "rhs length");
        for (k, &p) in self.swaps.iter().enumerate() {
            b.swap(k, p);
        }
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let mut acc = b[i];
            for (&l, &x) in row.iter().zip(&b[..i]) {
                let mut t = l;
                t *= x;
                acc -= t;
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let mut acc = b[i];
            for (&u, &x) in row[i + 1..].iter().zip(&b[i + 1..]) {
                let mut t = u;
                t *= x;
                acc -= t;
            }
            b[i] = acc / row[i];
        }
    }

    /// Solves `A^H x = b` in place.
    pub fn solve_adjoint_in_place(&self, b: &mut [S]) {
        let n = self.n;
        assert_eq!(b.len(), n, "rhs length");
        // U^H y = b
        for i in 0..n {
            let mut acc = b[i];
            for k in 0..i {
                let mut t = self.lu[k * n + i].conjugate();
                t *= b[k];
                acc -= t;
            }
            b[i] = acc / self.lu[i * n + i].conjugate();
        }
        // L^H w = y
        for i in (0..n).rev() {
            let mut acc = b[i];
            for k in i + 1..n {
                let mut t = self.lu[k * n + i].conjugate();
                t *= b[k];
                acc -= t;
            }
            b[i] = acc;
        }
        for (k, &p) in self.swaps.iter().enumerate().rev() {
            b.swap(k, p);
        }
    }

    /// Solves for every column of `b`.
    pub fn solve_columns(&self, b: &mut Array2<S>) {
        let mut col = vec![S::zero(); self.n];
        for mut c in b.columns_mut() {
            for (d, s) in col.iter_mut().zip(c.iter()) {
                *d = *s;
            }
            self.solve_in_place(&mut col);
            for (d, s) in c.iter_mut().zip(&col) {
                *d = *s;
            }
        }
    }

    /// Hager-Higham estimate of `‖A⁻¹‖₁`.
    pub fn inverse_norm1_estimate(&self) -> S::Real {
        let n = self.n;
        if n == 0 {
            return S::Real::zero();
        }
        let inv_n = S::from_real(S::Real::one() / S::Real::from_usize_lossy(n));
        let mut x = vec![inv_n; n];
        let mut estimate = S::Real::zero();
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let mut y = x.clone();
            self.solve_in_place(&mut y);
            let y_norm = y.iter().fold(S::Real::zero(), |s, v| s + v.modulus());
            if y_norm <= estimate {
                break;
            }
            estimate = y_norm;
            let mut z: Vec<S> = y
                .iter()
                .map(|&v| {
                    let m = v.modulus();
                    if m > S::Real::zero() {
                        v / S::from_real(m)
                    } else {
                        S::one()
                    }
                })
                .collect();
            self.solve_adjoint_in_place(&mut z);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.modulus()))
                .fold((0, S::Real::zero()), |a, b| if b.1 > a.1 { b } else { a });
            if j == last_j {
                break;
            }
            // Stop when the gradient test shows no ascent direction.
            let ztx = z
                .iter()
                .zip(&x)
                .fold(S::Real::zero(), |s, (a, b)| s + (a.conjugate() * *b).real_part());
            if zmax <= ztx {
                break;
            }
            last_j = j;
            x = vec![S::zero(); n];
            x[j] = S::one();
        }
        estimate
    }

    /// Estimated 1-norm condition number.
    pub fn condition_estimate(&self) -> S::Real {
        self.norm1 * self.inverse_norm1_estimate()
    }
}

impl<T: Real> Lu<T> {
    /// Solves a real system against a complex right-hand side.
    pub fn solve_complex_in_place(&self, b: &mut [C<T>]) {
        let mut re: Vec<T> = b.iter().map(|z| z.re).collect();
        let mut im: Vec<T> = b.iter().map(|z| z.im).collect();
        self.solve_in_place(&mut re);
        self.solve_in_place(&mut im);
        for ((z, r), i) in b.iter_mut().zip(re).zip(im) {
            *z = C::new(r, i);
        }
    }
}

/// Maximum absolute column sum.
pub fn norm1<S: Field>(a: ArrayView2<'_, S>) -> S::Real {
    a.columns()
        .into_iter()
        .map(|c| c.iter().fold(S::Real::zero(), |s, v| s + v.modulus()))
        .fold(S::Real::zero(), |m, v| if v > m { v } else { m })
}

/// Inverse of a square matrix via LU.
pub fn invert<S: Field>(a: ArrayView2<'_, S>) -> Result<Array2<S>> {
    let lu = Lu::factor(a)?;
    let mut id = Array2::<S>::zeros(a.dim());
    for i in 0..a.nrows() {
        id[[i, i]] = S::one();
    }
    lu.solve_columns(&mut id);
    Ok(id)
}
