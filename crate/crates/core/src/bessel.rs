//! Modified Bessel functions `I_n(r)` on `[0, 1]` from their power series, and
//! the closed-form d-bar solutions for the characteristic function of the
//! disk that serve as ground truth.

use ndarray::Array2;

use crate::error::{DbarError, Result};
use crate::scalar::{Real, C};
use crate::spectral::{Grid, PhysicalField};

/// Number of series terms beyond the leading one (`m = 0..=16`).
pub const DEFAULT_TRUNCATION: usize = 16;

/// Highest order accepted by [`bessel_i`].
pub const DEFAULT_MAX_ORDER: usize = 256;

/// Truncated series `Σ_{m=0}^{M} (r/2)^{2m+n} / (m! (m+n)!)`.
#[derive(Clone, Copy, Debug)]
pub struct BesselSeries {
    pub truncation: usize,
    pub max_order: usize,
}

impl Default for BesselSeries {
    fn default() -> Self {
        Self { truncation: DEFAULT_TRUNCATION, max_order: DEFAULT_MAX_ORDER }
    }
}

impl BesselSeries {
    /// Series whose order cap covers every order a grid's basis needs.
    pub fn for_grid<T: Real>(grid: &Grid<T>) -> Self {
        Self { truncation: DEFAULT_TRUNCATION, max_order: grid.n_phi() / 2 + 2 }
    }

    fn order(&self, n: i64) -> Result<usize> {
        let order = n.unsigned_abs() as usize;
        if order > self.max_order {
            return Err(DbarError::InvalidArgument(format!(
                "Bessel order {n} exceeds maximum {}",
                self.max_order
            )));
        }
        Ok(order)
    }

    /// `I_n(r)`; negative orders use `I_{−n} = I_n`.
    pub fn eval<T: Real>(&self, n: i64, r: T) -> Result<T> {
        let order = self.order(n)?;
        check_radius(r)?;
        let half = r * T::lit(0.5);
        let mut lead = T::one();
        for k in 1..=order {
            lead = lead * half / T::from_usize_lossy(k);
        }
        Ok(lead * self.reduced(order, half * half))
    }

    /// `Σ_m (r/2)^{2m} n! / (m! (m+n)!)`, the series with its leading power
    /// factored out.
    fn reduced<T: Real>(&self, order: usize, x: T) -> T {
        let mut term = T::one();
        let mut sum = T::one();
        for m in 1..=self.truncation {
            term = term * x / (T::from_usize_lossy(m) * T::from_usize_lossy(m + order));
            sum += term;
        }
        sum
    }

    /// `I_n(r) / I_n(r0)` without forming either factor, which stays finite
    /// for high orders where `I_n` itself underflows.
    pub fn ratio<T: Real>(&self, n: i64, r: T, r0: T) -> Result<T> {
        let order = self.order(n)?;
        check_radius(r)?;
        check_radius(r0)?;
        let q = T::lit(0.25);
        let num = self.reduced(order, r * r * q);
        let den = self.reduced(order, r0 * r0 * q);
        Ok((r / r0).powi(order as i32) * num / den)
    }
}

fn check_radius<T: Real>(r: T) -> Result<()> {
    if !(r >= T::zero() && r <= T::one()) {
        return Err(DbarError::InvalidArgument(format!("Bessel argument {r} outside [0, 1]")));
    }
    Ok(())
}

/// `I_n(r)` with the default truncation and order cap.
pub fn bessel_i<T: Real>(n: i64, r: T) -> Result<T> {
    BesselSeries::default().eval(n, r)
}

/// Values of several orders on a set of radii.
#[derive(Clone, Debug)]
pub struct BesselTable<T: Real> {
    pub orders: Vec<i64>,
    /// `values[[order index, radial index]]`
    pub values: Array2<T>,
    pub truncation: usize,
}

impl<T: Real> BesselTable<T> {
    pub fn new(orders: &[i64], radii: &[T], series: BesselSeries) -> Result<Self> {
        let mut values = Array2::zeros((orders.len(), radii.len()));
        for (a, &n) in orders.iter().enumerate() {
            for (b, &r) in radii.iter().enumerate() {
                values[[a, b]] = series.eval(n, r)?;
            }
        }
        Ok(Self { orders: orders.to_vec(), values, truncation: series.truncation })
    }
}

/// `ψ₁ = I₀(r)/I₀(1)`, `ψ₂ = I₁(r)/I₀(1) e^{iφ}` on the disk (q ≡ 1, k = 0).
pub fn exact_k0_solution<T: Real>(grid: &Grid<T>) -> Result<(PhysicalField<T>, PhysicalField<T>)> {
    let s = BesselSeries::for_grid(grid);
    let i0_1 = s.eval(0, T::one())?;
    let i0: Vec<T> = grid.r_points().iter().map(|&r| s.eval(0, r)).collect::<Result<_>>()?;
    let i1: Vec<T> = grid.r_points().iter().map(|&r| s.eval(1, r)).collect::<Result<_>>()?;
    let (nr, np) = (grid.n_r(), grid.n_phi());
    let psi1 = PhysicalField::from_fn(nr, np, |(j, _)| C::new(i0[j] / i0_1, T::zero()));
    let psi2 = PhysicalField::from_fn(nr, np, |(j, i)| C::from_polar(i1[j] / i0_1, grid.phi_points()[i]));
    Ok((psi1, psi2))
}

/// Rim condition carried by fundamental column `j` (1-based):
/// `a_{j−1}(1) = 1` for `j ≤ Nφ/2`, otherwise `b_{j−Nφ}(1) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RimCondition {
    A(i64),
    B(i64),
}

impl RimCondition {
    pub fn of_column(j: usize, n_phi: usize) -> Result<Self> {
        if j == 0 || j > n_phi {
            return Err(DbarError::InvalidArgument(format!("basis index {j} outside 1..={n_phi}")));
        }
        Ok(if j <= n_phi / 2 {
            RimCondition::A(j as i64 - 1)
        } else {
            RimCondition::B(j as i64 - n_phi as i64)
        })
    }
}

/// Exact fundamental pair for q ≡ 1.
///
/// Every column has the form `ψ₁ = α I_ν(r) e^{iνφ}`, `ψ₂ = α I_{ν+1}(r)
/// e^{i(ν+1)φ}`: `a`-columns pin `ν = j − 1` with `α = 1/I_ν(1)`,
/// `b`-columns pin `ν + 1 = j − Nφ` with `α = 1/I_{ν+1}(1)`.
pub fn exact_fundamental<T: Real>(j: usize, grid: &Grid<T>) -> Result<(PhysicalField<T>, PhysicalField<T>)> {
    let s = BesselSeries::for_grid(grid);
    let (nu, norm_order) = match RimCondition::of_column(j, grid.n_phi())? {
        RimCondition::A(n) => (n, n),
        RimCondition::B(n) => (n - 1, n),
    };
    let one = T::one();
    let mut a = Vec::with_capacity(grid.n_r() + 1);
    let mut b = Vec::with_capacity(grid.n_r() + 1);
    // I_ν(r)/I_μ(1) = [I_ν(r)/I_ν(1)]·[I_ν(1)/I_μ(1)], both factors finite.
    let cross_a = s.eval(nu, one)? / s.eval(norm_order, one)?;
    let cross_b = s.eval(nu + 1, one)? / s.eval(norm_order, one)?;
    for &r in grid.r_points() {
        a.push(s.ratio(nu, r, one)? * cross_a);
        b.push(s.ratio(nu + 1, r, one)? * cross_b);
    }
    let phi = grid.phi_points();
    let nu_t = T::from_i64_lossy(nu);
    let (nr, np) = (grid.n_r(), grid.n_phi());
    let psi1 = PhysicalField::from_fn(nr, np, |(jr, i)| C::from_polar(a[jr], nu_t * phi[i]));
    let psi2 = PhysicalField::from_fn(nr, np, |(jr, i)| C::from_polar(b[jr], (nu_t + one) * phi[i]));
    Ok((psi1, psi2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    #[test]
    fn trivial_values() {
        assert_eq!(bessel_i(0, 0.0f64).unwrap(), 1.0);
        assert_eq!(bessel_i(1, 0.0f64).unwrap(), 0.0);
        assert_eq!(bessel_i(5, 0.0f64).unwrap(), 0.0);
    }

    #[test]
    fn i0_at_one_matches_compensated_long_series() {
        // Kahan-summed 40-term series as an independent high-accuracy oracle.
        let mut sum = 0.0f64;
        let mut c = 0.0f64;
        let mut term = 1.0f64;
        for m in 0..40 {
            if m > 0 {
                term /= 4.0 * (m * m) as f64;
            }
            let y = term - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        assert!((sum - 1.2660658777520084).abs() < 1e-15);
        assert!((bessel_i(0, 1.0f64).unwrap() - sum).abs() <= 1e-15);
    }

    #[test]
    fn symmetric_in_order() {
        for n in 0..8 {
            assert_eq!(bessel_i(n, 0.7f64).unwrap(), bessel_i(-n, 0.7f64).unwrap());
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(bessel_i(0, 1.5f64).is_err());
        assert!(bessel_i(0, -0.1f64).is_err());
        let s = BesselSeries { truncation: 16, max_order: 4 };
        assert!(s.eval(5, 0.5f64).is_err());
        assert!(s.eval(-5, 0.5f64).is_err());
    }

    #[test]
    fn ratio_agrees_with_quotient() {
        let s = BesselSeries::default();
        for n in [0i64, 3, 17] {
            let q = s.eval(n, 0.4f64).unwrap() / s.eval(n, 1.0f64).unwrap();
            let r = s.ratio(n, 0.4f64, 1.0).unwrap();
            assert!((q - r).abs() <= 1e-15 * q.abs().max(1e-300));
        }
    }

    #[test]
    fn recurrence_holds() {
        let s = BesselSeries::default();
        for n in 1..=10i64 {
            for k in 0..=9 {
                let r = 0.1 + 0.1 * k as f64;
                let lhs = s.eval(n - 1, r).unwrap() - s.eval(n + 1, r).unwrap();
                let rhs = 2.0 * n as f64 / r * s.eval(n, r).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12, "n={n} r={r}");
            }
        }
    }

    #[test]
    fn derivative_identity_by_finite_differences() {
        let s = BesselSeries::default();
        let h = 1e-5;
        for n in 0..=8i64 {
            for r in [0.2, 0.5, 0.9] {
                let d = (s.eval(n, r + h).unwrap() - s.eval(n, r - h).unwrap()) / (2.0 * h);
                let lhs = d - n as f64 / r * s.eval(n, r).unwrap();
                assert!((lhs - s.eval(n + 1, r).unwrap()).abs() <= 1e-10, "n={n} r={r}");
            }
        }
    }

    #[test]
    fn table_invariants() {
        let g = make_grid::<f64>(8, 8).unwrap();
        let t = BesselTable::new(&[-2, 0, 1, 2], g.r_points(), BesselSeries::for_grid(&g)).unwrap();
        assert_eq!(t.values.row(0), t.values.row(3));
        assert!(t.values.iter().all(|v| *v >= 0.0));
        assert_eq!(t.values[[1, 8]], 1.0);
        assert_eq!(t.values[[2, 8]], 0.0);
    }

    #[test]
    fn k0_solution_values() {
        let g = make_grid::<f64>(8, 8).unwrap();
        let (p1, p2) = exact_k0_solution(&g).unwrap();
        for i in 0..8 {
            assert!((p1.values[[0, i]] - C::new(1.0, 0.0)).norm() < 1e-15);
            assert_eq!(p2.values[[8, i]].norm(), 0.0);
        }
        let want: f64 = bessel_i(1, 1.0).unwrap() / bessel_i(0, 1.0).unwrap();
        assert!((want - 0.44639).abs() < 1e-5);
        assert!((p2.values[[0, 0]] - C::new(want, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fundamental_oracle_columns() {
        let g = make_grid::<f64>(8, 8).unwrap();
        let (p1, p2) = exact_fundamental(1, &g).unwrap();
        let (k1, k2) = exact_k0_solution(&g).unwrap();
        assert!(p1.max_diff(&k1) < 1e-15);
        assert!(p2.max_diff(&k2) < 1e-15);
        let (_, q2) = exact_fundamental(2, &g).unwrap();
        assert!(q2.values.row(8).iter().all(|z| z.norm() == 0.0));
        // b-column: b_0(1) = 1
        let (_, q2) = exact_fundamental(8, &g).unwrap();
        assert!(q2.values.row(0).iter().all(|z| (z - C::new(1.0, 0.0)).norm() < 1e-15));
        assert!(exact_fundamental(0, &g).is_err());
        assert!(exact_fundamental(9, &g).is_err());
    }
}
