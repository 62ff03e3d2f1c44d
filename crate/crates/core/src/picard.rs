//! Fixed-point iteration for the bounded unknowns `Φ₁ = e^{−kz}ψ₁`,
//! `Φ₂ = e^{−k̄z̄}ψ₂`.
//!
//! Each step evaluates the coupling terms in physical space and inverts the
//! per-mode radial operators `D ∓ nR` (boundary row replaced where a rim
//! condition applies) through a bank of factorizations shared across `k`.

use log::{debug, warn};
use num_complex::Complex64;

use crate::cgo::{CgoDiagnostics, CgoSolution, Gauge};
use crate::error::{DbarError, Result};
use crate::fundamental::{Component, IndexMap};
use crate::linalg::Lu;
use crate::potential::{phase_modulated, resolution_check, PhaseSign, RESOLUTION_THRESHOLD};
use crate::scalar::{cone, czero, Real, C};
use crate::spectral::{mode_operator, FourierRange, Grid, ModeSign, PhysicalField, SpectralField};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_STEPS: usize = 100;
/// Consecutive growing steps after which the iteration is declared divergent.
pub const DIVERGENCE_WINDOW: usize = 5;

/// Convergence history of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace {
    /// `‖Φ₁' − Φ₁‖∞ + ‖Φ₂' − Φ₂‖∞` per step, on the grid.
    pub deltas: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
    pub tolerance: f64,
    pub k: Complex64,
    pub resolution: (usize, usize),
}

impl IterationTrace {
    pub fn last_delta(&self) -> f64 {
        self.deltas.last().copied().unwrap_or(f64::NAN)
    }
}

/// Factorized per-mode radial operators for one resolution.
#[derive(Clone, Debug)]
pub struct ModeSolveBank<T: Real> {
    pub grid: Grid<T>,
    a: Vec<Lu<T>>,
    b: Vec<Lu<T>>,
    constrained_a: Vec<bool>,
    constrained_b: Vec<bool>,
}

impl<T: Real> ModeSolveBank<T> {
    pub fn len(&self) -> usize {
        self.a.len() + self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn factorization(&self, comp: Component, bin: usize) -> &Lu<T> {
        match comp {
            Component::A => &self.a[bin],
            Component::B => &self.b[bin],
        }
    }

    pub fn is_constrained(&self, comp: Component, bin: usize) -> bool {
        match comp {
            Component::A => self.constrained_a[bin],
            Component::B => self.constrained_b[bin],
        }
    }

    /// Solves mode `bin` of `comp` in place; for constrained modes the last
    /// entry of `rhs` must already hold the rim value.
    pub fn solve(&self, comp: Component, bin: usize, rhs: &mut [C<T>]) {
        self.factorization(comp, bin).solve_complex_in_place(rhs);
    }
}

/// Factorizes `D − nR` (a-modes) and `D + nR` (b-modes) with the last row
/// replaced by the all-ones rim functional on the constrained modes.
pub fn build_mode_bank<T: Real>(grid: &Grid<T>) -> Result<ModeSolveBank<T>> {
    let (n_r, n_phi) = (grid.n_r(), grid.n_phi());
    let map = IndexMap { n_r, n_phi };
    let ops = grid.operators();
    let mut bank = ModeSolveBank {
        grid: grid.clone(),
        a: Vec::with_capacity(n_phi),
        b: Vec::with_capacity(n_phi),
        constrained_a: Vec::with_capacity(n_phi),
        constrained_b: Vec::with_capacity(n_phi),
    };
    for comp in [Component::A, Component::B] {
        for bin in 0..n_phi {
            let n = comp.range().mode_of_bin(bin, n_phi);
            let sign = if comp == Component::A { ModeSign::Minus } else { ModeSign::Plus };
            let mut m = mode_operator(n, sign, ops).matrix;
            let constrained = map.is_constrained(map.block(comp, bin));
            if constrained {
                m.row_mut(n_r).fill(T::one());
            }
            let lu = Lu::factor(m.view()).map_err(|_| {
                DbarError::Resolution(format!("mode operator for n = {n} is singular at Nr = {n_r}"))
            })?;
            match comp {
                Component::A => {
                    bank.a.push(lu);
                    bank.constrained_a.push(constrained);
                }
                Component::B => {
                    bank.b.push(lu);
                    bank.constrained_b.push(constrained);
                }
            }
        }
    }
    Ok(bank)
}

/// `q·e^{k̄z̄ − kz − iφ}` and `q̄·e^{kz − k̄z̄ + iφ}` on the grid.
pub fn modulated_potentials<T: Real>(
    q: &PhysicalField<T>,
    k: C<T>,
    grid: &Grid<T>,
) -> Result<(PhysicalField<T>, PhysicalField<T>)> {
    let shift = grid.physical_from_fn(|_, p| C::from_polar(T::one(), -p));
    let fwd = phase_modulated(q, k, grid, PhaseSign::Forward)?.mul(&shift);
    let bwd = phase_modulated(&q.conj(), k, grid, PhaseSign::Backward)?.mul(&shift.conj());
    Ok((fwd, bwd))
}

/// One fixed-point step. Returns the next iterates in coefficient space.
pub fn picard_step<T: Real>(
    phi1: &SpectralField<T>,
    phi2: &SpectralField<T>,
    q_fwd: &PhysicalField<T>,
    q_bwd: &PhysicalField<T>,
    bank: &ModeSolveBank<T>,
) -> Result<(SpectralField<T>, SpectralField<T>)> {
    let grid = &bank.grid;
    let p1 = grid.inverse(phi1)?;
    let p2 = grid.inverse(phi2)?;
    step_from_physical(&p1, &p2, q_fwd, q_bwd, bank)
}

fn step_from_physical<T: Real>(
    p1: &PhysicalField<T>,
    p2: &PhysicalField<T>,
    q_fwd: &PhysicalField<T>,
    q_bwd: &PhysicalField<T>,
    bank: &ModeSolveBank<T>,
) -> Result<(SpectralField<T>, SpectralField<T>)> {
    let grid = &bank.grid;
    let mut a = grid.forward(&q_fwd.mul(p2), FourierRange::Psi1)?;
    let mut b = grid.forward(&q_bwd.mul(p1), FourierRange::Psi2)?;
    let n_r = grid.n_r();
    let mut col = vec![czero::<T>(); n_r + 1];
    for (comp, field) in [(Component::A, &mut a), (Component::B, &mut b)] {
        for bin in 0..grid.n_phi() {
            for (m, v) in col.iter_mut().enumerate() {
                *v = field.coeffs[[m, bin]];
            }
            if bank.is_constrained(comp, bin) {
                col[n_r] = if comp == Component::A && bin == 0 { cone() } else { czero() };
            }
            bank.solve(comp, bin, &mut col);
            for (m, v) in col.iter().enumerate() {
                field.coeffs[[m, bin]] = *v;
            }
        }
    }
    Ok((a, b))
}

/// Options for [`solve_cgo_iterative`].
#[derive(Clone, Copy, Debug)]
pub struct PicardOptions {
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tolerance: DEFAULT_TOLERANCE, max_steps: DEFAULT_MAX_STEPS }
    }
}

/// Iterates from `Φ₁ = 1`, `Φ₂ = 0` until `Δ∞ < tolerance`.
pub fn solve_cgo_iterative<T: Real>(
    q: &PhysicalField<T>,
    k: C<T>,
    bank: &ModeSolveBank<T>,
    options: PicardOptions,
) -> Result<(CgoSolution<T>, IterationTrace)> {
    let grid = &bank.grid;
    grid.check_shape(q.dim(), "potential")?;
    let report = resolution_check(q, k, grid, RESOLUTION_THRESHOLD)?;
    if !report.passed {
        warn!(
            "q·e^(k̄z̄−kz) not resolved at Nr={} Nφ={} for k = {k} (trailing {:.1e}/{:.1e})",
            grid.n_r(),
            grid.n_phi(),
            report.trailing_chebyshev,
            report.trailing_fourier
        );
    }
    let (q_fwd, q_bwd) = modulated_potentials(q, k, grid)?;
    let mut trace = IterationTrace {
        deltas: Vec::new(),
        steps: 0,
        converged: false,
        tolerance: options.tolerance,
        k: Complex64::new(k.re.to_f64_lossy(), k.im.to_f64_lossy()),
        resolution: (grid.n_r(), grid.n_phi()),
    };
    let mut p1 = PhysicalField::from_fn(grid.n_r(), grid.n_phi(), |_| cone());
    let mut p2 = PhysicalField::zeros(grid.n_r(), grid.n_phi());
    let mut current = (grid.zero_spectral(FourierRange::Psi1), grid.zero_spectral(FourierRange::Psi2));
    let mut growing = 0usize;
    while trace.steps < options.max_steps {
        let (a, b) = step_from_physical(&p1, &p2, &q_fwd, &q_bwd, bank)?;
        let n1 = grid.inverse(&a)?;
        let n2 = grid.inverse(&b)?;
        trace.steps += 1;
        if !(n1.all_finite() && n2.all_finite()) {
            trace.deltas.push(f64::INFINITY);
            return Err(DbarError::Divergence { trace: Box::new(trace) });
        }
        let delta = (n1.max_diff(&p1) + n2.max_diff(&p2)).to_f64_lossy();
        if trace.deltas.last().is_some_and(|&prev| delta > prev) {
            growing += 1;
        } else {
            growing = 0;
        }
        trace.deltas.push(delta);
        debug!("picard k={k} step {}: Δ∞ = {delta:.3e}", trace.steps);
        p1 = n1;
        p2 = n2;
        current = (a, b);
        if delta < options.tolerance {
            trace.converged = true;
            break;
        }
        if growing >= DIVERGENCE_WINDOW {
            return Err(DbarError::Divergence { trace: Box::new(trace) });
        }
    }
    if !trace.converged {
        return Err(DbarError::NonConvergence { trace: Box::new(trace) });
    }
    let (f1, f2) = current;
    let (tc, tf) = CgoSolution::trailing(&f1, &f2);
    let reflection = reflection_iterative(&f2);
    let solution = CgoSolution {
        k,
        gauge: Gauge::Phi,
        field1: f1,
        field2: f2,
        gamma: None,
        reflection: Some(reflection),
        diagnostics: CgoDiagnostics { condition_residual: 0.0, trailing_chebyshev: tc, trailing_fourier: tf },
    };
    Ok((solution, trace))
}

/// `R = 2 Σ_α conj(b_{1α})`: twice the conjugated rim value of mode 1 of `Φ₂`.
pub fn reflection_iterative<T: Real>(phi2: &SpectralField<T>) -> C<T> {
    let b1: C<T> = phi2.coeffs.column(1).iter().copied().sum();
    (b1 * T::lit(2.0)).conj()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;
    use crate::spectral::make_grid;

    #[test]
    fn bank_boundary_rows() {
        let g = make_grid::<f64>(8, 8).unwrap();
        let bank = build_mode_bank(&g).unwrap();
        assert_eq!(bank.len(), 16);
        // (D − 0·R) a = 0 with rim value 1 → constant 1
        let mut rhs = vec![C::new(0.0, 0.0); 9];
        rhs[8] = C::new(1.0, 0.0);
        bank.solve(Component::A, 0, &mut rhs);
        assert!((rhs[0] - C::new(1.0, 0.0)).norm() < 1e-14);
        assert!(rhs[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn zero_potential_is_fixed_point() {
        let g = make_grid::<f64>(8, 8).unwrap();
        let bank = build_mode_bank(&g).unwrap();
        let q = PhysicalField::zeros(8, 8);
        let (sol, trace) = solve_cgo_iterative(&q, C::new(2.0, 1.0), &bank, PicardOptions::default()).unwrap();
        assert_eq!(trace.steps, 1);
        assert_eq!(sol.reflection.unwrap().norm(), 0.0);
        assert!(sol.field2.max_abs() == 0.0);
    }

    #[test]
    fn first_step_populates_mode_one_only() {
        let g = make_grid::<f64>(16, 16).unwrap();
        let bank = build_mode_bank(&g).unwrap();
        let q = Potential::characteristic().sample(&g).unwrap();
        let (fwd, bwd) = modulated_potentials(&q, C::new(0.0, 0.0), &g).unwrap();
        let mut phi1 = g.zero_spectral(FourierRange::Psi1);
        phi1.set(0, 0, C::new(1.0, 0.0));
        let phi2 = g.zero_spectral(FourierRange::Psi2);
        let (a, b) = picard_step(&phi1, &phi2, &fwd, &bwd, &bank).unwrap();
        for bin in 0..16 {
            let col = b.coeffs.column(bin).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            if bin == 1 {
                assert!(col > 0.1);
            } else {
                assert!(col < 1e-14, "bin {bin}: {col}");
            }
        }
        let rims = a.rim_modes();
        assert!((rims[0] - C::new(1.0, 0.0)).norm() < 1e-14);
        for n in 1..8 {
            assert!(rims[n].norm() < 1e-14);
        }
    }

    #[test]
    fn trace_last_delta() {
        let t = IterationTrace {
            deltas: vec![1.0, 0.5],
            steps: 2,
            converged: false,
            tolerance: 1e-10,
            k: Complex64::new(0.0, 0.0),
            resolution: (4, 4),
        };
        assert_eq!(t.last_delta(), 0.5);
    }
}
