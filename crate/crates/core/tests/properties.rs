//! Invariants checked over randomized inputs.

use std::sync::OnceLock;

use dbar_core::cgo::{condition_residual, condition_rows, reflection_fundamental, solve_cgo, solve_gamma, Gauge, gauge_factors};
use dbar_core::fundamental::{assemble, solve_basis, FundamentalBasis};
use dbar_core::parallel::parallel_map;
use dbar_core::picard::{build_mode_bank, modulated_potentials, picard_step, solve_cgo_iterative, ModeSolveBank, PicardOptions};
use dbar_core::potential::{load_sampled, save_sampled, Potential};
use dbar_core::spectral::{
    diff_matrix, div_matrix, mult_r_matrix, read_coefficients, write_coefficients, FourierRange, Grid, SpectralField,
};
use dbar_core::{Complex64, Grid64, PhysicalField64};
use proptest::prelude::*;

fn sizes() -> impl Strategy<Value = (usize, usize)> {
    (2usize..20, 2usize..12).prop_map(|(nr, h)| (nr, 2 * h))
}

fn field_from(seed: &[f64], nr: usize, nphi: usize) -> PhysicalField64 {
    PhysicalField64::from_fn(nr, nphi, |(j, i)| {
        let t = (j * nphi + i) % seed.len();
        Complex64::new(seed[t], seed[(t + 7) % seed.len()] * 0.5)
    })
}

fn unit_basis() -> &'static FundamentalBasis<f64> {
    static B: OnceLock<FundamentalBasis<f64>> = OnceLock::new();
    B.get_or_init(|| {
        let g = Grid64::new(32, 64).unwrap();
        solve_basis(&Potential::characteristic().sample(&g).unwrap(), &g).unwrap()
    })
}

fn unit_bank() -> &'static ModeSolveBank<f64> {
    static B: OnceLock<ModeSolveBank<f64>> = OnceLock::new();
    B.get_or_init(|| build_mode_bank(&Grid64::new(32, 64).unwrap()).unwrap())
}

/// Chebyshev series derivative via `T_m'(cos θ) = m sin(mθ)/sin θ`.
fn cheb_derivative(c: &[f64], l: f64) -> f64 {
    let th = l.acos();
    c.iter().enumerate().map(|(m, v)| v * m as f64 * (m as f64 * th).sin() / th.sin()).sum()
}

fn cheb_value(c: &[f64], l: f64) -> f64 {
    let th = l.acos();
    c.iter().enumerate().map(|(m, v)| v * (m as f64 * th).cos()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn physical_round_trip((nr, nphi) in sizes(), seed in prop::collection::vec(-2.0f64..2.0, 16)) {
        let g = Grid64::new(nr, nphi).unwrap();
        let f = field_from(&seed, nr, nphi);
        for range in [FourierRange::Psi1, FourierRange::Psi2] {
            let back = g.inverse(&g.forward(&f, range).unwrap()).unwrap();
            prop_assert!(back.max_diff(&f) < 1e-13);
        }
    }

    #[test]
    fn spectral_round_trip((nr, nphi) in sizes(), seed in prop::collection::vec(-1.0f64..1.0, 16)) {
        let g = Grid64::new(nr, nphi).unwrap();
        let f = field_from(&seed, nr, nphi);
        let s = SpectralField { coeffs: f.values.clone(), range: FourierRange::Psi2 };
        let back = g.forward(&g.inverse(&s).unwrap(), FourierRange::Psi2).unwrap();
        let err = back.coeffs.iter().zip(s.coeffs.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-13);
    }

    #[test]
    fn single_precision_round_trip((nr, nphi) in sizes(), seed in prop::collection::vec(-1.0f32..1.0, 8)) {
        let g = Grid::<f32>::new(nr, nphi).unwrap();
        let f = dbar_core::PhysicalField32::from_fn(nr, nphi, |(j, i)| {
            num_complex::Complex32::new(seed[(j + i) % 8], seed[(j * 3 + i) % 8])
        });
        let back = g.inverse(&g.forward(&f, FourierRange::Psi1).unwrap()).unwrap();
        prop_assert!(back.max_diff(&f) < 1e-5);
    }

    #[test]
    fn forward_transform_is_linear((nr, nphi) in sizes(), a in prop::collection::vec(-1.0f64..1.0, 8), b in prop::collection::vec(-1.0f64..1.0, 8), s in -3.0f64..3.0) {
        let g = Grid64::new(nr, nphi).unwrap();
        let fa = field_from(&a, nr, nphi);
        let fb = field_from(&b, nr, nphi);
        let sum = PhysicalField64::new(&fa.values + &fb.values.mapv(|z| z * s));
        let lhs = g.forward(&sum, FourierRange::Psi1).unwrap();
        let ra = g.forward(&fa, FourierRange::Psi1).unwrap();
        let rb = g.forward(&fb, FourierRange::Psi1).unwrap();
        let err = lhs.coeffs.iter().zip(ra.coeffs.iter().zip(rb.coeffs.iter())).map(|(l, (x, y))| (l - x - y * s).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-13);
    }

    #[test]
    fn differentiation_matches_series_derivative(nr in 2usize..28, c in prop::collection::vec(-1.0f64..1.0, 28), l in -0.95f64..0.95) {
        let c = &c[..=nr.min(27)];
        let n = c.len() - 1;
        let d = diff_matrix::<f64>(n);
        let dc: Vec<f64> = (0..=n).map(|m| (0..=n).map(|a| d[[m, a]] * c[a]).sum()).collect();
        // d/dr = 2 d/dl
        let want = 2.0 * cheb_derivative(c, l);
        prop_assert!((cheb_value(&dc, l) - want).abs() < 1e-9 * (1.0 + want.abs()));
    }

    #[test]
    fn division_undoes_multiplication(nr in 2usize..40, c in prop::collection::vec(-1.0f64..1.0, 40)) {
        let mut p = c[..=nr].to_vec();
        p[nr] = 0.0;
        let m = mult_r_matrix::<f64>(nr);
        let r = div_matrix::<f64>(nr).unwrap();
        let rp = m.dot(&ndarray::Array1::from(p.clone()));
        let back = r.dot(&rp);
        let err = back.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn assembly_is_affine_in_q(seed1 in prop::collection::vec(-1.0f64..1.0, 8), seed2 in prop::collection::vec(-1.0f64..1.0, 8)) {
        let g = Grid64::new(4, 6).unwrap();
        let q1 = field_from(&seed1, 4, 6);
        let q2 = field_from(&seed2, 4, 6);
        let q12 = PhysicalField64::new(&q1.values + &q2.values);
        let a = assemble(&q12, &g).unwrap().to_dense();
        let b = assemble(&q1, &g).unwrap().to_dense();
        let c = assemble(&q2, &g).unwrap().to_dense();
        let z = assemble(&PhysicalField64::zeros(4, 6), &g).unwrap().to_dense();
        let err: f64 = (&a - &b - &c + &z).iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn basis_meets_rim_conditions(eps in 0.0f64..1.5, w in -2.0f64..2.0) {
        let g = Grid64::new(12, 12).unwrap();
        let q = g.physical_from_fn(|r, p| Complex64::new(eps * (1.0 + r * (p + w).cos()), 0.3 * r * r * p.sin()));
        let basis = solve_basis(&q, &g).unwrap();
        prop_assert!(basis.diagnostics.relative_residual < 1e-13);
        for j in 1..=12usize {
            let (a, b) = (basis.psi1[j - 1].rim_modes(), basis.psi2[j - 1].rim_modes());
            for n in 0..6i64 {
                let want = if j <= 6 && n == j as i64 - 1 { 1.0 } else { 0.0 };
                prop_assert!((a[n as usize] - want).norm() < 1e-12);
            }
            for n in -5..=0i64 {
                let want = if j > 6 && n == j as i64 - 12 { 1.0 } else { 0.0 };
                prop_assert!((b[n.rem_euclid(12) as usize] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn picard_step_enforces_rim_values(seed1 in prop::collection::vec(-1.0f64..1.0, 8), seed2 in prop::collection::vec(-1.0f64..1.0, 8), kr in -3.0f64..3.0, ki in -3.0f64..3.0) {
        let g = Grid64::new(10, 12).unwrap();
        let bank = build_mode_bank(&g).unwrap();
        let q = g.physical_from_fn(|r, p| Complex64::new(1.0 + r * p.sin(), 0.0));
        let (fwd, bwd) = modulated_potentials(&q, Complex64::new(kr, ki), &g).unwrap();
        let p1 = g.forward(&field_from(&seed1, 10, 12), FourierRange::Psi1).unwrap();
        let p2 = g.forward(&field_from(&seed2, 10, 12), FourierRange::Psi2).unwrap();
        let (a, b) = picard_step(&p1, &p2, &fwd, &bwd, &bank).unwrap();
        let (ra, rb) = (a.rim_modes(), b.rim_modes());
        for n in 0..6usize {
            let want = if n == 0 { 1.0 } else { 0.0 };
            prop_assert!((ra[n] - want).norm() < 1e-12);
        }
        for n in -5..=0i64 {
            prop_assert!(rb[n.rem_euclid(12) as usize].norm() < 1e-12);
        }
    }

    #[test]
    fn coefficient_dump_round_trip((nr, nphi) in sizes(), seed in prop::collection::vec(-1e3f64..1e3, 8)) {
        let f = field_from(&seed, nr, nphi);
        let s = SpectralField { coeffs: f.values, range: FourierRange::Psi1 };
        let mut buf = Vec::new();
        write_coefficients(&mut buf, &s).unwrap();
        let back = read_coefficients::<f64, _>(buf.as_slice(), nr, nphi, FourierRange::Psi1).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn parallel_map_matches_sequential(items in prop::collection::vec(-100.0f64..100.0, 0..64), workers in 1usize..5) {
        let f = |x: &f64| (x * 1.7).sin() / (1.0 + x * x);
        let seq: Vec<f64> = items.iter().map(f).collect();
        let par = parallel_map(&items, workers, f).unwrap();
        prop_assert_eq!(seq, par);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn reflection_depends_only_on_modulus(kappa in 0.05f64..1.0, t1 in 0.0f64..6.28, t2 in 0.0f64..6.28) {
        let b = unit_basis();
        let r0 = reflection_fundamental(b, Complex64::new(kappa, 0.0)).unwrap();
        for t in [t1, t2] {
            let r = reflection_fundamental(b, Complex64::from_polar(kappa, t)).unwrap();
            prop_assert!((r - r0).norm() < 1e-9);
        }
        prop_assert!(r0.im.abs() < 1e-10);
    }

    #[test]
    fn conjugation_symmetry_of_conditions(kr in -1.0f64..1.0, ki in -1.0f64..1.0) {
        let b = unit_basis();
        let k = Complex64::new(kr, ki);
        let a = condition_rows(b, k).unwrap();
        let c = condition_rows(b, k.conj()).unwrap();
        let err = a.matrix.iter().zip(c.matrix.iter()).map(|(x, y)| (x.conj() - y).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn asymptotic_conditions_hold_after_solve(kr in -1.0f64..1.0, ki in -1.0f64..1.0) {
        let b = unit_basis();
        let cond = condition_rows(b, Complex64::new(kr, ki)).unwrap();
        let gamma = solve_gamma(&cond).unwrap();
        prop_assert!(condition_residual(&cond, &gamma) < 1e-10);
    }

    #[test]
    fn gauges_are_consistent(kr in -1.0f64..1.0, ki in -1.0f64..1.0) {
        let b = unit_basis();
        let g = &b.grid;
        let k = Complex64::new(kr, ki);
        let psi = solve_cgo(b, k, Gauge::Psi).unwrap();
        let phi = solve_cgo(b, k, Gauge::Phi).unwrap();
        let (e1, e2) = gauge_factors(k, g);
        let d1 = g.inverse(&psi.field1).unwrap().mul(&e1).max_diff(&g.inverse(&phi.field1).unwrap());
        let d2 = g.inverse(&psi.field2).unwrap().mul(&e2).max_diff(&g.inverse(&phi.field2).unwrap());
        prop_assert!(d1 < 1e-11 && d2 < 1e-11);
    }

    #[test]
    fn converged_iterate_is_a_fixed_point(kr in 0.0f64..3.0, ki in -1.0f64..1.0) {
        let bank = unit_bank();
        let g = &bank.grid;
        let q = Potential::characteristic().sample(g).unwrap();
        let k = Complex64::new(kr, ki);
        let opts = PicardOptions::default();
        let (sol, _) = solve_cgo_iterative(&q, k, bank, opts).unwrap();
        let (fwd, bwd) = modulated_potentials(&q, k, g).unwrap();
        let (a, b) = picard_step(&sol.field1, &sol.field2, &fwd, &bwd, bank).unwrap();
        let change = g.inverse(&a).unwrap().max_diff(&g.inverse(&sol.field1).unwrap())
            + g.inverse(&b).unwrap().max_diff(&g.inverse(&sol.field2).unwrap());
        prop_assert!(change <= opts.tolerance);
    }

    #[test]
    fn sampled_potential_file_round_trip((nr, nphi) in sizes(), seed in prop::collection::vec(-5.0f64..5.0, 8)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.txt");
        let f = field_from(&seed, nr, nphi);
        save_sampled(&path, &f).unwrap();
        let g = Grid64::new(nr, nphi).unwrap();
        let back = load_sampled::<f64>(&path).unwrap().sample(&g).unwrap();
        prop_assert_eq!(back, f);
    }
}

#[test]
fn step_counts_fall_with_k() {
    let g = Grid64::new(32, 128).unwrap();
    let q = Potential::characteristic().sample(&g).unwrap();
    let bank = build_mode_bank(&g).unwrap();
    let steps: Vec<usize> = [0.1, 1.0, 10.0]
        .iter()
        .map(|&k| solve_cgo_iterative(&q, Complex64::new(k, 0.0), &bank, PicardOptions::default()).unwrap().1.steps)
        .collect();
    assert!(steps[2] <= steps[1] && steps[1] <= steps[0], "{steps:?}");
}

#[test]
fn converged_iterates_are_resolved() {
    for (nr, nphi, k) in [(32, 128, 1.0), (40, 128, 10.0)] {
        let g = Grid64::new(nr, nphi).unwrap();
        let q = Potential::characteristic().sample(&g).unwrap();
        let bank = build_mode_bank(&g).unwrap();
        let (sol, _) = solve_cgo_iterative(&q, Complex64::new(k, 0.0), &bank, PicardOptions::default()).unwrap();
        assert!(sol.diagnostics.trailing_chebyshev <= 1e-12, "{:?}", sol.diagnostics);
        assert!(sol.diagnostics.trailing_fourier <= 1e-12, "{:?}", sol.diagnostics);
    }
}
