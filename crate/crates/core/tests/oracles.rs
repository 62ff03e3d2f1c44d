//! Known-answer checks for each module against closed forms and
//! independent computations.

use dbar_core::bessel::{bessel_i, exact_fundamental};
use dbar_core::cgo::{condition_rows, solve_cgo, solve_gamma, Gauge};
use dbar_core::fundamental::{apply_tau, assemble, solve_basis, Component, IndexMap};
use dbar_core::picard::{build_mode_bank, solve_cgo_iterative, PicardOptions};
use dbar_core::potential::{load_sampled, save_sampled, Potential};
use dbar_core::reflection::{
    compare_asym, r_asym, sweep, Method, ResolutionPolicy, Rung, SweepConfig,
};
use dbar_core::spectral::FourierRange;
use dbar_core::{Complex64, DbarError, Grid32, Grid64, PhysicalField64};

fn unit(grid: &Grid64) -> PhysicalField64 {
    Potential::characteristic().sample(grid).unwrap()
}

fn stacked(grid: &Grid64, p1: &PhysicalField64, p2: &PhysicalField64) -> Vec<Complex64> {
    let map = IndexMap { n_r: grid.n_r(), n_phi: grid.n_phi() };
    let a = grid.forward(p1, FourierRange::Psi1).unwrap();
    let b = grid.forward(p2, FourierRange::Psi2).unwrap();
    let mut x = vec![Complex64::new(0.0, 0.0); map.dim()];
    for ((m, bin), z) in a.coeffs.indexed_iter() {
        x[map.index(Component::A, bin, m)] = *z;
    }
    for ((m, bin), z) in b.coeffs.indexed_iter() {
        x[map.index(Component::B, bin, m)] = *z;
    }
    x
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn holomorphic_exponential_is_in_the_kernel() {
    let g = Grid64::new(32, 64).unwrap();
    let op = assemble(&PhysicalField64::zeros(32, 64), &g).unwrap();
    for k in [Complex64::new(1.0, 0.0), Complex64::new(0.3, -0.8)] {
        let e = g.physical_from_fn(|r, p| (k * Complex64::from_polar(r, p)).exp());
        let x = stacked(&g, &e, &PhysicalField64::zeros(32, 64));
        assert!(max_norm(&op.apply(&x)) <= 1e-10);
    }
}

#[test]
fn bessel_pair_satisfies_the_assembled_system() {
    let g = Grid64::new(32, 64).unwrap();
    let op = assemble(&unit(&g), &g).unwrap();
    let (p1, p2) = exact_fundamental(1, &g).unwrap();
    let x = stacked(&g, &p1, &p2);
    assert!(max_norm(&op.apply(&x)) <= 1e-10);
}

#[test]
fn replaced_rows_read_rim_values() {
    let g = Grid64::new(8, 8).unwrap();
    let op = assemble(&unit(&g), &g).unwrap();
    let (tau, rhs) = apply_tau(&op, 1).unwrap();
    // a function vanishing at r = 1: (1 − r²) e^{iφ}
    let f = g.physical_from_fn(|r, p| Complex64::from_polar(1.0 - r * r, p));
    let x = stacked(&g, &f, &PhysicalField64::zeros(8, 8));
    let y = tau.apply(&x);
    let map = tau.index_map;
    for block in (0..map.block_count()).filter(|&b| map.is_constrained(b)) {
        assert!(y[block * 9 + 8].norm() < 1e-14);
    }
    assert_eq!(rhs.iter().filter(|z| z.norm() != 0.0).count(), 1);
}

#[test]
fn unit_potential_basis_is_spectrally_resolved() {
    let g = Grid64::new(32, 64).unwrap();
    let b = solve_basis(&unit(&g), &g).unwrap();
    for j in 0..64 {
        assert!(b.psi1[j].trailing_chebyshev() <= 1e-12);
        assert!(b.psi2[j].trailing_chebyshev() <= 1e-12);
    }
    assert!(b.diagnostics.condition.is_finite() && b.diagnostics.condition > 1.0);
    assert!(b.diagnostics.relative_residual <= 1e-14);
}

#[test]
fn weights_at_k1_decay_to_rounding() {
    let g = Grid64::new(32, 64).unwrap();
    let b = solve_basis(&unit(&g), &g).unwrap();
    let cond = condition_rows(&b, Complex64::new(1.0, 0.0)).unwrap();
    let gamma = solve_gamma(&cond).unwrap();
    assert!(gamma[0].norm() > 0.1);
    assert!(gamma[24..32].iter().all(|z| z.norm() < 1e-15), "{:?}", &gamma[24..32]);
}

#[test]
fn k1_solution_is_real_and_resolved() {
    let g = Grid64::new(32, 64).unwrap();
    let b = solve_basis(&unit(&g), &g).unwrap();
    let sol = solve_cgo(&b, Complex64::new(1.0, 0.0), Gauge::Psi).unwrap();
    assert!(sol.reflection.unwrap().im.abs() <= 1e-10);
    assert!(sol.diagnostics.trailing_chebyshev <= 1e-12);
    assert!(sol.diagnostics.trailing_fourier <= 1e-12);
    assert!(sol.diagnostics.condition_residual <= 1e-12);
}

#[test]
fn zero_potential_reflection_vanishes() {
    let g = Grid64::new(16, 16).unwrap();
    let b = solve_basis(&PhysicalField64::zeros(16, 16), &g).unwrap();
    let sol = solve_cgo(&b, Complex64::new(0.4, 0.2), Gauge::Psi).unwrap();
    assert_eq!(sol.reflection.unwrap().norm(), 0.0);
}

#[test]
fn reflection_at_k10_is_near_the_asymptote() {
    let g = Grid64::new(40, 128).unwrap();
    let bank = build_mode_bank(&g).unwrap();
    let (sol, _) = solve_cgo_iterative(&unit(&g), Complex64::new(10.0, 0.0), &bank, PicardOptions::default()).unwrap();
    let envelope = 1.0 / (std::f64::consts::PI * 1000.0).sqrt();
    let diff = (sol.reflection.unwrap().re - r_asym(10.0).unwrap()).abs();
    assert!(diff <= 0.05 * envelope, "{diff}");
}

#[test]
fn fundamental_sweep_near_zero() {
    let ks: Vec<Complex64> = (0..11).map(|i| Complex64::new(i as f64 * 0.1, 0.0)).collect();
    let cfg = SweepConfig {
        method: Method::Fundamental,
        policy: ResolutionPolicy::Fixed { n_r: 32, n_phi: 64 },
        ..SweepConfig::default()
    };
    let s = sweep(&Potential::characteristic(), &ks, &cfg).unwrap();
    let rs: Vec<Complex64> = s.samples.iter().map(|x| *x.reflection.as_ref().unwrap()).collect();
    let r0 = 2.0 * bessel_i(1, 1.0f64).unwrap() / bessel_i(0, 1.0).unwrap();
    assert!((rs[0].re - 0.8928).abs() < 1e-4);
    assert!((rs[0].re - r0).abs() < 1e-12);
    assert!(rs.iter().all(|r| r.im.abs() < 1e-9));
    // smooth: second differences small against the values
    for w in rs.windows(3) {
        assert!((w[0].re - 2.0 * w[1].re + w[2].re).abs() < 0.05);
    }

    let picard = SweepConfig { method: Method::Picard, ..cfg };
    let p = sweep(&Potential::characteristic(), &ks, &picard).unwrap();
    for (a, b) in s.samples.iter().zip(&p.samples) {
        let d = (a.reflection.as_ref().unwrap() - b.reflection.as_ref().unwrap()).norm();
        assert!(d <= 1e-9, "k={} diff {d}", a.k);
    }
}

#[test]
fn sweep_records_failures_and_keeps_order() {
    let ks = [Complex64::new(3.0, 0.0), Complex64::new(0.5, 0.0), Complex64::new(1.5, 0.0)];
    let cfg = SweepConfig {
        policy: ResolutionPolicy::Ladder(vec![Rung { k_max: 2.0, n_r: 24, n_phi: 48 }]),
        workers: 2,
        ..SweepConfig::default()
    };
    let s = sweep(&Potential::characteristic(), &ks, &cfg).unwrap();
    let order: Vec<f64> = s.samples.iter().map(|x| x.k.re).collect();
    assert_eq!(order, vec![0.5, 1.5, 3.0]);
    assert_eq!(s.failures(), 1);
    assert_eq!(s.samples[2].reflection.as_ref().unwrap_err().kind, "resolution");
    assert!(s.samples[..2].iter().all(|x| x.steps.is_some()));
    assert!(sweep(&Potential::<f64>::characteristic(), &[], &cfg).is_err());
}

#[test]
fn asym_table_is_larger_at_small_k() {
    let ks: Vec<Complex64> = (0..9).map(|i| Complex64::new(1.0 + 0.25 * i as f64, 0.0))
        .chain((0..9).map(|i| Complex64::new(12.0 + 0.25 * i as f64, 0.0)))
        .collect();
    let s = sweep(&Potential::characteristic(), &ks, &SweepConfig::default()).unwrap();
    let rows = compare_asym(&s);
    let small = rows.iter().filter(|r| r.k < 4.0).map(|r| (r.r.re - r.r_asym).abs()).fold(0.0, f64::max);
    let large = rows.iter().filter(|r| r.k > 10.0).map(|r| (r.r.re - r.r_asym).abs()).fold(0.0, f64::max);
    assert!(small > 5.0 * large, "{small} vs {large}");
}

#[test]
fn non_convergence_carries_the_trace() {
    let g = Grid64::new(16, 32).unwrap();
    let bank = build_mode_bank(&g).unwrap();
    let err = solve_cgo_iterative(&unit(&g), Complex64::new(1.0, 0.0), &bank, PicardOptions { tolerance: 1e-10, max_steps: 3 })
        .unwrap_err();
    match err {
        DbarError::NonConvergence { trace } => {
            assert_eq!(trace.steps, 3);
            assert_eq!(trace.deltas.len(), 3);
            assert!(!trace.converged);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn strong_potential_diverges() {
    let g = Grid64::new(16, 32).unwrap();
    let bank = build_mode_bank(&g).unwrap();
    let q = Potential::characteristic().with_amplitude(Complex64::new(20.0, 0.0)).sample(&g).unwrap();
    let err = solve_cgo_iterative(&q, Complex64::new(0.5, 0.0), &bank, PicardOptions::default()).unwrap_err();
    assert_eq!(err.kind(), "divergence", "{err}");
}

#[test]
fn potential_file_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.txt");
    let g = Grid64::new(4, 4).unwrap();
    save_sampled(&good, &unit(&g)).unwrap();
    let text = std::fs::read_to_string(&good).unwrap();

    let bad_header = dir.path().join("h.txt");
    std::fs::write(&bad_header, text.replacen("dbar-potential", "something-else", 1)).unwrap();
    assert_eq!(load_sampled::<f64>(&bad_header).unwrap_err().kind(), "malformed_header");

    let truncated = dir.path().join("t.txt");
    let lines: Vec<&str> = text.lines().collect();
    std::fs::write(&truncated, lines[..lines.len() - 3].join("\n")).unwrap();
    assert_eq!(load_sampled::<f64>(&truncated).unwrap_err().kind(), "shape_mismatch");

    let nan = dir.path().join("n.txt");
    let mut l: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
    let last = l.len() - 1;
    l[last] = l[last].rsplitn(2, ',').nth(1).unwrap().to_string() + ",NaN";
    std::fs::write(&nan, l.join("\n")).unwrap();
    assert_eq!(load_sampled::<f64>(&nan).unwrap_err().kind(), "non_finite");

    let garbage = dir.path().join("g.txt");
    l[last] = "1,2,x,y".into();
    std::fs::write(&garbage, l.join("\n")).unwrap();
    assert_eq!(load_sampled::<f64>(&garbage).unwrap_err().kind(), "malformed_record");
}

#[test]
fn single_precision_basis() {
    let g = Grid32::new(12, 16).unwrap();
    let q = Potential::<f32>::characteristic().sample(&g).unwrap();
    let b = solve_basis(&q, &g).unwrap();
    let (e1, _) = exact_fundamental(1, &g).unwrap();
    assert!(g.inverse(&b.psi1[0]).unwrap().max_diff(&e1) < 1e-4);
}
