use std::process::ExitCode;

use anyhow::{bail, Result};
use dbar_core::bessel::exact_fundamental;
use dbar_core::cgo::{change_gauge, solve_cgo, CgoSolution, Gauge};
use dbar_core::fundamental::solve_basis;
use dbar_core::picard::{build_mode_bank, solve_cgo_iterative, PicardOptions};
use dbar_core::potential::{autotune_resolution, load_sampled, Potential, RESOLUTION_THRESHOLD};
use dbar_core::reflection::{compare_asym, sweep, Method, ResolutionPolicy, SweepConfig};
use dbar_core::spectral::{write_coefficients, PhysicalField, SpectralField};
use dbar_core::{Grid64, C};
use num_complex::Complex64;
use serde_json::json;

use crate::output::{num, RunDir};
use crate::{Cli, Command, GaugeArg, IterationArgs, MethodArg, PotentialArgs, ResolutionArgs};

const DEFAULT_RESOLUTION: (usize, usize) = (32, 64);
/// Cap on `(Nr + 1)·Nφ` for `--autotune`.
const AUTOTUNE_MAX_POINTS: usize = 1201 * 4400;

pub fn run(cli: &Cli) -> Result<ExitCode> {
    if cli.workers == 0 {
        bail!(dbar_core::DbarError::InvalidArgument("--workers must be at least 1".into()));
    }
    let config = serde_json::to_value(&cli.command)?;
    match &cli.command {
        Command::Fundamental(a) => {
            validate_resolution(&a.resolution)?;
            let (pot, native) = load_potential(&a.potential)?;
            let grid = make_grid(&pot, &a.resolution, native, Complex64::new(0.0, 0.0))?;
            let q = pot.sample(&grid)?;
            let basis = solve_basis(&q, &grid)?;
            let mut out = RunDir::create(&cli.out)?;
            for j in 1..=basis.len() {
                out.write(&format!("basis/psi1_j{j:04}.csv"), &coefficients_csv(&basis.psi1[j - 1])?)?;
                out.write(&format!("basis/psi2_j{j:04}.csv"), &coefficients_csv(&basis.psi2[j - 1])?)?;
            }
            let d = basis.diagnostics;
            let result = json!({
                "resolution": [grid.n_r(), grid.n_phi()],
                "columns": basis.len(),
                "condition_estimate": d.condition,
                "relative_residual": d.relative_residual,
                "components": d.components,
                "potential_fingerprint": format!("{:016x}", basis.fingerprint),
            });
            out.write_json("result.json", &result)?;
            out.finish("fundamental", config, result)?;
        }
        Command::Cgo(a) => {
            validate_resolution(&a.resolution)?;
            validate_iteration(&a.iteration)?;
            let (pot, native) = load_potential(&a.potential)?;
            let grid = make_grid(&pot, &a.resolution, native, a.k)?;
            let q = pot.sample(&grid)?;
            let method = a.method.unwrap_or(if a.k.norm() <= 1.0 { MethodArg::Fundamental } else { MethodArg::Picard });
            let gauge = match a.gauge {
                GaugeArg::Psi => Gauge::Psi,
                GaugeArg::Phi => Gauge::Phi,
            };
            let (sol, steps) = match method {
                MethodArg::Fundamental => (solve_cgo(&solve_basis(&q, &grid)?, a.k, gauge)?, None),
                MethodArg::Picard => {
                    let bank = build_mode_bank(&grid)?;
                    let (sol, trace) = solve_cgo_iterative(&q, a.k, &bank, picard_options(&a.iteration))?;
                    (change_gauge(&sol, &grid, gauge)?, Some(trace.steps))
                }
            };
            let mut out = RunDir::create(&cli.out)?;
            write_fields(&mut out, &sol)?;
            let r = sol.reflection.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            let result = json!({
                "k": [a.k.re, a.k.im],
                "R_re": r.re,
                "R_im": r.im,
                "gauge": sol.gauge.name(),
                "method": method_name(method),
                "resolution": [grid.n_r(), grid.n_phi()],
                "steps": steps,
                "residuals": {
                    "condition_residual": sol.diagnostics.condition_residual,
                    "trailing_chebyshev": sol.diagnostics.trailing_chebyshev,
                    "trailing_fourier": sol.diagnostics.trailing_fourier,
                },
            });
            out.write_json("result.json", &result)?;
            out.finish("cgo", config, result)?;
        }
        Command::Iterate(a) => {
            validate_resolution(&a.resolution)?;
            validate_iteration(&a.iteration)?;
            let (pot, native) = load_potential(&a.potential)?;
            let grid = make_grid(&pot, &a.resolution, native, a.k)?;
            let q = pot.sample(&grid)?;
            let bank = build_mode_bank(&grid)?;
            let (sol, trace) = solve_cgo_iterative(&q, a.k, &bank, picard_options(&a.iteration))?;
            let mut out = RunDir::create(&cli.out)?;
            write_fields(&mut out, &sol)?;
            let r = sol.reflection.expect("iterative solutions carry R");
            let result = json!({
                "k": [a.k.re, a.k.im],
                "steps": trace.steps,
                "deltas": trace.deltas,
                "converged": trace.converged,
                "tolerance": trace.tolerance,
                "resolution": [grid.n_r(), grid.n_phi()],
                "R": [r.re, r.im],
            });
            out.write_json("trace.json", &result)?;
            out.finish("iterate", config, result)?;
        }
        Command::Sweep(a) => {
            validate_iteration(&a.iteration)?;
            if a.n == 0 {
                bail!(dbar_core::DbarError::InvalidArgument("--n must be at least 1".into()));
            }
            if !(a.kmin.is_finite() && a.kmax.is_finite()) || a.kmin < 0.0 || a.kmax < a.kmin {
                bail!(dbar_core::DbarError::InvalidArgument(format!(
                    "need 0 ≤ kmin ≤ kmax, got {} and {}",
                    a.kmin, a.kmax
                )));
            }
            let (pot, native) = load_potential(&a.potential)?;
            let method = match a.method {
                MethodArg::Fundamental => Method::Fundamental,
                MethodArg::Picard => Method::Picard,
            };
            let policy = match (a.nr.or(native.map(|r| r.0)), a.nphi.or(native.map(|r| r.1))) {
                (Some(n_r), Some(n_phi)) => ResolutionPolicy::Fixed { n_r, n_phi },
                (None, None) if method == Method::Fundamental => {
                    ResolutionPolicy::Fixed { n_r: DEFAULT_RESOLUTION.0, n_phi: DEFAULT_RESOLUTION.1 }
                }
                (None, None) => ResolutionPolicy::default_ladder(),
                _ => bail!(dbar_core::DbarError::InvalidArgument("give both --nr and --nphi or neither".into())),
            };
            let ks: Vec<Complex64> = (0..a.n)
                .map(|i| {
                    let t = if a.n == 1 { 0.0 } else { i as f64 / (a.n - 1) as f64 };
                    Complex64::new(a.kmin + (a.kmax - a.kmin) * t, 0.0)
                })
                .collect();
            let cfg = SweepConfig { method, policy, picard: picard_options(&a.iteration), workers: cli.workers };
            let mut result = sweep(&pot, &ks, &cfg)?;
            if a.asym {
                result = result.with_asymptotics();
            }
            let mut csv = String::from("k_re,k_im,R_re,R_im,R_asym,residual,steps\n");
            let mut failures = Vec::new();
            for s in &result.samples {
                let (rr, ri) = match &s.reflection {
                    Ok(r) => (num(r.re), num(r.im)),
                    Err(e) => {
                        failures.push(json!({ "k": [s.k.re, s.k.im], "kind": e.kind, "message": e.message }));
                        (String::new(), String::new())
                    }
                };
                let asym = s.r_asym.map(num).unwrap_or_default();
                let residual = match (&s.reflection, s.r_asym) {
                    (Ok(r), Some(ra)) => num(s.k.re.powf(2.5) * (r.re - ra)),
                    _ => String::new(),
                };
                let steps = s.steps.map(|n| n.to_string()).unwrap_or_default();
                csv.push_str(&format!("{},{},{rr},{ri},{asym},{residual},{steps}\n", num(s.k.re), num(s.k.im)));
            }
            let mut out = RunDir::create(&cli.out)?;
            out.write("sweep.csv", csv.as_bytes())?;
            let rows = compare_asym(&result);
            let max_residual = (a.asym && !rows.is_empty())
                .then(|| rows.iter().map(|r| r.residual.norm()).fold(0.0, f64::max));
            let diagnostics = json!({
                "samples": result.samples.len(),
                "failures": failures,
                "max_abs_scaled_residual": max_residual,
            });
            out.finish("sweep", config, diagnostics)?;
        }
        Command::Selftest => return selftest(),
    }
    Ok(ExitCode::SUCCESS)
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Fundamental => Method::Fundamental.name(),
        MethodArg::Picard => Method::Picard.name(),
    }
}

fn picard_options(a: &IterationArgs) -> PicardOptions {
    PicardOptions { tolerance: a.tol, max_steps: a.max_steps }
}

fn validate_iteration(a: &IterationArgs) -> Result<()> {
    if !(a.tol.is_finite() && a.tol > 0.0) {
        bail!(dbar_core::DbarError::InvalidArgument(format!("--tol must be positive, got {}", a.tol)));
    }
    if a.max_steps == 0 {
        bail!(dbar_core::DbarError::InvalidArgument("--max-steps must be at least 1".into()));
    }
    Ok(())
}

fn validate_resolution(a: &ResolutionArgs) -> Result<()> {
    if a.nr == Some(0) || a.nphi == Some(0) {
        bail!(dbar_core::DbarError::InvalidArgument("resolution must be positive".into()));
    }
    Ok(())
}

/// Potential plus the resolution it is tied to (sampled files only).
fn load_potential(a: &PotentialArgs) -> Result<(Potential<f64>, Option<(usize, usize)>)> {
    let amplitude = a.amplitude;
    if let Some(path) = &a.potential_file {
        let pot = load_sampled::<f64>(path)?;
        let native = match &pot.kind {
            dbar_core::potential::PotentialKind::Sampled(f) => {
                let (rows, cols) = f.dim();
                Some((rows - 1, cols))
            }
            _ => None,
        };
        return Ok((pot.with_amplitude(amplitude), native));
    }
    if let Some(c) = &a.radial {
        return Ok((Potential::radial_profile(c.clone()).with_amplitude(amplitude), None));
    }
    Ok((Potential::characteristic().with_amplitude(amplitude), None))
}

fn make_grid(
    pot: &Potential<f64>,
    a: &ResolutionArgs,
    native: Option<(usize, usize)>,
    k: Complex64,
) -> Result<Grid64> {
    let n_r = a.nr.or(native.map(|r| r.0)).unwrap_or(DEFAULT_RESOLUTION.0);
    let n_phi = a.nphi.or(native.map(|r| r.1)).unwrap_or(DEFAULT_RESOLUTION.1);
    if a.autotune {
        let (grid, report) = autotune_resolution(pot, k, (n_r, n_phi), RESOLUTION_THRESHOLD, AUTOTUNE_MAX_POINTS)?;
        log::info!("autotuned to Nr={} Nφ={} ({report:?})", grid.n_r(), grid.n_phi());
        return Ok(grid);
    }
    Ok(Grid64::new(n_r, n_phi)?)
}

fn coefficients_csv(field: &SpectralField<f64>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_coefficients(&mut buf, field)?;
    Ok(buf)
}

fn write_fields(out: &mut RunDir, sol: &CgoSolution<f64>) -> Result<()> {
    let stem = sol.gauge.name();
    out.write(&format!("{stem}1.csv"), &coefficients_csv(&sol.field1)?)?;
    out.write(&format!("{stem}2.csv"), &coefficients_csv(&sol.field2)?)?;
    Ok(())
}

fn selftest() -> Result<ExitCode> {
    let grid = Grid64::new(32, 64)?;
    let q = Potential::characteristic().sample(&grid)?;
    let basis = solve_basis(&q, &grid)?;
    let mut max_err: f64 = 0.0;
    for j in (1..=grid.n_phi()).filter(|&j| j != grid.n_phi() / 2 + 1) {
        let (e1, e2) = exact_fundamental(j, &grid)?;
        max_err = max_err
            .max(grid.inverse(&basis.psi1[j - 1])?.max_diff(&e1))
            .max(grid.inverse(&basis.psi2[j - 1])?.max_diff(&e2));
    }
    let bessel_ok = max_err <= 1e-12;
    println!("{} bessel-fundamental Nr=32 Nphi=64 max_err={max_err:.3e} (tol 1e-12)", verdict(bessel_ok));

    let k = C::new(1.0, 0.0);
    let direct = solve_cgo(&basis, k, Gauge::Phi)?;
    let bank = build_mode_bank(&grid)?;
    let (iter, _) = solve_cgo_iterative(&q, k, &bank, PicardOptions { tolerance: 1e-13, max_steps: 100 })?;
    let diff = field_diff(&grid, &direct.field1, &iter.field1)? + field_diff(&grid, &direct.field2, &iter.field2)?;
    let dr = (direct.reflection.unwrap_or_default() - iter.reflection.unwrap_or_default()).norm();
    let cross_ok = diff <= 1e-11 && dr <= 1e-10;
    println!("{} cross-method k=1 field_diff={diff:.3e} (tol 1e-11) R_diff={dr:.3e} (tol 1e-10)", verdict(cross_ok));
    Ok(if bessel_ok && cross_ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn field_diff(grid: &Grid64, a: &SpectralField<f64>, b: &SpectralField<f64>) -> Result<f64> {
    let pa: PhysicalField<f64> = grid.inverse(a)?;
    Ok(pa.max_diff(&grid.inverse(b)?))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
