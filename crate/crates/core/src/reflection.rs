//! `R(k)` sweeps, the large-`|k|` asymptotic for the characteristic
//! potential, and residual tables against it.

use std::collections::BTreeMap;
use std::sync::Mutex;

use log::info;

use crate::cgo::reflection_fundamental;
use crate::error::{DbarError, Result};
use crate::fundamental::{solve_basis, FundamentalBasis};
use crate::parallel::parallel_map;
use crate::picard::{build_mode_bank, solve_cgo_iterative, ModeSolveBank, PicardOptions};
use crate::potential::Potential;
use crate::scalar::{Real, C};
use crate::spectral::{FourierRange, Grid, PhysicalField};

/// Stationary-phase asymptotic `cos(2k − 3π/4)/√(πk³)` of `R` for `q ≡ 1`.
pub fn r_asym<T: Real>(k: T) -> Result<T> {
    if !(k > T::zero()) {
        return Err(DbarError::InvalidArgument(format!("asymptotic reflection needs k > 0, got {k}")));
    }
    let pi = T::PI();
    Ok((T::lit(2.0) * k - T::lit(0.75) * pi).cos() / (pi * k * k * k).sqrt())
}

/// Weak-potential approximation `conj((1/π) ∫_D q e^{k̄z̄ − kz} dA)`,
/// integrated with Clenshaw–Curtis weights in `r` and the trapezoidal rule
/// in `φ`.
pub fn reflection_born<T: Real>(q: &PhysicalField<T>, k: C<T>, grid: &Grid<T>) -> Result<C<T>> {
    let weighted = crate::potential::phase_modulated(q, k, grid, crate::potential::PhaseSign::Forward)?;
    let with_r = PhysicalField::from_fn(grid.n_r(), grid.n_phi(), |(j, i)| {
        weighted.values[[j, i]] * grid.r_points()[j]
    });
    let coeffs = grid.forward(&with_r, FourierRange::Psi1)?;
    // (1/π)·2π·(1/2)·∫_{−1}^{1} Σ c_m T_m(l) dl
    let mut total = C::new(T::zero(), T::zero());
    for m in (0..=grid.n_r()).step_by(2) {
        let mm = T::from_usize_lossy(m);
        total += coeffs.coeffs[[m, 0]] * (T::lit(2.0) / (T::one() - mm * mm));
    }
    Ok(total.conj())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Fundamental,
    Picard,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fundamental => "fundamental",
            Method::Picard => "picard",
        }
    }
}

/// One `|k|` bracket of a resolution ladder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rung {
    pub k_max: f64,
    pub n_r: usize,
    pub n_phi: usize,
}

/// How the sweep picks `(Nr, Nφ)` per sample.
#[derive(Clone, Debug, PartialEq)]
pub enum ResolutionPolicy {
    Fixed { n_r: usize, n_phi: usize },
    /// First rung whose `k_max ≥ |k|`; samples beyond the last rung fail.
    Ladder(Vec<Rung>),
}

impl ResolutionPolicy {
    /// Ladder sized for `q·e^{k̄z̄−kz}` with `q` smooth on the disk, up to
    /// `|k| = 100`.
    pub fn default_ladder() -> Self {
        ResolutionPolicy::Ladder(vec![
            Rung { k_max: 2.0, n_r: 32, n_phi: 64 },
            Rung { k_max: 10.0, n_r: 40, n_phi: 128 },
            Rung { k_max: 20.0, n_r: 56, n_phi: 160 },
            Rung { k_max: 35.0, n_r: 80, n_phi: 224 },
            Rung { k_max: 50.0, n_r: 104, n_phi: 288 },
            Rung { k_max: 70.0, n_r: 136, n_phi: 384 },
            Rung { k_max: 100.0, n_r: 200, n_phi: 600 },
        ])
    }

    pub fn resolution_for(&self, k_abs: f64) -> Option<(usize, usize)> {
        match self {
            ResolutionPolicy::Fixed { n_r, n_phi } => Some((*n_r, *n_phi)),
            ResolutionPolicy::Ladder(rungs) => {
                rungs.iter().find(|r| k_abs <= r.k_max).map(|r| (r.n_r, r.n_phi))
            }
        }
    }
}

/// Failure of a single sweep sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleError {
    pub kind: String,
    pub message: String,
}

impl From<DbarError> for SampleError {
    fn from(e: DbarError) -> Self {
        SampleError { kind: e.kind().to_string(), message: e.to_string() }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSample<T: Real> {
    pub k: C<T>,
    pub method: Method,
    pub resolution: (usize, usize),
    /// Picard steps; `None` for the basis route.
    pub steps: Option<usize>,
    pub reflection: std::result::Result<C<T>, SampleError>,
    pub r_asym: Option<T>,
}

#[derive(Clone, Debug)]
pub struct ReflectionSweep<T: Real> {
    pub samples: Vec<SweepSample<T>>,
}

impl<T: Real> ReflectionSweep<T> {
    pub fn failures(&self) -> usize {
        self.samples.iter().filter(|s| s.reflection.is_err()).count()
    }

    /// Attaches `r_asym(Re k)` to every sample with real positive `k`.
    pub fn with_asymptotics(mut self) -> Self {
        for s in &mut self.samples {
            s.r_asym = if s.k.im == T::zero() { r_asym(s.k.re).ok() } else { None };
        }
        self
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub method: Method,
    pub policy: ResolutionPolicy,
    pub picard: PicardOptions,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { method: Method::Picard, policy: ResolutionPolicy::default_ladder(), picard: PicardOptions::default(), workers: 1 }
    }
}

/// Lazily built per-resolution state shared by all samples of a sweep.
struct Cache<T: Real> {
    banks: Mutex<BTreeMap<(usize, usize), std::result::Result<std::sync::Arc<(ModeSolveBank<T>, PhysicalField<T>)>, SampleError>>>,
}

impl<T: Real> Cache<T> {
    fn bank(&self, potential: &Potential<T>, res: (usize, usize)) -> std::result::Result<std::sync::Arc<(ModeSolveBank<T>, PhysicalField<T>)>, SampleError> {
        let mut guard = self.banks.lock().expect("bank cache poisoned");
        guard
            .entry(res)
            .or_insert_with(|| {
                let build = || -> Result<_> {
                    let grid = Grid::new(res.0, res.1)?;
                    let q = potential.sample(&grid)?;
                    Ok(std::sync::Arc::new((build_mode_bank(&grid)?, q)))
                };
                build().map_err(SampleError::from)
            })
            .clone()
    }
}

/// Computes `R(k)` for every `k`; samples come back sorted by `|k|` (ties
/// by argument). Per-sample failures are recorded, not returned.
pub fn sweep<T: Real>(potential: &Potential<T>, ks: &[C<T>], config: &SweepConfig) -> Result<ReflectionSweep<T>> {
    if ks.is_empty() {
        return Err(DbarError::InvalidArgument("empty k grid".into()));
    }
    let mut ks = ks.to_vec();
    ks.sort_by(|a, b| {
        let key = |z: &C<T>| (z.norm().to_f64_lossy(), z.arg().to_f64_lossy());
        key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal)
    });
    let samples = match config.method {
        Method::Fundamental => sweep_fundamental(potential, &ks, config)?,
        Method::Picard => sweep_picard(potential, &ks, config)?,
    };
    info!(
        "{} sweep over {} k values: {} failures",
        config.method.name(),
        samples.len(),
        samples.iter().filter(|s| s.reflection.is_err()).count()
    );
    Ok(ReflectionSweep { samples })
}

fn sweep_fundamental<T: Real>(potential: &Potential<T>, ks: &[C<T>], config: &SweepConfig) -> Result<Vec<SweepSample<T>>> {
    let k_max = ks.iter().map(|k| k.norm().to_f64_lossy()).fold(0.0, f64::max);
    let res = config.policy.resolution_for(k_max);
    let basis: std::result::Result<FundamentalBasis<T>, SampleError> = match res {
        Some((n_r, n_phi)) => (|| {
            let grid = Grid::new(n_r, n_phi)?;
            solve_basis(&potential.sample(&grid)?, &grid)
        })()
        .map_err(SampleError::from),
        None => Err(no_rung(k_max)),
    };
    parallel_map(ks, config.workers, |&k| SweepSample {
        k,
        method: Method::Fundamental,
        resolution: res.unwrap_or((0, 0)),
        steps: None,
        reflection: basis.clone().and_then(|b| reflection_fundamental(&b, k).map_err(SampleError::from)),
        r_asym: None,
    })
}

fn no_rung(k_abs: f64) -> SampleError {
    SampleError::from(DbarError::Resolution(format!("no resolution configured for |k| = {k_abs}")))
}

fn sweep_picard<T: Real>(potential: &Potential<T>, ks: &[C<T>], config: &SweepConfig) -> Result<Vec<SweepSample<T>>> {
    let cache = Cache { banks: Mutex::new(BTreeMap::new()) };
    parallel_map(ks, config.workers, |&k| {
        let k_abs = k.norm().to_f64_lossy();
        let res = config.policy.resolution_for(k_abs);
        let mut sample = SweepSample {
            k,
            method: Method::Picard,
            resolution: res.unwrap_or((0, 0)),
            steps: None,
            reflection: Err(no_rung(k_abs)),
            r_asym: None,
        };
        if let Some(res) = res {
            sample.reflection = cache.bank(potential, res).and_then(|entry| {
                let (bank, q) = entry.as_ref();
                match solve_cgo_iterative(q, k, bank, config.picard) {
                    Ok((sol, trace)) => {
                        sample.steps = Some(trace.steps);
                        Ok(sol.reflection.expect("iterative solutions carry R"))
                    }
                    Err(e) => Err(SampleError::from(e)),
                }
            });
        }
        sample
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymRow {
    pub k: f64,
    pub r: C<f64>,
    pub r_asym: f64,
    /// `k^{5/2}·(R − r_asym(k))`
    pub residual: C<f64>,
}

/// Residual table against [`r_asym`] for the successful real-`k` samples.
pub fn compare_asym<T: Real>(sweep: &ReflectionSweep<T>) -> Vec<AsymRow> {
    sweep
        .samples
        .iter()
        .filter(|s| s.k.im == T::zero() && s.k.re > T::zero())
        .filter_map(|s| {
            let r = s.reflection.as_ref().ok()?;
            let k = s.k.re.to_f64_lossy();
            let ra = r_asym(k).ok()?;
            let r = C::new(r.re.to_f64_lossy(), r.im.to_f64_lossy());
            Some(AsymRow { k, r, r_asym: ra, residual: (r - ra) * k.powf(2.5) })
        })
        .collect()
}

/// Least-squares slope of `log|R|` against `log k` over the interior local
/// maxima of `|R|`. `None` with fewer than two maxima.
pub fn envelope_slope(points: &[(f64, f64)]) -> Option<f64> {
    let peaks: Vec<(f64, f64)> = points
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1 && w[1].1 > 0.0)
        .map(|w| (w[1].0.ln(), w[1].1.ln()))
        .collect();
    if peaks.len() < 2 {
        return None;
    }
    let n = peaks.len() as f64;
    let mx = peaks.iter().map(|p| p.0).sum::<f64>() / n;
    let my = peaks.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = peaks.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = peaks.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
