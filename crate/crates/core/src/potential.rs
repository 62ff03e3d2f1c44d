//! Potentials supported on the closed unit disk: construction, sampling,
//! file ingestion, and the oscillatory phase modulation `e^{±(k̄z̄ − kz)}`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::debug;

use crate::error::{DbarError, Result};
use crate::scalar::{Real, C};
use crate::spectral::{FourierRange, Grid, PhysicalField};

#[derive(Clone, Debug)]
pub enum PotentialKind<T: Real> {
    /// `q ≡ 1` on the disk.
    Characteristic,
    /// `q = f(r)` with `f = Σ_m c_m T_m(2r − 1)`.
    RadialProfile(Vec<T>),
    /// Samples on a specific grid.
    Sampled(PhysicalField<T>),
}

#[derive(Clone, Debug)]
pub struct Potential<T: Real> {
    pub kind: PotentialKind<T>,
    pub amplitude: C<T>,
}

impl<T: Real> Potential<T> {
    pub fn characteristic() -> Self {
        Self { kind: PotentialKind::Characteristic, amplitude: C::new(T::one(), T::zero()) }
    }

    pub fn radial_profile(cheb_coeffs: Vec<T>) -> Self {
        Self { kind: PotentialKind::RadialProfile(cheb_coeffs), amplitude: C::new(T::one(), T::zero()) }
    }

    pub fn sampled(field: PhysicalField<T>) -> Self {
        Self { kind: PotentialKind::Sampled(field), amplitude: C::new(T::one(), T::zero()) }
    }

    pub fn with_amplitude(mut self, amplitude: C<T>) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// True when the samples do not depend on `φ` by construction.
    pub fn is_radial(&self) -> bool {
        !matches!(self.kind, PotentialKind::Sampled(_))
    }

    /// Evaluates `q` on the grid.
    pub fn sample(&self, grid: &Grid<T>) -> Result<PhysicalField<T>> {
        let a = self.amplitude;
        match &self.kind {
            PotentialKind::Characteristic => Ok(grid.physical_from_fn(|_, _| a)),
            PotentialKind::RadialProfile(c) => {
                let vals: Vec<C<T>> = grid.r_points().iter().map(|&r| a * chebyshev_value(c, r)).collect();
                Ok(PhysicalField::from_fn(grid.n_r(), grid.n_phi(), |(j, _)| vals[j]))
            }
            PotentialKind::Sampled(f) => {
                grid.check_shape(f.dim(), "sampled potential")?;
                Ok(PhysicalField::new(f.values.mapv(|z| z * a)))
            }
        }
    }

    /// Deterministic 64-bit FNV-1a fingerprint of the samples on `grid`.
    pub fn fingerprint(&self, grid: &Grid<T>) -> Result<u64> {
        Ok(fingerprint(&self.sample(grid)?))
    }
}

/// FNV-1a over the bit patterns of the samples.
pub fn fingerprint<T: Real>(field: &PhysicalField<T>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for z in field.values.iter() {
        for v in [z.re.to_f64_lossy(), z.im.to_f64_lossy()] {
            for byte in v.to_bits().to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    h
}

fn chebyshev_value<T: Real>(c: &[T], r: T) -> C<T> {
    let l = r + r - T::one();
    let (mut b1, mut b2) = (T::zero(), T::zero());
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + (l + l) * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    let v = c.first().copied().unwrap_or_else(T::zero) + l * b1 - b2;
    C::new(v, T::zero())
}

/// Header line of the sampled-potential file format.
pub fn potential_header(n_r: usize, n_phi: usize) -> String {
    format!("dbar-potential v1 nr={n_r} nphi={n_phi}")
}

/// Writes samples as `j,i,re,im` records, radial index major.
pub fn save_sampled<T: Real>(path: &Path, field: &PhysicalField<T>) -> Result<()> {
    let (rows, cols) = field.dim();
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", potential_header(rows - 1, cols))?;
    for ((j, i), z) in field.values.indexed_iter() {
        writeln!(out, "{j},{i},{:.16e},{:.16e}", z.re.to_f64_lossy(), z.im.to_f64_lossy())?;
    }
    out.flush()?;
    Ok(())
}

fn parse_header(path: &Path, line: &str) -> Result<(usize, usize)> {
    let bad = |reason: &str| DbarError::MalformedHeader { path: path.to_path_buf(), reason: reason.into() };
    let mut parts = line.split_whitespace();
    if parts.next() != Some("dbar-potential") || parts.next() != Some("v1") {
        return Err(bad("expected `dbar-potential v1`"));
    }
    let mut field = |key: &str| -> Result<usize> {
        let tok = parts.next().ok_or_else(|| bad(&format!("missing {key}=")))?;
        tok.strip_prefix(key)
            .and_then(|v| v.strip_prefix('='))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(&format!("bad {key} field `{tok}`")))
    };
    let nr = field("nr")?;
    let nphi = field("nphi")?;
    if parts.next().is_some() {
        return Err(bad("trailing tokens"));
    }
    Ok((nr, nphi))
}

/// Reads a sampled potential written by [`save_sampled`].
pub fn load_sampled<T: Real>(path: &Path) -> Result<Potential<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| DbarError::MalformedHeader { path: path.to_path_buf(), reason: "empty file".into() })?;
    let (nr, nphi) = parse_header(path, header.trim())?;
    let mut field = PhysicalField::<T>::zeros(nr, nphi);
    let expected = (nr + 1) * nphi;
    let mut count = 0usize;
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| DbarError::MalformedRecord { line: lineno, reason: reason.into() };
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(bad("expected j,i,re,im"));
        }
        let j: usize = parts[0].parse().map_err(|_| bad("bad radial index"))?;
        let i: usize = parts[1].parse().map_err(|_| bad("bad angular index"))?;
        let re: f64 = parts[2].parse().map_err(|_| bad("bad real part"))?;
        let im: f64 = parts[3].parse().map_err(|_| bad("bad imaginary part"))?;
        if !(re.is_finite() && im.is_finite()) {
            return Err(DbarError::NonFinite { line: lineno });
        }
        if j > nr || i >= nphi {
            return Err(DbarError::ShapeMismatch {
                expected: format!("indices within ({}, {nphi})", nr + 1),
                found: format!("({j}, {i}) at line {lineno}"),
            });
        }
        if count != j * nphi + i {
            return Err(bad("records out of radial-major order"));
        }
        field.values[[j, i]] = C::new(T::lit(re), T::lit(im));
        count += 1;
    }
    if count != expected {
        return Err(DbarError::ShapeMismatch {
            expected: format!("{expected} samples"),
            found: format!("{count}"),
        });
    }
    debug!("loaded sampled potential {} ({nr}x{nphi})", path.display());
    Ok(Potential::sampled(field))
}

/// Direction of the phase factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseSign {
    /// `e^{k̄z̄ − kz}`
    Forward,
    /// `e^{kz − k̄z̄}`
    Backward,
}

/// `e^{k̄z̄ − kz} = e^{−2i Im(kz)}` (or its inverse) at every grid point;
/// unit modulus by construction.
pub fn phase_factor<T: Real>(k: C<T>, grid: &Grid<T>, sign: PhaseSign) -> PhysicalField<T> {
    let s = match sign {
        PhaseSign::Forward => T::lit(-2.0),
        PhaseSign::Backward => T::lit(2.0),
    };
    grid.physical_from_fn(|r, phi| {
        let kz = k * C::from_polar(r, phi);
        C::from_polar(T::one(), s * kz.im)
    })
}

/// Pointwise `q · e^{±(k̄z̄ − kz)}`, evaluated in physical space.
pub fn phase_modulated<T: Real>(
    q: &PhysicalField<T>,
    k: C<T>,
    grid: &Grid<T>,
    sign: PhaseSign,
) -> Result<PhysicalField<T>> {
    grid.check_shape(q.dim(), "potential")?;
    Ok(q.mul(&phase_factor(k, grid, sign)))
}

/// Trailing spectral content of the modulated potential.
#[derive(Clone, Copy, Debug)]
pub struct ResolutionReport {
    pub trailing_chebyshev: f64,
    pub trailing_fourier: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Default threshold for [`resolution_check`], relative to `max |q|`.
pub const RESOLUTION_THRESHOLD: f64 = 1e-13;

/// Whether `q e^{k̄z̄ − kz}` is resolved on `grid`: the highest Chebyshev
/// row and the highest-|n| Fourier column of its coefficients must fall
/// below `threshold · max|q|`.
pub fn resolution_check<T: Real>(
    q: &PhysicalField<T>,
    k: C<T>,
    grid: &Grid<T>,
    threshold: f64,
) -> Result<ResolutionReport> {
    let modulated = phase_modulated(q, k, grid, PhaseSign::Forward)?;
    let coeffs = grid.forward(&modulated, FourierRange::Psi1)?;
    let scale = q.max_abs().to_f64_lossy().max(f64::MIN_POSITIVE);
    let tc = coeffs.trailing_chebyshev().to_f64_lossy() / scale;
    let tf = coeffs.trailing_fourier().to_f64_lossy() / scale;
    Ok(ResolutionReport {
        trailing_chebyshev: tc,
        trailing_fourier: tf,
        threshold,
        passed: tc <= threshold && tf <= threshold,
    })
}

/// Doubling search for a resolution that resolves `q e^{k̄z̄ − kz}`.
///
/// Starts at `(n_r, n_phi)` and doubles both until [`resolution_check`]
/// passes. `max_points` caps `(Nr + 1)·Nφ`.
pub fn autotune_resolution<T: Real>(
    potential: &Potential<T>,
    k: C<T>,
    start: (usize, usize),
    threshold: f64,
    max_points: usize,
) -> Result<(Grid<T>, ResolutionReport)> {
    let (mut n_r, mut n_phi) = start;
    loop {
        if (n_r + 1) * n_phi > max_points {
            return Err(DbarError::Resolution(format!(
                "no resolution up to {max_points} grid points resolves q·e^(k̄z̄−kz) for k = {k}"
            )));
        }
        let grid = Grid::new(n_r, n_phi)?;
        let q = potential.sample(&grid)?;
        let report = resolution_check(&q, k, &grid, threshold)?;
        debug!("autotune Nr={n_r} Nφ={n_phi}: {report:?}");
        if report.passed {
            return Ok((grid, report));
        }
        n_r *= 2;
        n_phi *= 2;
    }
}
