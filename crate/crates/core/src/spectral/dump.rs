//! `m,n,re,im` coefficient dumps with 17 significant digits.

use std::io::{BufRead, Write};

use super::field::{FourierRange, SpectralField};
use crate::error::{DbarError, Result};
use crate::scalar::{Real, C};

/// Writes one row per coefficient, Chebyshev degree major, signed mode
/// ascending.
pub fn write_coefficients<T: Real, W: Write>(mut out: W, field: &SpectralField<T>) -> Result<()> {
    writeln!(out, "m,n,re,im")?;
    let n_phi = field.n_phi();
    for m in 0..=field.n_r() {
        for n in field.range.modes(n_phi) {
            let z = field.get(m, n);
            writeln!(out, "{m},{n},{:.16e},{:.16e}", z.re.to_f64_lossy(), z.im.to_f64_lossy())?;
        }
    }
    Ok(())
}

/// Reads a dump produced by [`write_coefficients`].
pub fn read_coefficients<T: Real, R: BufRead>(
    input: R,
    n_r: usize,
    n_phi: usize,
    range: FourierRange,
) -> Result<SpectralField<T>> {
    let mut field = SpectralField::zeros(n_r, n_phi, range);
    let mut seen = 0usize;
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != "m,n,re,im" {
                return Err(DbarError::MalformedRecord { line: 1, reason: "expected header m,n,re,im".into() });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| DbarError::MalformedRecord { line: lineno, reason: reason.into() };
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let m: usize = parts[0].trim().parse().map_err(|_| bad("bad degree"))?;
        let n: i64 = parts[1].trim().parse().map_err(|_| bad("bad mode"))?;
        let re: f64 = parts[2].trim().parse().map_err(|_| bad("bad real part"))?;
        let im: f64 = parts[3].trim().parse().map_err(|_| bad("bad imaginary part"))?;
        if m > n_r || range.bin_of_mode(n, n_phi).is_none() {
            return Err(bad("index out of range"));
        }
        field.set(m, n, C::new(T::lit(re), T::lit(im)));
        seen += 1;
    }
    if seen != (n_r + 1) * n_phi {
        return Err(DbarError::ShapeMismatch {
            expected: format!("{} coefficients", (n_r + 1) * n_phi),
            found: format!("{seen}"),
        });
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip_is_lossless() {
        let mut f = SpectralField::<f64>::zeros(3, 4, FourierRange::Psi2);
        for ((m, b), z) in f.coeffs.indexed_iter_mut() {
            *z = C::new((m as f64 + 0.1).ln() / 3.0, -(b as f64).sqrt() * 1e-7);
        }
        let mut buf = Vec::new();
        write_coefficients(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("m,n,re,im\n0,-1,"));
        let g: SpectralField<f64> = read_coefficients(&buf[..], 3, 4, FourierRange::Psi2).unwrap();
        assert_eq!(f, g);
    }
}
