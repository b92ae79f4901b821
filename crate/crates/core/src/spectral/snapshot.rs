//! Field checkpoints.
//!
//! Text form: a header line `n_modes,<N>` followed by `N` lines `s,re,im` for
//! `s = 1..=N`. Binary form: `u64` mode count followed by `N` pairs of `f64`
//! (real, imaginary), all little-endian.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;

use super::SpectralField;
use crate::error::{Error, Result};

pub fn write_text<W: Write>(f: &SpectralField, mut w: W) -> Result<()> {
    writeln!(w, "n_modes,{}", f.n_modes())?;
    for (i, c) in f.modes().iter().enumerate() {
        writeln!(w, "{},{:e},{:e}", i + 1, c.re, c.im)?;
    }
    Ok(())
}

pub fn read_text<R: BufRead>(r: R) -> Result<SpectralField> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Snapshot("empty input".into()))??;
    let n: usize = header
        .strip_prefix("n_modes,")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Snapshot(format!("bad header {header:?}")))?;
    let mut modes = vec![Complex64::new(0.0, 0.0); n];
    let mut seen = vec![false; n];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Snapshot(format!("line {}: {line:?}", lineno + 2));
        let mut parts = line.split(',');
        let s: usize = parts.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        let re: f64 = parts.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        let im: f64 = parts.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() || s == 0 || s > n || seen[s - 1] {
            return Err(bad());
        }
        seen[s - 1] = true;
        modes[s - 1] = Complex64::new(re, im);
    }
    if let Some(missing) = seen.iter().position(|&v| !v) {
        return Err(Error::Snapshot(format!("mode {} missing", missing + 1)));
    }
    SpectralField::from_modes(modes)
}

pub fn write_binary<W: Write>(f: &SpectralField, mut w: W) -> Result<()> {
    w.write_all(&(f.n_modes() as u64).to_le_bytes())?;
    for c in f.modes() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<SpectralField> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    if n == 0 || n > (1 << 24) {
        return Err(Error::Snapshot(format!("implausible mode count {n}")));
    }
    let mut modes = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut word)?;
        let re = f64::from_le_bytes(word);
        r.read_exact(&mut word)?;
        let im = f64::from_le_bytes(word);
        modes.push(Complex64::new(re, im));
    }
    SpectralField::from_modes(modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn text_and_binary_round_trip(v in prop::collection::vec((-1e3..1e3f64, -1e-3..1e-3f64), 1..40)) {
            let f = SpectralField::from_modes(v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let mut text = Vec::new();
            write_text(&f, &mut text).unwrap();
            prop_assert_eq!(&read_text(text.as_slice()).unwrap(), &f);
            let mut bin = Vec::new();
            write_binary(&f, &mut bin).unwrap();
            prop_assert_eq!(bin.len(), 8 + 16 * f.n_modes());
            prop_assert_eq!(&read_binary(bin.as_slice()).unwrap(), &f);
        }
    }

    #[test]
    fn text_layout() {
        let f = SpectralField::from_modes(vec![Complex64::new(0.5, -0.25), Complex64::new(0.0, 1.0)]).unwrap();
        let mut text = Vec::new();
        write_text(&f, &mut text).unwrap();
        assert_eq!(String::from_utf8(text).unwrap(), "n_modes,2\n1,5e-1,-2.5e-1\n2,0e0,1e0\n");
    }

    #[test]
    fn malformed_text_rejected() {
        assert!(read_text("n_modes,2\n1,0,0\n".as_bytes()).is_err());
        assert!(read_text("n_modes,1\n1,0\n".as_bytes()).is_err());
        assert!(read_text("modes,1\n1,0,0\n".as_bytes()).is_err());
        assert!(read_text("n_modes,1\n1,0,0\n1,0,0\n".as_bytes()).is_err());
        assert!(read_text("n_modes,1\n1,nan,0\n".as_bytes()).is_err());
    }
}
