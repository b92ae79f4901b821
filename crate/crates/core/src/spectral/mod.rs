//! Fields on the circle `S^1 = R/Z`: complex and real Fourier representations,
//! grid evaluation, derivatives, Sobolev and Lebesgue norms, and the dealiased
//! quadratic flux `-1/2 d/dx (u^2)`.
//!
//! Only the modes `s = 1..=N` are stored; `u_{-s}` is the complex conjugate of
//! `u_s` and the mean mode is identically zero, so every stored field is real
//! valued and lies in the zero-mean space.

mod fft;
pub mod snapshot;

use std::f64::consts::{PI, SQRT_2};
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fft::{dealiased_grid, min_grid, FftWorkspace};

const TWO_PI: f64 = 2.0 * PI;

/// Relative tolerance for accepting a two-sided coefficient array as Hermitian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Truncated zero-mean Fourier representation `u(x) = sum_{0<|s|<=N} u_s e^{2 pi i s x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    modes: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(n_modes: usize) -> Self {
        assert!(n_modes > 0, "a spectral field needs at least one mode");
        Self { modes: vec![Complex64::new(0.0, 0.0); n_modes] }
    }

    /// Builds a field from the amplitudes of modes `1..=N`.
    pub fn from_modes(modes: Vec<Complex64>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::Domain("a spectral field needs at least one mode".into()));
        }
        if let Some(i) = modes.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite { mode: i as i64 + 1 });
        }
        Ok(Self { modes })
    }

    /// Builds a field from a two-sided array indexed `s = -N..=N` (length `2N+1`).
    ///
    /// The mean entry must vanish and `u_{-s}` must match `conj(u_s)` to
    /// [`HERMITIAN_TOLERANCE`] relative to the largest amplitude.
    pub fn from_two_sided(coeffs: &[Complex64]) -> Result<Self> {
        if coeffs.len() < 3 || coeffs.len().is_multiple_of(2) {
            return Err(Error::Domain(format!("two-sided array must have odd length >= 3, got {}", coeffs.len())));
        }
        let n = coeffs.len() / 2;
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let tol = HERMITIAN_TOLERANCE * scale.max(f64::MIN_POSITIVE);
        if coeffs[n].norm() > tol {
            return Err(Error::HermitianViolation { mode: 0, mismatch: coeffs[n].norm() / scale });
        }
        let mut modes = Vec::with_capacity(n);
        for s in 1..=n {
            let pos = coeffs[n + s];
            let neg = coeffs[n - s];
            let gap = (pos - neg.conj()).norm();
            if gap > tol {
                return Err(Error::HermitianViolation { mode: s as i64, mismatch: gap / scale });
            }
            modes.push(pos);
        }
        Self::from_modes(modes)
    }

    /// The field `amplitude * e_s` in the real trigonometric basis.
    pub fn basis(n_modes: usize, s: i64, amplitude: f64) -> Self {
        let mut c = RealCoeffs::zeros(n_modes);
        c.set(s, amplitude);
        real_to_complex(&c)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Amplitudes of modes `1..=N`.
    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }

    pub fn modes_mut(&mut self) -> &mut [Complex64] {
        &mut self.modes
    }

    /// Amplitude `u_s` for any `s`; zero outside `1 <= |s| <= N` and at `s = 0`.
    pub fn mode(&self, s: i64) -> Complex64 {
        let idx = s.unsigned_abs() as usize;
        if s == 0 || idx > self.modes.len() {
            return Complex64::new(0.0, 0.0);
        }
        let c = self.modes[idx - 1];
        if s > 0 {
            c
        } else {
            c.conj()
        }
    }

    /// `|u_s|^2` for `s = 1..=N`.
    pub fn mode_energies(&self) -> Vec<f64> {
        self.modes.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Copy truncated or zero-padded to `n_modes`.
    pub fn resized(&self, n_modes: usize) -> Self {
        let mut modes = vec![Complex64::new(0.0, 0.0); n_modes];
        let k = n_modes.min(self.modes.len());
        modes[..k].copy_from_slice(&self.modes[..k]);
        Self { modes }
    }

    pub fn is_finite(&self) -> bool {
        self.modes.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.n_modes(), rhs.n_modes(), "mode count mismatch");
        let modes = self.modes.iter().zip(&rhs.modes).map(|(a, b)| a + b).collect();
        SpectralField { modes }
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.n_modes(), rhs.n_modes(), "mode count mismatch");
        let modes = self.modes.iter().zip(&rhs.modes).map(|(a, b)| a - b).collect();
        SpectralField { modes }
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        SpectralField { modes: self.modes.iter().map(|c| c * rhs).collect() }
    }
}

/// Coefficients against the real basis `e_s = sqrt2 cos(2 pi s x)`,
/// `e_{-s} = sqrt2 sin(2 pi s x)`, for `1 <= s <= N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealCoeffs {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl RealCoeffs {
    pub fn zeros(n_modes: usize) -> Self {
        Self { cos: vec![0.0; n_modes], sin: vec![0.0; n_modes] }
    }

    /// `cos[s-1] = u_s`, `sin[s-1] = u_{-s}`.
    pub fn from_parts(cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        if cos.len() != sin.len() {
            return Err(Error::Domain("cosine and sine parts differ in length".into()));
        }
        if let Some(i) = cos.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { mode: i as i64 + 1 });
        }
        if let Some(i) = sin.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { mode: -(i as i64) - 1 });
        }
        Ok(Self { cos, sin })
    }

    pub fn n_modes(&self) -> usize {
        self.cos.len()
    }

    pub fn cos_part(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_part(&self) -> &[f64] {
        &self.sin
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.cos, &mut self.sin)
    }

    pub fn get(&self, s: i64) -> f64 {
        let idx = s.unsigned_abs() as usize;
        if s == 0 || idx > self.cos.len() {
            return 0.0;
        }
        if s > 0 {
            self.cos[idx - 1]
        } else {
            self.sin[idx - 1]
        }
    }

    /// Panics if `s` is zero or outside the truncation.
    pub fn set(&mut self, s: i64, value: f64) {
        let idx = s.unsigned_abs() as usize;
        assert!(s != 0 && idx <= self.cos.len(), "mode {s} outside 1..={}", self.cos.len());
        if s > 0 {
            self.cos[idx - 1] = value;
        } else {
            self.sin[idx - 1] = value;
        }
    }

    /// `sum_s u_s^2`, the squared L2 norm (the basis is orthonormal).
    pub fn norm_sqr(&self) -> f64 {
        self.cos.iter().chain(&self.sin).map(|v| v * v).sum()
    }
}

/// `u_s = (c_s - i c_{-s}) / sqrt2` for `s >= 1`; negative modes by conjugation.
pub fn real_to_complex(c: &RealCoeffs) -> SpectralField {
    let modes = c.cos.iter().zip(&c.sin).map(|(&a, &b)| Complex64::new(a, -b) / SQRT_2).collect();
    SpectralField { modes }
}

/// Inverse of [`real_to_complex`]: `c_s = sqrt2 Re u_s`, `c_{-s} = -sqrt2 Im u_s`.
pub fn complex_to_real(f: &SpectralField) -> RealCoeffs {
    let cos = f.modes.iter().map(|c| SQRT_2 * c.re).collect();
    let sin = f.modes.iter().map(|c| -SQRT_2 * c.im).collect();
    RealCoeffs { cos, sin }
}

/// Homogeneous Sobolev norm `||u||_m = ((2 pi)^{2m} sum_{s != 0} |s|^{2m} |u_s|^2)^{1/2}`,
/// so that `||d/dx u||_m = ||u||_{m+1}` and `||u||_0` is the L2 norm.
pub fn sobolev_norm(f: &SpectralField, m: f64) -> f64 {
    sobolev_norm_sqr(f, m).sqrt()
}

pub fn sobolev_norm_sqr(f: &SpectralField, m: f64) -> f64 {
    let sum: f64 = f
        .modes
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let w = TWO_PI * (i + 1) as f64;
            let weight = if m == 0.0 { 1.0 } else { w.powf(2.0 * m) };
            weight * c.norm_sqr()
        })
        .sum();
    2.0 * sum
}

/// `k`-th derivative: `u_s -> (2 pi i s)^k u_s`.
pub fn derivative(f: &SpectralField, k: u32) -> SpectralField {
    let modes =
        f.modes.iter().enumerate().map(|(i, c)| c * Complex64::new(0.0, TWO_PI * (i + 1) as f64).powu(k)).collect();
    SpectralField { modes }
}

/// Samples of a real field at `x_j = j / G`, `j = 0..G`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    values: Vec<f64>,
}

impl GridField {
    /// Wraps raw samples. The mean is not removed here; [`from_grid`] projects it out.
    pub fn from_samples(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Mean zero within `1e-12 * max |v|`.
    pub fn is_zero_mean(&self) -> bool {
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.mean().abs() <= 1e-12 * scale
    }
}

/// Exact trigonometric interpolation of `f` on `G` equispaced points.
pub fn to_grid(f: &SpectralField, grid: usize) -> Result<GridField> {
    fft::check_grid(grid, f.n_modes())?;
    let mut ws = FftWorkspace::new(grid);
    let mut values = vec![0.0; grid];
    ws.synthesize(&f.modes, &mut values);
    Ok(GridField { values })
}

/// Projects samples onto modes `1..=n_modes`; the mean is discarded.
pub fn from_grid(g: &GridField, n_modes: usize) -> Result<SpectralField> {
    fft::check_grid(g.grid_size(), n_modes)?;
    let mut ws = FftWorkspace::new(g.grid_size());
    let mut modes = vec![Complex64::new(0.0, 0.0); n_modes];
    ws.analyze(&g.values, &mut modes);
    Ok(SpectralField { modes })
}

/// Rectangle-rule `L_p` norm `((1/G) sum |v_j|^p)^{1/p}`; `p = inf` gives `max |v_j|`.
pub fn lebesgue_norm(g: &GridField, p: f64) -> f64 {
    lebesgue_norm_of(&g.values, p)
}

pub(crate) fn lebesgue_norm_of(values: &[f64], p: f64) -> f64 {
    assert!(p >= 1.0, "L_p norm needs p >= 1, got {p}");
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let n = values.len() as f64;
    let sum: f64 = if p == 1.0 {
        values.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        values.iter().map(|v| v * v).sum()
    } else {
        values.iter().map(|v| v.abs().powf(p)).sum()
    };
    (sum / n).powf(1.0 / p)
}

/// Reusable state for the dealiased product `-1/2 d/dx (u^2)`.
#[derive(Debug)]
pub struct FluxWorkspace {
    n_modes: usize,
    fft: FftWorkspace,
    grid: Vec<f64>,
    square: Vec<Complex64>,
}

impl FluxWorkspace {
    /// Workspace on the 2/3-rule grid for `n_modes`.
    pub fn new(n_modes: usize) -> Self {
        Self::with_grid(n_modes, dealiased_grid(n_modes)).expect("dealiased grid is valid")
    }

    /// Workspace on an explicit grid. Grids below `3N + 1` alias the product.
    pub fn with_grid(n_modes: usize, grid: usize) -> Result<Self> {
        fft::check_grid(grid, n_modes)?;
        Ok(Self {
            n_modes,
            fft: FftWorkspace::new(grid),
            grid: vec![0.0; grid],
            square: vec![Complex64::new(0.0, 0.0); n_modes],
        })
    }

    pub fn grid_size(&self) -> usize {
        self.fft.size()
    }

    /// Writes `-1/2 d/dx (u^2)` into `out` and returns `max_j |u(x_j)|`.
    pub fn flux_into(&mut self, u: &SpectralField, out: &mut [Complex64]) -> f64 {
        assert_eq!(u.n_modes(), self.n_modes);
        assert_eq!(out.len(), self.n_modes);
        self.fft.synthesize(&u.modes, &mut self.grid);
        let mut sup = 0.0_f64;
        for v in self.grid.iter_mut() {
            sup = sup.max(v.abs());
            *v *= *v;
        }
        self.fft.analyze(&self.grid, &mut self.square);
        for (s, (dst, sq)) in out.iter_mut().zip(&self.square).enumerate() {
            // -1/2 * (2 pi i s) = -pi i s
            *dst = sq * Complex64::new(0.0, -PI * (s + 1) as f64);
        }
        sup
    }
}

/// `-1/2 d/dx (u^2)` by a pseudospectral product on the 2/3-rule grid.
pub fn quadratic_flux(f: &SpectralField) -> SpectralField {
    let mut ws = FluxWorkspace::new(f.n_modes());
    let mut modes = vec![Complex64::new(0.0, 0.0); f.n_modes()];
    ws.flux_into(f, &mut modes);
    SpectralField { modes }
}
