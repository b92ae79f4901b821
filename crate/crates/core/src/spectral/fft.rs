//! Real FFT workspace shared by the grid transforms and the pseudospectral product.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};

/// Smallest even grid that represents modes `1..=n_modes` without folding the
/// highest mode onto the Nyquist frequency.
pub fn min_grid(n_modes: usize) -> usize {
    2 * n_modes + 2
}

/// Grid for the 2/3-rule product of two fields truncated at `n_modes`:
/// the next power of two strictly above `3 * n_modes`.
pub fn dealiased_grid(n_modes: usize) -> usize {
    (3 * n_modes + 1).next_power_of_two().max(4)
}

pub(crate) fn check_grid(grid: usize, n_modes: usize) -> Result<()> {
    let required = min_grid(n_modes);
    if grid < required || !grid.is_multiple_of(2) {
        return Err(Error::Alias { grid, modes: n_modes, required });
    }
    Ok(())
}

/// Forward/inverse real transforms of one fixed size with owned scratch.
///
/// A workspace is single-owner mutable state; each trajectory holds its own.
pub struct FftWorkspace {
    size: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    spectrum: Vec<Complex64>,
    real_buf: Vec<f64>,
    scratch_fwd: Vec<Complex64>,
    scratch_inv: Vec<Complex64>,
}

impl fmt::Debug for FftWorkspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftWorkspace").field("size", &self.size).finish()
    }
}

impl FftWorkspace {
    pub fn new(size: usize) -> Self {
        assert!(size >= 2 && size.is_multiple_of(2), "FFT grid must be even, got {size}");
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let spectrum = forward.make_output_vec();
        let scratch_fwd = forward.make_scratch_vec();
        let scratch_inv = inverse.make_scratch_vec();
        Self { size, forward, inverse, spectrum, real_buf: vec![0.0; size], scratch_fwd, scratch_inv }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Evaluates `sum_{0<|s|<=n} c_s exp(2 pi i s j / G)` at `j = 0..G`, where
    /// `modes[s-1] = c_s` and negative modes follow by conjugation.
    pub fn synthesize(&mut self, modes: &[Complex64], out: &mut [f64]) {
        debug_assert!(2 * modes.len() + 2 <= self.size);
        debug_assert_eq!(out.len(), self.size);
        self.spectrum.fill(Complex64::new(0.0, 0.0));
        self.spectrum[1..=modes.len()].copy_from_slice(modes);
        self.inverse
            .process_with_scratch(&mut self.spectrum, out, &mut self.scratch_inv)
            .expect("inverse real FFT on a Hermitian spectrum");
    }

    /// Projects grid samples onto modes `1..=out.len()`, discarding the mean.
    pub fn analyze(&mut self, values: &[f64], out: &mut [Complex64]) {
        debug_assert_eq!(values.len(), self.size);
        debug_assert!(2 * out.len() + 2 <= self.size);
        self.real_buf.copy_from_slice(values);
        self.forward
            .process_with_scratch(&mut self.real_buf, &mut self.spectrum, &mut self.scratch_fwd)
            .expect("forward real FFT");
        let scale = 1.0 / self.size as f64;
        for (dst, src) in out.iter_mut().zip(&self.spectrum[1..]) {
            *dst = src * scale;
        }
    }
}
