//! Fourier transforms of gridded parts. Plans are cached per thread.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{CompositeField, Grid, Parity};
use crate::error::{Result, WaveError};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<HashMap<usize, Plans>> = RefCell::new(HashMap::new());
}

fn plans(n: usize) -> Plans {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
            })
            .clone()
    })
}

/// Unnormalized forward DFT of real samples.
pub fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward_in_place(&mut buf);
    buf
}

pub fn forward_in_place(buf: &mut [Complex64]) {
    plans(buf.len()).0.process(buf);
}

/// Inverse DFT normalized by 1/n, returning the real part.
pub fn inverse_real(coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    inverse_in_place(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Unnormalized inverse DFT.
pub fn inverse_in_place(buf: &mut [Complex64]) {
    plans(buf.len()).1.process(buf);
}

/// Spectral derivative of order `d` of periodic samples. The Nyquist mode is
/// dropped for odd orders.
pub fn derivative(values: &[f64], grid: &Grid, d: u32) -> Vec<f64> {
    if d == 0 {
        return values.to_vec();
    }
    let mut c = forward(values);
    let nyq = grid.n_points() / 2;
    let iu = Complex64::new(0.0, 1.0);
    for (j, cj) in c.iter_mut().enumerate() {
        if d % 2 == 1 && j == nyq {
            *cj = Complex64::new(0.0, 0.0);
            continue;
        }
        *cj *= (iu * grid.wavenumber(j)).powu(d);
    }
    inverse_real(&c)
}

/// Multiplies the spectrum of `values` by `symbol(k_j)`.
pub fn apply_symbol(values: &[f64], grid: &Grid, symbol: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut c = forward(values);
    for (j, cj) in c.iter_mut().enumerate() {
        *cj *= symbol(grid.wavenumber(j));
    }
    inverse_real(&c)
}

/// Fourier coefficients of a gridded part, with bookkeeping for deflated modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub coefficients: Vec<Complex64>,
    /// Mode indices that were zeroed, with the values removed.
    pub deflated_modes: Vec<(usize, Complex64)>,
}

impl SpectralField {
    /// Transforms the gridded part; the analytic part must vanish.
    pub fn from_field(f: &CompositeField) -> Result<Self> {
        if !f.analytic.is_zero() {
            return Err(WaveError::NonDecayingInput);
        }
        Ok(Self::from_values(&f.grid_part, f.grid))
    }

    pub fn from_values(values: &[f64], grid: Grid) -> Self {
        Self {
            grid,
            coefficients: forward(values),
            deflated_modes: Vec::new(),
        }
    }

    /// Zeroes the +-k0 modes and records the removed values.
    pub fn deflate_kernel(&mut self) {
        for j in self.grid.kernel_indices() {
            self.deflated_modes.push((j, self.coefficients[j]));
            self.coefficients[j] = Complex64::new(0.0, 0.0);
        }
    }

    pub fn to_values(&self) -> Vec<f64> {
        inverse_real(&self.coefficients)
    }

    /// Largest violation of conjugate symmetry, relative to the largest coefficient.
    pub fn conjugate_defect(&self) -> f64 {
        let n = self.coefficients.len();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..n)
            .map(|j| (self.coefficients[j] - self.coefficients[(n - j) % n].conj()).norm())
            .fold(0.0, f64::max)
            / scale
    }

    /// For odd fields the largest real part, for even fields the largest
    /// imaginary part, relative to the largest coefficient.
    pub fn parity_defect(&self, parity: Parity) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let worst = match parity {
            Parity::Odd => self
                .coefficients
                .iter()
                .map(|c| c.re.abs())
                .fold(0.0, f64::max),
            Parity::Even => self
                .coefficients
                .iter()
                .map(|c| c.im.abs())
                .fold(0.0, f64::max),
            Parity::None => 0.0,
        };
        worst / scale
    }

    fn max_abs(&self) -> f64 {
        self.coefficients
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}
