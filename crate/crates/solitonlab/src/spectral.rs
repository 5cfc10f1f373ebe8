//! FFT-based periodic spectral operations: wavenumbers, derivatives,
//! dealiasing and the resolution guard.
//!
//! Derivatives are Fourier multipliers `(ik)^s`; they are exact for
//! band-limited data. The Nyquist mode is zeroed for odd derivative orders
//! (its sign is ambiguous on a real grid).

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid1D, RealField};

/// Fraction of spectral energy tolerated in the top 5% of wavenumbers before
/// an operation refuses to trust the samples.
pub const RESOLUTION_ENERGY_FRACTION: f64 = 1e-12;

/// Relative coefficient floor below which spectral content is
/// indistinguishable from FFT roundoff of the dominant modes. High-order
/// norms optionally zero such modes so `k^s` cannot amplify pure noise.
pub const ROUNDOFF_COEFF_FLOOR: f64 = 1e-14;

/// Angular wavenumbers in FFT layout: `[0, 1, .., n/2-1, -n/2, .., -1] * 2pi/L`.
pub fn wavenumbers(grid: &Grid1D) -> Vec<f64> {
    let n = grid.n;
    let scale = 2.0 * std::f64::consts::PI / grid.length();
    let mut k = vec![0.0; n];
    for (i, ki) in k.iter_mut().enumerate() {
        let m = if i <= n / 2 { i as isize } else { i as isize - n as isize };
        *ki = m as f64 * scale;
    }
    k
}

/// Cached forward/inverse plans for one grid size.
pub struct SpectralPlan {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl SpectralPlan {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        SpectralPlan {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.fwd.process(data);
    }

    /// Inverse transform including the 1/n normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.inv.process(data);
        let s = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

pub fn fft_real(field: &RealField, plan: &SpectralPlan) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = field.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut buf);
    buf
}

/// Fraction of spectral energy in modes with `|k| >= 0.95 k_max`.
pub fn top_band_energy_fraction(hat: &[Complex64], k: &[f64]) -> f64 {
    let kmax = k.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = 0.95 * kmax;
    let mut top = 0.0;
    let mut total = 0.0;
    for (c, ki) in hat.iter().zip(k) {
        let e = c.norm_sqr();
        total += e;
        if ki.abs() >= cut {
            top += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        top / total
    }
}

pub fn check_resolution(field: &RealField) -> Result<()> {
    let plan = SpectralPlan::new(field.grid.n);
    let hat = fft_real(field, &plan);
    let k = wavenumbers(&field.grid);
    let fraction = top_band_energy_fraction(&hat, &k);
    if fraction > RESOLUTION_ENERGY_FRACTION {
        return Err(Error::Resolution {
            fraction,
            threshold: RESOLUTION_ENERGY_FRACTION,
        });
    }
    Ok(())
}

fn multiplier_derivative(
    hat: &mut [Complex64],
    k: &[f64],
    order: usize,
    roundoff_filter: bool,
) {
    if roundoff_filter {
        let peak = hat.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        let floor = ROUNDOFF_COEFF_FLOOR * peak;
        for c in hat.iter_mut() {
            if c.norm() < floor {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }
    if order == 0 {
        return;
    }
    let n = hat.len();
    for (i, c) in hat.iter_mut().enumerate() {
        // zero the Nyquist mode for odd orders
        if order % 2 == 1 && i == n / 2 {
            *c = Complex64::new(0.0, 0.0);
            continue;
        }
        let ik = Complex64::new(0.0, k[i]);
        *c *= ik.powu(order as u32);
    }
}

/// `d^order/dx^order` of a real field via the Fourier multiplier `(ik)^order`.
pub fn spectral_derivative(field: &RealField, order: usize) -> RealField {
    if order == 0 {
        return field.clone();
    }
    let plan = SpectralPlan::new(field.grid.n);
    let mut hat = fft_real(field, &plan);
    let k = wavenumbers(&field.grid);
    multiplier_derivative(&mut hat, &k, order, false);
    plan.inverse(&mut hat);
    RealField {
        grid: field.grid,
        values: hat.iter().map(|c| c.re).collect(),
    }
}

/// Like [`spectral_derivative`] but with modes below the coherent roundoff
/// floor zeroed first, so high orders do not amplify FFT noise. Used by the
/// H^s machinery where orders up to ~10 appear.
pub fn spectral_derivative_filtered(field: &RealField, order: usize) -> RealField {
    let plan = SpectralPlan::new(field.grid.n);
    let mut hat = fft_real(field, &plan);
    let k = wavenumbers(&field.grid);
    multiplier_derivative(&mut hat, &k, order, true);
    plan.inverse(&mut hat);
    RealField {
        grid: field.grid,
        values: hat.iter().map(|c| c.re).collect(),
    }
}

pub fn spectral_derivative_complex(field: &ComplexField, order: usize) -> ComplexField {
    if order == 0 {
        return field.clone();
    }
    let plan = SpectralPlan::new(field.grid.n);
    let mut hat = field.values.clone();
    plan.forward(&mut hat);
    let k = wavenumbers(&field.grid);
    multiplier_derivative(&mut hat, &k, order, false);
    plan.inverse(&mut hat);
    ComplexField {
        grid: field.grid,
        values: hat,
    }
}

/// 2/3-rule mask: 1 for retained modes, 0 for the top third.
pub fn dealias_mask(k: &[f64]) -> Vec<f64> {
    let kmax = k.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = (2.0 / 3.0) * kmax;
    k.iter().map(|ki| if ki.abs() > cut { 0.0 } else { 1.0 }).collect()
}

/// Translate a periodic field by `shift` via the exact Fourier phase.
pub fn spectral_shift(field: &RealField, shift: f64) -> RealField {
    let plan = SpectralPlan::new(field.grid.n);
    let mut hat = fft_real(field, &plan);
    let k = wavenumbers(&field.grid);
    for (c, ki) in hat.iter_mut().zip(&k) {
        *c *= Complex64::new(0.0, -ki * shift).exp();
    }
    plan.inverse(&mut hat);
    RealField {
        grid: field.grid,
        values: hat.iter().map(|c| c.re).collect(),
    }
}
