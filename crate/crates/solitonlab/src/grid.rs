//! Uniform periodic grids and sampled fields.
//!
//! A `Grid1D` is a power-of-two uniform sampling of `[x_min, x_max)`; the
//! right endpoint is excluded because the domain is periodic. Fields carry
//! their grid so that quadrature and spectral operations never have to guess
//! the geometry.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::invalid(format!(
                "grid interval [{x_min}, {x_max}] is empty or not finite"
            )));
        }
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "grid size {n} must be a power of two and at least 64"
            )));
        }
        Ok(Grid1D { x_min, x_max, n })
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    /// Index of the grid point closest to `x` (clamped into the domain).
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx()).round() as isize;
        i.clamp(0, self.n as isize - 1) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid1D,
    pub values: Vec<Complex64>,
}

impl RealField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::GridMismatch(format!(
                "{} samples on a {}-point grid",
                values.len(),
                grid.n
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field holds non-finite samples"));
        }
        Ok(RealField { grid, values })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        RealField {
            grid,
            values: vec![0.0; grid.n],
        }
    }

    pub fn sample(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().map(f).collect();
        RealField { grid, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Periodic trapezoid rule; on a uniform periodic grid this is just
    /// `dx * sum` and is spectrally accurate for smooth periodic data.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn integrate_weighted(&self, w: impl Fn(f64) -> f64) -> f64 {
        let dx = self.grid.dx();
        self.values
            .iter()
            .zip(self.grid.points())
            .map(|(v, x)| v * w(x))
            .sum::<f64>()
            * dx
    }

    pub fn linf_distance(&self, other: &RealField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("L-inf distance across grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

impl ComplexField {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::GridMismatch(format!(
                "{} samples on a {}-point grid",
                values.len(),
                grid.n
            )));
        }
        Ok(ComplexField { grid, values })
    }

    pub fn sample(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.points().map(f).collect();
        ComplexField { grid, values }
    }

    pub fn modulus(&self) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.norm()).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn integrate_mod2(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn linf_distance(&self, other: &ComplexField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("L-inf distance across grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }
}

/// Convenience constructor mirroring the grid invariants.
pub fn make_grid(x_min: f64, x_max: f64, n: usize) -> Result<Grid1D> {
    Grid1D::new(x_min, x_max, n)
}
