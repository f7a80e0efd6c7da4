//! Discrete distorted Fourier transform on the exterior of the unit ball.
//!
//! For radial functions the generalized eigenfunctions of the Dirichlet
//! Laplacian are `e_λ(r) = sin(λ(r−1))/r`, so in the `g = r·u` variables the
//! transform is a sine transform. On the grid:
//!
//! ```text
//! forward:  c_k = √(2/π) · h  · Σ_j sin(kjπ/(N+1)) · g_j
//! inverse:  g_j = √(2/π) · Δλ · Σ_k sin(kjπ/(N+1)) · c_k
//! ```
//!
//! Since `S² = (N+1)/2 · I` for the DST-I matrix `S`, and
//! `(2/π)·h·Δλ·(N+1)/2 = 1`, the pair is an exact inverse and
//! `Δλ·‖c‖² = h·‖g‖²` holds to rounding.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::radial_field::{RadialField, RadialGrid};

/// Unnormalized DST-I of length `N`, `y_k = Σ_j x_j sin(π jk/(N+1))`.
///
/// Realized through the odd extension of length `2(N+1)` and one complex FFT.
/// The plan is immutable and shared freely between threads.
pub struct SineTransform {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl SineTransform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * (n + 1));
        Self { n, fft }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Writes `scale · DST-I(input)` into `out`.
    pub fn apply(&self, input: &[f64], scale: f64, out: &mut [f64]) {
        let n = self.n;
        assert_eq!(input.len(), n);
        assert_eq!(out.len(), n);
        let m = 2 * (n + 1);
        let zero = Complex::new(0.0, 0.0);
        let mut buf = vec![zero; m];
        for (j, &x) in input.iter().enumerate() {
            buf[j + 1] = Complex::new(x, 0.0);
            buf[m - 1 - j] = Complex::new(-x, 0.0);
        }
        let mut scratch = vec![zero; self.fft.get_inplace_scratch_len()];
        self.fft.process_with_scratch(&mut buf, &mut scratch);
        // FFT of the odd extension is −2i·y_k.
        let s = -0.5 * scale;
        for (k, y) in out.iter_mut().enumerate() {
            *y = s * buf[k + 1].im;
        }
    }
}

/// Distorted-Fourier coefficients `c_k ≈ F_D u(λ_k)`.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<RadialGrid>,
    c: Vec<f64>,
}

impl SpectralField {
    pub fn new(grid: Arc<RadialGrid>, c: Vec<f64>) -> Result<Self> {
        if c.len() != grid.len() {
            return Err(Error::Input(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                c.len()
            )));
        }
        if let Some(k) = c.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalInput(format!("coefficient {k} is {}", c[k])));
        }
        Ok(Self { grid, c })
    }

    pub(crate) fn from_raw(grid: Arc<RadialGrid>, c: Vec<f64>) -> Self {
        debug_assert_eq!(c.len(), grid.len());
        Self { grid, c }
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self {
            c: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    /// A single eigenmode: `c_k = amplitude` at the 1-based index `k`.
    pub fn mode(grid: &Arc<RadialGrid>, k: usize, amplitude: f64) -> Result<Self> {
        if k == 0 || k > grid.len() {
            return Err(Error::Config(format!(
                "mode index {k} outside 1..={}",
                grid.len()
            )));
        }
        let mut s = Self::zeros(grid);
        s.c[k - 1] = amplitude;
        Ok(s)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.c
    }
}

fn forward_prefactor(grid: &RadialGrid) -> f64 {
    (2.0 / PI).sqrt() * grid.spacing()
}

fn inverse_prefactor(grid: &RadialGrid) -> f64 {
    (2.0 / PI).sqrt() * grid.spectral_spacing()
}

pub(crate) fn forward_values(grid: &RadialGrid, g: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; g.len()];
    grid.transform().apply(g, forward_prefactor(grid), &mut c);
    c
}

pub(crate) fn inverse_values(grid: &RadialGrid, c: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; c.len()];
    grid.transform().apply(c, inverse_prefactor(grid), &mut g);
    g
}

/// `F_D`: node values to spectral coefficients, `O(N log N)`.
pub fn forward(f: &RadialField) -> SpectralField {
    let grid = f.grid().clone();
    let c = forward_values(&grid, f.values());
    SpectralField::from_raw(grid, c)
}

/// `F_D^{-1}`: spectral coefficients to node values.
pub fn inverse(s: &SpectralField) -> RadialField {
    let g = inverse_values(&s.grid, &s.c);
    RadialField::from_raw(s.grid.clone(), g)
}

/// Relative mismatch `|Δλ‖c‖² − h‖g‖²| / (h‖g‖²)`.
pub fn plancherel_defect(f: &RadialField) -> Result<f64> {
    let grid = f.grid();
    let phys: f64 = grid.spacing() * f.values().iter().map(|g| g * g).sum::<f64>();
    if phys == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let c = forward(f);
    let spec: f64 = grid.spectral_spacing() * c.c.iter().map(|v| v * v).sum::<f64>();
    Ok((spec - phys).abs() / phys)
}
