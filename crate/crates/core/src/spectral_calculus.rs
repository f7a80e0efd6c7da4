//! Functional calculus `m(√(−Δ_Ω))`, Littlewood–Paley pieces, Sobolev and
//! Besov norms, the NLW energy, and the exponent algebra of the truncation
//! argument.

use std::fmt;
use std::sync::Arc;

use crate::distorted_fourier::{forward, forward_values, inverse_values, SpectralField};
use crate::error::{Error, Result};
use crate::radial_field::{lp_norm, RadialField, RadialGrid, WaveState};

/// A spectral symbol `m(λ)`, applied as `F_D^{-1}(m · F_D f)`.
#[derive(Clone)]
pub struct Multiplier {
    symbol: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Multiplier(..)")
    }
}

impl Multiplier {
    pub fn new<F>(symbol: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            symbol: Arc::new(symbol),
        }
    }

    pub fn identity() -> Self {
        Self::new(|_| 1.0)
    }

    /// `λ^σ`, i.e. `(−Δ_Ω)^{σ/2}`.
    pub fn power(sigma: f64) -> Self {
        Self::new(move |l| l.powf(sigma))
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        (self.symbol)(lambda)
    }

    /// Pointwise product `m₁·m₂`.
    pub fn then(&self, other: &Multiplier) -> Multiplier {
        let a = self.symbol.clone();
        let b = other.symbol.clone();
        Self::new(move |l| a(l) * b(l))
    }

    /// The symbol tabulated on the grid spectrum; errors if any value is not finite.
    pub fn tabulate(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        grid.frequencies()
            .iter()
            .map(|&l| {
                let m = self.eval(l);
                if m.is_finite() {
                    Ok(m)
                } else {
                    Err(Error::Config(format!("multiplier is {m} at λ = {l}")))
                }
            })
            .collect()
    }
}

fn apply_table(f: &RadialField, table: &[f64]) -> RadialField {
    let grid = f.grid();
    let mut c = forward_values(grid, f.values());
    for (c, m) in c.iter_mut().zip(table) {
        *c *= m;
    }
    RadialField::from_raw(grid.clone(), inverse_values(grid, &c))
}

pub fn apply_multiplier(m: &Multiplier, f: &RadialField) -> Result<RadialField> {
    let table = m.tabulate(f.grid())?;
    Ok(apply_table(f, &table))
}

/// The fixed C^∞ bump `φ` and its dyadic rescalings.
///
/// `φ = 1` on `[0,1]`, `φ = 0` on `[2,∞)`, and on `(1,2)`
/// `φ(λ) = B(2−λ) / (B(2−λ) + B(λ−1))` with `B(x) = exp(−1/x)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DyadicCutoff;

fn bump_factor(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

impl DyadicCutoff {
    pub fn phi(&self, lambda: f64) -> f64 {
        if lambda <= 1.0 {
            1.0
        } else if lambda >= 2.0 {
            0.0
        } else {
            let a = bump_factor(2.0 - lambda);
            let b = bump_factor(lambda - 1.0);
            a / (a + b)
        }
    }

    /// `φ_N(λ) = φ(λ/N)`.
    pub fn phi_n(&self, lambda: f64, n: f64) -> f64 {
        self.phi(lambda / n)
    }

    /// `ψ_N = φ_N − φ_{N/2}`, supported in `[N/2, 2N]`.
    pub fn psi_n(&self, lambda: f64, n: f64) -> f64 {
        self.phi_n(lambda, n) - self.phi_n(lambda, 0.5 * n)
    }
}

/// Smallest power of two `≥ x` (for `x > 0`).
fn dyadic_ceil(x: f64) -> f64 {
    let mut k = x.log2().ceil() as i32;
    while 2f64.powi(k) < x {
        k += 1;
    }
    while 2f64.powi(k - 1) >= x {
        k -= 1;
    }
    2f64.powi(k)
}

fn is_dyadic(n: f64) -> bool {
    // Positive normal numbers with an all-zero mantissa are exact powers of two.
    n.is_normal() && n > 0.0 && n.to_bits() & ((1u64 << 52) - 1) == 0
}

/// Dyadic frequencies `N` for which `P_N` is defined on this grid:
/// from the first power of two `≥ 2Δλ` to the first power of two `≥ λ_max`.
///
/// The upper end is the smallest `N` with `φ_N ≡ 1` on the whole spectrum,
/// which is what makes the dyadic sum reconstruct every field.
pub fn dyadic_band(grid: &RadialGrid) -> (f64, f64) {
    (
        dyadic_ceil(2.0 * grid.spectral_spacing()),
        dyadic_ceil(grid.max_frequency()),
    )
}

/// All band dyadics in increasing order.
pub fn band_dyadics(grid: &RadialGrid) -> Vec<f64> {
    let (lo, hi) = dyadic_band(grid);
    let mut out = vec![];
    let mut n = lo;
    while n <= hi {
        out.push(n);
        n *= 2.0;
    }
    out
}

fn check_dyadic(grid: &RadialGrid, n: f64, lo_factor: f64) -> Result<()> {
    let (lo, hi) = dyadic_band(grid);
    let lo = lo * lo_factor;
    if !is_dyadic(n) || n < lo || n > hi {
        return Err(Error::Band { n, lo, hi });
    }
    Ok(())
}

/// `P_N f`, spectrum in `[N/2, 2N]`.
pub fn lp_project(f: &RadialField, n: f64) -> Result<RadialField> {
    check_dyadic(f.grid(), n, 1.0)?;
    let cut = DyadicCutoff;
    let table: Vec<f64> = f.grid().frequencies().iter().map(|&l| cut.psi_n(l, n)).collect();
    Ok(apply_table(f, &table))
}

/// `P_{≤N} f = φ_N(√(−Δ_Ω)) f`. Accepts `N` down to half the lowest band dyadic
/// so the sub-band tail is expressible.
pub fn lp_low(f: &RadialField, n: f64) -> Result<RadialField> {
    check_dyadic(f.grid(), n, 0.5)?;
    let cut = DyadicCutoff;
    let table: Vec<f64> = f.grid().frequencies().iter().map(|&l| cut.phi_n(l, n)).collect();
    Ok(apply_table(f, &table))
}

/// `P_{>N} f = (1 − φ_N)(√(−Δ_Ω)) f`.
pub fn lp_high(f: &RadialField, n: f64) -> Result<RadialField> {
    check_dyadic(f.grid(), n, 0.5)?;
    let cut = DyadicCutoff;
    let table: Vec<f64> = f
        .grid()
        .frequencies()
        .iter()
        .map(|&l| 1.0 - cut.phi_n(l, n))
        .collect();
    Ok(apply_table(f, &table))
}

/// `(Σ_k λ_k^{2σ} c_k² Δλ)^{1/2}` on already transformed coefficients.
pub fn sobolev_norm_spectral(s: &SpectralField, sigma: f64) -> f64 {
    let grid = s.grid();
    spectral_sobolev(grid, s.coefficients(), sigma)
}

pub(crate) fn spectral_sobolev(grid: &RadialGrid, c: &[f64], sigma: f64) -> f64 {
    let sum: f64 = if sigma == 0.0 {
        c.iter().map(|c| c * c).sum()
    } else if sigma == 1.0 {
        c.iter()
            .zip(grid.frequencies())
            .map(|(c, l)| (c * l) * (c * l))
            .sum()
    } else {
        c.iter()
            .zip(grid.frequencies())
            .map(|(c, l)| l.powf(2.0 * sigma) * c * c)
            .sum()
    };
    (sum * grid.spectral_spacing()).sqrt()
}

/// Homogeneous Sobolev norm `‖u‖_{Ḣ^σ_D}`, computed spectrally.
pub fn sobolev_norm(f: &RadialField, sigma: f64) -> f64 {
    sobolev_norm_spectral(&forward(f), sigma)
}

/// `(Σ_N N^{σρ} ‖P_N f‖_{L^q}^ρ)^{1/ρ}` over the band dyadics.
pub fn besov_norm(f: &RadialField, sigma: f64, q: f64, rho: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::Config(format!("Besov spatial exponent must be ≥ 1, got {q}")));
    }
    if !(rho.is_finite() && rho >= 1.0) {
        return Err(Error::Config(format!(
            "Besov summation exponent must be finite and ≥ 1, got {rho}"
        )));
    }
    let grid = f.grid();
    let c = forward_values(grid, f.values());
    let cut = DyadicCutoff;
    let mut sum = 0.0;
    let mut block = vec![0.0; c.len()];
    for n in band_dyadics(grid) {
        let mut any = false;
        for ((b, c), l) in block.iter_mut().zip(&c).zip(grid.frequencies()) {
            let w = cut.psi_n(*l, n);
            any |= w != 0.0 && *c != 0.0;
            *b = w * c;
        }
        if !any {
            continue;
        }
        let piece = RadialField::from_raw(grid.clone(), inverse_values(grid, &block));
        sum += (n.powf(sigma) * lp_norm(&piece, q)?).powf(rho);
    }
    Ok(sum.powf(1.0 / rho))
}

/// `∫ ½|u_t|² + ½|∇u|² + |u|^{p+1}/(p+1)` with the gradient term from the
/// spectral `Ḣ¹` norm.
pub fn energy(st: &WaveState, p: f64) -> f64 {
    let kinetic = lp_norm(&st.ut, 2.0).unwrap_or(0.0);
    let gradient = sobolev_norm(&st.u, 1.0);
    let potential = lp_norm(&st.u, p + 1.0).unwrap_or(0.0).powf(p + 1.0) / (p + 1.0);
    0.5 * kinetic * kinetic + 0.5 * gradient * gradient + potential
}

/// Quadratic part `½‖u_t‖² + ½‖u‖²_{Ḣ¹}` (conserved by the linear flow).
pub fn linear_energy(st: &WaveState) -> f64 {
    let kinetic = lp_norm(&st.ut, 2.0).unwrap_or(0.0);
    let gradient = sobolev_norm(&st.u, 1.0);
    0.5 * (kinetic * kinetic + gradient * gradient)
}

/// Nonlinearity power `p`, regularity `s` and truncation level `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterSet {
    pub p: f64,
    pub s: f64,
    pub j: u32,
}

/// Exponents derived from `(p, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedExponents {
    /// `s_c = 3/2 − 2/(p−1)`.
    pub s_c: f64,
    /// Admissibility threshold `1 − (p+3)(1−s_c)/(4(2p−3))`.
    pub s_min: f64,
    /// Exponent of `T` bounding the energy of the low-frequency part.
    pub energy_growth_exponent: f64,
    /// Exponent of `T` bounding `sup_t ‖u‖_{Ḣ^s}`.
    pub growth_bound_exponent: f64,
}

impl ParameterSet {
    /// `p` must lie in `[3, 5]`; `s` must be finite.
    pub fn new(p: f64, s: f64, j: u32) -> Result<Self> {
        if !(3.0..=5.0).contains(&p) {
            return Err(Error::Config(format!("power p = {p} outside [3, 5]")));
        }
        if !s.is_finite() {
            return Err(Error::Config(format!("regularity s = {s} is not finite")));
        }
        Ok(Self { p, s, j })
    }

    pub fn s_c(&self) -> f64 {
        critical_regularity(self.p)
    }

    pub fn s_min(&self) -> f64 {
        minimal_regularity(self.p)
    }

    /// `4(2p−3)s − 4(2p−3) + (p+3)(1−s_c)`; positive iff `s > s_min`.
    pub fn window_denominator(&self) -> f64 {
        let p = self.p;
        4.0 * (2.0 * p - 3.0) * (self.s - 1.0) + (p + 3.0) * (1.0 - self.s_c())
    }

    /// True for `p` strictly inside `(3, 5)`.
    pub fn in_open_range(&self) -> bool {
        self.p > 3.0 && self.p < 5.0
    }

    /// `s ∈ (s_min, 1)` as required to launch a truncation experiment.
    pub fn check_launchable(&self) -> Result<()> {
        let s_min = self.s_min();
        if self.s <= s_min {
            return Err(Error::Admissibility { s: self.s, s_min });
        }
        if self.s >= 1.0 {
            return Err(Error::Config(format!(
                "regularity s = {} must be below 1",
                self.s
            )));
        }
        Ok(())
    }
}

pub fn critical_regularity(p: f64) -> f64 {
    1.5 - 2.0 / (p - 1.0)
}

pub fn minimal_regularity(p: f64) -> f64 {
    let s_c = critical_regularity(p);
    1.0 - (p + 3.0) * (1.0 - s_c) / (4.0 * (2.0 * p - 3.0))
}

pub fn derived_exponents(ps: &ParameterSet) -> Result<DerivedExponents> {
    let (p, s) = (ps.p, ps.s);
    let s_c = ps.s_c();
    let s_min = ps.s_min();
    let d = ps.window_denominator();
    if s <= s_min || d <= 0.0 {
        return Err(Error::Admissibility { s, s_min });
    }
    let energy_growth_exponent = (p + 3.0) * (1.0 - s) / d;
    let growth_bound_exponent =
        2.0 * (1.0 - s) + (7.0 * p - 3.0 - (6.0 * p - 6.0) * s) * (1.0 - s) / (2.0 * d);
    Ok(DerivedExponents {
        s_c,
        s_min,
        energy_growth_exponent,
        growth_bound_exponent,
    })
}
