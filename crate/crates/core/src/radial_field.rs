//! Radial grids and fields stored in the `g = r·u` representation.
//!
//! The exterior variable `r ∈ [1, 1+L]` is sampled at `N` interior nodes
//! `r_j = 1 + j·h`, `h = L/(N+1)`. Both ends carry implicit Dirichlet zeros:
//! `r = 1` is the obstacle and `r = 1+L` the artificial outer wall.
//! All spatial norms use the measure `r² dr` (no angular `4π`).

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::distorted_fourier::SineTransform;
use crate::error::{Error, Result};

/// Uniform discretization of `[1, 1+L]` together with its sine spectrum
/// `λ_k = kπ/L`, `k = 1..N`.
pub struct RadialGrid {
    length: f64,
    n: usize,
    spacing: f64,
    radii: Vec<f64>,
    frequencies: Vec<f64>,
    plan: OnceLock<Arc<SineTransform>>,
}

impl fmt::Debug for RadialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialGrid")
            .field("length", &self.length)
            .field("n", &self.n)
            .finish()
    }
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length.to_bits() == other.length.to_bits()
    }
}

/// Builds a grid of `n` interior nodes on `[1, 1+length]`.
pub fn make_grid(length: f64, n: usize) -> Result<Arc<RadialGrid>> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::Config(format!(
            "grid length must be positive and finite, got {length}"
        )));
    }
    if n == 0 {
        return Err(Error::Config("grid needs at least one interior node".into()));
    }
    let spacing = length / (n as f64 + 1.0);
    let dl = PI / length;
    let radii = (1..=n).map(|j| 1.0 + j as f64 * spacing).collect();
    let frequencies = (1..=n).map(|k| k as f64 * dl).collect();
    Ok(Arc::new(RadialGrid {
        length,
        n,
        spacing,
        radii,
        frequencies,
        plan: OnceLock::new(),
    }))
}

impl RadialGrid {
    /// Outer extent `L` beyond the obstacle.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of interior nodes `N`.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Node spacing `h = L/(N+1)`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Shifted node `t_j = r_j − 1` for the 0-based index `j`.
    pub fn node(&self, j: usize) -> f64 {
        self.radii[j] - 1.0
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Spectral spacing `Δλ = π/L`.
    pub fn spectral_spacing(&self) -> f64 {
        PI / self.length
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Largest resolvable frequency `λ_N = Nπ/L`.
    pub fn max_frequency(&self) -> f64 {
        self.frequencies[self.n - 1]
    }

    pub(crate) fn transform(&self) -> &SineTransform {
        self.plan
            .get_or_init(|| Arc::new(SineTransform::new(self.n)))
            .as_ref()
    }
}

/// A radial function sampled as `g_j = r_j·u(r_j)` at the interior nodes.
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    g: Vec<f64>,
}

impl RadialField {
    /// Wraps node values `g_j = r_j·u(r_j)`; every value must be finite.
    pub fn new(grid: Arc<RadialGrid>, g: Vec<f64>) -> Result<Self> {
        if g.len() != grid.len() {
            return Err(Error::Input(format!(
                "expected {} samples, got {}",
                grid.len(),
                g.len()
            )));
        }
        if let Some(j) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalInput(format!(
                "sample {} at r = {} is {}",
                j,
                grid.radii()[j],
                g[j]
            )));
        }
        Ok(Self { grid, g })
    }

    pub(crate) fn from_raw(grid: Arc<RadialGrid>, g: Vec<f64>) -> Self {
        debug_assert_eq!(g.len(), grid.len());
        Self { grid, g }
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self {
            g: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// The stored values `g_j`.
    pub fn values(&self) -> &[f64] {
        &self.g
    }

    pub fn into_values(self) -> Vec<f64> {
        self.g
    }

    /// Physical value `u(r_j) = g_j / r_j`.
    pub fn value_at(&self, j: usize) -> f64 {
        self.g[j] / self.grid.radii[j]
    }

    /// Physical samples `u(r_j)`.
    pub fn physical(&self) -> Vec<f64> {
        self.g
            .iter()
            .zip(&self.grid.radii)
            .map(|(g, r)| g / r)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.g.iter().all(|&v| v == 0.0)
    }

    pub fn same_grid(&self, other: &RadialField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn scaled(&self, c: f64) -> RadialField {
        Self::from_raw(self.grid.clone(), self.g.iter().map(|v| c * v).collect())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &RadialField, b: f64) -> Result<RadialField> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let g = self
            .g
            .iter()
            .zip(&other.g)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self::from_raw(self.grid.clone(), g))
    }

    pub fn sub(&self, other: &RadialField) -> Result<RadialField> {
        self.combine(1.0, other, -1.0)
    }

    pub fn add(&self, other: &RadialField) -> Result<RadialField> {
        self.combine(1.0, other, 1.0)
    }

    /// Largest `r_j` at which `|g_j|` exceeds `rel_tol·max|g|`; `1.0` for the zero field.
    pub fn support_radius(&self, rel_tol: f64) -> f64 {
        let peak = self.g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return 1.0;
        }
        self.g
            .iter()
            .rposition(|v| v.abs() > rel_tol * peak)
            .map_or(1.0, |j| self.grid.radii[j])
    }
}

/// Samples `profile` at the nodes, storing `g_j = r_j·profile(r_j)`.
pub fn sample<F>(profile: F, grid: &Arc<RadialGrid>) -> Result<RadialField>
where
    F: Fn(f64) -> f64,
{
    let g = grid.radii().iter().map(|&r| r * profile(r)).collect();
    RadialField::new(grid.clone(), g)
}

/// `(∫ |u|^p r² dr)^{1/p}` by the rectangle rule over interior nodes;
/// `p = ∞` gives `max_j |u(r_j)|`.
pub fn lp_norm(f: &RadialField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Config(format!("Lebesgue exponent must be ≥ 1, got {p}")));
    }
    let radii = f.grid.radii();
    if p.is_infinite() {
        return Ok(f
            .g
            .iter()
            .zip(radii)
            .fold(0.0_f64, |m, (g, r)| m.max((g / r).abs())));
    }
    let h = f.grid.spacing();
    if p == 2.0 {
        let s: f64 = f.g.iter().map(|g| g * g).sum();
        return Ok((h * s).sqrt());
    }
    let s: f64 = f
        .g
        .iter()
        .zip(radii)
        .map(|(g, r)| (g / r).abs().powf(p) * r * r)
        .sum();
    Ok((h * s).powf(1.0 / p))
}

/// `max_j r_j^α |u(r_j)|`.
pub fn weighted_sup(f: &RadialField, alpha: f64) -> f64 {
    f.g.iter()
        .zip(f.grid.radii())
        .fold(0.0_f64, |m, (g, r)| m.max(r.powf(alpha) * (g / r).abs()))
}

/// L² norm restricted to the outer `fraction` of the nodes.
pub fn tail_l2_norm(f: &RadialField, fraction: f64) -> f64 {
    let n = f.g.len();
    let start = n - ((n as f64 * fraction).ceil() as usize).min(n);
    let s: f64 = f.g[start..].iter().map(|g| g * g).sum();
    (f.grid.spacing() * s).sqrt()
}

/// Position and velocity `(u, ∂_t u)` at time `t`.
#[derive(Debug, Clone)]
pub struct WaveState {
    pub u: RadialField,
    pub ut: RadialField,
    pub t: f64,
}

impl WaveState {
    pub fn new(u: RadialField, ut: RadialField, t: f64) -> Result<Self> {
        if !u.same_grid(&ut) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { u, ut, t })
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self {
            u: RadialField::zeros(grid),
            ut: RadialField::zeros(grid),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.u.grid()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_on_pi_has_integer_spectrum() {
        let grid = make_grid(PI, 3).unwrap();
        assert_relative_eq!(grid.spacing(), PI / 4.0);
        assert_relative_eq!(grid.spectral_spacing(), 1.0);
        for (k, lam) in grid.frequencies().iter().enumerate() {
            assert_relative_eq!(*lam, (k + 1) as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn production_grid_spectrum() {
        let grid = make_grid(40.0, 8192).unwrap();
        assert_relative_eq!(grid.spectral_spacing(), 0.078_539_816, epsilon = 1e-8);
        assert_relative_eq!(grid.max_frequency(), 8192.0 * PI / 40.0, epsilon = 1e-9);
        assert!((grid.max_frequency() - 643.4).abs() < 0.05);
        assert!((grid.spacing() * 8193.0 - 40.0).abs() <= 40.0 * f64::EPSILON);
        let r = grid.radii();
        assert!(r[0] > 1.0 && r[r.len() - 1] < 41.0);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(matches!(make_grid(0.0, 8), Err(Error::Config(_))));
        assert!(matches!(make_grid(-1.0, 8), Err(Error::Config(_))));
        assert!(matches!(make_grid(1.0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn sampling_examples() {
        let grid = make_grid(PI, 3).unwrap();
        assert!(sample(|_| 0.0, &grid).unwrap().is_zero());
        let f = sample(|r| 1.0 / r, &grid).unwrap();
        for g in f.values() {
            assert_relative_eq!(*g, 1.0, epsilon = 1e-15);
        }
        let grid = make_grid(PI, 17).unwrap();
        let f = sample(|r| (r - 1.0).sin() / r, &grid).unwrap();
        for (j, g) in f.values().iter().enumerate() {
            assert_relative_eq!(*g, grid.node(j).sin(), epsilon = 1e-14);
        }
        let err = sample(|r| 1.0 / (r - grid.radii()[2]), &grid).unwrap_err();
        assert!(matches!(err, Error::NumericalInput(_)));
    }

    #[test]
    fn l2_of_inverse_square_converges() {
        let mut prev = f64::INFINITY;
        for n in [1000, 10_000, 100_000] {
            let grid = make_grid(9.0, n).unwrap();
            let f = sample(|r| 1.0 / (r * r), &grid).unwrap();
            let err = (lp_norm(&f, 2.0).unwrap() - 0.9_f64.sqrt()).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn norm_edge_cases() {
        let grid = make_grid(5.0, 64).unwrap();
        let zero = RadialField::zeros(&grid);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(lp_norm(&zero, p).unwrap(), 0.0);
        }
        assert_eq!(weighted_sup(&zero, 0.7), 0.0);
        assert!(matches!(lp_norm(&zero, 0.5), Err(Error::Config(_))));

        let f = sample(|r| 1.0 / r, &grid).unwrap();
        assert_relative_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 1.0 / grid.radii()[0]);
        assert_relative_eq!(weighted_sup(&f, 1.0), 1.0, epsilon = 1e-15);
    }

    fn random_field(n: usize, vals: &[f64]) -> RadialField {
        let grid = make_grid(3.0, n).unwrap();
        let g = (0..n).map(|j| vals[j % vals.len()] * (1.0 + j as f64).sin()).collect();
        RadialField::new(grid, g).unwrap()
    }

    proptest! {
        #[test]
        fn lp_norm_is_homogeneous(
            vals in prop::collection::vec(-3.0f64..3.0, 1..20),
            c in -10.0f64..10.0,
            p in 1.0f64..8.0,
        ) {
            let f = random_field(37, &vals);
            let lhs = lp_norm(&f.scaled(c), p).unwrap();
            let rhs = c.abs() * lp_norm(&f, p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + rhs));
        }

        #[test]
        fn holder_interpolation_bound(
            vals in prop::collection::vec(-3.0f64..3.0, 1..20),
            p in 1.0f64..2.0,
            q in 2.0f64..12.0,
        ) {
            // 1/2 = θ/p + (1−θ)/q
            let theta = (0.5 - 1.0 / q) / (1.0 / p - 1.0 / q);
            let f = random_field(41, &vals);
            let lhs = lp_norm(&f, 2.0).unwrap();
            let rhs = lp_norm(&f, p).unwrap().powf(theta) * lp_norm(&f, q).unwrap().powf(1.0 - theta);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn readback_then_sample_is_identity(vals in prop::collection::vec(-5.0f64..5.0, 23)) {
            let grid = make_grid(2.0, 23).unwrap();
            let f = RadialField::new(grid.clone(), vals.clone()).unwrap();
            let u = f.physical();
            let back = RadialField::new(
                grid.clone(),
                grid.radii().iter().zip(&u).map(|(r, u)| r * u).collect(),
            ).unwrap();
            for (a, b) in back.values().iter().zip(&vals) {
                prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs());
            }
        }
    }
}
