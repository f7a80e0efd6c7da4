//! Empirical checks of the linear estimates (radial Sobolev, Bernstein,
//! dispersive decay, Strichartz) and the frequency-truncation experiment.
//!
//! Every routine is deterministic in `(seed, grid, parameters)`; parallel
//! trials are collected in index order.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distorted_fourier::{inverse_values, SpectralField};
use crate::error::{Error, Result};
use crate::radial_field::{lp_norm, sample, RadialField, RadialGrid};
use crate::spectral_calculus::{
    besov_norm, derived_exponents, lp_project, sobolev_norm, DerivedExponents, DyadicCutoff, ParameterSet,
};
use crate::wave_dynamics::{
    linear_flow, solve_coupled, t_window, CoupledReport, CoupledSample, StepperConfig, Trajectory, WindowedNorm,
};

/// A space–time exponent pair with `β(rx) = γ(rx) = 1 − 2/rx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrichartzPair {
    pub q: f64,
    pub rx: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl StrichartzPair {
    pub fn new(q: f64, rx: f64) -> Result<Self> {
        if q.is_nan() || rx.is_nan() || q < 1.0 || rx < 1.0 {
            return Err(Error::Config(format!("exponents must be ≥ 1, got q = {q}, rx = {rx}")));
        }
        let w = if rx.is_infinite() { 1.0 } else { 1.0 - 2.0 / rx };
        Ok(Self { q, rx, beta: w, gamma: w })
    }

    /// The radial endpoint pair `(2, rx)`, valid for `rx > 4`, at regularity `1 − 3/rx`.
    pub fn endpoint(rx: f64) -> Result<Self> {
        if !(rx > 4.0) {
            return Err(Error::Config(format!("endpoint pair needs rx > 4, got {rx}")));
        }
        Self::new(2.0, rx)
    }

    /// Regularity of the endpoint family, `1 − 3/rx`.
    pub fn endpoint_regularity(&self) -> f64 {
        1.0 - 3.0 / self.rx
    }

    /// Scaling gap `ρ + 3(1/2 − 1/rx) − 1/q`: the data regularity `μ` an
    /// estimate with `ρ` derivatives on this pair must use.
    pub fn scaling_regularity(&self, rho: f64) -> f64 {
        rho + 3.0 * (0.5 - 1.0 / self.rx) - 1.0 / self.q
    }

    pub fn is_admissible(&self, rho: f64, mu: f64, tol: f64) -> bool {
        (self.scaling_regularity(rho) - mu).abs() <= tol
    }
}

/// Least-squares line through `(log x, log y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub count: usize,
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

pub fn fit_power_law(series: &[(f64, f64)]) -> Result<FitResult> {
    if series.len() < 3 {
        return Err(Error::Input(format!("power-law fit needs at least 3 points, got {}", series.len())));
    }
    if let Some((x, y)) = series.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Input(format!("power-law fit needs positive entries, got ({x}, {y})")));
    }
    let n = series.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = series.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Input("power-law fit needs at least two distinct x".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(FitResult {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
        count: series.len(),
    })
}

// ---------------------------------------------------------------------------
// Test-field families

/// `A·exp(1 − 1/(1 − x²))`, `x = (r − c)/w`: peak `A` at `c`, support `[c−w, c+w]`.
pub fn bump_profile(center: f64, width: f64, amplitude: f64) -> impl Fn(f64) -> f64 + Send + Sync {
    move |r| {
        let x = (r - center) / width;
        if x.abs() < 1.0 {
            amplitude * (1.0 - 1.0 / (1.0 - x * x)).exp()
        } else {
            0.0
        }
    }
}

pub fn bump(grid: &Arc<RadialGrid>, center: f64, width: f64, amplitude: f64) -> Result<RadialField> {
    if !(width > 0.0) || center - width < 1.0 {
        return Err(Error::Config(format!(
            "bump at {center} of width {width} must lie in r ≥ 1"
        )));
    }
    sample(bump_profile(center, width, amplitude), grid)
}

/// Sum of 1–5 bumps; widths in `widths`, centres in `[1 + w, 1 + w + spread]`,
/// amplitudes in `±[0.2, 2]`.
pub fn random_bumps(grid: &Arc<RadialGrid>, widths: (f64, f64), spread: f64, rng: &mut ChaCha8Rng) -> Result<RadialField> {
    let count = rng.gen_range(1..=5);
    let mut g = vec![0.0; grid.len()];
    for _ in 0..count {
        let w = if widths.0 == widths.1 { widths.0 } else { rng.gen_range(widths.0..widths.1) };
        let c = 1.0 + w + rng.gen_range(0.0..spread);
        let a = rng.gen_range(0.2..2.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let prof = bump_profile(c, w, a);
        for (x, r) in g.iter_mut().zip(grid.radii()) {
            *x += r * prof(*r);
        }
    }
    RadialField::new(grid.clone(), g)
}

/// Field with coefficients `±1` (seeded signs) across the whole spectrum.
pub fn white_spectrum(grid: &Arc<RadialGrid>, seed: u64) -> RadialField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..grid.len())
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect();
    RadialField::from_raw(grid.clone(), inverse_values(grid, &c))
}

/// Smooth step: 1 on `[0, a]`, 0 on `[b, ∞)`.
fn smooth_window(t: f64, a: f64, b: f64) -> f64 {
    let x = (t - a) / (b - a);
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        let e = |y: f64| (-1.0 / y).exp();
        e(1.0 - x) / (e(1.0 - x) + e(x))
    }
}

/// Inner and outer window radius (distance from `r = 1`) applied to rough data.
pub const ROUGH_WINDOW: (f64, f64) = (5.0, 10.0);

/// "Barely `Ḣ^s`" data: `c_k = a·λ_k^{−s−1/2}(1+λ_k)^{−δ}ξ_k`, `ξ_k = ±1`,
/// then cut off smoothly to `r − 1 ≤ 10` so the data has compact support.
pub fn rough_data(grid: &Arc<RadialGrid>, s: f64, amplitude: f64, delta: f64, seed: u64) -> Result<RadialField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = grid
        .frequencies()
        .iter()
        .map(|&l| {
            let xi = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            amplitude * l.powf(-s - 0.5) * (1.0 + l).powf(-delta) * xi
        })
        .collect();
    let g = inverse_values(grid, &c);
    let (a, b) = ROUGH_WINDOW;
    let g = g
        .iter()
        .enumerate()
        .map(|(j, g)| g * smooth_window(grid.node(j), a, b))
        .collect();
    RadialField::new(grid.clone(), g)
}

/// Initial data recipes shared by the experiments and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Bump { center: f64, width: f64, amplitude: f64 },
    /// Single eigenmode `k` (1-based).
    Mode { k: usize, amplitude: f64 },
    Rough { amplitude: f64, delta: f64, seed: u64 },
}

impl DataSpec {
    /// `(u0, u1)`; rough data uses the regularity `s` and zero velocity.
    pub fn generate(&self, grid: &Arc<RadialGrid>, s: f64) -> Result<(RadialField, RadialField)> {
        let u0 = match *self {
            DataSpec::Bump { center, width, amplitude } => bump(grid, center, width, amplitude)?,
            DataSpec::Mode { k, amplitude } => {
                RadialField::from_raw(grid.clone(), inverse_values(grid, SpectralField::mode(grid, k, amplitude)?.coefficients()))
            }
            DataSpec::Rough { amplitude, delta, seed } => rough_data(grid, s, amplitude, delta, seed)?,
        };
        Ok((u0, RadialField::zeros(grid)))
    }
}

// ---------------------------------------------------------------------------
// Radial Sobolev

/// Widths used to probe concentration.
pub const SOBOLEV_WIDTHS: [f64; 5] = [0.1, 0.2, 0.5, 1.0, 2.0];

/// `sup r^{4/(p+2)}|u| / (‖u‖_p^{p/(p+2)} ‖u‖_{Ḣ¹}^{2/(p+2)})`, `None` for the zero field.
pub fn radial_sobolev_ratio(f: &RadialField, p: f64) -> Result<Option<f64>> {
    if f.is_zero() {
        return Ok(None);
    }
    let alpha = 4.0 / (p + 2.0);
    let lhs = f
        .values()
        .iter()
        .zip(f.grid().radii())
        .map(|(g, r)| r.powf(alpha - 1.0) * g.abs())
        .fold(0.0, f64::max);
    let lp = lp_norm(f, p)?;
    let h1 = sobolev_norm(f, 1.0);
    let rhs = lp.powf(p / (p + 2.0)) * h1.powf(2.0 / (p + 2.0));
    if rhs == 0.0 {
        return Ok(None);
    }
    Ok(Some(lhs / rhs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialSobolevReport {
    pub p: f64,
    /// Maximum over every evaluated field.
    pub max_ratio: f64,
    /// Maximum over the mixed-width random family.
    pub random_max: f64,
    /// `(σ, max ratio)` over fields built from bumps of width `σ`.
    pub per_width: Vec<(f64, f64)>,
    pub evaluated: usize,
    pub skipped: usize,
}

impl RadialSobolevReport {
    /// `max/min` of the per-width maxima.
    pub fn width_spread(&self) -> f64 {
        let hi = self.per_width.iter().map(|w| w.1).fold(0.0, f64::max);
        let lo = self.per_width.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
        hi / lo
    }
}

/// Grid for the inequality experiments: resolves width-0.1 bumps comfortably.
pub fn inequality_grid() -> Arc<RadialGrid> {
    crate::radial_field::make_grid(30.0, 8191).expect("valid grid")
}

pub fn verify_radial_sobolev(p: f64, trials: usize, seed: u64) -> Result<RadialSobolevReport> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Config(format!("exponent must be ≥ 1, got {p}")));
    }
    let grid = inequality_grid();
    let eval = |trial: usize, widths: (f64, f64)| -> Result<Option<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let f = random_bumps(&grid, widths, 12.0, &mut rng)?;
        radial_sobolev_ratio(&f, p)
    };
    let random: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| eval(t, (0.1, 2.0)))
        .collect::<Result<_>>()?;
    let per_trial = (trials / SOBOLEV_WIDTHS.len()).max(1);
    let mut per_width = vec![];
    let mut all = random.clone();
    for (i, &w) in SOBOLEV_WIDTHS.iter().enumerate() {
        let rs: Vec<Option<f64>> = (0..per_trial)
            .into_par_iter()
            .map(|t| eval(trials + i * per_trial + t, (w, w)))
            .collect::<Result<_>>()?;
        per_width.push((w, rs.iter().flatten().cloned().fold(0.0, f64::max)));
        all.extend(rs);
    }
    let evaluated = all.iter().flatten().count();
    Ok(RadialSobolevReport {
        p,
        max_ratio: all.iter().flatten().cloned().fold(0.0, f64::max),
        random_max: random.iter().flatten().cloned().fold(0.0, f64::max),
        per_width,
        evaluated,
        skipped: all.len() - evaluated,
    })
}

// ---------------------------------------------------------------------------
// Bernstein

/// Theoretical exponent `3(1/q_from − 1/q_to)`.
pub fn bernstein_exponent(q_from: f64, q_to: f64) -> f64 {
    3.0 * (1.0 / q_from - 1.0 / q_to)
}

/// Mean over `trials` white-spectrum fields of `log(‖P_N f‖_{q_to}/‖f‖_{q_from})`
/// for each `N`, fitted against `log N`. Here `f` is the white field
/// restricted to the annulus of `P_N` (smooth symbol `ψ_N`), on the inequality grid.
pub fn verify_bernstein(q_from: f64, q_to: f64, ns: &[f64], trials: usize, seed: u64) -> Result<FitResult> {
    verify_bernstein_on(&inequality_grid(), q_from, q_to, ns, trials, seed)
}

pub fn verify_bernstein_on(
    grid: &Arc<RadialGrid>,
    q_from: f64,
    q_to: f64,
    ns: &[f64],
    trials: usize,
    seed: u64,
) -> Result<FitResult> {
    if !(q_from >= 1.0 && q_to >= q_from) {
        return Err(Error::Config(format!("need 1 ≤ q_from ≤ q_to, got {q_from}, {q_to}")));
    }
    if trials == 0 {
        return Err(Error::Config("at least one trial required".into()));
    }
    let cut = DyadicCutoff;
    let mut series = vec![];
    for &n in ns {
        // Validate the band once up front.
        lp_project(&RadialField::zeros(grid), n)?;
        let logs: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<f64> {
                let white = white_spectrum(grid, seed.wrapping_add(t as u64));
                let c = crate::distorted_fourier::forward_values(grid, white.values());
                let local: Vec<f64> = c
                    .iter()
                    .zip(grid.frequencies())
                    .map(|(c, l)| c * cut.psi_n(*l, n))
                    .collect();
                let f = RadialField::from_raw(grid.clone(), inverse_values(grid, &local));
                let pf = lp_project(&f, n)?;
                Ok((lp_norm(&pf, q_to)? / lp_norm(&f, q_from)?).ln())
            })
            .collect::<Result<_>>()?;
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        series.push((n, mean.exp()));
    }
    fit_power_law(&series)
}

// ---------------------------------------------------------------------------
// Dispersive decay and Strichartz norms

/// `(t, ‖U(t) f0‖)`: the grid sup norm for `rx = ∞`, otherwise
/// `‖·‖_{Ḃ^{−β}_{rx,2}}`. Times must stay below `L − R` (`R` the support radius).
pub fn decay_series(f0: &RadialField, pair: &StrichartzPair, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    let grid = f0.grid();
    let support = f0.support_radius(1e-12);
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    if t_max >= grid.length() - support {
        return Err(Error::Config(format!(
            "time {t_max} leaves the reflection-free window (L − R = {:.3})",
            grid.length() - support
        )));
    }
    let zero = RadialField::zeros(grid);
    times
        .par_iter()
        .map(|&t| -> Result<(f64, f64)> {
            let u = linear_flow(f0, &zero, t)?.u;
            let v = if pair.rx.is_infinite() {
                lp_norm(&u, f64::INFINITY)?
            } else {
                besov_norm(&u, -pair.beta, pair.rx, 2.0)?
            };
            Ok((t, v))
        })
        .collect()
}

/// Power-law fit of [`decay_series`] against `t`.
pub fn measure_dispersive_decay(f0: &RadialField, pair: &StrichartzPair, times: &[f64]) -> Result<FitResult> {
    fit_power_law(&decay_series(f0, pair, times)?)
}

/// `(∫ ‖f(t)‖_{L^rx}^q dt)^{1/q}` by the trapezoid rule on the given samples.
pub fn mixed_norm(times: &[f64], fields: &[&RadialField], q: f64, rx: f64) -> Result<f64> {
    if times.len() != fields.len() || times.is_empty() {
        return Err(Error::Input("need one field per time, and at least one".into()));
    }
    if q.is_nan() || rx.is_nan() || q < 1.0 || rx < 1.0 {
        return Err(Error::Config(format!("exponents must be ≥ 1, got q = {q}, rx = {rx}")));
    }
    let vals: Vec<f64> = fields
        .iter()
        .map(|f| lp_norm(f, rx).map(|n| n.powf(q)))
        .collect::<Result<_>>()?;
    let integral: f64 = times
        .windows(2)
        .zip(vals.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum();
    Ok(integral.powf(1.0 / q))
}

/// Windowed `‖u‖_{L^q_t L^rx_x}` over a trajectory's samples.
pub fn strichartz_norm(traj: &Trajectory, pair: &StrichartzPair) -> Result<f64> {
    if traj.samples.is_empty() {
        return Err(Error::Input("empty trajectory".into()));
    }
    let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let fields: Vec<&RadialField> = traj.samples.iter().map(|s| &s.state.u).collect();
    mixed_norm(&times, &fields, pair.q, pair.rx)
}

// ---------------------------------------------------------------------------
// Truncation experiment

#[derive(Debug, Clone)]
pub struct TruncationRow {
    pub j: u32,
    pub horizon: f64,
    pub energy_v0: f64,
    pub energy_max: f64,
    pub initial_energy_constant: f64,
    pub sup_hs_u: f64,
    pub hsc_w0: f64,
    pub sup_hsc_w: f64,
    pub strichartz_w: Vec<WindowedNorm>,
    pub samples: Vec<CoupledSample>,
}

impl TruncationRow {
    fn from_report(rep: &CoupledReport) -> Self {
        Self {
            j: rep.params.j,
            horizon: rep.horizon,
            energy_v0: rep.energy_v0,
            energy_max: rep.energy_max,
            initial_energy_constant: rep.initial_energy_constant,
            sup_hs_u: rep.sup_hs_u,
            hsc_w0: rep.hsc_w0,
            sup_hsc_w: rep.sup_hsc_w,
            strichartz_w: rep.strichartz_w.clone(),
            samples: rep.samples.clone(),
        }
    }

    /// Windowed `‖w‖_{L²_t L^{3/(1−s_c)}_x}`.
    pub fn endpoint_strichartz_w(&self) -> f64 {
        self.strichartz_w[3].value
    }
}

#[derive(Debug, Clone)]
pub struct TruncationTable {
    pub rows: Vec<TruncationRow>,
    pub exponents: Vec<DerivedExponents>,
    /// Slope of `log₂ E_T` against `J`.
    pub fitted_energy_slope: Option<f64>,
    /// Slope of `log₂ E(v)(0)` against `J`.
    pub fitted_initial_energy_slope: Option<f64>,
    /// Slope of `log sup_t ‖u‖_{Ḣ^s}` against `log T`.
    pub fitted_hs_slope: Option<f64>,
}

/// Runs [`solve_coupled`] on `[0, t_window]` for each parameter set (in
/// parallel) and fits the growth exponents. Fits need at least three rows.
pub fn truncation_experiment(
    params: &[ParameterSet],
    data: &DataSpec,
    grid: &Arc<RadialGrid>,
    cfg: &StepperConfig,
) -> Result<TruncationTable> {
    let exponents = params.iter().map(derived_exponents).collect::<Result<Vec<_>>>()?;
    let rows: Vec<TruncationRow> = params
        .par_iter()
        .map(|ps| -> Result<TruncationRow> {
            let (u0, u1) = data.generate(grid, ps.s)?;
            let horizon = t_window(ps)?;
            let rep = solve_coupled(&u0, &u1, ps, horizon, cfg)?;
            Ok(TruncationRow::from_report(&rep))
        })
        .collect::<Result<_>>()?;
    let fit = |pts: Vec<(f64, f64)>| -> Option<f64> {
        if pts.len() < 3 {
            return None;
        }
        fit_power_law(&pts).ok().map(|f| f.slope)
    };
    let dyadic = |r: &TruncationRow| 2f64.powi(r.j as i32);
    Ok(TruncationTable {
        fitted_energy_slope: fit(rows.iter().map(|r| (dyadic(r), r.energy_max)).collect()),
        fitted_initial_energy_slope: fit(rows.iter().map(|r| (dyadic(r), r.energy_v0)).collect()),
        fitted_hs_slope: fit(rows.iter().map(|r| (r.horizon, r.sup_hs_u)).collect()),
        rows,
        exponents,
    })
}
