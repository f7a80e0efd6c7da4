//! Time evolution: the exact linear propagator, Strang splitting for the
//! defocusing equation `u_tt − Δu + |u|^{p−1}u = 0`, and the coupled run that
//! splits data at frequency `2^J` into a rough high part `w` and the
//! remainder `v = u − w`.
//!
//! Internally all evolutions keep spectral coefficients of `(u, u_t)`. A step
//! is kick(dt/2) · exact rotation(dt) · kick(dt/2); the force at the end of a
//! step is cached and reused by the next step, so a step costs two transforms.

use std::sync::Arc;

use crate::distorted_fourier::{forward, forward_values, inverse, inverse_values, SpectralField};
use crate::error::{Error, Result};
use crate::radial_field::{lp_norm, tail_l2_norm, RadialField, RadialGrid, WaveState};
use crate::spectral_calculus::{
    energy, lp_high, spectral_sobolev, ParameterSet,
};

/// Fraction of the outer grid watched for boundary contamination.
pub const BOUNDARY_LAYER: f64 = 0.1;

/// Relative threshold below which samples count as outside the data support.
const SUPPORT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Kick–rotate–kick with the exact linear flow as the rotation.
    #[default]
    StrangExact,
}

#[derive(Debug, Clone)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub nan_guard: bool,
    /// Largest allowed ratio `‖u‖_{L²(outer 10%)} / ‖u‖_{L²}` at sample times.
    pub boundary_tolerance: f64,
    /// Require `support + T ≤ 0.9·L` before stepping.
    pub domain_guard: bool,
    /// Steps between recorded samples.
    pub stride: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 2e-3,
            scheme: Scheme::StrangExact,
            nan_guard: true,
            boundary_tolerance: 1e-6,
            domain_guard: true,
            stride: 10,
        }
    }
}

impl StepperConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.boundary_tolerance > 0.0) {
            return Err(Error::Config(format!(
                "boundary tolerance must be positive, got {}",
                self.boundary_tolerance
            )));
        }
        if self.stride == 0 {
            return Err(Error::Config("sampling stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// `sin(x)/x`-type factor `sin(tλ)/λ`, series form for small `tλ`.
fn sin_over(t: f64, lambda: f64) -> f64 {
    let x = t * lambda;
    if x.abs() < 1e-4 {
        let x2 = x * x;
        t * (1.0 - x2 / 6.0 * (1.0 - x2 / 20.0))
    } else {
        x.sin() / lambda
    }
}

fn check_same(a: &RadialField, b: &RadialField) -> Result<()> {
    if a.same_grid(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Exact solution of the free equation at time `t`:
/// `cos(t√−Δ) u0 + sin(t√−Δ)/√−Δ u1`, together with its time derivative.
pub fn linear_flow(u0: &RadialField, u1: &RadialField, t: f64) -> Result<WaveState> {
    check_same(u0, u1)?;
    let grid = u0.grid().clone();
    let c0 = forward_values(&grid, u0.values());
    let c1 = forward_values(&grid, u1.values());
    let mut cu = vec![0.0; c0.len()];
    let mut cv = vec![0.0; c0.len()];
    for (k, &l) in grid.frequencies().iter().enumerate() {
        let (s, c) = (t * l).sin_cos();
        cu[k] = c * c0[k] + sin_over(t, l) * c1[k];
        cv[k] = -l * s * c0[k] + c * c1[k];
    }
    Ok(WaveState {
        u: RadialField::from_raw(grid.clone(), inverse_values(&grid, &cu)),
        ut: RadialField::from_raw(grid.clone(), inverse_values(&grid, &cv)),
        t,
    })
}

/// Half-wave group `U(t) = e^{it√−Δ}` applied to a real field; returns
/// `(Re U(t)f, Im U(t)f)`.
pub fn half_wave(f: &RadialField, t: f64) -> (RadialField, RadialField) {
    let grid = f.grid().clone();
    let c = forward_values(&grid, f.values());
    let (mut re, mut im) = (vec![0.0; c.len()], vec![0.0; c.len()]);
    for (k, &l) in grid.frequencies().iter().enumerate() {
        let (s, co) = (t * l).sin_cos();
        re[k] = co * c[k];
        im[k] = s * c[k];
    }
    (
        RadialField::from_raw(grid.clone(), inverse_values(&grid, &re)),
        RadialField::from_raw(grid.clone(), inverse_values(&grid, &im)),
    )
}

#[inline]
fn signed_power(x: f64, p: f64, int_exp: Option<i32>) -> f64 {
    match int_exp {
        Some(k) => x.abs().powi(k) * x,
        None => x.abs().powf(p - 1.0) * x,
    }
}

fn integer_exponent(p: f64) -> Option<i32> {
    let k = p - 1.0;
    (k.fract() == 0.0 && k.abs() < 64.0).then_some(k as i32)
}

/// Per-grid tables for one time step and one power.
struct Propagator {
    grid: Arc<RadialGrid>,
    p: f64,
    int_exp: Option<i32>,
    dt: f64,
    cos: Vec<f64>,
    sin_over: Vec<f64>,
    lam_sin: Vec<f64>,
    /// `r_j^{−(p−1)}`, mapping `|g|^{p−1}g` to `r·|u|^{p−1}u`.
    inv_rpow: Vec<f64>,
}

impl Propagator {
    fn new(grid: &Arc<RadialGrid>, p: f64, dt: f64) -> Self {
        let n = grid.len();
        let (mut cos, mut so, mut ls) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for (k, &l) in grid.frequencies().iter().enumerate() {
            let (s, c) = (dt * l).sin_cos();
            cos[k] = c;
            so[k] = sin_over(dt, l);
            ls[k] = l * s;
        }
        let inv_rpow = grid.radii().iter().map(|r| r.powf(1.0 - p)).collect();
        Self {
            grid: grid.clone(),
            p,
            int_exp: integer_exponent(p),
            dt,
            cos,
            sin_over: so,
            lam_sin: ls,
            inv_rpow,
        }
    }

    fn rotate(&self, cu: &mut [f64], cv: &mut [f64]) {
        for k in 0..cu.len() {
            let (a, b) = (cu[k], cv[k]);
            cu[k] = self.cos[k] * a + self.sin_over[k] * b;
            cv[k] = -self.lam_sin[k] * a + self.cos[k] * b;
        }
    }

    /// g-coordinate force `−|g|^{p−1}g / r^{p−1}`.
    fn power_force(&self, g: &[f64], out: &mut [f64]) {
        for ((o, &x), w) in out.iter_mut().zip(g).zip(&self.inv_rpow) {
            *o = -signed_power(x, self.p, self.int_exp) * w;
        }
    }

    /// g-coordinate force `−(|v+w|^{p−1}(v+w) − |w|^{p−1}w) / r^{p−1}`.
    fn difference_force(&self, gv: &[f64], gw: &[f64], out: &mut [f64]) {
        for j in 0..out.len() {
            let s = gv[j] + gw[j];
            let f = signed_power(s, self.p, self.int_exp) - signed_power(gw[j], self.p, self.int_exp);
            out[j] = -f * self.inv_rpow[j];
        }
    }
}

/// Where the force comes from.
#[derive(Clone, Copy)]
enum ForceLaw<'a> {
    Power,
    /// Difference equation driven by stored `w` node values, one per step.
    Difference(&'a [Vec<f64>]),
}

/// A running Strang evolution in spectral coordinates.
struct Evolution {
    prop: Arc<Propagator>,
    cu: Vec<f64>,
    cv: Vec<f64>,
    /// Node values of `u` at the current step.
    gu: Vec<f64>,
    /// Spectral force at the current step.
    fs: Vec<f64>,
    t0: f64,
    step: usize,
    nan_guard: bool,
}

impl Evolution {
    fn new(prop: Arc<Propagator>, cu: Vec<f64>, cv: Vec<f64>, t0: f64, step: usize, law: ForceLaw, nan_guard: bool) -> Result<Self> {
        let n = cu.len();
        let mut e = Self {
            prop,
            cu,
            cv,
            gu: vec![0.0; n],
            fs: vec![0.0; n],
            t0,
            step,
            nan_guard,
        };
        e.refresh_force(law)?;
        Ok(e)
    }

    fn time(&self) -> f64 {
        self.t0 + self.step as f64 * self.prop.dt
    }

    fn refresh_force(&mut self, law: ForceLaw) -> Result<()> {
        let grid = &self.prop.grid;
        self.gu = inverse_values(grid, &self.cu);
        let mut f = vec![0.0; self.gu.len()];
        match law {
            ForceLaw::Power => self.prop.power_force(&self.gu, &mut f),
            ForceLaw::Difference(ws) => {
                let w = ws.get(self.step).ok_or_else(|| {
                    Error::Input(format!("no stored w for step {}", self.step))
                })?;
                self.prop.difference_force(&self.gu, w, &mut f)
            }
        }
        if self.nan_guard && f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure {
                t: self.time(),
                what: "non-finite nonlinear force".into(),
            });
        }
        self.fs = forward_values(grid, &f);
        Ok(())
    }

    fn advance(&mut self, law: ForceLaw) -> Result<()> {
        let half = 0.5 * self.prop.dt;
        for (v, f) in self.cv.iter_mut().zip(&self.fs) {
            *v += half * f;
        }
        self.prop.rotate(&mut self.cu, &mut self.cv);
        self.step += 1;
        self.refresh_force(law)?;
        for (v, f) in self.cv.iter_mut().zip(&self.fs) {
            *v += half * f;
        }
        if self.nan_guard && self.cu.iter().chain(&self.cv).any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure {
                t: self.time(),
                what: "non-finite state".into(),
            });
        }
        Ok(())
    }

    fn state(&self) -> WaveState {
        let grid = &self.prop.grid;
        WaveState {
            u: RadialField::from_raw(grid.clone(), self.gu.clone()),
            ut: RadialField::from_raw(grid.clone(), inverse_values(grid, &self.cv)),
            t: self.time(),
        }
    }
}

/// `−|u|^{p−1}u`, the force term of the defocusing equation.
pub fn nonlinearity(u: &RadialField, p: f64) -> Result<RadialField> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Config(format!("power must be ≥ 1, got {p}")));
    }
    let prop = Propagator::new(u.grid(), p, 1.0);
    let mut out = vec![0.0; u.values().len()];
    prop.power_force(u.values(), &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("nonlinearity".into()));
    }
    Ok(RadialField::from_raw(u.grid().clone(), out))
}

/// `F(v,w) = |v+w|^{p−1}(v+w) − |w|^{p−1}w`.
pub fn difference_force(v: &RadialField, w: &RadialField, p: f64) -> Result<RadialField> {
    check_same(v, w)?;
    if p.is_nan() || p < 1.0 {
        return Err(Error::Config(format!("power must be ≥ 1, got {p}")));
    }
    let prop = Propagator::new(v.grid(), p, 1.0);
    let mut out = vec![0.0; v.values().len()];
    prop.difference_force(v.values(), w.values(), &mut out);
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow("difference force".into()));
    }
    for o in &mut out {
        *o = -*o;
    }
    Ok(RadialField::from_raw(v.grid().clone(), out))
}

/// `‖u‖_{L²(outer layer)} / ‖u‖_{L²}` (zero for the zero field).
pub fn boundary_fraction(u: &RadialField) -> f64 {
    let total = lp_norm(u, 2.0).unwrap_or(0.0);
    if total == 0.0 {
        0.0
    } else {
        tail_l2_norm(u, BOUNDARY_LAYER) / total
    }
}

fn check_boundary(u: &RadialField, cfg: &StepperConfig, t: f64) -> Result<()> {
    let frac = boundary_fraction(u);
    if frac > cfg.boundary_tolerance {
        return Err(Error::DomainOfDependence(format!(
            "boundary layer holds {frac:.3e} of the L² mass at t = {t} (tolerance {:.1e})",
            cfg.boundary_tolerance
        )));
    }
    Ok(())
}

/// One kick–flow–kick step of size `cfg.dt`.
pub fn step(st: &WaveState, p: f64, cfg: &StepperConfig) -> Result<WaveState> {
    cfg.validate()?;
    check_same(&st.u, &st.ut)?;
    let grid = st.grid().clone();
    let prop = Arc::new(Propagator::new(&grid, p, cfg.dt));
    let cu = forward_values(&grid, st.u.values());
    let cv = forward_values(&grid, st.ut.values());
    let mut e = Evolution::new(prop, cu, cv, st.t, 0, ForceLaw::Power, cfg.nan_guard)?;
    e.advance(ForceLaw::Power)?;
    let out = e.state();
    if cfg.domain_guard {
        check_boundary(&out.u, cfg, out.t)?;
    }
    Ok(out)
}

/// Number of steps and the adjusted step hitting `horizon` exactly.
pub fn step_count(horizon: f64, dt: f64) -> (usize, f64) {
    if horizon <= 0.0 {
        return (0, dt);
    }
    let n = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    (n, horizon / n as f64)
}

/// Checks `(support − 1) + T ≤ (1 − layer)·L` for both data fields.
pub fn check_domain_of_dependence(u0: &RadialField, u1: &RadialField, horizon: f64) -> Result<()> {
    let grid = u0.grid();
    let support = u0.support_radius(SUPPORT_TOL).max(u1.support_radius(SUPPORT_TOL)) - 1.0;
    let limit = (1.0 - BOUNDARY_LAYER) * grid.length();
    if support + horizon > limit {
        return Err(Error::Config(format!(
            "domain-of-dependence guard: data support {support:.3} + horizon {horizon:.3} exceeds {limit:.3}"
        )));
    }
    Ok(())
}

fn validate_run(u0: &RadialField, u1: &RadialField, horizon: f64, cfg: &StepperConfig) -> Result<()> {
    cfg.validate()?;
    check_same(u0, u1)?;
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::Config(format!("horizon must be non-negative, got {horizon}")));
    }
    if cfg.domain_guard {
        check_domain_of_dependence(u0, u1, horizon)?;
    }
    Ok(())
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub energy: f64,
    pub boundary_fraction: f64,
    pub state: WaveState,
}

/// Snapshots of a run, every `stride` steps plus the final time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub p: f64,
    pub dt: f64,
    pub stride: usize,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// `max_t |E(t) − E(0)| / E(0)`; zero for zero data.
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = match self.samples.first() {
            Some(s) if s.energy > 0.0 => s.energy,
            _ => return 0.0,
        };
        self.samples
            .iter()
            .map(|s| (s.energy - e0).abs() / e0)
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }
}

/// Resumable state of a single-field run: spectral coefficients of `(u, u_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub t0: f64,
    pub step: usize,
    pub dt: f64,
    pub cu: Vec<f64>,
    pub cut: Vec<f64>,
}

/// Strang-split solver for the full equation, stepping from `start` until
/// `total_steps` is reached. `on_step` sees every step and may stop the run
/// early by returning `false` (used for checkpointing).
pub struct NlwRun {
    evo: Evolution,
    total_steps: usize,
    cfg: StepperConfig,
    traj: Trajectory,
}

impl NlwRun {
    pub fn new(u0: &RadialField, u1: &RadialField, p: f64, horizon: f64, cfg: &StepperConfig) -> Result<Self> {
        validate_run(u0, u1, horizon, cfg)?;
        if p.is_nan() || p < 1.0 {
            return Err(Error::Config(format!("power must be ≥ 1, got {p}")));
        }
        let (n, dt) = step_count(horizon, cfg.dt);
        let grid = u0.grid().clone();
        let state = RunState {
            t0: 0.0,
            step: 0,
            dt,
            cu: forward_values(&grid, u0.values()),
            cut: forward_values(&grid, u1.values()),
        };
        Self::from_state(&grid, p, n, state, cfg)
    }

    /// Resumes from a saved [`RunState`]; `total_steps` is the full run length.
    pub fn from_state(grid: &Arc<RadialGrid>, p: f64, total_steps: usize, state: RunState, cfg: &StepperConfig) -> Result<Self> {
        cfg.validate()?;
        if state.cu.len() != grid.len() || state.cut.len() != grid.len() {
            return Err(Error::Input("run state does not match the grid".into()));
        }
        let prop = Arc::new(Propagator::new(grid, p, state.dt));
        let evo = Evolution::new(prop, state.cu, state.cut, state.t0, state.step, ForceLaw::Power, cfg.nan_guard)?;
        let mut run = Self {
            evo,
            total_steps,
            cfg: cfg.clone(),
            traj: Trajectory {
                p,
                dt: state.dt,
                stride: cfg.stride,
                samples: vec![],
            },
        };
        run.record()?;
        Ok(run)
    }

    fn record(&mut self) -> Result<()> {
        let st = self.evo.state();
        let frac = boundary_fraction(&st.u);
        if self.cfg.domain_guard && frac > self.cfg.boundary_tolerance {
            check_boundary(&st.u, &self.cfg, st.t)?;
        }
        self.traj.samples.push(Sample {
            t: st.t,
            energy: energy(&st, self.traj.p),
            boundary_fraction: frac,
            state: st,
        });
        Ok(())
    }

    pub fn step_index(&self) -> usize {
        self.evo.step
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn is_done(&self) -> bool {
        self.evo.step >= self.total_steps
    }

    pub fn run_state(&self) -> RunState {
        RunState {
            t0: self.evo.t0,
            step: self.evo.step,
            dt: self.evo.prop.dt,
            cu: self.evo.cu.clone(),
            cut: self.evo.cv.clone(),
        }
    }

    /// Advances one step, recording a sample on stride boundaries and at the end.
    pub fn advance(&mut self) -> Result<()> {
        self.evo.advance(ForceLaw::Power)?;
        if self.evo.step % self.cfg.stride == 0 || self.is_done() {
            self.record()?;
        }
        Ok(())
    }

    pub fn run_to_end(mut self) -> Result<Trajectory> {
        while !self.is_done() {
            self.advance()?;
        }
        Ok(self.traj)
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.traj
    }
}

/// Solves the defocusing equation on `[0, T]`.
pub fn solve_nlw(u0: &RadialField, u1: &RadialField, p: f64, horizon: f64, cfg: &StepperConfig) -> Result<Trajectory> {
    NlwRun::new(u0, u1, p, horizon, cfg)?.run_to_end()
}

/// `2^{(2J/(p+3))·[4(2p−3)s − 4(2p−3) + (p+3)(1−s_c)]}`.
pub fn t_window(ps: &ParameterSet) -> Result<f64> {
    let d = ps.window_denominator();
    let s_min = ps.s_min();
    if ps.s < s_min - 1e-12 {
        return Err(Error::Admissibility { s: ps.s, s_min });
    }
    let exponent = 2.0 * ps.j as f64 / (ps.p + 3.0) * d.max(0.0);
    Ok(2f64.powf(exponent))
}

/// A windowed space–time norm `‖·‖_{L^q_t L^rx_x([0,T])}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowedNorm {
    pub q: f64,
    pub rx: f64,
    pub value: f64,
}

/// Trapezoid accumulator for `∫ ‖f(t)‖_{L^rx}^q dt`.
#[derive(Debug, Clone)]
struct MixedNormAccumulator {
    q: f64,
    rx: f64,
    integral: f64,
    last: Option<f64>,
}

impl MixedNormAccumulator {
    fn new(q: f64, rx: f64) -> Self {
        Self {
            q,
            rx,
            integral: 0.0,
            last: None,
        }
    }

    fn push(&mut self, f: &RadialField, dt: f64) {
        let a = lp_norm(f, self.rx).unwrap_or(0.0).powf(self.q);
        if let Some(prev) = self.last {
            self.integral += 0.5 * dt * (prev + a);
        }
        self.last = Some(a);
    }

    fn finish(&self) -> WindowedNorm {
        WindowedNorm {
            q: self.q,
            rx: self.rx,
            value: self.integral.powf(1.0 / self.q),
        }
    }
}

/// The four space–time norms controlling the high-frequency part:
/// `L^{2p/(1+s_c)}L^{2p/(2−s_c)}`, `L^{2(p−1)}_{t,x}`, `L^{p−1}L^{3(p−1)}`, `L²L^{3/(1−s_c)}`.
pub fn high_frequency_pairs(p: f64, s_c: f64) -> [(f64, f64); 4] {
    [
        (2.0 * p / (1.0 + s_c), 2.0 * p / (2.0 - s_c)),
        (2.0 * (p - 1.0), 2.0 * (p - 1.0)),
        (p - 1.0, 3.0 * (p - 1.0)),
        (2.0, 3.0 / (1.0 - s_c)),
    ]
}

/// Time-series record of a coupled run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSample {
    pub t: f64,
    pub energy_v: f64,
    pub hs_u: f64,
    pub hsc_w: f64,
    pub lpp1_u: f64,
    pub linf_u: f64,
    pub boundary_tail_l2: f64,
}

/// Everything measured by [`solve_coupled`].
#[derive(Debug, Clone)]
pub struct CoupledReport {
    pub params: ParameterSet,
    pub horizon: f64,
    pub dt: f64,
    pub samples: Vec<CoupledSample>,
    /// `E(v)(0)`.
    pub energy_v0: f64,
    /// `max_{0≤t≤T} E(v)(t)` over every step.
    pub energy_max: f64,
    /// `E(v)(0) / 2^{2J(1−s)}`.
    pub initial_energy_constant: f64,
    pub sup_hs_u: f64,
    pub hsc_w0: f64,
    pub sup_hsc_w: f64,
    /// Windowed norms of `w`, in the order of [`high_frequency_pairs`].
    pub strichartz_w: Vec<WindowedNorm>,
    pub u_final: WaveState,
    pub w_final: WaveState,
    /// Node values of `w` at every step (only with `keep_w_history`).
    pub w_history: Option<Vec<Vec<f64>>>,
}

impl CoupledReport {
    /// The `L²_t L^{3/(1−s_c)}_x` norm of `w`.
    pub fn endpoint_strichartz_w(&self) -> f64 {
        self.strichartz_w[3].value
    }

    pub fn v_final(&self) -> WaveState {
        WaveState {
            u: self.u_final.u.sub(&self.w_final.u).expect("same grid"),
            ut: self.u_final.ut.sub(&self.w_final.ut).expect("same grid"),
            t: self.u_final.t,
        }
    }
}

/// Splits `f` into `(v, w)` with `w = P_{>2^{J−1}} f` (spectrum above `2^{J−1}`)
/// and `v = f − w` (spectrum below `2^J`).
pub fn split_at(f: &RadialField, j: u32) -> Result<(RadialField, RadialField)> {
    let w = lp_high(f, 2f64.powi(j as i32 - 1))?;
    let v = f.sub(&w)?;
    Ok((v, w))
}

fn check_band_level(grid: &RadialGrid, j: u32) -> Result<()> {
    let (lo, hi) = crate::spectral_calculus::dyadic_band(grid);
    let n = 2f64.powi(j as i32);
    if n < lo || n > hi {
        return Err(Error::Band { n, lo, hi });
    }
    Ok(())
}

/// Evolves `u` (full equation) and `w` (full equation with data `P_{>2^{J−1}}u_i`)
/// on one time grid; `v := u − w` at every step.
pub fn solve_coupled(
    u0: &RadialField,
    u1: &RadialField,
    ps: &ParameterSet,
    horizon: f64,
    cfg: &StepperConfig,
) -> Result<CoupledReport> {
    solve_coupled_inner(u0, u1, ps, horizon, cfg, false)
}

/// As [`solve_coupled`], also storing `w` at every step for [`solve_difference`].
pub fn solve_coupled_with_history(
    u0: &RadialField,
    u1: &RadialField,
    ps: &ParameterSet,
    horizon: f64,
    cfg: &StepperConfig,
) -> Result<CoupledReport> {
    solve_coupled_inner(u0, u1, ps, horizon, cfg, true)
}

fn solve_coupled_inner(
    u0: &RadialField,
    u1: &RadialField,
    ps: &ParameterSet,
    horizon: f64,
    cfg: &StepperConfig,
    keep_w_history: bool,
) -> Result<CoupledReport> {
    validate_run(u0, u1, horizon, cfg)?;
    ps.check_launchable()?;
    let grid = u0.grid().clone();
    check_band_level(&grid, ps.j)?;

    let (_, w0) = split_at(u0, ps.j)?;
    let (_, w1) = split_at(u1, ps.j)?;
    let (n_steps, dt) = step_count(horizon, cfg.dt);
    let prop = Arc::new(Propagator::new(&grid, ps.p, dt));
    let mut u = Evolution::new(
        prop.clone(),
        forward_values(&grid, u0.values()),
        forward_values(&grid, u1.values()),
        0.0,
        0,
        ForceLaw::Power,
        cfg.nan_guard,
    )?;
    let mut w = Evolution::new(
        prop.clone(),
        forward_values(&grid, w0.values()),
        forward_values(&grid, w1.values()),
        0.0,
        0,
        ForceLaw::Power,
        cfg.nan_guard,
    )?;

    let p = ps.p;
    let s_c = ps.s_c();
    let dl = grid.spectral_spacing();
    let lam = grid.frequencies();
    let mut accs: Vec<MixedNormAccumulator> = high_frequency_pairs(p, s_c)
        .iter()
        .map(|&(q, rx)| MixedNormAccumulator::new(q, rx))
        .collect();

    let energy_v = |u: &Evolution, w: &Evolution| -> f64 {
        let mut kin = 0.0;
        let mut grad = 0.0;
        for k in 0..lam.len() {
            let dv = u.cv[k] - w.cv[k];
            let du = (u.cu[k] - w.cu[k]) * lam[k];
            kin += dv * dv;
            grad += du * du;
        }
        let h = grid.spacing();
        let pot: f64 = u
            .gu
            .iter()
            .zip(&w.gu)
            .zip(grid.radii())
            .map(|((a, b), r)| ((a - b) / r).abs().powf(p + 1.0) * r * r)
            .sum::<f64>()
            * h
            / (p + 1.0);
        0.5 * dl * (kin + grad) + pot
    };

    let mut history = keep_w_history.then(Vec::new);
    let mut samples = vec![];
    let mut energy_max = f64::NEG_INFINITY;
    let mut sup_hs_u: f64 = 0.0;
    let mut sup_hsc_w: f64 = 0.0;
    let mut energy_v0 = 0.0;
    let mut hsc_w0 = 0.0;

    for n in 0..=n_steps {
        if n > 0 {
            u.advance(ForceLaw::Power)?;
            w.advance(ForceLaw::Power)?;
        }
        let ev = energy_v(&u, &w);
        let hs_u = spectral_sobolev(&grid, &u.cu, ps.s);
        let hsc_w = spectral_sobolev(&grid, &w.cu, s_c);
        if n == 0 {
            energy_v0 = ev;
            hsc_w0 = hsc_w;
        }
        energy_max = energy_max.max(ev);
        sup_hs_u = sup_hs_u.max(hs_u);
        sup_hsc_w = sup_hsc_w.max(hsc_w);

        let w_field = RadialField::from_raw(grid.clone(), w.gu.clone());
        for acc in &mut accs {
            acc.push(&w_field, dt);
        }
        if let Some(h) = history.as_mut() {
            h.push(w.gu.clone());
        }

        if n % cfg.stride == 0 || n == n_steps {
            let uf = RadialField::from_raw(grid.clone(), u.gu.clone());
            let t = u.time();
            if cfg.domain_guard {
                check_boundary(&uf, cfg, t)?;
            }
            samples.push(CoupledSample {
                t,
                energy_v: ev,
                hs_u,
                hsc_w,
                lpp1_u: lp_norm(&uf, p + 1.0)?,
                linf_u: lp_norm(&uf, f64::INFINITY)?,
                boundary_tail_l2: tail_l2_norm(&uf, BOUNDARY_LAYER),
            });
        }
    }

    Ok(CoupledReport {
        params: *ps,
        horizon,
        dt,
        samples,
        energy_v0,
        energy_max,
        initial_energy_constant: energy_v0 / 2f64.powf(2.0 * ps.j as f64 * (1.0 - ps.s)),
        sup_hs_u,
        hsc_w0,
        sup_hsc_w,
        strichartz_w: accs.iter().map(|a| a.finish()).collect(),
        u_final: u.state(),
        w_final: w.state(),
        w_history: history,
    })
}

/// Integrates `v_tt − Δv + F(v, w) = 0` directly against stored `w` node values
/// (one entry per step of size `dt`), returning `v` at the last stored step.
pub fn solve_difference(
    v0: &RadialField,
    v1: &RadialField,
    w_history: &[Vec<f64>],
    p: f64,
    dt: f64,
    cfg: &StepperConfig,
) -> Result<WaveState> {
    check_same(v0, v1)?;
    if w_history.is_empty() {
        return Err(Error::Input("empty w history".into()));
    }
    let grid = v0.grid().clone();
    if w_history.iter().any(|w| w.len() != grid.len()) {
        return Err(Error::Input("w history does not match the grid".into()));
    }
    let prop = Arc::new(Propagator::new(&grid, p, dt));
    let law = ForceLaw::Difference(w_history);
    let mut e = Evolution::new(
        prop,
        forward_values(&grid, v0.values()),
        forward_values(&grid, v1.values()),
        0.0,
        0,
        law,
        cfg.nan_guard,
    )?;
    for _ in 1..w_history.len() {
        e.advance(law)?;
    }
    Ok(e.state())
}

/// `‖D²_t u + (−Δ)u + |u|^{p−1}u‖_{L²}` at the middle of three snapshots spaced `dt`.
pub fn pde_residual(prev: &RadialField, cur: &RadialField, next: &RadialField, dt: f64, p: f64) -> Result<f64> {
    check_same(prev, cur)?;
    check_same(cur, next)?;
    let grid = cur.grid().clone();
    let c = forward(cur);
    let lap: Vec<f64> = c
        .coefficients()
        .iter()
        .zip(grid.frequencies())
        .map(|(c, l)| c * l * l)
        .collect();
    let lap = inverse(&SpectralField::new(grid.clone(), lap)?);
    let force = nonlinearity(cur, p)?;
    let inv = 1.0 / (dt * dt);
    let g: Vec<f64> = (0..grid.len())
        .map(|j| {
            (next.values()[j] - 2.0 * cur.values()[j] + prev.values()[j]) * inv + lap.values()[j]
                - force.values()[j]
        })
        .collect();
    lp_norm(&RadialField::from_raw(grid, g), 2.0)
}
