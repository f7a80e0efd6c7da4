use std::path::PathBuf;

use extnlw::analysis::{DataSpec, ROUGH_WINDOW};
use extnlw::spectral_calculus::{dyadic_band, minimal_regularity};
use extnlw::wave_dynamics::{t_window, BOUNDARY_LAYER};
use extnlw::{make_grid, ParameterSet};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Levels {
    One(u32),
    Many(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Horizon {
    Fixed(f64),
    Keyword(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub kind: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub amplitude: f64,
    pub center: Option<f64>,
    pub width: Option<f64>,
    pub k: Option<usize>,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayTimes {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

/// The document as written by the user.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub p: f64,
    pub s: Option<f64>,
    #[serde(rename = "J")]
    pub levels: Option<Levels>,
    pub grid: GridSpec,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "T", default = "auto")]
    pub horizon: Horizon,
    pub data: DataConfig,
    #[serde(default = "default_stride")]
    pub stride: usize,
    pub out: Option<PathBuf>,
    #[serde(default = "default_tolerance")]
    pub boundary_tolerance: f64,
    #[serde(default = "yes")]
    pub domain_guard: bool,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub times: Option<DecayTimes>,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_delta() -> f64 {
    0.01
}
fn default_dt() -> f64 {
    2e-3
}
fn auto() -> Horizon {
    Horizon::Keyword("auto".into())
}
fn default_stride() -> usize {
    10
}
fn default_tolerance() -> f64 {
    1e-6
}
fn default_trials() -> usize {
    200
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub p: f64,
    pub s: Option<f64>,
    pub levels: Vec<u32>,
    pub length: f64,
    pub n: usize,
    pub dt: f64,
    pub fixed_horizon: Option<f64>,
    pub data: DataSpec,
    pub stride: usize,
    pub out: Option<PathBuf>,
    pub boundary_tolerance: f64,
    pub domain_guard: bool,
    pub trials: usize,
    pub times: DecayTimes,
}

fn invalid(key: &str, msg: impl Into<String>) -> CliError {
    CliError::Validation {
        key: key.to_string(),
        message: msg.into(),
    }
}

/// Small-denominator fraction equal to `x` to 1e-12, if one exists.
pub fn as_fraction(x: f64) -> Option<(i64, i64)> {
    (1..=10_000i64).find_map(|d| {
        let n = (x * d as f64).round();
        ((n / d as f64 - x).abs() < 1e-12).then_some((n as i64, d))
    })
}

fn show(x: f64) -> String {
    match as_fraction(x) {
        Some((n, 1)) => n.to_string(),
        Some((n, d)) => format!("{n}/{d}"),
        None => format!("{x}"),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    validate(raw)
}

pub fn validate(raw: RawConfig) -> Result<RunConfig, CliError> {
    let p = raw.p;
    if !(3.0..=5.0).contains(&p) {
        return Err(invalid("p", format!("p = {p} must lie in [3, 5]")));
    }
    if let Some(s) = raw.s {
        let s_min = minimal_regularity(p);
        if !(s.is_finite()) || s <= s_min {
            return Err(invalid("s", format!("s = {s}: s ≤ s_min = {}", show(s_min))));
        }
        if s >= 1.0 {
            return Err(invalid("s", format!("s = {s} must be below 1")));
        }
    }
    let GridSpec { length, n } = raw.grid;
    let grid = make_grid(length, n).map_err(|e| invalid("grid", e.to_string()))?;

    let levels = match &raw.levels {
        None => vec![],
        Some(Levels::One(j)) => vec![*j],
        Some(Levels::Many(js)) if js.is_empty() => return Err(invalid("J", "list must not be empty")),
        Some(Levels::Many(js)) => js.clone(),
    };
    let (lo, hi) = dyadic_band(&grid);
    for &j in &levels {
        let top = 2f64.powi(j as i32);
        if !(lo..=hi).contains(&top) {
            return Err(invalid(
                "J",
                format!("2^{j} = {top:e} outside the resolvable band [{lo}, {hi}] of this grid"),
            ));
        }
    }

    if !(raw.dt.is_finite() && raw.dt > 0.0) {
        return Err(invalid("dt", format!("dt = {} must be positive", raw.dt)));
    }
    if !(raw.boundary_tolerance > 0.0) {
        return Err(invalid("boundary_tolerance", "must be positive"));
    }
    if raw.stride == 0 {
        return Err(invalid("stride", "must be at least 1"));
    }
    if raw.trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let fixed_horizon = match &raw.horizon {
        Horizon::Fixed(t) if t.is_finite() && *t >= 0.0 => Some(*t),
        Horizon::Fixed(t) => return Err(invalid("T", format!("T = {t} must be non-negative"))),
        Horizon::Keyword(k) if k == "auto" => None,
        Horizon::Keyword(k) => return Err(invalid("T", format!("expected a number or \"auto\", got {k:?}"))),
    };

    let d = &raw.data;
    let data = match d.kind.as_str() {
        "bump" => {
            let center = d.center.unwrap_or(6.0);
            let width = d.width.unwrap_or(2.0);
            if !(width > 0.0) || center - width < 1.0 {
                return Err(invalid("data.width", format!("bump [{}, {}] must lie in r ≥ 1", center - width, center + width)));
            }
            DataSpec::Bump { center, width, amplitude: d.amplitude }
        }
        "mode" => {
            let k = d.k.unwrap_or(1);
            if k == 0 || k > n {
                return Err(invalid("data.k", format!("mode index {k} outside 1..={n}")));
            }
            DataSpec::Mode { k, amplitude: d.amplitude }
        }
        "rough" => {
            if raw.s.is_none() {
                return Err(invalid("s", "rough data needs the regularity s"));
            }
            if !(d.delta >= 0.0) {
                return Err(invalid("data.delta", "must be non-negative"));
            }
            DataSpec::Rough { amplitude: d.amplitude, delta: d.delta, seed: d.seed }
        }
        other => return Err(invalid("data.kind", format!("unknown kind {other:?} (bump, mode, rough)"))),
    };
    if !d.amplitude.is_finite() {
        return Err(invalid("data.amplitude", "must be finite"));
    }

    let times = raw.times.clone().unwrap_or(DecayTimes { start: 4.0, end: 30.0, count: 12 });
    if !(times.start > 0.0 && times.end > times.start && times.count >= 3) {
        return Err(invalid("times", "need 0 < start < end and count ≥ 3"));
    }

    let cfg = RunConfig {
        p,
        s: raw.s,
        levels,
        length,
        n,
        dt: raw.dt,
        fixed_horizon,
        data,
        stride: raw.stride,
        out: raw.out.clone(),
        boundary_tolerance: raw.boundary_tolerance,
        domain_guard: raw.domain_guard,
        trials: raw.trials,
        times,
        raw,
    };

    // Guard against the outer boundary for every horizon that can be resolved now.
    if cfg.domain_guard {
        let horizons: Vec<f64> = match cfg.fixed_horizon {
            Some(t) => vec![t],
            None => cfg.levels.iter().filter_map(|&j| cfg.horizon_for(j).ok()).collect(),
        };
        let support = cfg.support_extent();
        let limit = (1.0 - BOUNDARY_LAYER) * cfg.length;
        for t in horizons {
            if support + t > limit {
                return Err(invalid(
                    "T",
                    format!("data support {support:.3} + T {t:.3} exceeds {limit:.3} (domain-of-dependence guard)"),
                ));
            }
        }
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn params(&self, j: u32) -> Result<ParameterSet, CliError> {
        let s = self.s.ok_or_else(|| invalid("s", "this command needs s"))?;
        ParameterSet::new(self.p, s, j).map_err(|e| invalid("p", e.to_string()))
    }

    /// `T` for level `j`: the fixed value, or the window length for `"auto"`.
    pub fn horizon_for(&self, j: u32) -> Result<f64, CliError> {
        match self.fixed_horizon {
            Some(t) => Ok(t),
            None => t_window(&self.params(j)?).map_err(|e| invalid("s", e.to_string())),
        }
    }

    /// Horizon of a single-level run.
    pub fn horizon(&self) -> Result<f64, CliError> {
        match (self.fixed_horizon, self.levels.first()) {
            (Some(t), _) => Ok(t),
            (None, Some(&j)) => self.horizon_for(j),
            (None, None) => Err(invalid("T", "\"auto\" needs s and J")),
        }
    }

    /// Distance from `r = 1` to the edge of the data support.
    pub fn support_extent(&self) -> f64 {
        match self.data {
            DataSpec::Bump { center, width, .. } => center + width - 1.0,
            DataSpec::Mode { .. } => self.length,
            DataSpec::Rough { .. } => ROUGH_WINDOW.1,
        }
    }

    pub fn grid(&self) -> std::sync::Arc<extnlw::RadialGrid> {
        make_grid(self.length, self.n).expect("validated grid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{"p":4.0,"s":0.96,"J":5,"grid":{"L":40.0,"N":8192},"dt":0.002,"T":"auto","data":{"kind":"rough","seed":7,"amplitude":1.0},"out":"runs/e1"}"#;

    #[test]
    fn reference_config_resolves_the_window() {
        let cfg = parse_config(EXAMPLE).unwrap();
        assert_eq!(cfg.levels, vec![5]);
        let t = cfg.horizon().unwrap();
        assert!((t - 1.438).abs() < 1e-3, "{t}");
        assert_eq!(cfg.data, DataSpec::Rough { amplitude: 1.0, delta: 0.01, seed: 7 });
    }

    #[test]
    fn low_regularity_is_rejected_with_the_threshold() {
        let err = parse_config(&EXAMPLE.replace("0.96", "0.9")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let msg = err.to_string();
        assert!(msg.contains("s ≤ s_min = 113/120"), "{msg}");
        assert!(msg.starts_with("s:") || msg.contains("key s"), "{msg}");
    }

    #[test]
    fn out_of_band_level_is_rejected() {
        let err = parse_config(&EXAMPLE.replace("\"J\":5", "\"J\":30")).unwrap_err();
        assert!(matches!(err, CliError::Validation { ref key, .. } if key == "J"), "{err}");
        let list = parse_config(&EXAMPLE.replace("\"J\":5", "\"J\":[3,4,5,6]")).unwrap();
        assert_eq!(list.levels, vec![3, 4, 5, 6]);
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(parse_config("{"), Err(CliError::Parse(_))));
        assert!(matches!(parse_config(&EXAMPLE.replace("\"dt\"", "\"dtt\"")), Err(CliError::Parse(_))));
        let err = parse_config(&EXAMPLE.replace("\"auto\"", "\"later\"")).unwrap_err();
        assert!(matches!(err, CliError::Validation { ref key, .. } if key == "T"));
        let err = parse_config(&EXAMPLE.replace("rough", "smooth")).unwrap_err();
        assert!(matches!(err, CliError::Validation { ref key, .. } if key == "data.kind"));
        let err = parse_config(&EXAMPLE.replace("\"T\":\"auto\"", "\"T\":35.0")).unwrap_err();
        assert!(matches!(err, CliError::Validation { ref key, .. } if key == "T"));
    }

    #[test]
    fn fractions() {
        assert_eq!(as_fraction(113.0 / 120.0), Some((113, 120)));
        assert_eq!(as_fraction(0.75), Some((3, 4)));
        assert_eq!(as_fraction(std::f64::consts::PI), None);
    }
}
