use std::fs;
use std::path::{Path, PathBuf};

use extnlw::analysis::{
    bernstein_exponent, decay_series, fit_power_law, truncation_experiment, verify_bernstein,
    verify_radial_sobolev, DataSpec, StrichartzPair, TruncationTable,
};
use extnlw::distorted_fourier::{forward, inverse, plancherel_defect};
use extnlw::radial_field::{lp_norm, tail_l2_norm};
use extnlw::spectral_calculus::{
    critical_regularity, derived_exponents, energy, linear_energy, minimal_regularity, sobolev_norm,
};
use extnlw::wave_dynamics::{
    linear_flow, step_count, CoupledSample, NlwRun, StepperConfig, Trajectory, BOUNDARY_LAYER,
};
use extnlw::{make_grid, RadialField, WaveState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::checkpoint::Checkpoint;
use crate::config::{parse_config, RunConfig};
use crate::manifest::{csv, num, RunOutput};
use crate::{CliError, Command, Common};

pub const SERIES_HEADER: [&str; 7] = ["t", "energy_v", "hs_u", "hsc_w", "lpp1_u", "linf_u", "boundary_tail_l2"];
pub const TRUNCATION_HEADER: [&str; 9] = [
    "J",
    "T",
    "E0_v",
    "E_T",
    "sup_hs_u",
    "sup_hsc_w",
    "st_w_L2Lq",
    "fitted_ET_slope",
    "fitted_hs_slope",
];

pub fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Selftest(c) => selftest(&c),
        Command::Simulate {
            common,
            checkpoint_every,
            resume,
        } => simulate(&common, checkpoint_every, resume.as_deref()),
        Command::Truncation(c) => truncation(&c),
        Command::Inequalities(c) => inequalities(&c),
        Command::Decay(c) => decay(&c),
    }
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let path = common.config.as_ref().ok_or_else(|| CliError::Validation {
        key: "--config".into(),
        message: "this command needs a config file".into(),
    })?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn out_dir(common: &Common, cfg: Option<&RunConfig>) -> Result<PathBuf, CliError> {
    common
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out.clone()))
        .ok_or_else(|| CliError::Validation {
            key: "out".into(),
            message: "no output directory (config `out` or --out)".into(),
        })
}

fn stepper(cfg: &RunConfig) -> StepperConfig {
    StepperConfig {
        dt: cfg.dt,
        boundary_tolerance: cfg.boundary_tolerance,
        domain_guard: cfg.domain_guard,
        stride: cfg.stride,
        ..StepperConfig::default()
    }
}

fn derived(cfg: &RunConfig) -> Value {
    let mut v = json!({
        "s_c": critical_regularity(cfg.p),
        "s_min": minimal_regularity(cfg.p),
    });
    if let Some(s) = cfg.s {
        let windows: Vec<Value> = cfg
            .levels
            .iter()
            .filter_map(|&j| cfg.horizon_for(j).ok().map(|t| json!({"J": j, "T": t})))
            .collect();
        if let Ok(d) = cfg.params(cfg.levels.first().copied().unwrap_or(0)).and_then(|ps| Ok(derived_exponents(&ps)?)) {
            v["energy_growth_exponent"] = json!(d.energy_growth_exponent);
            v["growth_bound_exponent"] = json!(d.growth_bound_exponent);
        }
        v["s"] = json!(s);
        v["windows"] = json!(windows);
    }
    v
}

/// Creates the run directory, runs `body`, and finalizes the manifest either way.
fn with_output<F>(dir: &Path, force: bool, command: &str, config: Value, derived: Value, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut RunOutput) -> Result<(), CliError>,
{
    let mut out = RunOutput::create(dir, force, command, config, derived)?;
    match body(&mut out) {
        Ok(()) => out.complete(),
        Err(e) => {
            out.fail(&e)?;
            Err(e)
        }
    }
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
}

fn selftest(common: &Common) -> Result<(), CliError> {
    let cfg = match &common.config {
        Some(_) => Some(load(common)?),
        None => None,
    };
    let (length, n) = cfg.as_ref().map(|c| (c.length, c.n)).unwrap_or((40.0, 8192));
    let dir = out_dir(common, cfg.as_ref())?;
    let echo = json!({"grid": {"L": length, "N": n}});
    with_output(&dir, common.force, "selftest", echo, json!({}), |out| {
        let grid = make_grid(length, n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut random = || {
            let g = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            RadialField::new(grid.clone(), g)
        };
        let (f, g) = (random()?, random()?);

        let back = inverse(&forward(&f));
        let round_trip = rel_diff(back.values(), f.values());
        let plancherel = plancherel_defect(&f)?;
        let e0 = linear_energy(&WaveState::new(f.clone(), g.clone(), 0.0)?);
        let once = linear_flow(&f, &g, 10.0)?;
        let half = linear_flow(&f, &g, 4.0)?;
        let twice = linear_flow(&half.u, &half.ut, 6.0)?;
        let group = rel_diff(twice.u.values(), once.u.values()).max(rel_diff(twice.ut.values(), once.ut.values()));
        let drift = (linear_energy(&once) - e0).abs() / e0;

        let checks = [
            ("round_trip_error", round_trip, 1e-12),
            ("plancherel_defect", plancherel, 1e-12),
            ("group_law_error", group, 1e-12),
            ("linear_energy_drift", drift, 1e-12),
        ]
        .map(|(name, value, threshold)| Check {
            name,
            value,
            threshold,
            pass: value <= threshold,
        });
        out.write(
            "selftest.csv",
            csv(
                &["check", "value", "threshold", "pass"],
                checks
                    .iter()
                    .map(|c| vec![c.name.to_string(), num(c.value), num(c.threshold), c.pass.to_string()]),
            )
            .as_bytes(),
        )?;
        let pass = checks.iter().all(|c| c.pass);
        out.write_json("summary.json", &json!({"grid": {"L": length, "N": n}, "checks": checks, "pass": pass}))?;
        if !pass {
            return Err(CliError::Check(
                checks.iter().filter(|c| !c.pass).map(|c| c.name).collect::<Vec<_>>().join(", "),
            ));
        }
        Ok(())
    })
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

// ---------------------------------------------------------------------------

fn series_rows(traj: &Trajectory, hs_order: f64) -> Vec<Vec<String>> {
    let p = traj.p;
    traj.samples
        .iter()
        .map(|s| {
            let u = &s.state.u;
            vec![
                num(s.t),
                num(s.energy),
                num(sobolev_norm(u, hs_order)),
                num(0.0),
                num(lp_norm(u, p + 1.0).unwrap_or(f64::NAN)),
                num(lp_norm(u, f64::INFINITY).unwrap_or(f64::NAN)),
                num(tail_l2_norm(u, BOUNDARY_LAYER)),
            ]
        })
        .collect()
}

fn coupled_rows(samples: &[CoupledSample]) -> Vec<Vec<String>> {
    samples
        .iter()
        .map(|s| {
            [s.t, s.energy_v, s.hs_u, s.hsc_w, s.lpp1_u, s.linf_u, s.boundary_tail_l2]
                .iter()
                .map(|v| num(*v))
                .collect()
        })
        .collect()
}

fn simulate(common: &Common, checkpoint_every: Option<usize>, resume: Option<&Path>) -> Result<(), CliError> {
    let cfg = load(common)?;
    if checkpoint_every == Some(0) {
        return Err(CliError::Validation {
            key: "--checkpoint-every".into(),
            message: "must be at least 1".into(),
        });
    }
    let horizon = cfg.horizon()?;
    let grid = cfg.grid();
    let scfg = stepper(&cfg);
    let (total_steps, dt) = step_count(horizon, cfg.dt);
    let resumed = match resume {
        Some(path) => {
            let ck = Checkpoint::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let matches = ck.length == cfg.length && ck.n == cfg.n && ck.p == cfg.p && ck.state.dt == dt && ck.total_steps == total_steps;
            if !matches {
                return Err(CliError::Validation {
                    key: "--resume".into(),
                    message: "checkpoint grid, power or time step differs from the config".into(),
                });
            }
            Some(ck)
        }
        None => None,
    };
    let hs_order = cfg.s.unwrap_or(1.0);
    let dir = out_dir(common, Some(&cfg))?;
    let config = serde_json::to_value(&cfg.raw).expect("config serializes");
    let mut derived = derived(&cfg);
    derived["T"] = json!(horizon);
    derived["dt_effective"] = json!(dt);
    derived["steps"] = json!(total_steps);
    derived["hs_order"] = json!(hs_order);
    if let Some(ck) = &resumed {
        derived["resumed_from_step"] = json!(ck.state.step);
    }

    with_output(&dir, common.force, "simulate", config, derived, |out| {
        let mut run = match resumed {
            Some(ck) => NlwRun::from_state(&grid, cfg.p, ck.total_steps, ck.state, &scfg)?,
            None => {
                let (u0, u1) = cfg.data.generate(&grid, hs_order)?;
                NlwRun::new(&u0, &u1, cfg.p, horizon, &scfg)?
            }
        };
        let mut failure = None;
        while !run.is_done() {
            if let Err(e) = run.advance() {
                failure = Some(CliError::from(e));
                break;
            }
            if let Some(k) = checkpoint_every {
                if run.step_index() % k == 0 {
                    let ck = Checkpoint::single(cfg.length, cfg.p, total_steps, run.run_state());
                    out.write(&format!("checkpoints/step_{:08}.bin", run.step_index()), &ck.to_bytes())?;
                }
            }
        }
        let traj = run.trajectory();
        out.write(
            "timeseries.csv",
            csv(&SERIES_HEADER, series_rows(traj, hs_order)).as_bytes(),
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        let ck = Checkpoint::single(cfg.length, cfg.p, total_steps, run.run_state());
        out.write("final_state.bin", &ck.to_bytes())?;
        let first = traj.samples.first().map(|s| s.energy).unwrap_or(0.0);
        let last = traj.last().expect("at least one sample");
        out.write_json(
            "summary.json",
            &json!({
                "t_final": last.t,
                "steps": run.step_index(),
                "energy_initial": first,
                "energy_final": energy(&last.state, cfg.p),
                "max_relative_energy_drift": traj.max_energy_drift(),
                "max_boundary_fraction": traj.samples.iter().map(|s| s.boundary_fraction).fold(0.0, f64::max),
            }),
        )
    })
}

// ---------------------------------------------------------------------------

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn truncation_rows(table: &TruncationTable) -> Vec<Vec<String>> {
    table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.j.to_string(),
                num(r.horizon),
                num(r.energy_v0),
                num(r.energy_max),
                num(r.sup_hs_u),
                num(r.sup_hsc_w),
                num(r.endpoint_strichartz_w()),
                opt(table.fitted_energy_slope),
                opt(table.fitted_hs_slope),
            ]
        })
        .collect()
}

fn truncation(common: &Common) -> Result<(), CliError> {
    let cfg = load(common)?;
    if cfg.levels.is_empty() {
        return Err(CliError::Validation {
            key: "J".into(),
            message: "truncation needs J (a number or a list)".into(),
        });
    }
    let params = cfg.levels.iter().map(|&j| cfg.params(j)).collect::<Result<Vec<_>, _>>()?;
    for &j in &cfg.levels {
        cfg.horizon_for(j)?;
    }
    let dir = out_dir(common, Some(&cfg))?;
    let config = serde_json::to_value(&cfg.raw).expect("config serializes");
    with_output(&dir, common.force, "truncation", config, derived(&cfg), |out| {
        let table = truncation_experiment(&params, &cfg.data, &cfg.grid(), &stepper(&cfg))?;
        out.write("truncation.csv", csv(&TRUNCATION_HEADER, truncation_rows(&table)).as_bytes())?;
        for row in &table.rows {
            out.write(
                &format!("timeseries_J{}.csv", row.j),
                csv(&SERIES_HEADER, coupled_rows(&row.samples)).as_bytes(),
            )?;
        }
        let s = cfg.s.expect("params need s");
        let growth_bound = table.exponents.first().map(|d| d.growth_bound_exponent);
        let rows: Vec<Value> = table
            .rows
            .iter()
            .map(|r| {
                json!({
                    "J": r.j,
                    "T": r.horizon,
                    "E0_v": r.energy_v0,
                    "E_T": r.energy_max,
                    "E0_v_over_2^{2J(1-s)}": r.initial_energy_constant,
                    "sup_hs_u": r.sup_hs_u,
                    "hsc_w0": r.hsc_w0,
                    "sup_hsc_w": r.sup_hsc_w,
                    "strichartz_w": r.strichartz_w.iter().map(|w| json!({"q": w.q, "rx": w.rx, "value": w.value})).collect::<Vec<_>>(),
                })
            })
            .collect();
        out.write_json(
            "summary.json",
            &json!({
                "rows": rows,
                "fitted_ET_slope": table.fitted_energy_slope,
                "fitted_E0_slope": table.fitted_initial_energy_slope,
                "fitted_hs_slope": table.fitted_hs_slope,
                "energy_slope_bound": 2.0 * (1.0 - s),
                "growth_exponent_bound": growth_bound,
                "smallness_persists": table.rows.iter().all(|r| r.sup_hsc_w <= 2.0 * r.hsc_w0),
            }),
        )
    })
}

// ---------------------------------------------------------------------------

fn inequalities(common: &Common) -> Result<(), CliError> {
    let cfg = load(common)?;
    let dir = out_dir(common, Some(&cfg))?;
    let seed = cfg.raw.data.seed;
    let config = serde_json::to_value(&cfg.raw).expect("config serializes");
    with_output(&dir, common.force, "inequalities", config, derived(&cfg), |out| {
        let sob = verify_radial_sobolev(cfg.p, cfg.trials, seed)?;
        out.write(
            "radial_sobolev.csv",
            csv(&["width", "max_ratio"], sob.per_width.iter().map(|(w, r)| vec![num(*w), num(*r)])).as_bytes(),
        )?;
        let ns: Vec<f64> = (2..=8).map(|k| 2f64.powi(k)).collect();
        let mut bern = vec![];
        for (a, b) in [(2.0, f64::INFINITY), (2.0, 6.0), (2.0, 2.0)] {
            let fit = verify_bernstein(a, b, &ns, 16, seed)?;
            bern.push((a, b, fit));
        }
        out.write(
            "bernstein.csv",
            csv(
                &["q_from", "q_to", "slope", "exponent", "residual"],
                bern.iter()
                    .map(|(a, b, f)| vec![num(*a), num(*b), num(f.slope), num(bernstein_exponent(*a, *b)), num(f.residual)]),
            )
            .as_bytes(),
        )?;
        out.write_json(
            "summary.json",
            &json!({
                "radial_sobolev": {
                    "p": cfg.p,
                    "max_ratio": sob.max_ratio,
                    "random_max": sob.random_max,
                    "width_spread": sob.width_spread(),
                    "evaluated": sob.evaluated,
                    "skipped": sob.skipped,
                },
                "bernstein": bern.iter().map(|(a, b, f)| json!({
                    "q_from": a, "q_to": if b.is_finite() { json!(b) } else { json!("inf") },
                    "slope": f.slope, "exponent": bernstein_exponent(*a, *b),
                })).collect::<Vec<_>>(),
            }),
        )
    })
}

fn decay(common: &Common) -> Result<(), CliError> {
    let cfg = load(common)?;
    if !matches!(cfg.data, DataSpec::Bump { .. }) {
        return Err(CliError::Validation {
            key: "data.kind".into(),
            message: "decay needs bump data".into(),
        });
    }
    let dir = out_dir(common, Some(&cfg))?;
    let config = serde_json::to_value(&cfg.raw).expect("config serializes");
    with_output(&dir, common.force, "decay", config, derived(&cfg), |out| {
        let grid = cfg.grid();
        let (f0, _) = cfg.data.generate(&grid, 1.0)?;
        let tm = &cfg.times;
        let times: Vec<f64> = (0..tm.count)
            .map(|i| tm.start * (tm.end / tm.start).powf(i as f64 / (tm.count - 1) as f64))
            .collect();
        let pairs = [f64::INFINITY, 4.0, 2.0].map(|rx| StrichartzPair::new(2.0, rx).expect("valid pair"));
        let series = pairs
            .iter()
            .map(|p| decay_series(&f0, p, &times))
            .collect::<Result<Vec<_>, _>>()?;
        let fits = series.iter().map(|s| fit_power_law(s)).collect::<Result<Vec<_>, _>>()?;
        out.write(
            "decay.csv",
            csv(
                &["t", "linf", "besov_4", "besov_2"],
                (0..times.len()).map(|i| vec![num(times[i]), num(series[0][i].1), num(series[1][i].1), num(series[2][i].1)]),
            )
            .as_bytes(),
        )?;
        out.write_json(
            "summary.json",
            &json!({
                "fits": pairs.iter().zip(&fits).map(|(p, f)| json!({
                    "rx": if p.rx.is_finite() { json!(p.rx) } else { json!("inf") },
                    "gamma": p.gamma,
                    "slope": f.slope,
                    "residual": f.residual,
                })).collect::<Vec<_>>(),
            }),
        )
    })
}
