//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any of them failed.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use extnlw::analysis::{
    bump, measure_dispersive_decay, rough_data, truncation_experiment, verify_bernstein,
    verify_radial_sobolev, DataSpec, StrichartzPair, SOBOLEV_WIDTHS,
};
use extnlw::distorted_fourier::{forward, inverse, plancherel_defect, SpectralField};
use extnlw::radial_field::lp_norm;
use extnlw::spectral_calculus::{
    band_dyadics, derived_exponents, dyadic_band, linear_energy, lp_low, lp_project, minimal_regularity,
};
use extnlw::wave_dynamics::{
    linear_flow, solve_coupled_with_history, solve_difference, solve_nlw, split_at, StepperConfig,
};
use extnlw::{make_grid, ParameterSet, RadialField, RadialGrid, WaveState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_coefficients(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_field(grid: &Arc<RadialGrid>, seed: u64) -> RadialField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RadialField::new(grid.clone(), random_coefficients(grid.len(), &mut rng)).unwrap()
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn ac1_round_trip() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for (i, &n) in [255usize, 4095, 65535].iter().enumerate() {
        let grid = make_grid(40.0, n).unwrap();
        let f = random_field(&grid, 100 + i as u64);
        let start = Instant::now();
        let back = inverse(&forward(&f));
        slowest = slowest.max(start.elapsed());
        worst = worst.max(rel_l2(back.values(), f.values()));
    }
    outcome(
        worst <= 1e-12 && slowest < Duration::from_secs(1),
        format!("max rel err {worst:.2e} (≤ 1e-12), slowest {slowest:.2?} (< 1 s)"),
    )
}

fn ac2_plancherel() -> Outcome {
    let grid = make_grid(40.0, 4095).unwrap();
    let worst = (0..100)
        .map(|s| plancherel_defect(&random_field(&grid, 200 + s)).unwrap())
        .fold(0.0, f64::max);
    outcome(worst <= 1e-12, format!("max defect {worst:.2e} over 100 fields (≤ 1e-12)"))
}

fn ac3_linear_flow() -> Outcome {
    let grid = make_grid(40.0, 4095).unwrap();
    let k = 37;
    let lam = grid.frequencies()[k - 1];
    let (a, b) = (0.7, -1.3);
    let unit = inverse(&SpectralField::mode(&grid, k, 1.0).unwrap());
    let u0 = unit.scaled(a);
    let u1 = unit.scaled(b);
    let mut worst: f64 = 0.0;
    for i in 0..=40 {
        let t = 10.0 * i as f64 / 40.0;
        let st = linear_flow(&u0, &u1, t).unwrap();
        let exact_u = unit.scaled(a * (t * lam).cos() + b * (t * lam).sin() / lam);
        let exact_ut = unit.scaled(-a * lam * (t * lam).sin() + b * (t * lam).cos());
        for (x, y) in st.u.values().iter().zip(exact_u.values()) {
            worst = worst.max((x - y).abs());
        }
        for (x, y) in st.ut.values().iter().zip(exact_ut.values()) {
            worst = worst.max((x - y).abs());
        }
    }
    let (f, g) = (random_field(&grid, 301), random_field(&grid, 302));
    let e0 = linear_energy(&WaveState::new(f.clone(), g.clone(), 0.0).unwrap());
    let drift = (0..=10)
        .map(|t| {
            let st = linear_flow(&f, &g, t as f64).unwrap();
            (linear_energy(&st) - e0).abs() / e0
        })
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-10 && drift <= 1e-12,
        format!("max mode error {worst:.2e} (≤ 1e-10), linear energy drift {drift:.2e} (≤ 1e-12)"),
    )
}

fn ac4_energy_conservation() -> Outcome {
    let grid = make_grid(40.0, 4096).unwrap();
    let u0 = bump(&grid, 6.0, 2.0, 1.0).unwrap();
    let u1 = RadialField::zeros(&grid);
    let start = Instant::now();
    let coarse = solve_nlw(&u0, &u1, 4.0, 10.0, &StepperConfig::with_dt(2e-3)).unwrap().max_energy_drift();
    let elapsed = start.elapsed();
    let fine = solve_nlw(&u0, &u1, 4.0, 10.0, &StepperConfig::with_dt(1e-3)).unwrap().max_energy_drift();
    let ratio = coarse / fine;
    outcome(
        coarse <= 1e-5 && (3.5..=4.5).contains(&ratio) && elapsed < Duration::from_secs(60),
        format!("drift {coarse:.2e} (≤ 1e-5), halving ratio {ratio:.3} (in [3.5, 4.5]), run {elapsed:.2?}"),
    )
}

fn ac5_dispersive_decay() -> Outcome {
    let grid = make_grid(40.0, 4095).unwrap();
    let f = bump(&grid, 1.5, 0.3, 1.0).unwrap();
    let times: Vec<f64> = (0..12).map(|i| 4.0 * (30.0f64 / 4.0).powf(i as f64 / 11.0)).collect();
    let support = f.support_radius(1e-12);
    let pair = StrichartzPair::new(2.0, f64::INFINITY).unwrap();
    let fit = measure_dispersive_decay(&f, &pair, &times).unwrap();
    let inside = 30.0 < grid.length() - support;
    outcome(
        (-1.15..=-0.85).contains(&fit.slope) && inside,
        format!("sup-norm slope {:.4} (in [−1.15, −0.85]), t_max 30 < L − R = {:.2}", fit.slope, grid.length() - support),
    )
}

fn ac6_radial_sobolev() -> Outcome {
    let mut ok = true;
    let mut parts = vec![];
    for p in [2.0, 4.0] {
        let rep = verify_radial_sobolev(p, 200, 17).unwrap();
        let spread = rep.width_spread();
        ok &= rep.max_ratio.is_finite() && spread < 10.0 && rep.per_width.len() == SOBOLEV_WIDTHS.len();
        parts.push(format!("p={p}: max ratio {:.3}, width spread {spread:.2}", rep.max_ratio));
    }
    outcome(ok, format!("{} (spread < 10)", parts.join("; ")))
}

fn ac7_bernstein() -> Outcome {
    let ns: Vec<f64> = (2..=8).map(|k| 2f64.powi(k)).collect();
    let fit = verify_bernstein(2.0, f64::INFINITY, &ns, 16, 23).unwrap();
    outcome(
        (fit.slope - 1.5).abs() <= 0.2,
        format!("L²→L^∞ slope {:.4} over N ∈ [4, 256] (target 1.5 ± 0.2)", fit.slope),
    )
}

fn ac8_truncation() -> Outcome {
    let grid = make_grid(40.0, 8192).unwrap();
    let s = 0.96;
    let params: Vec<ParameterSet> = (3..=6).map(|j| ParameterSet::new(4.0, s, j).unwrap()).collect();
    let data = DataSpec::Rough {
        amplitude: 1.0,
        delta: 0.01,
        seed: 7,
    };
    let start = Instant::now();
    let table = truncation_experiment(&params, &data, &grid, &StepperConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let smallness = table.rows.iter().all(|r| r.sup_hsc_w <= 2.0 * r.hsc_w0);
    let energy_slope = table.fitted_energy_slope.unwrap();
    let hs_slope = table.fitted_hs_slope.unwrap();
    let growth_bound = derived_exponents(&params[0]).unwrap().growth_bound_exponent;
    let worst_w = table
        .rows
        .iter()
        .map(|r| r.sup_hsc_w / r.hsc_w0)
        .fold(0.0, f64::max);
    outcome(
        smallness
            && energy_slope <= 2.0 * (1.0 - s) + 0.3
            && hs_slope <= growth_bound + 0.3
            && elapsed < Duration::from_secs(600),
        format!(
            "(a) max sup‖w‖/‖w(0)‖ {worst_w:.4} (≤ 2); (b) E_T slope {energy_slope:.4} (≤ {:.2}); \
             (c) Ḣ^s growth {hs_slope:.4} (≤ {:.4}); run {elapsed:.2?}",
            2.0 * (1.0 - s) + 0.3,
            growth_bound + 0.3
        ),
    )
}

fn ac9_littlewood_paley() -> Outcome {
    let grid = make_grid(40.0, 8192).unwrap();
    let (lo, _) = dyadic_band(&grid);
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let f = random_field(&grid, 900 + seed);
        let mut sum = lp_low(&f, lo / 2.0).unwrap().into_values();
        for n in band_dyadics(&grid) {
            for (s, v) in sum.iter_mut().zip(lp_project(&f, n).unwrap().values()) {
                *s += v;
            }
        }
        worst = worst.max(rel_l2(&sum, f.values()));
    }
    outcome(worst <= 1e-8, format!("max rel reconstruction error {worst:.2e} over 10 fields (≤ 1e-8)"))
}

fn ac10_decomposition() -> Outcome {
    let grid = make_grid(40.0, 8192).unwrap();
    let ps = ParameterSet::new(4.0, 0.96, 5).unwrap();
    let u0 = rough_data(&grid, ps.s, 1.0, 0.01, 7).unwrap();
    let z = RadialField::zeros(&grid);
    let cfg = StepperConfig::default();
    let rep = solve_coupled_with_history(&u0, &z, &ps, 2.0, &cfg).unwrap();
    let (v0, _) = split_at(&u0, ps.j).unwrap();
    let direct = solve_difference(&v0, &z, rep.w_history.as_ref().unwrap(), ps.p, rep.dt, &cfg).unwrap();
    let diff = lp_norm(&direct.u.sub(&rep.v_final().u).unwrap(), 2.0).unwrap();
    outcome(diff <= 1e-6, format!("‖v_direct − (u − w)‖ at T = 2: {diff:.2e} (≤ 1e-6)"))
}

fn ac11_exponents() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 1..1000 {
        let s = 0.75 + 0.25 * i as f64 / 1000.0;
        let d = derived_exponents(&ParameterSet::new(3.0, s, 0).unwrap()).unwrap();
        let closed = 3.0 * (1.0 - s) * (2.0 * s - 1.0) / (4.0 * s - 3.0);
        worst = worst.max((d.growth_bound_exponent - closed).abs());
    }
    let s_min = minimal_regularity(3.0);
    outcome(
        worst <= 1e-12 && s_min == 0.75,
        format!("max deviation {worst:.2e} (≤ 1e-12), s_min(3) = {s_min}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("AC1 transform round trip", ac1_round_trip),
        ("AC2 discrete Plancherel", ac2_plancherel),
        ("AC3 exact linear flow", ac3_linear_flow),
        ("AC4 nonlinear energy conservation", ac4_energy_conservation),
        ("AC5 dispersive decay", ac5_dispersive_decay),
        ("AC6 radial Sobolev", ac6_radial_sobolev),
        ("AC7 Bernstein exponent", ac7_bernstein),
        ("AC8 truncation experiment", ac8_truncation),
        ("AC9 Littlewood-Paley reconstruction", ac9_littlewood_paley),
        ("AC10 decomposition cross-check", ac10_decomposition),
        ("AC11 exponent algebra", ac11_exponents),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!result.pass);
        println!("{tag}  {name:<38} {}  [{:.1?}]", result.detail, start.elapsed());
    }
    println!("acceptance: {} of {} criteria passed", 11 - failed, 11);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
