use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use extnlw_cli::checkpoint::Checkpoint;
use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_extnlw"))
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn bump(out: &Path) -> Value {
    json!({
        "p": 4.0,
        "grid": {"L": 40.0, "N": 512},
        "dt": 0.004,
        "T": 1.0,
        "data": {"kind": "bump", "seed": 3, "amplitude": 1.0, "center": 6.0, "width": 2.0},
        "out": out,
    })
}

#[test]
fn selftest_passes_on_default_grid() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("st");
    let (code, err) = run(&["selftest", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], json!(true));
    assert_eq!(summary["grid"]["N"], json!(8192));
    for c in summary["checks"].as_array().unwrap() {
        assert!(c["value"].as_f64().unwrap() <= 1e-12, "{c}");
    }
    assert_eq!(manifest(&out)["status"], json!("complete"));
}

#[test]
fn bad_configs_exit_two() {
    let tmp = TempDir::new().unwrap();
    let base = json!({"p": 4.0, "s": 0.96, "J": 5, "grid": {"L": 40.0, "N": 8192}, "dt": 0.002, "T": "auto",
        "data": {"kind": "rough", "seed": 7, "amplitude": 1.0}, "out": tmp.path().join("x")});

    let mut cfg = base.clone();
    cfg["J"] = json!(30);
    let path = write_config(tmp.path(), "band.json", &cfg);
    let (code, err) = run(&["truncation", "-c", path.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");

    let mut cfg = base.clone();
    cfg["s"] = json!(0.9);
    let path = write_config(tmp.path(), "adm.json", &cfg);
    let (code, err) = run(&["truncation", "-c", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("113/120"), "{err}");

    let mut cfg = base;
    cfg["colour"] = json!("blue");
    let path = write_config(tmp.path(), "unknown.json", &cfg);
    assert_eq!(run(&["simulate", "-c", path.to_str().unwrap()]).0, 2);

    fs::write(tmp.path().join("junk.json"), "{ not json").unwrap();
    assert_eq!(run(&["simulate", "-c", tmp.path().join("junk.json").to_str().unwrap()]).0, 2);
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn blow_up_exits_three_and_records_time() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("boom");
    let mut cfg = bump(&out);
    cfg["dt"] = json!(10.0);
    cfg["T"] = json!(30.0);
    cfg["domain_guard"] = json!(false);
    cfg["data"]["amplitude"] = json!(1000.0);
    let path = write_config(tmp.path(), "boom.json", &cfg);
    let (code, err) = run(&["simulate", "-c", path.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
    let m = manifest(&out);
    assert_eq!(m["status"], json!("invalid"));
    let t = m["failure"]["t"].as_f64().expect("failure time recorded");
    assert!(t > 0.0 && t <= 30.0);
    // partial output is still listed
    assert!(m["files"].as_array().unwrap().iter().any(|f| f["name"] == "timeseries.csv"));
}

#[test]
fn truncation_table_has_a_row_per_level() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("trunc");
    let cfg = json!({"p": 4.0, "s": 0.96, "J": [3, 4, 5, 6], "grid": {"L": 40.0, "N": 512}, "dt": 0.004, "T": "auto",
        "data": {"kind": "rough", "seed": 7, "amplitude": 1.0}, "out": out});
    let path = write_config(tmp.path(), "t.json", &cfg);
    let (code, err) = run(&["truncation", "-c", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let table = fs::read_to_string(out.join("truncation.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "J,T,E0_v,E_T,sup_hs_u,sup_hsc_w,st_w_L2Lq,fitted_ET_slope,fitted_hs_slope");
    assert_eq!(lines.len(), 5);
    for (line, j) in lines[1..].iter().zip(3..) {
        assert!(line.starts_with(&format!("{j},")));
        assert_eq!(line.split(',').count(), 9);
    }
    for j in 3..=6 {
        let ts = fs::read_to_string(out.join(format!("timeseries_J{j}.csv"))).unwrap();
        assert!(ts.starts_with("t,energy_v,hs_u,hsc_w,lpp1_u,linf_u,boundary_tail_l2\n"));
    }
    let m = manifest(&out);
    assert_eq!(m["files"].as_array().unwrap().len(), 6);
    assert_eq!(m["config"]["J"], json!([3, 4, 5, 6]));
}

#[test]
fn reruns_are_byte_identical_and_need_force() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    let path = write_config(tmp.path(), "sim.json", &bump(&out));
    let p = path.to_str().unwrap();
    assert_eq!(run(&["simulate", "-c", p]).0, 0);
    let first = fs::read(out.join("timeseries.csv")).unwrap();
    let sums = manifest(&out)["files"].clone();

    let (code, err) = run(&["simulate", "-c", p]);
    assert_eq!(code, 2);
    assert!(err.contains("--force"), "{err}");

    assert_eq!(run(&["simulate", "-c", p, "--force"]).0, 0);
    assert_eq!(fs::read(out.join("timeseries.csv")).unwrap(), first);
    assert_eq!(manifest(&out)["files"], sums);
}

#[test]
fn manifest_checksums_match_files() {
    use sha2::{Digest, Sha256};
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    let path = write_config(tmp.path(), "sim.json", &bump(&out));
    assert_eq!(run(&["simulate", "-c", path.to_str().unwrap(), "--checkpoint-every", "100"]).0, 0);
    let files = manifest(&out)["files"].as_array().unwrap().clone();
    assert!(files.iter().any(|f| f["name"] == "checkpoints/step_00000200.bin"));
    for f in files {
        let bytes = fs::read(out.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
}

#[test]
fn resume_reproduces_uninterrupted_run() {
    let tmp = TempDir::new().unwrap();
    let full = tmp.path().join("full");
    let path = write_config(tmp.path(), "sim.json", &bump(&full));
    assert_eq!(run(&["simulate", "-c", path.to_str().unwrap(), "--checkpoint-every", "100"]).0, 0);

    let resumed = tmp.path().join("resumed");
    let ck = full.join("checkpoints/step_00000100.bin");
    let (code, err) = run(&[
        "simulate",
        "-c",
        path.to_str().unwrap(),
        "--out",
        resumed.to_str().unwrap(),
        "--resume",
        ck.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");

    let a = Checkpoint::read(&full.join("final_state.bin")).unwrap();
    let b = Checkpoint::read(&resumed.join("final_state.bin")).unwrap();
    assert_eq!(a.state.step, b.state.step);
    let scale = a.state.cu.iter().chain(&a.state.cut).fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in a.state.cu.iter().zip(&b.state.cu).chain(a.state.cut.iter().zip(&b.state.cut)) {
        assert!((x - y).abs() <= 1e-12 * scale.max(1.0), "{x} vs {y}");
    }
    assert_eq!(manifest(&resumed)["derived"]["resumed_from_step"], json!(100));
}

#[test]
fn resume_rejects_mismatched_grid() {
    let tmp = TempDir::new().unwrap();
    let full = tmp.path().join("full");
    let path = write_config(tmp.path(), "sim.json", &bump(&full));
    assert_eq!(run(&["simulate", "-c", path.to_str().unwrap(), "--checkpoint-every", "100"]).0, 0);
    let mut other = bump(&tmp.path().join("other"));
    other["grid"]["N"] = json!(256);
    let other_path = write_config(tmp.path(), "other.json", &other);
    let ck = full.join("checkpoints/step_00000100.bin");
    let (code, _) = run(&["simulate", "-c", other_path.to_str().unwrap(), "--resume", ck.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn inequalities_and_decay_write_outputs() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = bump(&tmp.path().join("ineq"));
    cfg["trials"] = json!(20);
    let path = write_config(tmp.path(), "i.json", &cfg);
    assert_eq!(run(&["inequalities", "-c", path.to_str().unwrap()]).0, 0);
    let b = fs::read_to_string(tmp.path().join("ineq/bernstein.csv")).unwrap();
    assert_eq!(b.lines().count(), 4);

    let dec = tmp.path().join("dec");
    let (code, err) = run(&["decay", "-c", path.to_str().unwrap(), "--out", dec.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let d = fs::read_to_string(dec.join("decay.csv")).unwrap();
    assert_eq!(d.lines().count(), 13);
}

#[test]
fn missing_out_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = bump(tmp.path());
    cfg.as_object_mut().unwrap().remove("out");
    let path = write_config(tmp.path(), "noout.json", &cfg);
    assert_eq!(run(&["simulate", "-c", path.to_str().unwrap()]).0, 2);
}
