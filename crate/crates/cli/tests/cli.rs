use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str], config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_igahc"));
    cmd.args(args).arg("--out").arg(dir.join("out")).env_remove("IGAHC_CONFIG").env_remove("IGAHC_OUT");
    if let Some(text) = config {
        let path = dir.join("run.toml");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

#[test]
fn verify_passes_its_gates_and_reports_slopes() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), &["verify"], Some("degrees = [1, 2]\nlevels = [2, 3, 4]"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(d.path(), "convergence.csv");
    assert!(csv.starts_with("degree,level,h,n_dof,n_gamma,e_l2,"));
    assert_eq!(csv.lines().count(), 7);
    let report = json(d.path(), "verify.json");
    assert!(report["gates"].as_array().unwrap().iter().all(|g| g["pass"] == true));
}

#[test]
fn single_level_has_no_slopes_and_no_gate() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), &["verify"], Some("degrees = [1]\nlevels = [3]"));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(d.path(), "slopes.csv"), "degree,slope_l2,slope_jump,slope_lambda\n1,,,\n");
    assert!(json(d.path(), "verify.json")["gates"].as_array().unwrap().is_empty());
}

#[test]
fn failed_gate_exits_with_one() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), &["verify"], Some("degrees = [1]\nlevels = [2, 3]\nmax_order = 0"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p1 slope_l2"));
    assert!(d.path().join("out/convergence.csv").exists());
}

#[test]
fn infsup_is_byte_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = "levels = [2, 3]\nmax_orders = [0, 1, 2, 3]";
    assert_eq!(run(a.path(), &["infsup"], Some(cfg)).status.code(), Some(0));
    assert_eq!(run(b.path(), &["infsup", "--threads", "1"], Some(cfg)).status.code(), Some(0));
    let csv = read(a.path(), "infsup.csv");
    assert_eq!(csv, read(b.path(), "infsup.csv"));
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn configuration_errors_exit_with_two() {
    let d = TempDir::new().unwrap();
    for (args, cfg, needle) in [
        (&["emf"][..], None, "speed"),
        (&["infsup"][..], Some("max_orders = []"), "max_orders"),
        (&["solve"][..], Some("max_order = 1"), "max_order"),
        (&["solve"][..], Some("alpha = \"3 mm\""), "alpha"),
        (&["verify"][..], Some("levels = [2, 3"), "config"),
    ] {
        let o = run(d.path(), args, cfg);
        assert_eq!(o.status.code(), Some(2), "{args:?} {cfg:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(needle), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_igahc"))
        .args(["verify", "--config"])
        .arg(d.path().join("missing.toml"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_compares_both_methods_on_the_machine() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), &["solve"], Some("levels = [1]\ncoupling = \"both\"\nalpha = \"4 deg\""));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(d.path(), "solve.json");
    assert!(r["relative_difference"].as_f64().unwrap() < 0.02);
    assert!(r["harmonic"]["continuity"].as_f64().unwrap() < 1e-10);
    assert!(r["dn"]["iterations"].as_u64().unwrap() > 1);
    let log = read(d.path(), "dn_log.csv");
    assert!(log.starts_with("k,eps_rt,eps_st\n"));
    assert!(read(d.path(), "field.csv").starts_with("side,patch,x,y,a_z,b_x,b_y\nrotor,0,"));
}

#[test]
fn diverging_dn_exits_with_three_and_keeps_the_log() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), &["solve"], Some("levels = [2]\ncoupling = \"dn\"\n[dn]\nrelax = 0.9\nmax_iter = 15"));
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(read(d.path(), "dn_log.csv").lines().count(), 16);
}

#[test]
fn emf_sweep_outputs() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), &["emf"], Some("levels = [2]\nn_alpha = 24\nspeed = \"1500 rpm\""));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(d.path(), "psi.csv").lines().count(), 25);
    assert_eq!(read(d.path(), "spectrum.csv").lines().count(), 24);
    let r = json(d.path(), "emf.json");
    assert!(r["even_ratio"].as_f64().unwrap() < 1e-10);
    assert!((r["base_frequency_hz"].as_f64().unwrap() - 75.0).abs() < 1e-9);
}

#[test]
fn environment_supplies_the_config() {
    let d = TempDir::new().unwrap();
    let path = d.path().join("env.toml");
    fs::write(&path, "levels = [2]\nmax_orders = [0, 1]").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_igahc"))
        .arg("infsup")
        .env("IGAHC_CONFIG", &path)
        .env("IGAHC_OUT", d.path().join("env-out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(d.path().join("env-out/infsup.csv")).unwrap().lines().count(), 3);
}
