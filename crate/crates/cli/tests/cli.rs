use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn tcfilm(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tcfilm"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const BETA0: &str = r#"[model]
variant = "powerlaw_beta0"
law = { kind = "power_law", p = 2.0 }

[initial]
c = 1.0
modes = [{ n = 2, amplitude = 0.01 }]
n_grid = 32

[solver]
t_end = 0.06

[output]
stride = 7
"#;

const CASE1: &str = r#"[model]
variant = "general_case1"
beta_tilde = 2.0
law = { kind = "newtonian" }

[initial]
c = 1.0
modes = [{ n = 1, amplitude = 0.05 }, { n = 2, amplitude = 0.01 }]
n_grid = 32

[solver]
dt0 = 0.05
t_end = 60.0

[output]
stride = 20
"#;

fn write_config(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_all_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "run.toml", BETA0);
    let out = tmp.path().join("out");
    let res = tcfilm(&["run", "-c", &cfg, "-o", out.to_str().unwrap()], &[]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let summary = json(&out.join("summary.json"));
    let steps = summary["steps"].as_u64().unwrap() as usize;
    assert_eq!(steps, 600);
    for key in ["config_hash", "events", "final_mass", "final_energy", "max_balance_residual"] {
        assert!(!summary[key].is_null(), "summary lacks {key}");
    }
    assert_eq!(summary["events"][0]["kind"], "extinction");

    let series = fs::read_to_string(out.join("series.csv")).unwrap();
    let mut lines = series.lines();
    assert_eq!(lines.next().unwrap(), "t,mass,energy,diss_cum,min_h,re_a1,im_a1,re_a2,im_a2");
    assert_eq!(lines.count(), steps / 7 + 1);

    let snaps: Vec<_> = fs::read_dir(out.join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), steps / 7 + 1);
    let first = fs::read_to_string(out.join("snapshots/step_00000000.csv")).unwrap();
    assert_eq!(first.lines().next().unwrap(), "theta,h");
    assert_eq!(first.lines().count(), 33);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "run.toml", BETA0);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&tcfilm(&["run", "-c", &cfg, "-o", a.to_str().unwrap()], &[])), 0);
    assert_eq!(code(&tcfilm(&["run", "-c", &cfg, "-o", b.to_str().unwrap()], &[])), 0);
    for f in ["series.csv", "summary.json", "snapshots/step_00000595.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn non_positive_initial_film_is_rejected_with_a_line() {
    let tmp = TempDir::new().unwrap();
    let text = BETA0.replace("c = 1.0", "c = 0.1").replace("amplitude = 0.01", "amplitude = 0.2");
    let cfg = write_config(&tmp, "bad.toml", &text);
    let res = tcfilm(&["run", "-c", &cfg, "-o", tmp.path().join("o").to_str().unwrap()], &[]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("bad.toml:6:"), "{}", stderr(&res));
}

#[test]
fn malformed_configs_exit_2() {
    let tmp = TempDir::new().unwrap();
    let o = tmp.path().join("o");
    let o = o.to_str().unwrap();
    let typo = write_config(&tmp, "typo.toml", &BETA0.replace("t_end", "t_ned"));
    let res = tcfilm(&["run", "-c", &typo, "-o", o], &[]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("typo.toml:"), "{}", stderr(&res));
    let res = tcfilm(&["run", "-c", tmp.path().join("missing.toml").to_str().unwrap(), "-o", o], &[]);
    assert_eq!(code(&res), 2);
    let odd = write_config(&tmp, "odd.toml", &BETA0.replace("n_grid = 32", "n_grid = 33"));
    assert_eq!(code(&tcfilm(&["run", "-c", &odd, "-o", o], &[])), 2);
}

#[test]
fn touchdown_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "td.toml", &BETA0.replace("t_end = 0.06", "t_end = 0.06\nh_min = 0.995"));
    let out = tmp.path().join("out");
    let res = tcfilm(&["run", "-c", &cfg, "-o", out.to_str().unwrap()], &[]);
    assert_eq!(code(&res), 3);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["status"], "touchdown");
    assert_eq!(summary["events"][0]["kind"], "touchdown");
}

#[test]
fn sweep_runs_every_point_in_grid_order() {
    let tmp = TempDir::new().unwrap();
    // amplitude 0.01 drops below h_min = 0.995 at the first step
    let text = format!(
        "{}\n[grid]\np = [2.0, 3.0]\namplitude = [0.001, 0.01]\n",
        BETA0.replace("t_end = 0.06", "t_end = 0.01\nh_min = 0.995")
    );
    let cfg = write_config(&tmp, "sweep.toml", &text);
    let out = tmp.path().join("sweep");
    let res = tcfilm(&["sweep", "-c", &cfg, "-o", out.to_str().unwrap()], &[("TCFILM_THREADS", "3")]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let summary = fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = summary.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let expect = [("2", "0.001", "t_end"), ("2", "0.01", "touchdown"), ("3", "0.001", "t_end"), ("3", "0.01", "touchdown")];
    for (i, (row, (p, a, ev))) in rows.iter().zip(expect).enumerate() {
        assert_eq!(row[0], format!("run_{i:04}"));
        assert_eq!(row[1].parse::<f64>().unwrap(), p.parse::<f64>().unwrap());
        assert_eq!(row[4].parse::<f64>().unwrap(), a.parse::<f64>().unwrap());
        assert_eq!(row[6], ev);
        assert!(out.join(row[0]).join("summary.json").exists());
    }

    let again = tmp.path().join("again");
    let res = tcfilm(&["sweep", "-c", &cfg, "-o", again.to_str().unwrap()], &[("TCFILM_THREADS", "1")]);
    assert_eq!(code(&res), 0);
    assert_eq!(summary, fs::read_to_string(again.join("sweep_summary.csv")).unwrap());
}

#[test]
fn failed_sweep_points_are_recorded() {
    let tmp = TempDir::new().unwrap();
    let text = format!("{BETA0}\n[grid]\nc = [1.0, 0.005]\n");
    let cfg = write_config(&tmp, "sweep.toml", &text);
    let out = tmp.path().join("sweep");
    let res = tcfilm(&["sweep", "-c", &cfg, "-o", out.to_str().unwrap()], &[]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let summary = fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains(",completed,"));
    assert!(rows[1].contains(",error,") && rows[1].contains("positive"), "{}", rows[1]);
}

#[test]
fn empty_grid_exits_2() {
    let tmp = TempDir::new().unwrap();
    let o = tmp.path().join("o");
    let none = write_config(&tmp, "none.toml", BETA0);
    assert_eq!(code(&tcfilm(&["sweep", "-c", &none, "-o", o.to_str().unwrap()], &[])), 2);
    let empty = write_config(&tmp, "empty.toml", &format!("{BETA0}\n[grid]\np = []\n"));
    let res = tcfilm(&["sweep", "-c", &empty, "-o", o.to_str().unwrap()], &[]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("empty.toml:"), "{}", stderr(&res));
}

#[test]
fn fits_on_run_directories() {
    let tmp = TempDir::new().unwrap();
    let ext = tmp.path().join("ext");
    let cfg = write_config(&tmp, "ext.toml", &BETA0.replace("stride = 7", "stride = 1"));
    assert_eq!(code(&tcfilm(&["run", "-c", &cfg, "-o", ext.to_str().unwrap()], &[])), 0);
    let res = tcfilm(&["fit", "--kind", "extinction", ext.to_str().unwrap()], &[]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let fit = json(&ext.join("fit_extinction.json"));
    let t_star = fit["params"]["t_star"].as_f64().unwrap();
    assert!(t_star.is_finite() && t_star > 0.0 && t_star < 0.06, "{t_star}");

    let flat = tmp.path().join("flat");
    let cfg = write_config(&tmp, "flat.toml", &CASE1.replace("modes = [{ n = 1, amplitude = 0.05 }, { n = 2, amplitude = 0.01 }]", "").replace("t_end = 60.0", "t_end = 5.0"));
    assert_eq!(code(&tcfilm(&["run", "-c", &cfg, "-o", flat.to_str().unwrap()], &[])), 0);
    let res = tcfilm(&["fit", "--kind", "spiral", flat.to_str().unwrap()], &[]);
    assert_eq!(code(&res), 5, "{}", stderr(&res));

    let spiral = tmp.path().join("spiral");
    let cfg = write_config(&tmp, "case1.toml", CASE1);
    assert_eq!(code(&tcfilm(&["run", "-c", &cfg, "-o", spiral.to_str().unwrap()], &[])), 0);
    let res = tcfilm(&["fit", "--kind", "manifold", spiral.to_str().unwrap()], &[]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let fit = json(&spiral.join("fit_manifold.json"));
    assert!(fit["params"]["ratio"].as_f64().unwrap() > 0.0);
    assert!(fit["predicted"]["psi_prime"].is_number() && fit["predicted"]["power_law"].is_number());
    let res = tcfilm(&["fit", "--kind", "spiral", spiral.to_str().unwrap()], &[]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let stdout: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(stdout, json(&spiral.join("fit_spiral.json")));
    assert!(stdout["predicted"]["K"].is_number());

    let res = tcfilm(&["fit", "--kind", "spiral", tmp.path().join("nowhere").to_str().unwrap()], &[]);
    assert_ne!(code(&res), 0);
}

const WORKED: &str = r#"R_minus = 0.05
R_plus = 0.1
d = 0.005
omega = 1.0
mu0 = 1.0
mu_plus = 1.0
rho_minus = 1000.0
rho_plus = 1000.0
gamma_tilde = 0.07
tau_char = 1.0
p = 1.0
"#;

#[test]
fn regime_classification() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "worked.toml", WORKED);
    let res = tcfilm(&["regime", "-c", &cfg], &[]);
    assert_eq!(code(&res), 6);
    let rep: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!((rep["B"].as_f64().unwrap() - 0.014).abs() < 1e-12);
    assert!((rep["beta"].as_f64().unwrap() - 190.476).abs() < 1e-3);
    assert_eq!(rep["regime"], "case3_unsupported");

    // surface tension 190x larger brings beta to order one
    let cfg = write_config(&tmp, "case1.toml", &WORKED.replace("gamma_tilde = 0.07", "gamma_tilde = 13.3"));
    let res = tcfilm(&["regime", "-c", &cfg], &[]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let rep: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(rep["regime"], "case1");

    let cfg = write_config(&tmp, "neg.toml", &WORKED.replace("mu0 = 1.0", "mu0 = -1.0"));
    let res = tcfilm(&["regime", "-c", &cfg], &[]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("neg.toml:5:"), "{}", stderr(&res));
}
