use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cascade(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env_remove("CASCADE_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Rows of a CSV written by the tool, header block skipped.
fn csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn simulate_sech_passes_half_excitation_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = cascade(dir.path(), &["simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv(&dir.path().join("trajectory.csv"));
    assert_eq!(header, ["t", "alpha1", "alpha2", "beta_a", "g1", "g2", "residual"]);
    let zero = rows.iter().find(|r| r[0] == 0.0).expect("t = 0 row");
    // starting in |e0g0> at -15 instead of -inf costs ~sqrt(2) e^-15
    assert!((zero[1] - 0.5).abs() < 1e-6, "alpha1(0) = {}", zero[1]);
    let (header, _) = csv(&dir.path().join("master.csv"));
    assert_eq!(header.len(), 51);
    let summary = json(&dir.path().join("simulate.json"));
    assert!(summary["result"]["fidelity"].as_f64().unwrap() > 1.0 - 1e-6);

    let wide = dir.path().join("wide");
    assert!(cascade(&wide, &["simulate", "--set", "t_start=-20", "--set", "t_end=20"]).status.success());
    let (_, rows) = csv(&wide.join("trajectory.csv"));
    let zero = rows.iter().find(|r| r[0] == 0.0).unwrap();
    assert!((zero[1] - 0.5).abs() < 1e-8, "alpha1(0) = {}", zero[1]);
}

#[test]
fn every_file_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cascade(dir.path(), &["simulate"]).status.success());
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(text.starts_with("# tool: cascade-cli\n"));
    assert!(text.lines().nth(2).unwrap().starts_with("# config_hash: "));
    let doc = json(&dir.path().join("simulate.json"));
    assert_eq!(doc["tool"], "cascade-cli");
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn zero_pulse_is_constant_and_fails_the_gate() {
    let dir = tempfile::tempdir().unwrap();
    let out = cascade(dir.path(), &["simulate", "--set", "pulse=zero"]);
    assert!(out.status.success());
    let (_, rows) = csv(&dir.path().join("trajectory.csv"));
    assert!(rows.iter().all(|r| r[1] == 1.0 && r[2] == 0.0 && r[3] == 0.0));

    let out = cascade(dir.path(), &["sensitivity", "--set", "pulse=zero"]);
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "fidelity_gate");
    assert_eq!(err["error"]["exit_code"], 3);
}

#[test]
fn sensitivity_writes_one_series_per_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = cascade(dir.path(), &["sensitivity", "--set", "noise=amplitude1,timing2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("eta_amplitude1.csv").is_file());
    assert!(dir.path().join("eta_timing2.csv").is_file());
    let doc = json(&dir.path().join("sensitivity.json"));
    let models = doc["result"]["models"].as_array().unwrap();
    let amp = models[0]["eta_final"].as_f64().unwrap();
    assert!((amp + 1.0).abs() < 1e-2, "{amp}");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = cascade(dir.path(), &["simulate", "--set", "colour=blue"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");

    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "pulse = sech\n\nrel_tol = 1e-9\npulse = zero\n").unwrap();
    let out = cascade(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":4:"), "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(&cfg, "pulse = sampled\npulse_table = missing.csv\n").unwrap();
    let out = cascade(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args(["selftest"])
        .env("CASCADE_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("selftest.json").is_file());
}

#[test]
fn fit_recovers_exact_synthetic_data() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("synthetic.csv");
    let mut text = String::from("T,eta_final\n");
    for t in [2.0f64, 4.0, 6.0, 8.0, 10.0] {
        text.push_str(&format!("{t},{:e}\n", -0.5 + 1.0 / (2.0 + t)));
    }
    fs::write(&table, text).unwrap();
    let out = cascade(dir.path(), &["fit", "--set", &format!("sweep_table={}", table.display())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = &json(&dir.path().join("fit.json"))["result"]["fit"];
    assert!(fit["residual"].as_f64().unwrap() < 1e-10);
    assert!((fit["a"].as_f64().unwrap() + 0.5).abs() < 1e-8);
}

#[test]
fn optimized_pulse_round_trips_through_its_table() {
    let dir = tempfile::tempdir().unwrap();
    let opt = cascade(dir.path(), &["optimize", "--set", "n=3", "--set", "end_time=4", "--set", "max_evaluations=150"]);
    assert!(opt.status.success(), "{}", String::from_utf8_lossy(&opt.stderr));
    let result = json(&dir.path().join("optimize.json"));
    let eta = result["result"]["eta_final"].as_f64().unwrap();

    let resim = dir.path().join("resim");
    let table = dir.path().join("pulse.csv");
    let out = cascade(
        &resim,
        &["sensitivity", "--set", "pulse=sampled", "--set", &format!("pulse_table={}", table.display())],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let again = json(&resim.join("sensitivity.json"))["result"]["models"][0]["eta_final"].as_f64().unwrap();
    assert!((again - eta).abs() < 1e-9, "{again} vs {eta}");

    let sim =
        cascade(&resim, &["simulate", "--set", "pulse=sampled", "--set", &format!("pulse_table={}", table.display())]);
    assert!(sim.status.success());
    let fidelity = json(&resim.join("simulate.json"))["result"]["fidelity"].as_f64().unwrap();
    assert!((fidelity - result["result"]["fidelity"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn identical_runs_write_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["optimize", "--set", "n=3", "--set", "end_time=4", "--set", "max_evaluations=100", "--set", "seed=7"];
    assert!(cascade(a.path(), &args).status.success());
    assert!(cascade(b.path(), &args).status.success());
    for name in ["optimize.json", "pulse.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn sweep_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = cascade(
        dir.path(),
        &["sweep", "--set", "n=2", "--set", "end_times=2,4,6", "--set", "max_evaluations=60", "--jobs", "2"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for t in ["2", "4", "6"] {
        assert!(dir.path().join(format!("optimize_T{t}.json")).is_file());
        assert!(dir.path().join(format!("pulse_T{t}.csv")).is_file());
    }
    let (header, rows) = csv(&dir.path().join("sweep.csv"));
    assert_eq!(header, ["T", "eta_final"]);
    assert_eq!(rows.len(), 3);
    let out = cascade(dir.path(), &["fit"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("fit.json").is_file());
}
