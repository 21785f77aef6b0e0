use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_semispatial"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let line = text.lines().last().expect("stderr carries an error record");
    serde_json::from_str::<Value>(line).unwrap()["error"].clone()
}

const SIM_CONFIG: &str = r#"
seed = 11

[simulate]
gamma0 = 0.16
gamma1 = 0.34
gamma2 = 0.14
sigma2 = 0.11
rows = 20
cols = 25
replicates = 3
burn_in = 100
thin = 10
"#;

/// Simulates three grids into `dir/sim` and returns the first grid's path.
fn simulated_grid(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("sim.toml");
    std::fs::write(&cfg, SIM_CONFIG).unwrap();
    let sim = dir.join("sim");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", sim.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    sim.join("replicate_0000.txt")
}

#[test]
fn simulate_writes_grids_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let grid = simulated_grid(dir.path());
    let m = json(&dir.path().join("sim/manifest.json"));
    assert_eq!(m["replicates"], 3);
    assert_eq!(m["seed"], 11);
    assert_eq!(m["files"].as_array().unwrap().len(), 3);
    let text = std::fs::read_to_string(&grid).unwrap();
    assert_eq!(text.lines().count(), 20);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 25);

    // the same seed reproduces the grids exactly
    let again = dir.path().join("again");
    let cfg = dir.path().join("sim.toml");
    assert!(run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", again.to_str().unwrap()]).status.success());
    assert_eq!(std::fs::read(&grid).unwrap(), std::fs::read(again.join("replicate_0000.txt")).unwrap());
    let other = dir.path().join("other");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", other.to_str().unwrap(), "--seed", "12"]);
    assert!(out.status.success());
    assert_ne!(std::fs::read(&grid).unwrap(), std::fs::read(other.join("replicate_0000.txt")).unwrap());
}

#[test]
fn fit_is_byte_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let grid = simulated_grid(dir.path());
    let g = grid.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = run(&["fit", "--grid", g, "--bandwidth", "0.4", "--out", a.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["fit", "--grid", g, "--bandwidth", "0.4", "--out", b.to_str().unwrap(), "--threads", "1"]);
    assert!(out.status.success());
    for f in ["fit_state.json", "curves.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    // reports differ only in the echoed output directory and thread cap
    let report = json(&a.join("fit_report.json"));
    let mut other = json(&b.join("fit_report.json"));
    other["config"]["output_dir"] = report["config"]["output_dir"].clone();
    other["config"]["threads"] = Value::Null;
    assert_eq!(report, other);
    let beta = report["beta_hat"][0].as_f64().unwrap();
    assert!(beta.is_finite() && beta.abs() < 1.0);
    assert!(report["residual_variance"].as_f64().unwrap() > 0.0);
    assert_eq!(report["config"]["bandwidths"][0].as_f64(), Some(0.4));
    assert_eq!(report["curve_file"], "curves.csv");

    let mut rdr = csv::Reader::from_path(a.join("curves.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["k", "x", "estimate", "centered_estimate", "n_effective"]
    );
    assert_eq!(rdr.records().count(), 101);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let grid = simulated_grid(dir.path());
    let cfg = dir.path().join("fit.toml");
    std::fs::write(&cfg, format!("grid = {:?}\nbandwidths = [0.9]\n", grid.to_str().unwrap())).unwrap();
    let out_dir = dir.path().join("o");
    let out = run(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--bandwidth",
        "0.5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out_dir.join("fit_report.json"));
    assert_eq!(report["config"]["bandwidths"][0].as_f64(), Some(0.5));
}

#[test]
fn saved_fit_round_trips_through_curves() {
    let dir = tempfile::tempdir().unwrap();
    let grid = simulated_grid(dir.path());
    let out_dir = dir.path().join("fit");
    let out = run(&["fit", "--grid", grid.to_str().unwrap(), "--bandwidth", "0.4", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let state = out_dir.join("fit_state.json");
    let target = dir.path().join("resampled.csv");
    let out = run(&[
        "curves",
        "--fit",
        state.to_str().unwrap(),
        "--points",
        "101",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // resampling on the original span reproduces the tabulated nodes
    let read = |p: &Path| -> Vec<csv::StringRecord> { csv::Reader::from_path(p).unwrap().records().map(|r| r.unwrap()).collect() };
    let original = read(&out_dir.join("curves.csv"));
    let resampled = read(&target);
    assert_eq!(original.len(), resampled.len());
    for (a, b) in original.iter().zip(&resampled) {
        let x = |r: &csv::StringRecord, i: usize| r[i].parse::<f64>().unwrap();
        assert!((x(a, 1) - x(b, 1)).abs() < 1e-12);
        if !a[3].is_empty() {
            assert!((x(a, 3) - x(b, 3)).abs() < 1e-9);
        }
    }

    let out = run(&["curves", "--fit", state.to_str().unwrap(), "--at", "0,9,5", "--out", target.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(read(&target).len(), 5);
}

#[test]
fn cv_and_test_reports() {
    let dir = tempfile::tempdir().unwrap();
    let grid = simulated_grid(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "grid = {:?}\nbandwidths = [0.4]\n[cv]\ncandidates = [[0.3], [0.4], [0.6]]\n[inference]\nbeta0 = [0.34]\nlag_rows = 1\nlag_cols = 1\n",
            grid.to_str().unwrap()
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    let o = out_dir.to_str().unwrap();
    let c = cfg.to_str().unwrap();

    let out = run(&["cv", "--config", c, "--out", o]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cv = json(&out_dir.join("cv_report.json"));
    assert_eq!(cv["report"]["scores"].as_array().unwrap().len(), 3);
    let sel = cv["report"]["selected"].as_u64().unwrap() as usize;
    assert_eq!(cv["selected_bandwidths"][0], cv["report"]["candidates"][sel]["b"][0]);

    let out = run(&["test", "--config", c, "--out", o]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = json(&out_dir.join("test_report.json"));
    let p = t["wald"]["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(t["wald"]["dof"], 1);
    assert_eq!(t["wald"]["lag_bounds"]["rows"], 1);
    assert_eq!(t["linearity"].as_array().unwrap().len(), 1);
    assert!(t["linearity"][0]["statistic"].as_f64().unwrap().is_finite());
}

#[test]
fn malformed_grid_exits_2_naming_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("bad.txt");
    std::fs::write(&grid, "1,2,3\n4,5,6\n7,oops,9\n").unwrap();
    let out = run(&["fit", "--grid", grid.to_str().unwrap(), "--bandwidth", "0.4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_record(&out);
    assert_eq!(e["kind"], "ParseError");
    assert!(e["message"].as_str().unwrap().contains("row 3"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "bandwith = [0.4]\n").unwrap();
    let out = run(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["kind"], "ConfigError");

    let out = run(&["simulate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["fit", "--grid", dir.path().join("missing.txt").to_str().unwrap(), "--bandwidth", "0.4"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["kind"], "IoError");
}

#[test]
fn numerical_failure_exits_3_with_module() {
    let dir = tempfile::tempdir().unwrap();
    let grid = simulated_grid(dir.path());
    let out = run(&["fit", "--grid", grid.to_str().unwrap(), "--bandwidth", "1e-6", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let e = error_record(&out);
    assert!(!e["kind"].as_str().unwrap().is_empty());
    assert!(["smoother", "projection", "plm"].contains(&e["module"].as_str().unwrap()), "{e}");
}
