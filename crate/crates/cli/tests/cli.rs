use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use catsim::calib::squeezing_variance;
use catsim::gauss::{predict_state, predict_states, LossCorrection, PredictionConfig};
use catsim::DensityMatrix;
use serde_json::Value;

fn catsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = catsim(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Riemann sum of the `x,p,w` grid, with the grid origin value.
fn grid_integral(path: PathBuf) -> (f64, f64) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let rows: Vec<(f64, f64, f64)> = rdr.deserialize().map(|r| r.unwrap()).collect();
    let h = rows[1].1 - rows[0].1;
    let origin = rows.iter().find(|r| r.0 == 0.0 && r.1 == 0.0).unwrap().2;
    (rows.iter().map(|r| r.2).sum::<f64>() * h * h, origin)
}

#[test]
fn predict_defaults_regenerate_the_uncorrected_table() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["predict"], dir.path());
    let tables = json(dir.path().join("predictions.json"));
    let rows = tables["uncorrected"].as_array().unwrap();
    let expected = [(2.0, 0.64, 0.87, -0.09), (4.0, 0.58, 1.05, -0.06), (6.0, 0.55, 1.20, -0.04), (8.0, 0.52, 1.32, -0.03)];
    assert_eq!(rows.len(), expected.len());
    for (row, (p, f, a, w)) in rows.iter().zip(expected) {
        assert_eq!(row["pump_power_mw"].as_f64().unwrap(), p);
        assert!((row["f_odd"].as_f64().unwrap() - f).abs() <= 0.03, "{row}");
        assert!((row["alpha"].as_f64().unwrap() - a).abs() <= 0.06, "{row}");
        assert!((row["w00"].as_f64().unwrap() - w).abs() <= 0.02, "{row}");
    }
    let csv = fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("P_p,F_odd,alpha,w00"));
}

#[test]
fn predict_corrected_views_follow_the_library() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["predict", "--powers", "2", "--nmax", "20"], dir.path());
    let tables = json(dir.path().join("predictions.json"));
    for (key, correction) in [("homodyne_corrected", LossCorrection::Homodyne), ("fully_corrected", LossCorrection::Full)] {
        let row = &tables[key][0];
        let lib = predict_state(2.0, &PredictionConfig { correction, ..Default::default() }, 20).unwrap();
        assert_eq!(row["f_odd"].as_f64().unwrap(), lib.f_odd);
        assert_eq!(row["w00"].as_f64().unwrap(), lib.w00);
    }
    // removing losses only deepens the negativity
    let w = |k: &str| tables[k][0]["w00"].as_f64().unwrap();
    assert!(w("fully_corrected") < w("homodyne_corrected") && w("homodyne_corrected") < w("uncorrected"));
}

#[test]
fn empty_power_list_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, r#"{"pump_powers_mw": []}"#).unwrap();
    let o = catsim(&["predict", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(catsim(&["tabulate"], dir.path()).status.code(), Some(2));
    assert_eq!(catsim(&["fit", "laser", "x.csv"], dir.path()).status.code(), Some(2));
    assert_eq!(catsim(&["simulate", "subtraction", "--xi", "1.5"], dir.path()).status.code(), Some(2));
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, r#"{"gain_c": "high"}"#).unwrap();
    assert_eq!(catsim(&["predict", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(3));
    assert_eq!(catsim(&["predict", "--config", "/no/such/config.json"], dir.path()).status.code(), Some(3));
}

#[test]
fn squeezing_run_matches_the_variance_model() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "squeezing", "--power", "4"], dir.path());
    let (v_min, v_max) = squeezing_variance(4.0, 0.28, 0.62).unwrap();
    let v = json(dir.path().join("squeezing_variances.json"));
    assert!((v["v_min"].as_f64().unwrap() - v_min).abs() <= 0.05, "{v}");
    assert!((v["v_max"].as_f64().unwrap() - v_max).abs() <= 0.05, "{v}");
    let csv = fs::read_to_string(dir.path().join("squeezing.csv")).unwrap();
    assert_eq!(csv.lines().count(), 65201);
}

#[test]
fn simulation_is_deterministic_by_seed() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, seed) in dirs.iter().zip(["5", "5", "6"]) {
        ok(&["simulate", "subtraction", "--power", "8", "--xi", "0.96", "--seed", seed], dir.path());
    }
    let read = |d: &tempfile::TempDir, f: &str| fs::read(d.path().join(f)).unwrap();
    for f in ["subtraction.csv", "subtraction.csv.json"] {
        assert_eq!(read(&dirs[0], f), read(&dirs[1], f));
    }
    assert_ne!(read(&dirs[0], "subtraction.csv"), read(&dirs[2], "subtraction.csv"));
    assert_eq!(fs::read_to_string(dirs[0].path().join("subtraction.csv")).unwrap().lines().count(), 4001);
}

#[test]
fn uncorrected_reconstruction_of_a_simulated_run() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "subtraction", "--power", "8", "--xi", "0.96"], dir.path());
    let dataset = dir.path().join("subtraction.csv");
    ok(&["reconstruct", dataset.to_str().unwrap(), "--eta", "1.0"], dir.path());
    let report = json(dir.path().join("reconstruction.json"));
    assert_eq!(report["converged"], Value::Bool(true));
    let rho: DensityMatrix = serde_json::from_value(report["rho"].clone()).unwrap();
    let w = catsim::analysis::wigner_origin(&rho);
    assert!((w + 0.023).abs() <= 0.015, "W(0,0) = {w}");

    // the analysis of the report matches the reconstruction and reruns are byte-identical
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let rho_path = dir.path().join("reconstruction.json");
    for d in [&first, &second] {
        ok(&["analyze", rho_path.to_str().unwrap(), "--power", "8"], d.path());
    }
    let analysis = json(first.path().join("analysis.json"));
    assert_eq!(analysis["w00"].as_f64().unwrap(), w);
    assert_eq!(analysis["source"], "reconstructed");
    for f in ["analysis.json", "analysis.csv", "photon_distribution.csv", "wigner.csv"] {
        assert_eq!(fs::read(first.path().join(f)).unwrap(), fs::read(second.path().join(f)).unwrap(), "{f}");
    }
    let (integral, _) = grid_integral(first.path().join("wigner.csv"));
    assert!((integral - 1.0).abs() <= 1e-3, "{integral}");
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = catsim(&["reconstruct", "/no/such/run.csv"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(!o.stderr.is_empty());
}

#[test]
fn single_photon_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let rho_path = dir.path().join("one.json");
    fs::write(&rho_path, DensityMatrix::fock(1, 10).unwrap().to_json().unwrap()).unwrap();
    ok(&["analyze", rho_path.to_str().unwrap()], dir.path());
    let report = json(dir.path().join("analysis.json"));
    assert!((report["w00"].as_f64().unwrap() + std::f64::consts::FRAC_1_PI).abs() < 1e-12);
    assert_eq!(report["alpha_at_boundary"], Value::Bool(true));
    let p1 = report["photon_dist"][1].as_f64().unwrap();
    assert!((p1 - 1.0).abs() < 1e-12);
    let (integral, origin) = grid_integral(dir.path().join("wigner.csv"));
    assert!((integral - 1.0).abs() <= 1e-3, "{integral}");
    assert!((origin + std::f64::consts::FRAC_1_PI).abs() < 1e-12);
}

#[test]
fn wigner_of_the_predicted_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["wigner", "--power", "8", "--extent", "6", "--step", "0.1"], dir.path());
    assert!(out.contains("W(0,0)"));
    let (integral, origin) = grid_integral(dir.path().join("wigner.csv"));
    assert!((integral - 1.0).abs() <= 1e-3, "{integral}");
    let states = predict_states(8.0, &PredictionConfig::default(), 15).unwrap();
    let truncated = catsim::fock::wigner(&states.density(1.0).unwrap(), 0.0, 0.0);
    assert!((origin - truncated).abs() <= 1e-12, "{origin} vs {truncated}");
    // the Fock truncation costs little against the Gaussian-mixture value
    assert!((origin - states.w00(1.0)).abs() <= 1e-4);
    assert_eq!(catsim(&["wigner", "--step", "0"], dir.path()).status.code(), Some(2));
}

#[test]
fn bundled_calibration_fits() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, params) in [
        ("shg", [("eta_inf", 0.53), ("g", 0.18)]),
        ("gain", [("c", 0.28), ("epsilon", 0.77)]),
        ("squeezing", [("c", 0.28), ("eta", 0.62)]),
    ] {
        ok(&["fit", kind, &data(&format!("{kind}.csv"))], dir.path());
        let report = json(dir.path().join("fit.json"));
        for (name, truth) in params {
            let v = report["params"][name].as_f64().unwrap();
            assert!((v / truth - 1.0).abs() <= 0.02, "{kind} {name}: {v}");
        }
    }
}

#[test]
fn malformed_calibration_csv_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "P,eta\n1,0.1\n2,abc\n").unwrap();
    assert_eq!(catsim(&["fit", "shg", bad.to_str().unwrap()], dir.path()).status.code(), Some(3));
    // a two-branch model needs the vmin,vmax header
    assert_eq!(catsim(&["fit", "gain", &data("shg.csv")], dir.path()).status.code(), Some(3));
}
