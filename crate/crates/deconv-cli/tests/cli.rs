//! End-to-end tests of the `deconv` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn deconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deconv")).args(args).output().expect("binary runs")
}

fn write_synthetic_data(path: &Path, n: usize, seed: u64) {
    // x_j = j/(2n+1) with a deterministic pseudo-noise component
    let nn = (2 * n + 1) as f64;
    let mut rows = vec!["x,y".to_string()];
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    for j in -(n as i64)..=n as i64 {
        let x = j as f64 / nn;
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let noise = (state % 1000) as f64 / 1000.0 - 0.5;
        let y = 3.0 * (-20.0 * x * x).exp() + 0.3 * noise;
        rows.push(format!("{x:.17e},{y:.17e}"));
    }
    fs::write(path, rows.join("\n") + "\n").unwrap();
}

#[test]
fn estimate_emits_all_outputs_with_512_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_synthetic_data(&data, 25, 1);
    let out = dir.path().join("out");
    let result = deconv(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--h",
        "1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    for f in ["estimate.csv", "residuals.csv", "ecdf.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let estimate = fs::read_to_string(out.join("estimate.csv")).unwrap();
    assert_eq!(estimate.lines().count(), 513); // header + 512 rows
    assert!(estimate.starts_with("x,theta_hat\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["config_hash"].as_str().unwrap().len() == 64);
    assert!(manifest["outputs"].as_array().unwrap().len() >= 3);
}

#[test]
fn even_row_count_exits_2_naming_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("even.csv");
    fs::write(&data, "x,y\n-0.25,1.0\n0.25,2.0\n").unwrap();
    let result = deconv(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--h",
        "1.0",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("odd"), "stderr: {stderr}");
}

#[test]
fn non_canonical_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "x,y\n-0.4,1.0\n0.0,2.0\n0.3,1.5\n").unwrap();
    let result = deconv(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--h",
        "1.0",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn golden_run_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_synthetic_data(&data, 25, 7);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("out{run}"));
        let result = deconv(&[
            "estimate",
            "--data",
            data.to_str().unwrap(),
            "--select-bootstrap",
            "--boot-reps",
            "30",
            "--seed",
            "12345",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
        let mut blob = Vec::new();
        for f in ["estimate.csv", "residuals.csv", "ecdf.csv", "objective.csv"] {
            blob.extend(fs::read(out.join(f)).unwrap());
        }
        outputs.push(blob);
    }
    assert_eq!(outputs[0], outputs[1]);
}

fn minimal_config(dir: &Path, methods: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    fs::write(
        &path,
        format!(
            r#"signal = "theta1"
k_truth = 30
half_sizes = [8]
replications = 1
grid_points = 8
master_seed = 4
selection_methods = [{methods}]

[error_model]
kind = "normal"
sd = 0.6667

[distortion]
kind = "laplace"
scale = 0.1
mode = "closed-form"

[bootstrap]
replications = 10
"#
        ),
    )
    .unwrap();
    path
}

#[test]
fn minimal_simulation_emits_declared_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = minimal_config(dir.path(), "\"bootstrap\"");
    let out = dir.path().join("out");
    let result = deconv(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    for f in ["amse.csv", "aimse.csv", "imse.csv", "log_ratios.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
        let listed = manifest["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .any(|v| v.as_str().unwrap().ends_with(f));
        assert!(listed, "{f} not in manifest");
    }
    let amse = fs::read_to_string(out.join("amse.csv")).unwrap();
    assert_eq!(amse.lines().count(), 6); // header + 5 evaluation points
}

#[test]
fn omitted_seed_is_recorded_and_reproducible_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = minimal_config(dir.path(), "\"bootstrap\"");
    let out1 = dir.path().join("o1");
    let result = deconv(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out1.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("manifest.json")).unwrap()).unwrap();
    let seed = manifest["seed"].as_u64().unwrap();
    // replay with the recorded seed
    let out2 = dir.path().join("o2");
    let result = deconv(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        &seed.to_string(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    assert_eq!(
        fs::read(out1.join("imse.csv")).unwrap(),
        fs::read(out2.join("imse.csv")).unwrap()
    );
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(
        &config,
        r#"signal = "theta1"
typo_field = 1
half_sizes = [8]
replications = 1
selection_methods = ["bootstrap"]

[error_model]
kind = "normal"
sd = 0.6667
"#,
    )
    .unwrap();
    let result = deconv(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn compare_riskhull_needs_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let config = minimal_config(dir.path(), "\"bootstrap\"");
    let result = deconv(&[
        "compare-riskhull",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn compare_riskhull_emits_both_imse_columns() {
    let dir = tempfile::tempdir().unwrap();
    let config = minimal_config(dir.path(), "\"bootstrap\", \"risk_hull\"");
    let out = dir.path().join("out");
    let result = deconv(&[
        "compare-riskhull",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let cmp = fs::read_to_string(out.join("imse_comparison.csv")).unwrap();
    let mut lines = cmp.lines();
    assert_eq!(lines.next().unwrap(), "sample_size,imse_bootstrap,imse_risk_hull");
    let row = lines.next().unwrap();
    assert_eq!(row.split(',').count(), 3);
    assert!(out.join("ise_ratio_samples.csv").exists());
}

#[test]
fn selftest_passes() {
    let result = deconv(&["selftest"]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("deterministic replay: ok"));
}
