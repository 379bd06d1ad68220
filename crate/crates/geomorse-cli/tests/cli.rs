//! End-to-end tests of the binary: report contents, exit codes, CSV
//! output and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_geomorse-cli"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code present"),
        String::from_utf8(out.stdout).expect("stdout is utf-8"),
        String::from_utf8(out.stderr).expect("stderr is utf-8"),
    )
}

fn run_fixture(name: &str, extra: &[&str]) -> (i32, Value) {
    let config = fixture(name);
    let mut args = vec!["--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    let (code, stdout, stderr) = run(&args);
    let json: Value = serde_json::from_str(&stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}); stderr: {stderr}"));
    (code, json)
}

fn temp_config(dir: &tempfile::TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn sphere_index_report() {
    let (code, json) = run_fixture("sphere_index.json", &["--command", "index"]);
    assert_eq!(code, 0);
    assert_eq!(json["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(json["command"], "index");
    assert_eq!(json["causal_character"], "spacelike");
    assert_eq!(json["morse_index"]["index"], 1);
    assert_eq!(json["morse_index"]["focal_sum"], 1);
    assert_eq!(json["morse_index"]["matches"], true);
    assert_eq!(json["matches"], true);

    let focal = json["focal_points"].as_array().unwrap();
    assert_eq!(focal.len(), 1);
    let t = focal[0]["t"].as_f64().unwrap();
    assert!((t - std::f64::consts::PI).abs() < 1e-6, "focal at {t}");
    assert_eq!(focal[0]["multiplicity"], 1);
}

#[test]
fn focal_command_reports_without_index() {
    let (code, json) = run_fixture("sphere_index.json", &["--command", "focal"]);
    assert_eq!(code, 0);
    assert_eq!(json["command"], "focal");
    assert!(json.get("morse_index").is_none());
    assert_eq!(json["focal_points"].as_array().unwrap().len(), 1);
}

#[test]
fn far_side_two_endpoint_split() {
    let (code, json) = run_fixture("far_side.json", &["--command", "two_endpoint"]);
    assert_eq!(code, 0);
    let two = &json["two_endpoint"];
    assert_eq!(two["total"], 1);
    assert_eq!(two["fixed_part"], 0);
    assert_eq!(two["boundary_part"], 1);
    let entry = two["endpoint_form"][0][0].as_f64().unwrap();
    assert!((entry + 6.0).abs() < 1e-6, "endpoint form entry {entry}");
    assert_eq!(two["endpoint_inertia"]["n_minus"], 1);
}

#[test]
fn near_side_and_concentric_splits() {
    let (code, json) = run_fixture("near_side.json", &["--command", "two_endpoint"]);
    assert_eq!(code, 0);
    assert_eq!(json["two_endpoint"]["total"], 0);
    assert_eq!(json["two_endpoint"]["endpoint_inertia"]["n_plus"], 1);
    assert_eq!(json["two_endpoint"]["endpoint_inertia"]["n_minus"], 0);

    let (code, json) = run_fixture("concentric.json", &["--command", "two_endpoint"]);
    assert_eq!(code, 0);
    assert_eq!(json["two_endpoint"]["total"], 0);
    assert_eq!(json["two_endpoint"]["endpoint_inertia"]["n_zero"], 1);
}

#[test]
fn light_ray_has_index_zero() {
    let (code, json) = run_fixture("light_ray.json", &["--command", "index"]);
    assert_eq!(code, 0);
    assert_eq!(json["causal_character"], "lightlike");
    assert_eq!(json["morse_index"]["index"], 0);
    assert_eq!(json["focal_points"].as_array().unwrap().len(), 0);
}

#[test]
fn custom_metric_oracle_check() {
    let (code, json) = run_fixture(
        "upper_half_plane.json",
        &["--command", "oracle_check", "--seed", "7"],
    );
    assert_eq!(code, 0);
    let oracle = &json["oracle"];
    assert_eq!(oracle["reference_index"], 0);
    assert_eq!(oracle["stabilized"], true);
    assert_eq!(oracle["dense"]["n_minus"], 0);
    assert_eq!(oracle["minimality"]["trials"], 50);
    assert_eq!(oracle["minimality"]["passed"], true);
    assert_eq!(oracle["matches"], true);
}

#[test]
fn two_endpoint_oracle_uses_the_split_total() {
    let (code, json) = run_fixture("far_side.json", &["--command", "oracle_check"]);
    assert_eq!(code, 0);
    assert_eq!(json["oracle"]["reference_index"], 1);
    assert_eq!(json["oracle"]["dense"]["n_minus"], 1);
    assert_eq!(json["two_endpoint"]["total"], 1);
    assert!(json["oracle"].get("minimality").is_none());
}

#[test]
fn identical_runs_are_byte_identical() {
    let config = fixture("sphere_index.json");
    let args = [
        "--config",
        config.to_str().unwrap(),
        "--command",
        "oracle_check",
        "--mesh",
        "64",
    ];
    let (code_a, stdout_a, _) = run(&args);
    let (code_b, stdout_b, _) = run(&args);
    assert_eq!(code_a, 0);
    assert_eq!(code_b, 0);
    assert_eq!(stdout_a, stdout_b, "reports must be byte-identical");
}

#[test]
fn index_curve_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("curve.csv");
    let config = fixture("circle_start.json");
    let (code, stdout, _) = run(&[
        "--config",
        config.to_str().unwrap(),
        "--command",
        "index_curve",
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let json: Value = serde_json::from_str(&stdout).unwrap();
    let samples = json["index_curve"].as_array().unwrap();
    assert!(json["matches"].as_bool().unwrap());
    let indices: Vec<u64> = samples
        .iter()
        .map(|s| s["index"].as_u64().unwrap())
        .collect();
    assert!(indices.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*indices.last().unwrap(), 1);

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,index"));
    assert_eq!(lines.count(), samples.len());
    let last = csv.lines().last().unwrap();
    assert!(last.ends_with(",1"), "last row {last}");
}

#[test]
fn missing_config_exits_with_config_code() {
    let (code, stdout, _) = run(&["--config", "/nonexistent/config.json", "--command", "index"]);
    assert_eq!(code, 2);
    let json: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(json["error"]["code"], "CONFIG_ERROR");
    assert_eq!(json["error"]["class"], "config");
}

#[test]
fn malformed_json_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = temp_config(&dir, "{ not json");
    let (code, stdout, _) = run(&["--config", path.to_str().unwrap(), "--command", "index"]);
    assert_eq!(code, 2);
    let json: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(json["error"]["code"], "CONFIG_ERROR");
}

#[test]
fn bad_expression_reports_byte_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = temp_config(
        &dir,
        r#"{
            "manifold": {"custom": {
                "dim": 2,
                "signature": "riemannian",
                "metric": [["1", "0"], ["0", "1 +* x1"]]
            }},
            "start": {"point": {"coordinates": [0.0, 1.0]}},
            "geodesic": {
                "p0": [0.0, 1.0],
                "v0": [0.0, 1.0],
                "interval": [0.0, 1.0],
                "steps": 128
            }
        }"#,
    );
    let (code, stdout, _) = run(&["--config", path.to_str().unwrap(), "--command", "index"]);
    assert_eq!(code, 2);
    let json: Value = serde_json::from_str(&stdout).unwrap();
    let message = json["error"]["message"].as_str().unwrap();
    assert!(message.contains("metric[1][1]"), "{message}");
    assert!(message.contains("byte 3"), "{message}");
}

#[test]
fn spacelike_lorentzian_geodesic_is_a_precondition_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = temp_config(
        &dir,
        r#"{
            "manifold": {"builtin": {"name": "minkowski", "dim": 2}},
            "start": {"point": {"coordinates": [0.0, 0.0]}},
            "geodesic": {
                "p0": [0.0, 0.0],
                "v0": [1.0, 0.0],
                "interval": [0.0, 1.0],
                "steps": 128
            }
        }"#,
    );
    let (code, stdout, _) = run(&["--config", path.to_str().unwrap(), "--command", "index"]);
    assert_eq!(code, 3);
    let json: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(json["error"]["code"], "UNSUPPORTED_CAUSAL_CHARACTER");
    assert_eq!(json["error"]["class"], "precondition");
}

#[test]
fn csv_flag_requires_the_curve_command() {
    let config = fixture("sphere_index.json");
    let (code, _, _) = run(&[
        "--config",
        config.to_str().unwrap(),
        "--command",
        "focal",
        "--csv",
        "/tmp/unused.csv",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn two_endpoint_without_target_is_a_config_error() {
    let (code, json) = run_fixture("sphere_index.json", &["--command", "two_endpoint"]);
    assert_eq!(code, 2);
    assert_eq!(json["error"]["code"], "CONFIG_ERROR");
}

#[test]
fn absurd_inertia_tolerance_surfaces_as_mismatch() {
    let (code, json) = run_fixture(
        "sphere_index.json",
        &["--command", "index", "--tol-inertia", "1e6"],
    );
    assert_eq!(code, 5);
    assert_eq!(json["matches"], false);
    assert_eq!(json["morse_index"]["matches"], false);
}

#[test]
fn steps_override_is_honored() {
    let (code, json) = run_fixture(
        "circle_start.json",
        &["--command", "index", "--steps", "700"],
    );
    assert_eq!(code, 0);
    assert_eq!(json["morse_index"]["index"], 1);
}

#[test]
fn fixtures_round_trip_through_the_schema() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut checked = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let config: geomorse_cli::config::Config = serde_json::from_str(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let serialized = serde_json::to_string_pretty(&config).unwrap();
        let again: geomorse_cli::config::Config = serde_json::from_str(&serialized).unwrap();
        assert_eq!(config, again, "{}", path.display());
        checked += 1;
    }
    assert!(checked >= 8, "expected the full fixture set, saw {checked}");
}
