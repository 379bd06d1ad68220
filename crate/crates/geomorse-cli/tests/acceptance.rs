//! Acceptance check for the process boundary: a start velocity lying in
//! the start submanifold's tangent space must be rejected before any
//! index computation, with the documented exit code and error code.
//!
//! The geometric acceptance checks (01 to 08 and 10) live in the core
//! crate's `acceptance` test target.

use std::path::Path;
use std::process::Command;

type Check = std::result::Result<String, String>;

fn run(label: &str, body: impl FnOnce() -> Check) {
    match body() {
        Ok(detail) => println!("[pass] {label}: {detail}"),
        Err(detail) => {
            println!("[FAIL] {label}: {detail}");
            panic!("{label}: {detail}");
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

#[test]
fn c09_degenerate_start_exit_code() {
    run("09 degenerate start exit code", || {
        let config = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("fixtures")
            .join("minkowski_diagonal.json");
        let out = Command::new(env!("CARGO_BIN_EXE_geomorse-cli"))
            .args(["--config", config.to_str().unwrap(), "--command", "index"])
            .output()
            .map_err(|e| format!("binary failed to start: {e}"))?;

        let code = out.status.code().ok_or("no exit code")?;
        ensure!(code == 3, "expected exit code 3, got {code}");

        let stdout = String::from_utf8_lossy(&out.stdout);
        let json: serde_json::Value = serde_json::from_str(&stdout)
            .map_err(|e| format!("stdout is not a JSON report: {e}"))?;
        let error_code = json["error"]["code"].as_str().unwrap_or_default();
        ensure!(
            error_code == "DEGENERATE_INITIAL_CONDITION",
            "expected DEGENERATE_INITIAL_CONDITION, got `{error_code}`"
        );
        ensure!(
            json["error"]["class"] == "precondition",
            "expected the precondition class, got {}",
            json["error"]["class"]
        );
        Ok(format!(
            "diagonal surface in the Minkowski plane exits 3 with {error_code}"
        ))
    });
}
