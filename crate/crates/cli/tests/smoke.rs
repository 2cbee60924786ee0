use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;

/// Ten runs at the default settings stay well inside a minute.
#[test]
fn short_filter_sim_with_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_hdmr"))
        .args(["filter-sim", "--runs", "10", "--out", "r.csv"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    let took = start.elapsed();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(took < Duration::from_secs(60), "took {took:?}");

    let report: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("r.csv.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 10);
    for r in rows {
        let e = r["rmse_final_rad"].as_f64().unwrap();
        assert!(e.is_finite() && e > 0.0 && e < 0.5, "{r}");
    }
}
