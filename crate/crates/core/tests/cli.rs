//! Integration tests of the `oscint` binary: exit codes, config-file merge,
//! summary structure, table-file input.

use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_oscint")
}

#[test]
fn verify_rescale_passes_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    // Uppercase --K alias as well as the lowercase flag.
    let status = Command::new(bin())
        .args([
            "verify", "rescale", "--K", "4", "--lambda", "64", "--seed", "7",
        ])
        .args(["--out-dir", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["command"], "verify rescale");
    assert_eq!(summary["pass"], true);
    assert!(summary["config"]["seed"].is_number());
    assert!(summary["results"]["worst_rel_dev"].is_number());
}

#[test]
fn impossible_tolerance_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(bin())
        .args(["verify", "rescale", "--k", "4", "--lambda", "64"])
        .args(["--max-rel-dev", "1e-18"])
        .args(["--out-dir", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["pass"], false);
}

#[test]
fn extremizer_summary_reports_the_sharp_slope() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(bin())
        .args(["extremizer", "--lmin", "64", "--lmax", "1024"])
        .args(["--out-dir", dir.path().to_str().unwrap()])
        .env("OSCINT_THREADS", "3") // thread count via env, no flag
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    let slope = summary["results"]["fit"]["slope"].as_f64().unwrap();
    assert!(
        (-0.395..=-0.355).contains(&slope),
        "fitted slope {slope} outside [-0.395, -0.355]"
    );
    // Last CSV row carries the running slope over the whole sweep.
    let csv = std::fs::read_to_string(dir.path().join("extremizer.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let slope_field: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!((slope_field - slope).abs() < 1e-12);
}

#[test]
fn degenerate_decay_sweep_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(bin())
        .args(["decay", "--lmin", "64", "--lmax", "64"])
        .args(["--out-dir", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn non_dyadic_bounds_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(bin())
        .args(["extremizer", "--lmin", "100", "--lmax", "400"])
        .args(["--out-dir", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let status = Command::new(bin())
        .args(["eval", "--definitely-not-a-flag"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    let cfg_out = dir.path().join("from_file");
    std::fs::write(
        &cfg_path,
        format!(
            "# settings\nseed = 99\ngrid_cap = 65\nout_dir = {}\n",
            cfg_out.display()
        ),
    )
    .unwrap();
    // No flags: everything from the file.
    let status = Command::new(bin())
        .args(["verify", "capbound", "--k", "4"])
        .args(["--config", cfg_path.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(cfg_out.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["config"]["seed"], 99);
    assert_eq!(summary["config"]["grid_cap"], 65);

    // Flag overrides the file.
    let flag_out = dir.path().join("from_flag");
    let status = Command::new(bin())
        .args(["verify", "capbound", "--k", "4", "--seed", "3"])
        .args(["--config", cfg_path.to_str().unwrap()])
        .args(["--out-dir", flag_out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(flag_out.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["config"]["seed"], 3);
    assert_eq!(summary["config"]["grid_cap"], 65);
}

#[test]
fn malformed_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.cfg");
    std::fs::write(&cfg_path, "this is not key value\n").unwrap();
    let status = Command::new(bin())
        .args(["verify", "capbound", "--k", "4"])
        .args(["--config", cfg_path.to_str().unwrap()])
        .args(["--out-dir", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn eval_accepts_a_table_file_and_general_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("f.txt");
    let rows: String = (0..=32)
        .map(|i| {
            let t = i as f64 / 32.0;
            format!("{t} {}\n", 1.0 - (2.0 * t - 1.0).abs())
        })
        .collect();
    std::fs::write(&table, rows).unwrap();
    let status = Command::new(bin())
        .args(["eval", "--lambda", "32", "--nx", "9", "--ny", "9"])
        .args(["--f-table", table.to_str().unwrap()])
        .args(["--coeffs", "0,1,1,0"])
        .args(["--out-dir", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert!(csv.starts_with("x,y,re,im\n"));
    assert_eq!(csv.lines().count(), 1 + 81);

    // Singular coefficients are rejected as a config error... via exit 1
    // (singular matrix is a domain error, not a flag-parse error).
    let status = Command::new(bin())
        .args(["eval", "--lambda", "32", "--coeffs", "1,1,1,1"])
        .args(["--out-dir", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
