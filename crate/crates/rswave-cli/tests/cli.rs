//! End-to-end checks of the command-line interface.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rswave"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("rswave-cli-tests")
        .join(format!("{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn symbol_check_passes_and_writes_artifacts() {
    let out = scratch("run");
    let status = bin()
        .args(["symbol-check", "--out"])
        .arg(&out)
        .arg("--quiet")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("symbol_check/summary.json").exists());
    assert!(out.join("symbol_check/symbol_check.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("symbol_check/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["pass"], serde_json::Value::Bool(true));
}

#[test]
fn reruns_are_byte_identical() {
    let out_a = scratch("det-a");
    let out_b = scratch("det-b");
    for out in [&out_a, &out_b] {
        let status = bin()
            .args(["rays", "--seed", "7", "--out"])
            .arg(out)
            .arg("--quiet")
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["rays/ray_rossby.csv", "rays/summary.json"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn invalid_config_reports_all_errors_and_exits_2() {
    let out = scratch("invalid");
    let cfg = out.join("bad.toml");
    std::fs::write(
        &cfg,
        "kind = \"diag_sweep\"\neps = [0.9, -0.1]\ngap_floor = 0.0\n",
    )
    .unwrap();
    let output = bin()
        .args(["diag-sweep", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("eps must be in (0, 0.5]"), "{stderr}");
    assert!(stderr.contains("gap_floor"), "{stderr}");
    assert!(stderr.matches("config error").count() >= 3, "{stderr}");
}

#[test]
fn validate_subcommand_accepts_minimal_config() {
    let out = scratch("validate");
    let cfg = out.join("ok.toml");
    std::fs::write(&cfg, "kind = \"rays\"\n[profile]\nkind = \"betaplane\"\nbeta = 1.0\n")
        .unwrap();
    let output = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("ok: rays"));
}

#[test]
fn unknown_profile_kind_is_enumerated() {
    let out = scratch("unknown");
    let cfg = out.join("bad.toml");
    std::fs::write(&cfg, "kind = \"rays\"\n[profile]\nkind = \"spherical\"\n").unwrap();
    let output = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("betaplane"), "{stderr}");
}

#[test]
fn overrides_are_applied() {
    let out = scratch("override");
    let status = bin()
        .args([
            "symbol-check",
            "--seed",
            "99",
            "--out",
        ])
        .arg(&out)
        .arg("--quiet")
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("symbol_check/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["seed"], serde_json::json!(99));
}
