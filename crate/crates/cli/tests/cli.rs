use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hyperid"))
}

#[test]
fn scenario_writes_a_runnable_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("b.json");
    let status = bin().args(["scenario", "B", "--out"]).arg(&cfg_path).status().unwrap();
    assert!(status.success());
    let mut cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    assert_eq!(cfg["scenario"]["name"], "B");

    // Shrink the run so the test stays fast.
    cfg["mesh"]["cells"] = serde_json::json!([2, 4, 4]);
    cfg["time"]["steps"] = 8.into();
    cfg["dictionary"]["knots_per_axis"] = 4.into();
    cfg["landweber"]["max_iter"] = 2.into();
    let out = dir.path().join("out");
    cfg["output"]["dir"] = out.to_str().unwrap().into();
    fs::write(&cfg_path, cfg.to_string()).unwrap();

    let output = bin().arg("reconstruct").arg(&cfg_path).output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(String::from_utf8_lossy(&output.stdout).contains("2 iterations"));
    for name in ["alpha.csv", "alpha.pgm", "residuals.json", "sensors.csv", "meta.json"] {
        assert!(out.join(name).exists(), "{name}");
    }

    let sim_out = dir.path().join("sim");
    cfg["output"]["dir"] = sim_out.to_str().unwrap().into();
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    assert!(bin().arg("simulate").arg(&cfg_path).status().unwrap().success());
    assert!(sim_out.join("displacement.csv").exists());
}

#[test]
fn missing_config_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .current_dir(dir.path())
        .args(["reconstruct", "missing.json"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("missing.json"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn unknown_names_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["scenario", "Q", "--out"])
        .arg(dir.path().join("q.json"))
        .status()
        .unwrap();
    assert!(!status.success());
    assert!(!dir.path().join("q.json").exists());
    assert!(!bin().args(["verify", "nonsense"]).status().unwrap().success());
}

#[test]
fn material_suite_passes() {
    let output = bin().args(["verify", "material"]).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3);
}
