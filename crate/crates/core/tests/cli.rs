use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.cfg"))
}

fn netembed(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netembed"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

const MINIMAL: &str = "\
[scenario]
dimension = 2
[metric]
family = flat
[net]
epsilon_base = 1
delta = 0.75
box = 1000000
[lattice]
epsilon = 1
[samples]
core = 5
";

#[test]
fn passing_audit_exits_zero_and_is_reproducible() {
    let out = tempfile::tempdir().unwrap();
    let a = netembed(&["audit", "--no-timing"], &scenario("flat2"), out.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let first = std::fs::read_to_string(out.path().join("flat2_audit.json")).unwrap();
    let b = netembed(&["audit", "--no-timing"], &scenario("flat2"), out.path());
    assert_eq!(b.status.code(), Some(0));
    let second = std::fs::read_to_string(out.path().join("flat2_audit.json")).unwrap();
    assert_eq!(first, second);
    assert!(out.path().join("flat2_distortion.csv").exists());
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["wall_ms"], 0);
    assert_eq!(v["hypothesis_violated"], false);
}

#[test]
fn seed_flag_changes_samples() {
    let out = tempfile::tempdir().unwrap();
    netembed(&["audit", "--no-timing", "--seed", "1"], &scenario("shear2"), out.path());
    let a = std::fs::read_to_string(out.path().join("shear2_distortion.csv")).unwrap();
    netembed(&["audit", "--no-timing", "--seed", "2"], &scenario("shear2"), out.path());
    let b = std::fs::read_to_string(out.path().join("shear2_distortion.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn non_isometric_scenario_fails_with_markers() {
    let out = tempfile::tempdir().unwrap();
    let o = netembed(&["all", "--no-timing"], &scenario("conformal2"), out.path());
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("hypothesis violated"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("conformal2_all.json")).unwrap()).unwrap();
    assert_eq!(v["hypothesis_violated"], true);
    let statuses: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["status"].as_str().unwrap()).collect();
    assert!(statuses.contains(&"fail"));
    assert!(statuses.contains(&"not-applicable"));
}

#[test]
fn minimal_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mini.cfg");
    std::fs::write(&cfg, MINIMAL).unwrap();
    let o = netembed(&["net-check"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("mini_net-check.json").exists());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("nodelta", MINIMAL.replace("delta = 0.75\n", ""), "net.delta"),
        ("unknown", format!("{MINIMAL}bogus = 1\n"), "samples.bogus"),
        ("covering", MINIMAL.replace("delta = 0.75", "delta = 0.7"), "delta"),
        ("jitter", MINIMAL.replace("delta = 0.75", "delta = 0.5\njitter = 0.4"), "jitter"),
        ("narrow", MINIMAL.replace("box = 1000000", "box = 10"), "net box"),
        ("garbled", format!("{MINIMAL}[broken\n"), "line"),
    ];
    for (name, text, needle) in cases {
        let cfg = dir.path().join(format!("{name}.cfg"));
        std::fs::write(&cfg, text).unwrap();
        let o = netembed(&["audit"], &cfg, dir.path());
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(o.status.code(), Some(2), "{name}: {err}");
        assert!(err.contains(needle), "{name}: {err}");
    }
}

#[test]
fn unknown_subcommand_is_rejected() {
    let out = tempfile::tempdir().unwrap();
    let o = netembed(&["verify"], &scenario("flat2"), out.path());
    assert_eq!(o.status.code(), Some(2));
}
