use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn capfat(config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_capfat"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const DISK: &str = r#"
command = "capacity"
p = 2.0
ladder = [0.125, 0.0625]

[space]
bbox = { lo = [-1.25, -1.25], hi = [1.25, 1.25] }

[domain]
kind = "disk"
center = [0.0, 0.0]
radius = 1.0

[capacity]
plate = { kind = "disk", center = [0.0, 0.0], radius = 0.5 }
"#;

#[test]
fn capacity_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DISK);
    let out = dir.path().join("out");
    let res = capfat(&cfg, &out, &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for f in [
        "capacity.json",
        "capacity.dat",
        "capacity_trace_L0.csv",
        "capacity_trace_L1.csv",
        "capacity_potential_L1.f64",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("capacity.json")).unwrap()).unwrap();
    assert_eq!(json["provenance"]["tool"], "capfat");
    assert_eq!(json["levels"].as_array().unwrap().len(), 2);
    let bytes = std::fs::read(out.join("capacity_potential_L1.f64")).unwrap();
    assert_eq!(bytes.len() % 8, 0);
}

#[test]
fn same_seed_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = capfat(&fixture("cover-segment.toml"), out, &["--seed", "3"]);
        assert_eq!(res.status.code(), Some(0));
    }
    for f in ["cover.json", "cover_L0.csv", "merge_trace.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn refinements_flag_extends_the_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DISK);
    let out = dir.path().join("out");
    assert_eq!(capfat(&cfg, &out, &["--refinements", "3", "--workers", "2"]).status.code(), Some(0));
    assert!(out.join("capacity_trace_L2.csv").exists());
}

#[test]
fn malformed_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "command = \"capacity\"\nladder = [\n");
    let res = capfat(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("usage"));
}

#[test]
fn unknown_command_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &DISK.replace("\"capacity\"\np", "\"wiener\"\np"));
    assert_eq!(capfat(&cfg, &dir.path().join("out"), &[]).status.code(), Some(1));
}

#[test]
fn missing_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(capfat(&dir.path().join("none.toml"), &dir.path().join("out"), &[]).status.code(), Some(1));
}

#[test]
fn domain_filling_the_box_is_a_fixture_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = DISK.replace("radius = 1.0\n\n[capacity]", "radius = 5.0\n\n[capacity]");
    let cfg = write_config(dir.path(), &text);
    let res = capfat(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
}
