use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use skg_core::config::ExperimentConfig;

fn skg(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skg"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn skg")
}

fn config_path() -> String {
    format!("{}/../../configs/80211a.cfg", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn noiseless_keygen_gives_identical_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = skg(&["keygen", "--noise", "0", "--trials", "4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("keys.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(2) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[2], "true");
        assert!(!cells[3].is_empty());
        assert_eq!(cells[3], cells[4]);
        rows += 1;
    }
    assert_eq!(rows, 4);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["keygen", "--seed", "7", "--trials", "3", "--set", "snr_f_db=12"];
    assert!(skg(&args, a.path()).status.success());
    assert!(skg(&args, b.path()).status.success());
    for name in ["manifest.json", "keys.csv", "keygen.log"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = skg(&["capacity-sweep", "--config", "/definitely/not/here.cfg"], dir.path());
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "m_tones = 52\nno_such_key = 1\n").unwrap();
    let unknown = skg(&["capacity-sweep", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(unknown.status.code(), Some(2));

    let rate = skg(&["keygen", "--set", "rate=1.5"], dir.path());
    assert_eq!(rate.status.code(), Some(2));
}

#[test]
fn csv_carries_manifest_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = skg(&["capacity-sweep"], dir.path());
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let hash = manifest["config_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(manifest["subcommand"], "capacity-sweep");
    let csv = fs::read_to_string(dir.path().join("capacity.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# manifest: {hash}"));
}

#[test]
fn shipped_config_is_the_default() {
    let text = fs::read_to_string(config_path()).unwrap();
    assert_eq!(ExperimentConfig::parse(&text).unwrap(), ExperimentConfig::default());
}

#[test]
fn defaults_and_shipped_config_hash_alike() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(skg(&["capacity-sweep"], a.path()).status.success());
    assert!(skg(&["capacity-sweep", "--config", &config_path()], b.path()).status.success());
    assert_eq!(fs::read(a.path().join("manifest.json")).unwrap(), fs::read(b.path().join("manifest.json")).unwrap());
}
