//! Exit-code matrix and end-to-end runs of the `scrambled` binary.

use std::fs;
use std::path::{Path, PathBuf};

use assert_cmd::Command;
use scrambled::certificate::Certificate;
use tempfile::TempDir;

fn bin() -> Command {
    Command::cargo_bin("scrambled").unwrap()
}

fn code(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn systems_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("systems")
}

#[test]
fn g0_show_prints_the_canonical_word() {
    bin().args(["g0", "--show", "2"]).assert().success().stdout("10\n");
    bin().args(["g0", "--show", "0"]).assert().success().stdout("\n");
    bin()
        .args(["g0", "--edge-in", "1", "--depth", "4"])
        .assert()
        .success()
        .stdout("level\t2\n1000\n1010\n");
}

#[test]
fn end_to_end_shift_example() {
    let dir = TempDir::new().unwrap();
    let c = path(&dir, "c.json");
    bin()
        .args(["scramble", "--system", "shift", "--depth", "4", "--horizon", "60", "--out", &c])
        .assert()
        .code(0);
    bin().args(["verify", &c]).assert().code(0).stdout(predicates::str::contains("certificate verified"));
}

#[test]
fn small_budget_is_inconclusive() {
    bin()
        .args(["fuse", "--oracle", "shift-liyorke", "--depth", "4", "--budget", "10"])
        .assert()
        .code(2)
        .stderr(predicates::str::contains("exhausted"));
}

#[test]
fn exit_code_matrix() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "x.json");
    let invalid: &[&[&str]] = &[
        &[],
        &["bogus"],
        &["scramble", "--bogus"],
        &["scramble", "--system", "shift", "--depth", "2", "--horizon", "20"],
        &["scramble", "--system", "nope", "--depth", "2", "--horizon", "20", "--out", &out],
        &["scramble", "--system", "shift", "--depth", "0", "--horizon", "20", "--out", &out],
        &["scramble", "--system", "shift", "--depth", "13", "--horizon", "20", "--out", &out],
        &["scramble", "--system", "shift", "--depth", "2", "--horizon", "20", "--eps", "0.5", "--out", &out],
        &["scramble", "--system", "shift", "--depth", "2", "--horizon", "20", "--k", "0", "--out", &out],
        &["scramble", "--system", "sft:/no/such/file.toml", "--depth", "2", "--horizon", "20", "--out", &out],
        &["verify"],
        &["verify", "/no/such/certificate.json"],
        &["g0"],
        &["g0", "--show", "x"],
        &["g0", "--edge-in", "101"],
        &["g0", "--edge-in", "101", "--depth", "2"],
        &["g0", "--show", "1", "--edge-in", "1", "--depth", "3"],
        &["mycielski", "--relation", "nope", "--depth", "3", "--out", &out],
        &["mycielski", "--relation", "e0", "--depth", "0", "--out", &out],
        &["fuse", "--oracle", "nope", "--depth", "2"],
        &["fuse", "--oracle", "e0c", "--depth", "0"],
        &["orbit", "--system", "shift", "--cell", "01x", "--steps", "2"],
        &["orbit", "--system", "tent", "--cell", "[1/2^0, 0/2^0]", "--steps", "2"],
    ];
    for args in invalid {
        assert_eq!(code(args), 3, "{args:?}");
    }
    let usage = bin().args(["scramble", "--bogus"]).output().unwrap();
    assert!(String::from_utf8_lossy(&usage.stderr).contains("Usage"));

    let ok: &[&[&str]] = &[
        &["--help"],
        &["--version"],
        &["g0", "--show", "7"],
        &["orbit", "--system", "shift", "--cell", "0110", "--steps", "5"],
        &["orbit", "--system", "tent", "--cell", "[1/2^2, 1/2^1]", "--steps", "5"],
        &["mycielski", "--relation", "eq", "--depth", "3", "--out", &out],
        &["verify", &out],
        &["fuse", "--oracle", "e0c", "--depth", "3"],
    ];
    for args in ok {
        assert_eq!(code(args), 0, "{args:?}");
    }
}

#[test]
fn shortfalls_still_write_a_rejected_certificate() {
    let dir = TempDir::new().unwrap();
    let c = path(&dir, "short.json");
    bin()
        .args(["scramble", "--system", "shift", "--depth", "3", "--horizon", "10", "--k", "4", "--out", &c])
        .assert()
        .code(2)
        .stderr(predicates::str::contains("fall short"));
    bin()
        .args(["verify", &c])
        .assert()
        .code(1)
        .stdout(predicates::str::contains("FAIL  thresholds  pair ("));
}

#[test]
fn malformed_and_tampered_files() {
    let dir = TempDir::new().unwrap();
    let garbage = path(&dir, "garbage.json");
    fs::write(&garbage, "{\"header\": 1}").unwrap();
    assert_eq!(code(&["verify", &garbage]), 3);

    let c = path(&dir, "c.json");
    assert_eq!(code(&["scramble", "--system", "tent", "--depth", "3", "--horizon", "30", "--out", &c]), 0);
    let mut cert = Certificate::load(Path::new(&c)).unwrap();
    let key = "011".to_string();
    let other = cert.scheme["100"].clone();
    cert.scheme.insert(key, other);
    let bad = path(&dir, "bad.json");
    cert.emit(Path::new(&bad)).unwrap();
    bin().args(["verify", &bad]).assert().code(1).stdout(predicates::str::contains("FAIL  scheme"));

    let mut cert = Certificate::load(Path::new(&c)).unwrap();
    cert.pairs.pop();
    cert.emit(Path::new(&bad)).unwrap();
    bin().args(["verify", &bad]).assert().code(1).stdout(predicates::str::contains("FAIL  coverage"));
}

#[test]
fn outputs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let p = path(&dir, name);
        bin()
            .args(["scramble", "--system", "tent", "--depth", "3", "--horizon", "40", "--k", "2", "--out", &p])
            .assert()
            .code(0);
        fs::read(p).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
    let fused = |_: ()| bin().args(["fuse", "--oracle", "shift-liyorke", "--depth", "3"]).output().unwrap().stdout;
    let first = fused(());
    assert_eq!(first, fused(()));
    let parsed: Certificate = serde_json::from_slice(&first).unwrap();
    assert_eq!(parsed.header.construction, "fuse");
}

#[test]
fn subshift_files() {
    let dir = TempDir::new().unwrap();
    for spec in ["golden_mean.toml", "no_three_ones.toml"] {
        let system = format!("sft:{}", systems_dir().join(spec).display());
        let c = path(&dir, spec);
        bin()
            .args(["scramble", "--system", &system, "--depth", "3", "--horizon", "120", "--k", "2", "--out", &c])
            .assert()
            .code(0);
        bin().args(["verify", &c]).assert().code(0);
    }
    let empty = path(&dir, "empty.toml");
    fs::write(&empty, "kind = \"sft\"\nname = \"empty\"\nforbidden = [\"0\", \"1\"]\n").unwrap();
    let system = format!("sft:{empty}");
    assert_eq!(code(&["orbit", "--system", &system, "--cell", "0", "--steps", "1"]), 3);
}

#[test]
fn orbit_lines() {
    bin()
        .args(["orbit", "--system", "shift", "--cell", "01*1", "--steps", "2"])
        .assert()
        .success()
        .stdout("0\t01*1\n1\t1*1\n2\t*1\n");
}
