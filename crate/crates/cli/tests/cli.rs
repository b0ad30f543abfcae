use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rydberg-arp"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn simulate_writes_record_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(config("ccz_analytic.toml"))
        .arg("--out")
        .arg(dir.path())
        .env("RYDBERG_ARP_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("record.json").exists());
    assert!(dir.path().join("trace_gate.csv").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"fidelity\""));
}

#[test]
fn seed_flag_lands_in_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["export-schedule", "--seed", "99", "--threads", "1", "--config"])
        .arg(config("ccz_dcrab.toml"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let record = std::fs::read_to_string(dir.path().join("record.json")).unwrap();
    assert!(record.contains("\"seed\": 99"));
    assert!(dir.path().join("schedule.csv").exists());
}

#[test]
fn configuration_problems_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "gate = \"ccz\"\nunknown_key = 1\n").unwrap();
    assert_eq!(bin().args(["simulate", "--config"]).arg(&bad).status().unwrap().code(), Some(2));
    assert_eq!(bin().arg("simulate").status().unwrap().code(), Some(2));
    // A CCZ document cannot drive the CZ decomposition.
    let wrong = bin().args(["decompose", "--config"]).arg(config("ccz_analytic.toml")).status().unwrap();
    assert_eq!(wrong.code(), Some(2));
}
