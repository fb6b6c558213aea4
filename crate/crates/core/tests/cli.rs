//! Runs the `dpc` binary against config files.

use std::fs;
use std::process::Command;

use dpc_tcm::harness::{parse_csv, run_sweep, write_csv_file, SimConfig};

fn dpc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpc"))
}

const SWEEP: &str = r#"
trellis = "pam8_8state_r0_2"
bin_strategy = "coset-split"
values = [8.0, 10.0]
block_length = 500
min_errors = 10
max_blocks = 3
seed = 11
"#;

#[test]
fn simulate_writes_csv_matching_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    let out = dir.path().join("sweep.csv");
    fs::write(&cfg, SWEEP).unwrap();

    let status = dpc().arg("simulate").arg(&cfg).arg("--workers").arg("2").arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let from_cli = parse_csv(fs::File::open(&out).unwrap()).unwrap();

    let expected = run_sweep(&SimConfig::from_toml_str(SWEEP).unwrap()).unwrap();
    assert_eq!(from_cli, expected);

    let lib_csv = dir.path().join("lib.csv");
    write_csv_file(&expected, &lib_csv).unwrap();
    assert_eq!(fs::read(&lib_csv).unwrap(), fs::read(&out).unwrap());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(&cfg, SWEEP).unwrap();
    let run = |seed: &str| dpc().arg("simulate").arg(&cfg).arg("--seed").arg(seed).output().unwrap().stdout;
    assert_eq!(run("11"), run("11"));
    assert_ne!(run("11"), run("12"));
}

#[test]
fn broadcast_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bc.toml");
    fs::write(&cfg, "block_length = 300\nmax_blocks = 2\nsigma_w1_2 = 0.5\n").unwrap();
    let out = dpc().arg("broadcast").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let users: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(users, ["strong", "weak", "weak_via_strong"]);
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "trellis = \"qam16_8state_r0_3\"\nunknown_key = 1\n").unwrap();
    let out = dpc().arg("simulate").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn describe_lists_states() {
    let out = dpc().args(["describe", "qam8_4state_r0_2", "--r", "1"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("4 states"));
}
