//! End-to-end checks on the installed binary: exit codes, output channels,
//! and the instance save/load round trip.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn privsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privsel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("privsel-smoke-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("temp dir");
    dir.join(name)
}

#[test]
fn ni_runs_and_prints_csv() {
    let out = privsel(&[
        "ni",
        "--gen",
        "peaked:k=4,peak=0.7",
        "--true-index",
        "1",
        "--n",
        "500",
        "--trials",
        "3",
        "--seed",
        "11",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("trial,n,chosen,true,success,L,Nprime\n"));
    assert_eq!(stdout.lines().count(), 4);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("success@n=500"));
}

#[test]
fn runs_are_reproducible_at_process_level() {
    let args = [
        "maxselect", "--k", "16", "--t", "2", "--values", "random", "--adversary",
        "uniform-random", "--trials", "4", "--seed", "21",
    ];
    let a = privsel(&args);
    let b = privsel(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn json_format_emits_config_and_summaries() {
    let out = privsel(&[
        "ni",
        "--gen",
        "peaked:k=4,peak=0.7",
        "--true-index",
        "0",
        "--n",
        "200",
        "--trials",
        "2",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["command"], "ni");
    assert_eq!(v["config"]["trials"], 2);
    assert!(v["summaries"].as_array().unwrap().len() == 1);
}

#[test]
fn out_flag_writes_csv_file() {
    let path = scratch("ni-out.csv");
    let out = privsel(&[
        "ni",
        "--gen",
        "peaked:k=4,peak=0.7",
        "--true-index",
        "0",
        "--n",
        "200",
        "--trials",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let body = fs::read_to_string(&path).unwrap();
    assert!(body.starts_with("trial,n,chosen,true,success,L,Nprime\n"));
    fs::remove_file(&path).ok();
}

#[test]
fn missing_instance_file_exits_2() {
    let out = privsel(&["ni", "--instance", "/no/such/instance.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_generator_exits_3() {
    let out = privsel(&["ni", "--gen", "separated:k=3,n=2,alpha=0.95", "--true-index", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_flag_exits_2() {
    let out = privsel(&["ni", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flatten_round_trips_an_instance() {
    let path = scratch("flat.json");
    let out = privsel(&[
        "flatten",
        "--gen",
        "peaked:k=4,peak=0.7",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("domain 4 -> "));
    assert!(stdout.contains("pair 0: tv"));

    // The flattened instance is a valid input for the one-round command.
    let again = privsel(&[
        "ni",
        "--instance",
        path.to_str().unwrap(),
        "--true-index",
        "2",
        "--n",
        "300",
        "--trials",
        "2",
    ]);
    assert!(again.status.success());
    fs::remove_file(&path).ok();
}

#[test]
fn game_requires_budget_flag() {
    let out = privsel(&["game", "--k", "64", "--t", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let ok = privsel(&[
        "game", "--k", "64", "--t", "1", "--budget", "2016", "--trials", "3", "--seed", "4",
    ]);
    assert!(ok.status.success());
    let stdout = String::from_utf8(ok.stdout).unwrap();
    assert!(stdout.starts_with("trial,seed,guess,sink,success,queries\n"));
}

#[test]
fn closed_stdout_pipe_exits_quietly() {
    use std::io::Read;
    use std::process::Stdio;
    // Enough records to overflow any pipe buffer after the reader is gone.
    let mut child = Command::new(env!("CARGO_BIN_EXE_privsel"))
        .args([
            "game", "--k", "64", "--t", "1", "--budget", "2016", "--trials", "5000", "--seed",
            "1",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .expect("spawn");
    let mut first = [0u8; 64];
    child
        .stdout
        .as_mut()
        .unwrap()
        .read_exact(&mut first)
        .expect("some output");
    drop(child.stdout.take());
    let status = child.wait().expect("wait");
    assert!(status.success());
}

#[test]
fn hs_runs_both_algorithms() {
    for algo in ["better", "naive"] {
        let out = privsel(&[
            "hs",
            "--gen",
            "peaked:k=4,peak=0.7",
            "--true-index",
            "0",
            "--alpha",
            "0.25",
            "--t",
            "2",
            "--algo",
            algo,
            "--trials",
            "2",
            "--seed",
            "13",
        ]);
        assert!(out.status.success(), "algo {algo} failed");
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.starts_with("trial,n_used,rounds,chosen,achieved_tv,beta,factor\n"));
    }
}
