use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperset-lab")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> Vec<u8> {
    let out = lab(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn uniform_thresholds_at_two_to_the_twenty() {
    let out = stdout(&["thresholds", "--model", "uniform", "--r", "2", "--p", "0.5", "--n", "1048576", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert!((v["alpha_stat"].as_f64().unwrap() - 40.0).abs() < 1e-9);
    assert!((v["alpha_comp"].as_f64().unwrap() - 20.0).abs() < 1e-9);
}

#[test]
fn partite_thresholds_with_halves() {
    let out = stdout(&["thresholds", "--model", "partite", "--gamma", "1/2,1/2", "--p", "0.5", "--n", "2^20", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert!((v["alpha_stat"].as_f64().unwrap() - 80.0).abs() < 1e-9);
    assert!((v["alpha_comp"].as_f64().unwrap() - 40.0).abs() < 1e-9);
}

#[test]
fn malformed_gamma_is_a_validation_error() {
    let out = lab(&["thresholds", "--model", "partite", "--gamma", "1/2,1/3", "--n", "1024"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma must sum to 1"));
}

#[test]
fn decimal_gamma_is_rejected() {
    let out = lab(&["thresholds", "--model", "partite", "--gamma", "0.5,0.5", "--n", "1024"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_trials_and_bad_flags_exit_with_validation_code() {
    assert_eq!(lab(&["sweep", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(lab(&["sweep", "--n", "abc"]).status.code(), Some(2));
    assert_eq!(lab(&["kdelta", "--n", "64"]).status.code(), Some(2));
    assert_eq!(lab(&["kdelta", "--n", "64", "--k", "0"]).status.code(), Some(2));
    assert_eq!(lab(&["nope"]).status.code(), Some(2));
}

#[test]
fn infeasible_balanced_target_is_rejected() {
    let out = lab(&["sweep", "--model", "partite", "--gamma", "1/2,1/2", "--n", "4", "--target", "20", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_csv_is_sorted_and_ratios_recompute() {
    let out = stdout(&["sweep", "--r", "3", "--n", "2^10,2^8", "--p", "0.5,0.3", "--trials", "4", "--master-seed", "9"]);
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# hyperset-lab schema v1"));
    assert_eq!(
        lines.next(),
        Some("model,r,p,n,gamma,target,trial,seed,size,success,alpha_stat,alpha_comp,ratio,runtime_ms")
    );
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 16);
    for row in &rows {
        let size: f64 = row[8].parse().unwrap();
        let comp: f64 = row[11].parse().unwrap();
        let ratio: f64 = row[12].parse().unwrap();
        assert!((ratio - size / comp).abs() < 1e-9);
    }
}

#[test]
fn output_is_identical_across_job_counts() {
    let commands: [&[&str]; 4] = [
        &["sweep", "--r", "2", "--n", "2^9,2^11", "--trials", "6", "--master-seed", "3"],
        &["kdelta", "--r", "2", "--n", "512", "--k", "8", "--trials", "12", "--master-seed", "3", "--json"],
        &["ogp", "--n", "2^10", "--eps", "0.2", "--m", "4", "--trials", "3", "--master-seed", "3"],
        &["oracle", "--n", "10", "--r", "3", "--trials", "12", "--master-seed", "3", "--json"],
    ];
    for cmd in commands {
        let one = stdout(&[cmd, &["--jobs", "1"]].concat());
        let four = stdout(&[cmd, &["--jobs", "4"]].concat());
        let again = stdout(&[cmd, &["--jobs", "1"]].concat());
        assert_eq!(one, four, "{cmd:?}");
        assert_eq!(one, again, "{cmd:?}");
    }
}

#[test]
fn out_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let path_str = path.to_str().unwrap();
    let printed = stdout(&["sweep", "--n", "256", "--trials", "3", "--out", path_str]);
    assert!(printed.is_empty());
    let written = std::fs::read(&path).unwrap();
    assert_eq!(written, stdout(&["sweep", "--n", "256", "--trials", "3"]));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let out = lab(&["sweep", "--n", "64", "--trials", "1", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn greedy_dumps_a_readable_transcript() {
    let out = stdout(&["greedy", "--n", "64", "--p", "0.5", "--master-seed", "1"]);
    let text = String::from_utf8(out).unwrap();
    let transcript =
        hyperset_core::Transcript::read_jsonl(text.as_bytes(), hyperset_core::Model::Uniform, 64).unwrap();
    assert_eq!(transcript.rounds(), 64);
}

#[test]
fn kdelta_trivial_probabilities() {
    let full = stdout(&["kdelta", "--p", "0", "--n", "40", "--k", "40", "--trials", "10", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&full).unwrap();
    assert_eq!(v["estimate"].as_f64(), Some(1.0));
    let none = stdout(&["kdelta", "--p", "1", "--r", "3", "--n", "40", "--k", "3", "--trials", "10", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&none).unwrap();
    assert_eq!(v["estimate"].as_f64(), Some(0.0));
}
