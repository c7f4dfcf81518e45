use std::path::PathBuf;
use std::process::{Command, Output};

fn naesat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_naesat"))
        .args(args)
        .env("NAESAT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    for format in ["csv", "json"] {
        let args = [
            "sweep", "--n", "60", "--densities", "0.2,0.8", "--trials", "30", "--algorithm", "bp",
            "--seed", "9", "--format", format,
        ];
        let a = naesat(&args);
        let b = naesat(&args);
        assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout);
    }
    let csv = String::from_utf8(
        naesat(&["sweep", "--n", "40", "--densities", "0.5", "--trials", "10", "--format", "csv"]).stdout,
    )
    .unwrap();
    assert!(csv.starts_with("rule,k,n,density,trials,successes,alpha,ci_low,ci_high"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn generated_file_round_trips_through_solve() {
    let path = scratch("gen.txt");
    let out = path.to_str().unwrap();
    let gen = naesat(&["gen", "--n", "30", "--density", "1.0", "--seed", "4", "--text", "--out", out]);
    assert!(gen.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("p naesat 30 30 3"));

    let solve = naesat(&["solve", "--input", out, "--algorithm", "sp", "--seed", "2"]);
    assert!(solve.status.success(), "{}", String::from_utf8_lossy(&solve.stderr));
    let v: serde_json::Value = serde_json::from_slice(&solve.stdout).unwrap();
    assert_eq!(v["n"], 30);
    assert_eq!(v["assignment"].as_str().unwrap().len(), 30);
    assert_eq!(v["rule"], "sp(t=1)");
}

#[test]
fn census_and_first_moment_report() {
    let census = naesat(&["census", "--n", "10", "--density", "0.5", "--beta", "0.5", "--eta", "0.3"]);
    assert!(census.status.success());
    let v: serde_json::Value = serde_json::from_slice(&census.stdout).unwrap();
    assert_eq!(v["n"], 10);
    assert_eq!(v["empty"], v["witness"].is_null());

    let bound = naesat(&[
        "first-moment", "--n", "12", "--density", "2", "--beta", "0.4", "--eta", "0.15", "--format", "csv",
    ]);
    let text = String::from_utf8(bound.stdout).unwrap();
    assert!(text.starts_with("ln_bound,factor,clauses\n"));
    assert!(text.trim_end().ends_with(",24"));
}

#[test]
fn influence_histogram_covers_every_variable() {
    let out = naesat(&["influence", "--n", "80", "--density", "1.0", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let total: usize = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 80);
}

#[test]
fn overlap_emits_m_assignments() {
    let out = naesat(&[
        "overlap", "--n", "60", "--density", "0.3", "--beta", "0.4", "--eta", "0.15", "--m", "3",
        "--replicates", "8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["assignments"].as_array().unwrap().len(), 3);
}

#[test]
fn exit_codes() {
    assert_eq!(naesat(&["solve", "--n", "10", "--density", "1", "--algorithm", "xyz"]).status.code(), Some(2));
    assert_eq!(naesat(&["census", "--n", "10", "--density", "1", "--beta", "0.2", "--eta", "0.3"]).status.code(), Some(2));
    assert_eq!(naesat(&["first-moment", "--n", "10", "--density", "1", "--beta", "0.05", "--eta", "0.05", "--m", "9"]).status.code(), Some(2));
    assert_eq!(naesat(&["sweep", "--n", "10"]).status.code(), Some(2));
    assert_eq!(naesat(&["solve", "--input", "/no/such/file"]).status.code(), Some(3));
    let unwritable = naesat(&["gen", "--n", "5", "--density", "1", "--out", "/no/such/dir/f.json"]);
    assert_eq!(unwritable.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&unwritable.stderr).contains("I/O error"));
}

#[test]
fn bad_text_input_is_invalid_parameters() {
    let path = scratch("bad.txt");
    std::fs::write(&path, "p naesat 3 1 3\nn 1 2 9 0\n").unwrap();
    assert_eq!(naesat(&["solve", "--input", path.to_str().unwrap()]).status.code(), Some(2));
}
