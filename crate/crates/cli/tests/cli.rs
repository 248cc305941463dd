use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quickllt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn exact_small_laws() {
    let out = run(&["exact", "--n", "3"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<(i64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (x, p) = l.split_once(',').unwrap();
            (x.parse().unwrap(), p.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].0, 2);
    assert!((rows[0].1 - 1.0 / 3.0).abs() < 1e-15);
    assert!((rows[1].1 - 2.0 / 3.0).abs() < 1e-15);

    let out = run(&["exact", "--n", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let (x, p) = text.lines().nth(1).unwrap().split_once(',').unwrap();
    assert_eq!((x, p.parse::<f64>().unwrap()), ("1", 1.0));
}

#[test]
fn exact_with_oracle() {
    let out = run(&["exact", "--n", "8", "--oracle", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json_of(&out);
    assert_eq!(v["schema_version"], 1);
    assert!(v["summary"]["oracle_max_diff"].as_f64().unwrap() <= 1e-12);
    assert_eq!(code(&run(&["exact", "--n", "12", "--oracle"])), 2);
}

#[test]
fn seeds_are_required() {
    for args in [
        vec!["simulate", "--n", "1000", "--seeds", "2"],
        vec!["density", "--method", "fixed-point"],
        vec!["verify", "lemma23", "--seeds", "10"],
        vec!["llt", "--density", "mc"],
    ] {
        let out = run(&args);
        assert_eq!(code(&out), 2, "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&["verify", "lemma99"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(
        code(&run(&["schedule", "--n", "1e6", "--omega0", "1e6"])),
        2
    );
}

#[test]
fn bad_constants_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, "{\"schema_version\": 1}").unwrap();
    assert_eq!(
        code(&run(&[
            "verify",
            "lemma31",
            "--constants",
            path.to_str().unwrap()
        ])),
        2
    );
}

#[test]
fn identical_intervals_give_ratio_one() {
    let out = run(&["verify", "lemma33", "--identical-intervals"]);
    assert_eq!(code(&out), 0);
    let v = json_of(&out);
    assert_eq!(v["target"], "lemma33");
    assert_eq!(v["details"]["report"]["ratio"].as_f64(), Some(1.0));
}

#[test]
fn medium_sublist_bound_passes() {
    let out = run(&[
        "verify", "lemma23", "--n", "4000", "--r", "20", "--seeds", "1000", "--seed", "7",
    ]);
    assert_eq!(code(&out), 0);
    let v = json_of(&out);
    assert!(v["details"]["measured"].as_f64().unwrap() <= (-0.5f64).exp());
}

#[test]
fn failing_check_exits_one() {
    // c = 0.1 leaves too few size-3 lists at n = 300 about 40% of the time.
    let out = run(&[
        "verify", "lemma42", "--n", "300", "--c", "0.1", "--seeds", "2000", "--seed", "3",
    ]);
    assert_eq!(code(&out), 1);
    assert_eq!(json_of(&out)["passed"], false);
}

#[test]
fn window_check_at_256() {
    let out = run(&["verify", "thm51-window", "--n", "256"]);
    assert_eq!(code(&out), 0);
    let v = json_of(&out);
    assert!(v["details"]["report"]["gamma"].as_f64().unwrap() <= 17.0);
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn outputs_are_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<_> = ["1", "4", "4"]
        .iter()
        .enumerate()
        .map(|(i, threads)| {
            let p = dir.path().join(format!("run{i}.csv"));
            let out = run(&[
                "simulate",
                "--kind",
                "truncated",
                "--n",
                "4000",
                "--r",
                "40",
                "--seeds",
                "50",
                "--seed",
                "9",
                "--threads",
                threads,
                "-o",
                p.to_str().unwrap(),
            ]);
            assert_eq!(code(&out), 0);
            read(&p)
        })
        .collect();
    assert_eq!(files[0], files[1]);
    assert_eq!(files[1], files[2]);
    let text = String::from_utf8(files[0].clone()).unwrap();
    assert!(text.starts_with("# schema: quickllt-ensemble v1\nseed,n,r,T,X_nr,E,A,B_total\n"));
    assert_eq!(text.lines().count(), 52);
}

#[test]
fn density_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    let out = run(&[
        "density",
        "--method",
        "fixed-point",
        "--iterations",
        "10",
        "--seed",
        "1",
        "-o",
        p.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let sidecar: Value = serde_json::from_slice(&read(&p.with_extension("json"))).unwrap();
    assert_eq!(sidecar["schema_version"], 1);
    let csv = String::from_utf8(read(&p)).unwrap();
    assert_eq!(csv.lines().next(), Some("x,density"));
    assert_eq!(csv.lines().count(), 1602);

    // The file feeds back into the llt command.
    let out = run(&[
        "llt",
        "--n-list",
        "64,128",
        "--density",
        p.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(code(&out) <= 1);
    assert_eq!(json_of(&out)["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn llt_sequence_and_schedule() {
    let out = run(&[
        "llt",
        "--n-list",
        "3,64,128,256",
        "--schedule",
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 0);
    let v = json_of(&out);
    assert_eq!(v["non_increasing"], true);
    let rows = v["rows"].as_array().unwrap();
    // n = 3 is reported but excluded from the verdict.
    assert!(rows[0]["sup_deviation"].as_f64().unwrap() > 1.0);
    assert_eq!(v["schedules"].as_array().unwrap().len(), 4);
}

#[test]
fn schedule_outputs() {
    let out = run(&["schedule", "--n", "4096", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json_of(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["schedule"]["K"], 7);
    let out = run(&["schedule", "--n", "1e6", "--omega0", "10"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("i,omega,m,ell,r,lambda,m_over_sqrt_rn,r_over_ell\n"));
}
