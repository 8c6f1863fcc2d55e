use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tlmbridge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlmbridge")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn with_refs() -> TempDir {
    let dir = TempDir::new().unwrap();
    let o = tlmbridge(dir.path(), &["export-refs", "--dir", "refs"]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir
}

const SYNTH: [&str; 9] = [
    "synth",
    "--initiator",
    "refs/ca_write_initiator.ifsm",
    "--target",
    "refs/pvt_target.ifsm",
    "--map",
    "refs/write.pmap",
    "--out",
    "w.tfsm",
];

fn rows(path: PathBuf) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn synth_reference_models() {
    let dir = with_refs();
    let o = tlmbridge(dir.path(), &SYNTH);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("8 state pairs"), "{out}");
    assert!(out.contains("n+m check:") && out.contains("all within n+m"), "{out}");
    assert!(fs::read_to_string(dir.path().join("w.tfsm")).unwrap().starts_with("tfsm v1\n"));
}

#[test]
fn missing_map_is_an_input_error() {
    let dir = with_refs();
    let mut args = SYNTH;
    args[6] = "refs/nope.pmap";
    let o = tlmbridge(dir.path(), &args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("refs/nope.pmap"), "{}", stderr(&o));
    assert!(!dir.path().join("w.tfsm").exists());
}

#[test]
fn incomplete_map_has_no_legal_transactor() {
    let dir = with_refs();
    fs::write(dir.path().join("short.pmap"), "map L { addr <- HADDR; data[0] <- HWDATA; }\n").unwrap();
    let mut args = SYNTH;
    args[6] = "short.pmap";
    let o = tlmbridge(dir.path(), &args);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no-legal-transactor"), "{}", stderr(&o));
    assert!(!dir.path().join("w.tfsm").exists());
}

#[test]
fn missing_last_handshake_is_reported() {
    let dir = with_refs();
    let text = "ifsm v1\nfsm flat {\n  role = initiator;\n  level = ca;\n  clock_period = 10 ns;\n  \
                signal HTRANS: handshake;\n  signal HADDR: data;\n  signal HWDATA: data;\n  \
                initial = 0; final = 2;\n  on 0 -> 1: HTRANS!1, HADDR!;\n  on 1 -> 2: HWDATA!;\n}\n";
    fs::write(dir.path().join("flat.ifsm"), text).unwrap();
    let mut args = SYNTH;
    args[2] = "flat.ifsm";
    let o = tlmbridge(dir.path(), &args);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("no-last-handshake"), "{}", stderr(&o));
}

#[test]
fn syntax_errors_carry_a_location() {
    let dir = with_refs();
    fs::write(dir.path().join("bad.ifsm"), "ifsm v1\nfsm x {\n  role = sideways;\n}\n").unwrap();
    let mut args = SYNTH;
    args[2] = "bad.ifsm";
    let o = tlmbridge(dir.path(), &args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.ifsm:3:"), "{}", stderr(&o));
}

#[test]
fn sim_general_channel_record_count() {
    let dir = with_refs();
    assert!(tlmbridge(dir.path(), &SYNTH).status.success());
    let o = tlmbridge(
        dir.path(),
        &[
            "sim",
            "--transactor",
            "w.tfsm",
            "--workload",
            "general_channel",
            "--n",
            "100",
            "--seed",
            "7",
            "--trace-out",
            "t.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(dir.path().join("t.csv"));
    assert_eq!(r.len(), 200);
    assert_eq!(r.iter().filter(|x| x[1] == "ca").count(), 100);
}

#[test]
fn sim_single_write_timing() {
    let dir = with_refs();
    assert!(tlmbridge(dir.path(), &SYNTH).status.success());
    let base =
        ["sim", "--n", "1", "--kind", "write", "--burst-len", "2", "--delay-base", "5", "--contention-prob", "0"];
    let mut coherent = base.to_vec();
    coherent.extend(["--transactor", "w.tfsm", "--trace-out", "c.csv"]);
    assert!(tlmbridge(dir.path(), &coherent).status.success());
    let r = rows(dir.path().join("c.csv"));
    assert_eq!((r[0][2].as_str(), r[0][3].as_str()), ("0", "50"));
    assert_eq!((r[1][2].as_str(), r[1][3].as_str()), ("0", "50"));

    let mut conventional = base.to_vec();
    conventional.extend(["--conventional", "--trace-out", "v.csv"]);
    assert!(tlmbridge(dir.path(), &conventional).status.success());
    let r = rows(dir.path().join("v.csv"));
    assert_ne!(r[0][2..4], r[1][2..4]);
}

#[test]
fn underrun_fails_without_output() {
    let dir = TempDir::new().unwrap();
    let o = tlmbridge(
        dir.path(),
        &["sim", "--n", "3", "--kind", "write", "--delay-base", "2", "--contention-prob", "0", "--trace-out", "t.csv"],
    );
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("delay-underrun: txn 0"), "{}", stderr(&o));
    assert!(!dir.path().join("t.csv").exists());
}

#[test]
fn bad_workload_arguments() {
    let dir = TempDir::new().unwrap();
    let o = tlmbridge(dir.path(), &["sim", "--workload", "video", "--trace-out", "t.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tlmbridge(dir.path(), &["sim", "--contention-prob", "1.5", "--trace-out", "t.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("t.csv").exists());
}

#[test]
fn compare_reports() {
    let dir = TempDir::new().unwrap();
    let sim = |extra: &[&str], out: &str| {
        let mut args = vec!["sim", "--workload", "mixed", "--n", "100", "--seed", "3", "--trace-out", out];
        args.extend(extra);
        let o = tlmbridge(dir.path(), &args);
        assert!(o.status.success(), "{}", stderr(&o));
    };
    sim(&[], "c.csv");
    sim(&["--reference"], "r.csv");
    sim(&["--conventional"], "v.csv");

    let o = tlmbridge(dir.path(), &["compare", "c.csv", "r.csv", "--report", "rep.txt"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "error_rate: 0/100 = 0.0%");
    let report = fs::read_to_string(dir.path().join("rep.txt")).unwrap();
    assert!(report.starts_with("report_version = 1\ntotal = 100\nerroneous = 0\nerror_rate = 0/100\n"));

    let o = tlmbridge(dir.path(), &["compare", "r.csv", "r.csv"]);
    assert!(stdout(&o).contains("= 0.0%"));

    let o = tlmbridge(dir.path(), &["compare", "v.csv", "r.csv"]);
    let line = stdout(&o);
    assert!(!line.contains(" 0/100"), "{line}");

    let o = tlmbridge(
        dir.path(),
        &[
            "compare",
            "--pair",
            "coherent",
            "mixed",
            "c.csv",
            "r.csv",
            "--pair",
            "conventional",
            "mixed",
            "v.csv",
            "r.csv",
        ],
    );
    let table = stdout(&o);
    assert!(table.starts_with("approach"), "{table}");
    assert!(table.lines().nth(1).unwrap().trim_end().ends_with("0.0%"));
}

#[test]
fn compare_mismatched_workloads() {
    let dir = TempDir::new().unwrap();
    for (n, out) in [("10", "a.csv"), ("12", "b.csv")] {
        assert!(tlmbridge(dir.path(), &["sim", "--n", n, "--trace-out", out]).status.success());
    }
    let o = tlmbridge(dir.path(), &["compare", "a.csv", "b.csv", "--report", "rep.txt"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("workload-mismatch"));
    assert!(!dir.path().join("rep.txt").exists());
}

#[test]
fn workload_files_round_trip() {
    let dir = TempDir::new().unwrap();
    let o = tlmbridge(
        dir.path(),
        &[
            "sim",
            "--workload",
            "multimedia",
            "--n",
            "30",
            "--seed",
            "9",
            "--workload-out",
            "w.csv",
            "--trace-out",
            "a.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = tlmbridge(dir.path(), &["sim", "--workload-file", "w.csv", "--seed", "9", "--trace-out", "b.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let run = || {
        let dir = with_refs();
        let p = dir.path();
        assert!(tlmbridge(p, &SYNTH).status.success());
        let common = ["--workload", "mixed", "--n", "200", "--seed", "11"];
        let mut a = vec!["sim", "--transactor", "w.tfsm", "--trace-out", "c.csv", "--events-out", "e.csv"];
        a.extend(common);
        assert!(tlmbridge(p, &a).status.success());
        let mut b = vec!["sim", "--reference", "--trace-out", "r.csv"];
        b.extend(common);
        assert!(tlmbridge(p, &b).status.success());
        assert!(tlmbridge(p, &["compare", "c.csv", "r.csv", "--report", "rep.txt"]).status.success());
        ["w.tfsm", "c.csv", "e.csv", "r.csv", "rep.txt"].map(|f| fs::read(p.join(f)).unwrap())
    };
    let first = run();
    for _ in 0..2 {
        assert!(run() == first);
    }
}
