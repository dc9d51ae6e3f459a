use std::path::PathBuf;
use std::process::{Command, Output};

fn hiermark(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hiermark"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    dir.join(format!("{}-{name}", std::process::id()))
}

#[test]
fn pbfd_on_default_hierarchy_finishes() {
    let out = scratch("pbfd.jsonl");
    let o = hiermark(&[
        "run",
        "--methodology",
        "pbfd",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("outcome: success"));
    let trace = std::fs::read_to_string(&out).unwrap();
    let last = trace.lines().last().unwrap();
    assert!(
        last.contains(r#""rule":"PB8""#) && last.contains(r#""to":"T""#),
        "{last}"
    );
}

#[test]
fn replay_pdfd_mvp_reports_counters() {
    let o = hiermark(&["replay", "--fixture", "pdfd-mvp"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("attempts: {2:3, 3:3, 4:2, 5:1}"), "{s}");
    assert!(
        s.contains("cycles: 3->[2,3] 4->[2,3,4] 5->[2,3,4,5]"),
        "{s}"
    );
    assert!(s.contains("expected: match"));
}

#[test]
fn replay_pbfd_mvp_matches() {
    let o = hiermark(&["replay", "--fixture", "pbfd-mvp"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("cycles: 3->[1,2,3]"));
}

#[test]
fn always_failing_validation_exhausts() {
    let sc = scratch("fail.json");
    std::fs::write(&sc, r#"{"failure_rate": 1.0}"#).unwrap();
    for m in ["pdfd", "pbfd"] {
        let o = hiermark(&[
            "run",
            "--methodology",
            m,
            "--scenario",
            sc.to_str().unwrap(),
            "--rmax",
            "1",
        ]);
        assert_eq!(o.status.code(), Some(2), "{m}");
        let s = stdout(&o);
        assert!(
            s.contains("refinement_exhausted") && s.contains("final: S5"),
            "{s}"
        );
    }
}

#[test]
fn bench_reaches_one_in_thirty_two() {
    let o = hiermark(&["bench"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let full = s
        .lines()
        .find(|l| l.trim_start().starts_with("1.00"))
        .unwrap();
    assert!(full.contains("1/32"), "{full}");
    let empty = s
        .lines()
        .find(|l| l.trim_start().starts_with("0.00"))
        .unwrap();
    assert_eq!(empty.split_whitespace().nth(1), Some("0"));
}

#[test]
fn output_is_deterministic() {
    for args in [
        &["run", "--methodology", "pdfd", "--seed", "9"][..],
        &["run", "--methodology", "cdd"],
        &["bench", "--seed", "4"],
    ] {
        assert_eq!(stdout(&hiermark(args)), stdout(&hiermark(args)), "{args:?}");
    }
    let (a, b) = (scratch("a.jsonl"), scratch("b.jsonl"));
    for p in [&a, &b] {
        hiermark(&["run", "--methodology", "dad", "--out", p.to_str().unwrap()]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn snapshot_round_trips_through_report() {
    let snap = scratch("snap.json");
    let o = hiermark(&["tle", "--out", snap.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("cell 1 (ContinentParent): 21"));
    let o = hiermark(&["report", "--snapshot", snap.to_str().unwrap()]);
    let mut got: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    let mut want: Vec<String> = hiermark::fixtures::geo_report()
        .iter()
        .map(|s| s.to_string())
        .collect();
    got.sort();
    want.sort();
    assert_eq!(got, want);
}

#[test]
fn verify_flags_foreign_traces() {
    let out = scratch("foreign.jsonl");
    hiermark(&[
        "run",
        "--methodology",
        "pbfd",
        "--out",
        out.to_str().unwrap(),
    ]);
    let own = hiermark(&[
        "verify",
        "--methodology",
        "pbfd",
        "--trace",
        out.to_str().unwrap(),
    ]);
    assert_eq!(own.status.code(), Some(0), "{}", stdout(&own));
    let foreign = hiermark(&[
        "verify",
        "--methodology",
        "pdfd",
        "--trace",
        out.to_str().unwrap(),
    ]);
    assert_eq!(foreign.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(hiermark(&["report"]).status.code(), Some(1));
    assert_eq!(hiermark(&["run"]).status.code(), Some(1));
    assert_eq!(
        hiermark(&["run", "--methodology", "nope"]).status.code(),
        Some(1)
    );
    assert_eq!(
        hiermark(&["replay", "--fixture", "other"]).status.code(),
        Some(1)
    );
    assert_eq!(hiermark(&["--help"]).status.code(), Some(0));
}
