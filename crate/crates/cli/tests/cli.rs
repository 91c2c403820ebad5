use std::path::Path;
use std::process::{Command, Output};

fn mgcheck(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgcheck"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn bare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgcheck")).args(args).output().expect("binary runs")
}

fn status(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr_line(o: &Output) -> String {
    let s = String::from_utf8_lossy(&o.stderr).to_string();
    assert_eq!(s.trim_end().lines().count(), 1, "diagnostic spans lines: {s}");
    s.trim_end().to_string()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn trace_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
        .filter(|n| n.ends_with(".trace"))
        .collect();
    v.sort();
    v
}

#[test]
fn describe_lists_the_presets() {
    let d = tempfile::tempdir().unwrap();
    let o = mgcheck(&["describe"], d.path());
    assert_eq!(status(&o), 0);
    let text = read(&d.path().join("describe.txt"));
    for p in ["SysSpec", "mSpec-1", "mSpec-2", "mSpec-3", "mSpec-4"] {
        assert!(text.contains(&format!("  {p}\t")), "{p} missing");
    }
    assert_eq!(String::from_utf8_lossy(&o.stdout), text);
}

#[test]
fn check_finds_the_seeded_bug_and_writes_one_trace() {
    let d = tempfile::tempdir().unwrap();
    let args = ["check", "--preset", "mSpec-2", "--nodes", "3", "--bug", "zk4646", "--invariant", "I-4646", "--workers", "2"];
    let o = mgcheck(&args, d.path());
    assert_eq!(status(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let traces = d.path().join("traces");
    assert_eq!(trace_files(&traces), ["v0000-I-4646.trace"]);
    assert!(read(&d.path().join("summary.txt")).contains("outcome\tviolation-found"));
    assert!(read(&traces.join("v0000-I-4646.trace")).starts_with("mgcheck-trace v1"));
}

#[test]
fn reruns_are_byte_identical_apart_from_the_stamp() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["check", "--preset", "mSpec-2", "--bug", "zk4643", "--invariant", "I-4643", "--workers", "4"];
    assert_eq!(status(&mgcheck(&args, a.path())), 1);
    let args1 = ["check", "--preset", "mSpec-2", "--bug", "zk4643", "--invariant", "I-4643", "--workers", "1"];
    assert_eq!(status(&mgcheck(&args1, b.path())), 1);
    for f in ["summary.txt", "traces/index.tsv", "traces/v0000-I-4643.trace"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
    let (ma, mb) = (read(&a.path().join("manifest.txt")), read(&b.path().join("manifest.txt")));
    assert!(ma.starts_with("# mgcheck check "));
    assert_eq!(ma.lines().skip(1).collect::<Vec<_>>(), mb.lines().skip(1).collect::<Vec<_>>());
}

#[test]
fn clean_check_exits_zero() {
    let d = tempfile::tempdir().unwrap();
    let args = ["check", "--preset", "mSpec-1", "--max-txns", "1", "--max-crashes", "0", "--max-partitions", "0", "--stop", "complete"];
    let o = mgcheck(&args, d.path());
    assert_eq!(status(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let s = read(&d.path().join("summary.txt"));
    assert!(s.contains("outcome\tcomplete") && s.contains("violations\t0"));
    assert!(trace_files(&d.path().join("traces")).is_empty());
}

#[test]
fn known_bugs_are_filtered() {
    let d = tempfile::tempdir().unwrap();
    let first = ["check", "--preset", "mSpec-2", "--bug", "zk4646", "--invariant", "I-4646"];
    assert_eq!(status(&mgcheck(&first, &d.path().join("a"))), 1);
    let store = d.path().join("a/traces");
    let again = [
        "check", "--preset", "mSpec-2", "--bug", "zk4646", "--invariant", "I-4646", "--max-states", "20000",
        "--known", store.to_str().unwrap(),
    ];
    let o = mgcheck(&again, &d.path().join("b"));
    assert_eq!(status(&o), 0);
    assert!(read(&d.path().join("b/summary.txt")).contains("suppressed\tI-4646"));
}

#[test]
fn conflicting_plan_names_the_variable() {
    let d = tempfile::tempdir().unwrap();
    let plan = d.path().join("bad.json");
    std::fs::write(
        &plan,
        r#"{"name":"bad","selections":{"ElectionAndDiscovery":"coarse","Synchronization":"fine-atomicity+concurrency","Broadcast":"baseline"},"scale":{"nodes":3,"max_txns":2},"faults":{"max_crashes":0,"max_partitions":0}}"#,
    )
    .unwrap();
    let o = mgcheck(&["compose", "--plan", plan.to_str().unwrap()], d.path());
    assert_eq!(status(&o), 2);
    assert!(stderr_line(&o).contains("queuedRequests"));
}

#[test]
fn compose_prints_the_inventory() {
    let d = tempfile::tempdir().unwrap();
    let o = mgcheck(&["compose", "--preset", "mSpec-3"], d.path());
    assert_eq!(status(&o), 0);
    let s = read(&d.path().join("compose.txt"));
    assert!(s.contains("FollowerSyncProcessorLogRequest"));
    assert!(s.contains("I-4712"));
}

#[test]
fn usage_errors_exit_two_with_one_line() {
    let d = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["check"],
        vec!["check", "--preset", "mSpec-1", "--plan", "x.json"],
        vec!["check", "--preset", "mSpec-9"],
        vec!["check", "--preset", "mSpec-1", "--bug", "zk0000"],
        vec!["check", "--preset", "mSpec-1", "--stop", "limit=0"],
        vec!["check", "--preset", "mSpec-1", "--workers", "0"],
        vec!["check", "--preset", "mSpec-1", "--invariant", "NoSuch"],
        vec!["check", "--preset", "mSpec-1", "--nodes", "0"],
        vec!["replay", "--preset", "mSpec-1", "--trace", "/nonexistent.trace"],
        vec!["conform", "--preset", "mSpec-1", "--scenario", "/nonexistent.json"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = mgcheck(&args, d.path());
        assert_eq!(status(&o), 2, "{args:?}");
        assert!(stderr_line(&o).starts_with("mgcheck: "), "{args:?}");
    }
    assert_eq!(status(&bare(&[])), 2);
    assert_eq!(status(&bare(&["--help"])), 0);
}

#[test]
fn conform_and_replay() {
    let d = tempfile::tempdir().unwrap();
    let o = mgcheck(&["conform", "--preset", "mSpec-1", "--traces", "40", "--steps", "20", "--seed", "9"], d.path());
    assert_eq!(status(&o), 0);
    let report = read(&d.path().join("conformance.tsv"));
    assert!(report.starts_with("mgcheck-conformance v1 spec=mSpec-1 seed=9"));
    assert_eq!(report.lines().count(), 41);

    let c = ["check", "--preset", "mSpec-1", "--bug", "zk4394", "--invariant", "I-4394"];
    assert_eq!(status(&mgcheck(&c, &d.path().join("c"))), 1);
    let trace = d.path().join("c/traces/v0000-I-4394.trace");
    let t = trace.to_str().unwrap();
    let confirm = ["replay", "--preset", "mSpec-1", "--bug", "zk4394", "--trace", t, "--invariant", "I-4394"];
    assert_eq!(status(&mgcheck(&confirm, &d.path().join("r1"))), 1);
    assert!(read(&d.path().join("r1/replay.txt")).contains("confirmed\tI-4394"));
    let off = ["replay", "--preset", "mSpec-1", "--trace", t, "--invariant", "I-4394"];
    assert_eq!(status(&mgcheck(&off, &d.path().join("r2"))), 0);

    let sc = d.path().join("scenario.json");
    std::fs::write(&sc, r#"{"nodes": 3, "flags": {"zk4394": true}, "uptodate_ack": false}"#).unwrap();
    let plain = ["replay", "--preset", "mSpec-1", "--bug", "zk4394", "--trace", t, "--scenario", sc.to_str().unwrap()];
    let o = mgcheck(&plain, &d.path().join("r3"));
    assert_eq!(status(&o), 1);
    assert!(read(&d.path().join("r3/replay.txt")).contains("status\timpl-fault"));
}

#[test]
fn analyze_reports_verdicts() {
    let d = tempfile::tempdir().unwrap();
    let o = mgcheck(&["analyze", "--preset", "mSpec-1"], d.path());
    assert_eq!(status(&o), 0);
    let s = read(&d.path().join("analysis.txt"));
    assert!(s.contains("D\tSynchronization\t"));
    assert!(s.lines().any(|l| l.starts_with("I\t")));
    assert!(s.contains("verdict\tElectionAndDiscovery\tbaseline->coarse\tSynchronization\tpreserving"));
}
