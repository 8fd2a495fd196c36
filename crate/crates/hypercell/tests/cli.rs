//! Exit-code and file-output contract of the `hcn` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcn")).args(args).output().expect("binary runs")
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_to_trace(scn: &Path, trace: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--scenario",
        scn.to_str().unwrap(),
        "--trace-out",
        trace.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    hcn(&args)
}

#[test]
fn clean_run_exits_zero_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("out.trace");
    let out = run_to_trace(&scenario("mo_basic.hcn-scn"), &trace, &[]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(trace.exists(), "trace file missing");
    assert!(stdout(&out).contains("calls connected"), "summary missing");
}

#[test]
fn missing_scenario_exits_two() {
    let out = hcn(&["run", "--scenario", "/no/such/file.hcn-scn"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("error"), "no message on stderr");
}

#[test]
fn invalid_scenario_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.hcn-scn");
    std::fs::write(&bad, "[stations]\ndbs 1 arfcn=60 color=1 capacity=1 power=active\n").unwrap();
    let out = hcn(&["validate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_accepts_every_shipped_scenario() {
    for name in ["mo_basic.hcn-scn", "mt_basic.hcn-scn", "wakeup.hcn-scn", "reject_full.hcn-scn"] {
        let out = hcn(&["validate", "--scenario", scenario(name).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stderr(&out));
    }
}

#[test]
fn equal_seeds_produce_identical_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.trace");
    let b = dir.path().join("b.trace");
    let scn = scenario("mt_basic.hcn-scn");
    assert_eq!(run_to_trace(&scn, &a, &["--seed", "9"]).status.code(), Some(0));
    assert_eq!(run_to_trace(&scn, &b, &["--seed", "9"]).status.code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "traces differ");
}

#[test]
fn failed_conformance_exits_one_and_names_the_edge() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("out.trace");
    let scn = scenario("mo_basic.hcn-scn");
    assert_eq!(run_to_trace(&scn, &trace, &[]).status.code(), Some(0));

    // Corrupt the trace: move TRAFFIC in front of LINK_ESTABLISH.
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let link = lines.iter().position(|l| l.contains("LINK_ESTABLISH")).unwrap();
    let traffic = lines.iter().position(|l| l.contains("TRAFFIC")).unwrap();
    lines.swap(link, traffic);
    let corrupted = dir.path().join("corrupted.trace");
    std::fs::write(&corrupted, lines.join("\n")).unwrap();

    let out = hcn(&["check", "--trace", corrupted.to_str().unwrap(), "--template", "mo"]);
    assert_eq!(out.status.code(), Some(1));
    let verdict = stdout(&out);
    assert!(verdict.starts_with("FAIL"), "verdict: {verdict}");
    assert!(
        verdict.contains("LINK_ESTABLISH") || verdict.contains("TRAFFIC"),
        "edge not named: {verdict}"
    );
}

#[test]
fn unparseable_trace_exits_two_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.trace");
    std::fs::write(&bad, "t=0 actor=sbs:0 verb=REGISTER subject=-\nnot a trace line\n").unwrap();
    let out = hcn(&["check", "--trace", bad.to_str().unwrap(), "--template", "mo"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "line not reported: {}", stderr(&out));
}

#[test]
fn busy_port_exits_three() {
    let holder = std::net::UdpSocket::bind("127.0.0.1:7700").unwrap();
    let out = hcn(&[
        "split-run",
        "--scenario",
        scenario("mo_basic.hcn-scn").to_str().unwrap(),
        "--sbs-port",
        "7700",
        "--dbs-port-base",
        "7701",
    ]);
    drop(holder);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
}

#[test]
fn udp_transport_produces_a_conformant_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("udp.trace");
    let out = run_to_trace(
        &scenario("mo_basic.hcn-scn"),
        &trace,
        &["--transport", "udp", "--sbs-port", "7710", "--dbs-port-base", "7711", "--speed", "40"],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let check = hcn(&["check", "--trace", trace.to_str().unwrap(), "--template", "mo"]);
    assert_eq!(check.status.code(), Some(0), "verdict: {}", stdout(&check));
}

#[test]
fn json_lines_mirror_trace_fields() {
    let out = hcn(&[
        "run",
        "--scenario",
        scenario("mo_basic.hcn-scn").to_str().unwrap(),
        "--json-lines",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut saw_traffic = false;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).expect("each line is JSON");
        assert!(v.get("t").is_some_and(|t| t.is_u64()), "t missing: {line}");
        assert!(v.get("actor").is_some_and(|a| a.is_string()), "actor missing: {line}");
        assert!(v.get("verb").is_some_and(|a| a.is_string()), "verb missing: {line}");
        if v["verb"] == "TRAFFIC" {
            saw_traffic = true;
            assert_eq!(v["attrs"]["chan"], "tch");
        }
    }
    assert!(saw_traffic, "no TRAFFIC record in json output");
}
