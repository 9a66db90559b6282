use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn procmon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_procmon"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

#[test]
fn run_matches_golden_transcript() {
    let o = procmon(&["run", "--sentence", "visit line 1", "--backend", "mock", "--seed", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let path = golden("run_visit_line_1.txt");
    if std::env::var_os("PROCMON_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &out).unwrap();
    }
    let want = std::fs::read_to_string(&path).expect("golden file exists");
    assert_eq!(out, want);
    assert_eq!(out, stdout(&procmon(&["run", "--sentence", "visit line 1", "--backend", "mock"])));
}

#[test]
fn exit_codes() {
    assert_eq!(procmon(&["--help"]).status.code(), Some(0));
    assert_eq!(procmon(&["--version"]).status.code(), Some(0));
    assert_eq!(procmon(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(procmon(&["plan", "--sentence", "x", "--goal", "F a"]).status.code(), Some(1));
    assert_eq!(procmon(&["compile"]).status.code(), Some(1));
    assert_eq!(procmon(&["plan", "--goal", "F ("]).status.code(), Some(1));
    assert_eq!(procmon(&["plan", "--goal", "F x", "--backend", "carrier-pigeon"]).status.code(), Some(1));
    assert_eq!(procmon(&["plan", "--domain", "/nonexistent.pddl", "--goal", "F x"]).status.code(), Some(1));
    let o = procmon(&["plan", "--goal", "F nowhere"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere"));
    assert_eq!(procmon(&["plan", "--goal", "G !robot_at_l0"]).status.code(), Some(2));
    assert_eq!(procmon(&["translate", "--sentence", "go to the kitchen"]).status.code(), Some(2));
}

#[test]
fn unsolvable_fixture_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d.pddl");
    let p = dir.path().join("p.pddl");
    std::fs::write(&d, procmon_core::fixtures::VINEYARD_DOMAIN).unwrap();
    std::fs::write(&p, procmon_core::fixtures::VINEYARD_UNSOLVABLE_PROBLEM).unwrap();
    let o = procmon(&["plan", "--domain", d.to_str().unwrap(), "--problem", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsolvable"));

    std::fs::write(&p, procmon_core::fixtures::VINEYARD_HARVEST_PROBLEM).unwrap();
    let o = procmon(&["plan", "--domain", d.to_str().unwrap(), "--problem", p.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("policy: strong-cyclic"));
}

#[test]
fn translate_prints_the_formula() {
    let o = procmon(&["translate", "--sentence", "visit line 2 and then go back to the base"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("formula: ") && l.contains("robot_at_loc_l2")), "{out}");
}

#[test]
fn compile_writes_pddl_and_plan_writes_policy() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = procmon(&["compile", "--goal", "G(robot_at_loc_l1 <-> X call_support)", "--out-dir", d]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let domain = std::fs::read_to_string(dir.path().join("domain.pddl")).unwrap();
    let problem = std::fs::read_to_string(dir.path().join("problem.pddl")).unwrap();
    assert!(domain.starts_with("(define (domain"));
    assert!(problem.contains("(:goal"));

    let policy = dir.path().join("policy.json");
    let o = procmon(&["plan", "--goal", "F harvested_g1", "--policy-out", policy.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("policy: strong-cyclic"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(policy).unwrap()).unwrap();
    assert!(v.is_object());
}

#[test]
fn explicit_files_match_the_builtin_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    };
    let d = write("d.pddl", procmon_core::fixtures::VINEYARD_DOMAIN);
    let p = write("p.pddl", procmon_core::fixtures::VINEYARD_PROBLEM);
    let l = write("l.toml", procmon_core::fixtures::VINEYARD_LANDMARKS);
    let files = procmon(&["run", "--sentence", "visit line 1", "--domain", &d, "--problem", &p, "--landmarks", &l]);
    let builtin = procmon(&["run", "--sentence", "visit line 1"]);
    assert!(files.status.success());
    assert_eq!(stdout(&files), stdout(&builtin));
}

#[test]
fn experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = procmon(&["experiment", "--runs", "4", "--scenario", "past", "--scenario", "present", "--out-dir", d]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("Soundness"), "{out}");
    assert!(out.contains("1.00 ± 0.00"), "{out}");
    let records = std::fs::read_to_string(dir.path().join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 8);
    assert!(std::fs::read_to_string(dir.path().join("past_histogram.csv")).unwrap().starts_with("offset,"));
}

#[test]
fn serve_answers_health_checks() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_procmon"))
        .args(["serve", "--port", "0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").expect("address line").to_string();
    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(stream, "GET /health HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    let _ = child.wait();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.ends_with("ok"));
}
