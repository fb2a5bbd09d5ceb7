//! Subprocess targets against small Python children.

use std::fs;
use std::path::{Path, PathBuf};

use dse_smc::targets::{FailurePolicy, SubprocessTarget, SubprocessTargetConfig};
use dse_smc::{Engine, EngineConfig, Error, Target, TargetError};

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn target(
    path: &Path,
    genome_len: usize,
    timeout_ms: u64,
    policy: FailurePolicy,
) -> SubprocessTarget {
    let mut cfg = SubprocessTargetConfig::new(vec!["python3".into(), path.display().to_string()]);
    cfg.timeout_ms = timeout_ms;
    cfg.failure_policy = policy;
    SubprocessTarget::new(cfg, genome_len).unwrap()
}

const FIRST_BYTE: &str = r#"
import sys
for line in sys.stdin:
    print(int(line.strip()[:2], 16), flush=True)
"#;

const GARBAGE: &str = r#"
import sys
for line in sys.stdin:
    print("abc", flush=True)
"#;

const SLOW: &str = r#"
import sys, time
for line in sys.stdin:
    time.sleep(5)
    print(1, flush=True)
"#;

#[test]
fn child_answers_with_first_byte() {
    let dir = tempfile::tempdir().unwrap();
    let t = target(
        &script(dir.path(), "echo.py", FIRST_BYTE),
        3,
        5_000,
        FailurePolicy::Error,
    );
    assert_eq!(t.evaluate(&[0x2a, 0, 0]).unwrap(), 42.0);
    assert_eq!(t.evaluate(&[0xff, 1, 2]).unwrap(), 255.0);
    assert_eq!(t.evaluate(&[0x00, 9, 9]).unwrap(), 0.0);
    assert_eq!(t.genome_len(), 3);
}

#[test]
fn fixed_point_answers_parse() {
    let dir = tempfile::tempdir().unwrap();
    let body = "import sys\nfor line in sys.stdin:\n    print('12.5', flush=True)\n";
    let t = target(
        &script(dir.path(), "fixed.py", body),
        1,
        5_000,
        FailurePolicy::Error,
    );
    assert_eq!(t.evaluate(&[0]).unwrap(), 12.5);
}

#[test]
fn garbage_output_fails_under_error_policy() {
    let dir = tempfile::tempdir().unwrap();
    let t = target(
        &script(dir.path(), "bad.py", GARBAGE),
        1,
        5_000,
        FailurePolicy::Error,
    );
    assert!(matches!(t.evaluate(&[1]), Err(TargetError::Unparsable(_))));
}

#[test]
fn garbage_output_records_penalty() {
    let dir = tempfile::tempdir().unwrap();
    let t = target(
        &script(dir.path(), "bad.py", GARBAGE),
        1,
        5_000,
        FailurePolicy::Penalty(-7.0),
    );
    assert_eq!(t.evaluate(&[1]).unwrap(), -7.0);
}

#[test]
fn slow_child_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let t = target(
        &script(dir.path(), "slow.py", SLOW),
        1,
        200,
        FailurePolicy::Error,
    );
    assert!(matches!(t.evaluate(&[1]), Err(TargetError::Timeout(200))));
    let t = target(
        &script(dir.path(), "slow.py", SLOW),
        1,
        200,
        FailurePolicy::Penalty(-1.0),
    );
    assert_eq!(t.evaluate(&[1]).unwrap(), -1.0);
}

#[test]
fn crashed_child_is_relaunched_once() {
    let dir = tempfile::tempdir().unwrap();
    let marker = dir.path().join("crashed");
    let body = format!(
        r#"
import os, sys
marker = {marker:?}
for line in sys.stdin:
    if not os.path.exists(marker):
        open(marker, "w").close()
        sys.exit(3)
    print(int(line.strip()[:2], 16), flush=True)
"#,
        marker = marker.display().to_string()
    );
    let t = target(
        &script(dir.path(), "flaky.py", &body),
        1,
        5_000,
        FailurePolicy::Error,
    );
    assert_eq!(t.evaluate(&[0x10]).unwrap(), 16.0);
    assert!(marker.exists());
    assert_eq!(t.evaluate(&[0x11]).unwrap(), 17.0);
}

#[test]
fn always_crashing_child_fails() {
    let dir = tempfile::tempdir().unwrap();
    let body = "import sys\nsys.stdin.readline()\nsys.exit(1)\n";
    let t = target(
        &script(dir.path(), "dead.py", body),
        1,
        5_000,
        FailurePolicy::Error,
    );
    assert!(t.evaluate(&[0]).is_err());
}

#[test]
fn missing_program_is_a_spawn_error() {
    let cfg = SubprocessTargetConfig::new(vec!["/nonexistent/tick-child".into()]);
    let t = SubprocessTarget::new(cfg, 1).unwrap();
    assert!(matches!(t.evaluate(&[0]), Err(TargetError::Spawn { .. })));
}

#[test]
fn engine_drives_a_subprocess_target() {
    let dir = tempfile::tempdir().unwrap();
    let t = target(
        &script(dir.path(), "echo.py", FIRST_BYTE),
        2,
        5_000,
        FailurePolicy::Error,
    );
    let cfg = EngineConfig {
        initial_population: 16,
        max_evaluations: Some(1_500),
        ..Default::default()
    };
    let out = Engine::new(cfg, &t).unwrap().run().unwrap();
    assert!(out.evaluations <= 1_500);
    assert!(out.best.tick().unwrap() >= 250.0);
}

#[test]
fn error_policy_aborts_an_engine_run() {
    let dir = tempfile::tempdir().unwrap();
    let t = target(
        &script(dir.path(), "bad.py", GARBAGE),
        1,
        5_000,
        FailurePolicy::Error,
    );
    let err = Engine::new(EngineConfig::default(), &t)
        .unwrap()
        .run()
        .unwrap_err();
    assert!(matches!(err, Error::Target(TargetError::Unparsable(_))));
}
