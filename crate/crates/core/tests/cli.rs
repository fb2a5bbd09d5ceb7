//! The command-line front end and the files it writes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dse_smc::experiment::{read_stats_csv, Summary, CSV_COLUMNS};

fn dse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dse-smc"))
        .args(args)
        .output()
        .unwrap()
}

fn run_into(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--subject",
        "ordered-pairs",
        "--size",
        "8",
        "--max-evaluations",
        "5000",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    dse(&args)
}

fn csv_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

#[test]
fn three_repetitions_write_three_csvs_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), &["--repetitions", "3", "--seed", "40"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        csv_names(dir.path()),
        ["run_000.csv", "run_001.csv", "run_002.csv"]
    );

    let summary: Summary =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary.runs.len(), 3);
    assert_eq!(summary.version, env!("CARGO_PKG_VERSION"));
    let seeds: Vec<u64> = summary.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, [40, 41, 42]);
    let mut ticks: Vec<f64> = summary.runs.iter().map(|r| r.best_tick).collect();
    ticks.sort_by(f64::total_cmp);
    assert_eq!(summary.best_tick.median, ticks[1]);
    assert_eq!(summary.best_tick.min, ticks[0]);
    assert_eq!(summary.best_tick.max, ticks[2]);
    assert_eq!(summary.config.seed, 40);

    for name in csv_names(dir.path()) {
        let text = fs::read_to_string(dir.path().join(&name)).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
        let rows = read_stats_csv(text.as_bytes()).unwrap();
        assert!(!rows.is_empty());
        assert!(rows.windows(2).all(|w| w[0].best_tick <= w[1].best_tick));
        assert!(rows.iter().all(|r| r.evaluations <= 5000 && r.wall_ms == 0));
    }
}

#[test]
fn reruns_are_byte_identical() {
    for algorithm in ["dse-smc", "local-opt", "random"] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&a, &b] {
            let out = run_into(d.path(), &["--repetitions", "2", "--algorithm", algorithm]);
            assert!(
                out.status.success(),
                "{}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
        for name in csv_names(a.path()) {
            assert_eq!(
                fs::read(a.path().join(&name)).unwrap(),
                fs::read(b.path().join(&name)).unwrap(),
                "{algorithm} {name}"
            );
        }
    }
}

#[test]
fn config_file_is_applied_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"L0": 10, "L_max": 40, "seed": 3, "kernel": {"r_iters": 2}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run_into(
        &out_dir,
        &["--config", cfg.to_str().unwrap(), "--seed", "9"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: Summary =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.config.initial_population, 10);
    assert_eq!(summary.config.max_population, 40);
    assert_eq!(summary.config.kernel.r_iters, 2);
    assert_eq!(summary.config.seed, 9);
    assert_eq!(summary.config.max_evaluations, Some(5000));
}

#[test]
fn bad_inputs_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dse(&[
        "run",
        "--subject",
        "no-such-subject",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-subject"));

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"population": 10}"#).unwrap();
    let out = run_into(&dir.path().join("o"), &["--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("population"));

    fs::write(&cfg, "{not json").unwrap();
    let out = run_into(&dir.path().join("o"), &["--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn subprocess_subject_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let child = dir.path().join("child.py");
    fs::write(
        &child,
        "import sys\nfor line in sys.stdin:\n    print(int(line.strip()[:2], 16), flush=True)\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = dse(&[
        "run",
        "--subject",
        "subprocess",
        "--genome-len",
        "2",
        "--max-evaluations",
        "800",
        "--out",
        out_dir.to_str().unwrap(),
        "--",
        "python3",
        child.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: Summary =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary.runs[0].best_tick >= 200.0);

    let bad = dir.path().join("bad.py");
    fs::write(
        &bad,
        "import sys\nfor line in sys.stdin:\n    print('x', flush=True)\n",
    )
    .unwrap();
    let out = dse(&[
        "run",
        "--subject",
        "subprocess",
        "--genome-len",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
        "--",
        "python3",
        bad.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn list_subjects_and_version() {
    let out = dse(&["list-subjects"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "ordered-pairs",
        "insertion-sort",
        "quicksort",
        "tree-sort",
        "hash-table",
    ] {
        assert!(text.contains(name), "{name} missing");
    }
    let out = dse(&["--version"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains(env!("CARGO_PKG_VERSION")));
}
