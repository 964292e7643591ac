//! End-to-end checks of the `hbr` binary: exit codes and the files each
//! subcommand writes.

use std::path::Path;
use std::process::{Command, Output};

fn hbr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbr"))
        .args(args)
        .output()
        .expect("run hbr")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(hbr(&[]).status.code(), Some(1));
    assert_eq!(hbr(&["fly"]).status.code(), Some(1));
    assert_eq!(hbr(&["train", "--budget", "lots"]).status.code(), Some(1));
    assert_eq!(
        hbr(&["train", "--layers", "hbr,wings"]).status.code(),
        Some(1)
    );
    assert_eq!(
        hbr(&["config", "--set", "adapt.beta"]).status.code(),
        Some(1)
    );
    assert_eq!(
        hbr(&["config", "--set", "adapt.nope=1"]).status.code(),
        Some(1)
    );
    assert_eq!(hbr(&["adapt", "--algo", "magic"]).status.code(), Some(1));
    assert_eq!(hbr(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("none");
    assert_eq!(
        hbr(&["adapt", "--repertoires", s(&missing)]).status.code(),
        Some(2)
    );
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "adapt.beta = 2\nthis is not a setting\n").unwrap();
    let out = hbr(&["config", "--config", s(&cfg)]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn config_file_and_flags_compose() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# tuned\nadapt.beta = 1.5\nseed = 4\n").unwrap();
    let out = hbr(&[
        "config",
        "--config",
        s(&cfg),
        "--seed",
        "9",
        "--set",
        "adapt.max_actions=40",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("adapt.beta = 1.5"));
    assert!(text.contains("adapt.max_actions = 40"));
    assert!(text.contains("seed = 9"));
}

#[test]
fn small_pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let reps = tmp.path().join("reps");
    let out = hbr(&[
        "train",
        "--seed",
        "2",
        "--budget",
        "2000,4000,4000,4000",
        "--layers",
        "hbr,flat2d",
        "--out",
        s(&reps),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["bottom.hbr", "middle.hbr", "top.hbr", "flat2d.hbr"] {
        assert!(reps.join(f).is_file(), "missing {f}");
    }
    let ins = tmp.path().join("inspect");
    assert!(
        hbr(&["inspect", "--repertoires", s(&reps), "--out", s(&ins)])
            .status
            .success()
    );
    assert!(ins.join("effective.csv").is_file());

    let ep = tmp.path().join("ep.csv");
    let out = hbr(&[
        "adapt",
        "--repertoires",
        s(&reps),
        "--algo",
        "perfect",
        "--damage",
        "leg2",
        "--max-actions",
        "10",
        "--out",
        s(&ep),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(&ep).unwrap();
    assert!(csv.lines().count() >= 2 && csv.lines().count() <= 11);

    let bench = tmp.path().join("bench");
    let out = hbr(&[
        "bench",
        "--repertoires",
        s(&reps),
        "--algo",
        "hte,rte2d",
        "--damage",
        "leg1,leg4",
        "--reps",
        "2",
        "--max-actions",
        "10",
        "--jobs",
        "2",
        "--out",
        s(&bench),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "episodes.csv",
        "aggregate.csv",
        "tests.csv",
        "actions.svg",
        "failures.svg",
    ] {
        assert!(bench.join(f).is_file(), "missing {f}");
    }
    let plot = tmp.path().join("plot");
    assert!(
        hbr(&["plot", s(&bench.join("episodes.csv")), "--out", s(&plot)])
            .status
            .success()
    );
    assert_eq!(
        std::fs::read(bench.join("aggregate.csv")).unwrap(),
        std::fs::read(plot.join("aggregate.csv")).unwrap()
    );

    // a repertoire file from a different model is refused
    let other = hbr(&[
        "adapt",
        "--repertoires",
        s(&reps),
        "--set",
        "sim.stride=0.2",
        "--out",
        s(&ep),
    ]);
    assert_eq!(other.status.code(), Some(2));
}
