//! End-to-end tests of the `advicerl` binary.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_advicerl"))
}

fn run_ok(args: &[&str], cwd: &Path) -> String {
    let out = bin()
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn run_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "run",
        "--domain",
        "combination-lock",
        "--algo",
        "regal-no-advice",
        "--trials",
        "2",
        "--iters",
        "3",
        "--steps-per-iter",
        "40",
        "--seed",
        "7",
        "--out",
        "a",
        "--emit-traces",
    ];
    run_ok(&args, dir.path());
    let mut again = args;
    again[14] = "b";
    run_ok(&again, dir.path());

    let name = "curve_combination-lock_regal-no-advice.csv";
    let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
    let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
    assert_eq!(a, b, "same seed must produce byte-identical CSV");
    assert!(dir
        .path()
        .join("a")
        .join("summary_combination-lock_regal-no-advice.json")
        .exists());
    assert!(dir
        .path()
        .join("a")
        .join("curve_combination-lock_regal-no-advice.svg")
        .exists());
    assert!(dir
        .path()
        .join("a")
        .join("trace_combination-lock_regal-no-advice_seed7.csv")
        .exists());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
domain = "combination-lock"
algorithm = "regal-no-advice"
teacher = "optimal"
trials = 1
iterations = 2
steps_per_iter = 30
lock_size = 3
"#;
    std::fs::write(dir.path().join("exp.toml"), config).unwrap();
    let stdout = run_ok(
        &[
            "run", "--config", "exp.toml", "--trials", "2", "--out", "out",
        ],
        dir.path(),
    );
    assert!(stdout.contains("combination-lock_regal-no-advice"));
    let csv = std::fs::read_to_string(
        dir.path()
            .join("out")
            .join("curve_combination-lock_regal-no-advice.csv"),
    )
    .unwrap();
    // trials overridden to 2: header carries two trial columns.
    assert!(csv.lines().next().unwrap().contains("trial_1"));
    assert_eq!(csv.lines().count(), 2 * 30 + 1);
}

#[test]
fn build_domain_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for (domain, file) in [
        ("combination-lock", "combination-lock.json"),
        ("grid-world", "grid-world.json"),
        ("block-dude", "block-dude.json"),
    ] {
        run_ok(&["build-domain", "--domain", domain], dir.path());
        let text = std::fs::read_to_string(dir.path().join(file)).unwrap();
        let mdp = advicerl::TabularMdp::from_json(&text).unwrap();
        assert!(advicerl::validate(&mdp).is_ok());
    }
}

#[test]
fn analyze_two_traces() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "run",
            "--domain",
            "combination-lock",
            "--algo",
            "ours",
            "--teacher",
            "optimal",
            "--trials",
            "1",
            "--out",
            "ours",
            "--emit-traces",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "run",
            "--domain",
            "combination-lock",
            "--algo",
            "regal-no-advice",
            "--trials",
            "1",
            "--out",
            "base",
            "--emit-traces",
        ],
        dir.path(),
    );
    let stdout = run_ok(
        &[
            "analyze",
            "--trace-a",
            "ours/trace_combination-lock_ours_optimal-teacher_seed0.csv",
            "--trace-b",
            "base/trace_combination-lock_regal-no-advice_seed0.csv",
            "--gain",
            "0.3333333333333333",
            "--out",
            "report",
        ],
        dir.path(),
    );
    assert!(stdout.contains("rho_hat") || stdout.contains("baseline regret"));
    assert!(dir.path().join("report.json").exists());
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("step,candidate_cumulative_reward"));
    assert!(csv.lines().count() > 10);
}

#[test]
fn bad_arguments_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--domain", "no-such-domain"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown domain"));

    let out = bin()
        .args([
            "analyze",
            "--trace-a",
            "missing.csv",
            "--trace-b",
            "missing.csv",
            "--gain",
            "0.0",
        ])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}
