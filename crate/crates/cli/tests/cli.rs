//! End-to-end behavior of the fairdyn binary.

use std::path::Path;
use std::process::Command;

fn fairdyn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairdyn"))
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

#[test]
fn help_exits_zero() {
    let out = fairdyn().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["analytic", "detect", "train", "plot"] {
        assert!(text.contains(sub), "help should mention {sub}");
    }
}

#[test]
fn analytic_writes_csvs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = fairdyn()
        .args(["analytic", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = String::from_utf8(read(dir.path(), "analytic_w0.1.csv")).unwrap();
    assert!(csv.starts_with("w0,te,nde,neg_nie\n"));
    assert_eq!(csv.lines().count(), 102);
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("analytic_w3.svg").exists());
}

#[test]
fn detect_reruns_are_byte_identical() {
    let run = |dir: &Path| {
        let out = fairdyn()
            .args([
                "detect",
                "--env",
                "allocation",
                "--channel",
                "transition",
                "--grid",
                "3",
                "--episodes",
                "8",
                "--seed",
                "4",
                "--out",
            ])
            .arg(dir)
            .output()
            .unwrap();
        assert!(out.status.success());
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());
    assert_eq!(
        read(a.path(), "detect_allocation_transition.csv"),
        read(b.path(), "detect_allocation_transition.csv")
    );
}

#[test]
fn train_reruns_are_byte_identical_and_fair_a_has_zero_decision_gap() {
    let run = |dir: &Path| {
        let out = fairdyn()
            .args([
                "train",
                "--algo",
                "fair-a",
                "--env",
                "allocation",
                "--dynamics",
                "fair",
                "--seeds",
                "1",
                "--epochs",
                "2",
                "--population",
                "16",
                "--elites",
                "4",
                "--horizon",
                "3",
                "--iterations",
                "2",
                "--particles",
                "1",
                "--ensemble",
                "2",
                "--hidden",
                "8",
                "--fit-epochs",
                "10",
                "--init-episodes",
                "1",
                "--seed",
                "7",
                "--out",
            ])
            .arg(dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());
    for name in ["fair-a_seed7.csv", "fair-a_seed7_trace.csv", "fair-a_mean.csv"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
    let trace = String::from_utf8(read(a.path(), "fair-a_seed7_trace.csv")).unwrap();
    for line in trace.lines().skip(1) {
        let gap = line.split(',').next_back().unwrap();
        assert_eq!(gap, "0", "fair-a decision gap must be zero: {line}");
    }
}

#[test]
fn env_seed_variable_is_the_default_seed() {
    let with_env = tempfile::tempdir().unwrap();
    let with_flag = tempfile::tempdir().unwrap();
    let args = [
        "detect",
        "--env",
        "allocation",
        "--channel",
        "reward",
        "--grid",
        "2",
        "--episodes",
        "4",
        "--out",
    ];
    let out = fairdyn()
        .env("FAIRDYN_SEED", "12")
        .args(args)
        .arg(with_env.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = fairdyn()
        .args(args[..args.len() - 1].iter())
        .args(["--seed", "12", "--out"])
        .arg(with_flag.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        read(with_env.path(), "detect_allocation_reward.csv"),
        read(with_flag.path(), "detect_allocation_reward.csv")
    );
}

#[test]
fn plot_rejects_missing_and_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = fairdyn()
        .args(["plot", "--in", "no_such_file.csv", "--kind", "lines", "--out"])
        .arg(dir.path().join("x.svg"))
        .output()
        .unwrap();
    assert!(!out.status.success());

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "a,b\n").unwrap();
    let out = fairdyn()
        .args(["plot", "--in"])
        .arg(&empty)
        .args(["--kind", "lines", "--out"])
        .arg(dir.path().join("y.svg"))
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn train_accepts_an_env_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("env.json");
    std::fs::write(
        &config,
        r#"{
  "env": "allocation",
  "init": [6.2, 6.0],
  "alpha": [0.0, 0.0],
  "beta": [0.0, 0.0],
  "episode_len": 5
}"#,
    )
    .unwrap();
    let out = fairdyn()
        .args(["train", "--algo", "pets", "--env", "allocation", "--seeds", "1"])
        .args(["--epochs", "1", "--population", "12", "--elites", "3"])
        .args(["--horizon", "2", "--iterations", "1", "--particles", "1"])
        .args(["--ensemble", "1", "--hidden", "8", "--fit-epochs", "5"])
        .args(["--init-episodes", "1", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = String::from_utf8(read(dir.path(), "pets_seed0_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 6, "episode_len 5 plus header");
}

#[test]
fn detect_rejects_mismatched_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("env.json");
    std::fs::write(&config, r#"{"env": "lending"}"#).unwrap();
    let out = fairdyn()
        .args(["detect", "--env", "allocation", "--channel", "reward"])
        .args(["--grid", "2", "--episodes", "2", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}
