use std::path::Path;
use std::process::{Command, Output};

fn enose(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_enose")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small dataset plus a config that keeps sweeps to six short windows.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = enose(&["generate", "--counts", "6,6,8,4", "--out", "data"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    std::fs::write(
        dir.path().join("quick.json"),
        r#"{"plan": {"start": 150, "end": 450, "delta": 50}, "repetitions": 2,
            "selection": {"scope": "off"}, "train": {"epochs": 30, "target_loss": 0.05}}"#,
    )
    .unwrap();
    dir
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&enose(&["--help"], dir.path())), 0);
    assert_eq!(code(&enose(&["--version"], dir.path())), 0);
    assert_eq!(code(&enose(&["sweep", "--help"], dir.path())), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&enose(&["run", "--bogus"], dir.path())), 1);
    assert_eq!(code(&enose(&[], dir.path())), 1);
    assert_eq!(code(&enose(&["generate", "--counts", "1,2"], dir.path())), 1);
    assert_eq!(code(&enose(&["--config", "missing.json", "validate", "."], dir.path())), 1);
    std::fs::write(dir.path().join("bad.json"), r#"{"no_such_key": 1}"#).unwrap();
    assert_eq!(code(&enose(&["--config", "bad.json", "validate", "."], dir.path())), 1);
    assert_eq!(code(&enose(&["run", "--epsilon", "-1"], dir.path())), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = enose(&["validate", "nowhere"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("error:"));
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    assert_eq!(code(&enose(&["extract", "empty"], dir.path())), 2);
}

#[test]
fn divergence_exits_three() {
    let dir = workspace();
    std::fs::write(dir.path().join("wild.json"), r#"{"train": {"learning_rate": 1e9, "epochs": 5}}"#).unwrap();
    let out = enose(&["--config", "wild.json", "run", "data", "--pipeline", "rapid", "--window", "1", "--repetitions", "1"], dir.path());
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn flags_override_the_config_file() {
    let dir = workspace();
    std::fs::write(dir.path().join("seeded.json"), r#"{"seed": 3, "epsilon": 0.2}"#).unwrap();
    let out = enose(&["--config", "seeded.json", "--seed", "5", "validate", "data"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("effective config"));
    assert!(err.contains(r#""seed":5"#) && err.contains(r#""epsilon":0.2"#), "{err}");
}

#[test]
fn extract_select_and_pca_write_their_files() {
    let dir = workspace();
    assert_eq!(code(&enose(&["extract", "data", "--out", "x"], dir.path())), 0);
    let csv = dir.path().join("x/fingerprints.csv");
    assert!(csv.exists());
    let header = std::fs::read_to_string(&csv).unwrap();
    assert!(header.lines().count() == 25);

    let out = enose(&["select", "x/fingerprints.csv", "--out", "s"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sel: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s/selection.json")).unwrap()).unwrap();
    assert!(sel.get("chosen_size").is_some());

    let out = enose(&["pca", "x/fingerprints.csv", "-n", "2", "--standardize", "--out", "p"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let scores = std::fs::read_to_string(dir.path().join("p/pca_scores.csv")).unwrap();
    assert!(scores.starts_with("pc1,pc2,label,bottle_id"));
    assert!(dir.path().join("p/pca.json").exists());
}

#[test]
fn run_sweep_and_compare() {
    let dir = workspace();
    let q = ["--config", "quick.json"];
    let out = enose(&[&q[..], &["run", "data", "--out", "conv"]].concat(), dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("conv/report.txt").exists());

    let out = enose(&[&q[..], &["run", "data", "--pipeline", "rapid", "--out", "rapid"]].concat(), dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["report.json", "report.txt", "sweep.json", "sweep.csv"] {
        assert!(dir.path().join("rapid").join(f).exists(), "{f}");
    }
    let sweep_csv = std::fs::read_to_string(dir.path().join("rapid/sweep.csv")).unwrap();
    assert_eq!(sweep_csv.lines().count(), 7);

    let out = enose(&["compare", "conv/report.json", "rapid/report.json", "--out", "cmp"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Mann-Whitney"));
    assert!(dir.path().join("cmp/comparison.json").exists());

    assert_eq!(code(&enose(&["compare", "conv/report.json", "nothing.json"], dir.path())), 2);
}
