//! End-to-end tests of the `entropic-gnn` binary: exit codes, config
//! precedence, and determinism of written artifacts.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_entropic-gnn"))
}

fn run(args: &[&str], out: &Path) -> Output {
    let mut cmd = bin();
    cmd.args(args).arg("--out").arg(out);
    cmd.output().expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

/// Parses a CSV produced by the binary into (metadata line, data rows).
fn parse_csv(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = read(path);
    let mut lines = text.lines();
    let metadata = lines.next().expect("metadata line").to_string();
    let _header = lines.next().expect("header line");
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (metadata, rows)
}

#[test]
fn gradcheck_passes_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let out = run(&["gradcheck", "--cases", "3", "--seed", "0"], dir.path());
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("gradcheck.json"))).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["negated"], false);
    assert!(report["max_rel_err"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn gradcheck_negative_control_exits_one() {
    let dir = TempDir::new().unwrap();
    let out = run(&["gradcheck", "--cases", "3", "--negate"], dir.path());
    assert_eq!(code(&out), 1);
    let report: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("gradcheck.json"))).unwrap();
    assert_eq!(report["pass"], false);
    assert_eq!(report["negated"], true);
}

#[test]
fn unknown_variant_exits_two() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["oversmooth", "--max-depth", "2", "--variants", "basic,bogus"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn nonpositive_temperature_exits_two() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["oversmooth", "--max-depth", "2", "--temperature=-1"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn grid_dataset_rejected_for_training_commands() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["ucurve", "--dataset", "grid", "--depths", "2", "--epochs", "1"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn cli_flags_override_config_file_which_overrides_preset() {
    let dir = TempDir::new().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, r#"{"lambda": 5.0, "temperature": 3.0, "seed": 9}"#).unwrap();
    let out = run(
        &[
            "diffuse",
            "--steps",
            "10",
            "--record-every",
            "5",
            "--config",
            config_path.to_str().unwrap(),
            "--temperature",
            "7",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let (metadata, _) = parse_csv(&dir.path().join("diffuse.csv"));
    // lambda and seed come from the file, temperature from the CLI flag.
    assert!(metadata.contains("lambda=5.00000000e0"), "metadata: {metadata}");
    assert!(metadata.contains("temperature=7.00000000e0"), "metadata: {metadata}");
    assert!(metadata.contains("seed=9"), "metadata: {metadata}");
}

#[test]
fn config_file_with_unknown_key_exits_two() {
    let dir = TempDir::new().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, r#"{"lambduh": 5.0}"#).unwrap();
    let out = run(
        &["gradcheck", "--cases", "1", "--config", config_path.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn citeseer_preset_sets_hyperparameters() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["oversmooth", "--max-depth", "2", "--preset", "citeseer"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let (metadata, _) = parse_csv(&dir.path().join("oversmooth.csv"));
    assert!(metadata.contains("lambda=1.00000000e1"), "metadata: {metadata}");
    assert!(metadata.contains("temperature=1.00000000e0"), "metadata: {metadata}");
}

#[test]
fn artifacts_are_bitwise_identical_across_runs() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["oversmooth", "--max-depth", "5", "--seed", "3"];
    assert_eq!(code(&run(&args, a.path())), 0);
    assert_eq!(code(&run(&args, b.path())), 0);
    let bytes_a = std::fs::read(a.path().join("oversmooth.csv")).unwrap();
    let bytes_b = std::fs::read(b.path().join("oversmooth.csv")).unwrap();
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn entropic_with_zero_lambda_matches_basic() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &[
            "ucurve",
            "--variants",
            "basic,entropic",
            "--lambda",
            "0",
            "--depths",
            "4",
            "--epochs",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = parse_csv(&dir.path().join("ucurve.csv"));
    let energies = |variant: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r[1] == variant)
            .map(|r| r[2].parse().unwrap())
            .collect::<Vec<f64>>()
    };
    let basic = energies("basic");
    let entropic = energies("entropic");
    assert_eq!(basic.len(), 5, "layers 0..=4 for a depth-4 model");
    assert_eq!(basic.len(), entropic.len());
    for (a, b) in basic.iter().zip(&entropic) {
        assert!((a - b).abs() <= 1e-9, "basic {a} vs entropic {b}");
    }
}

#[test]
fn depth_one_model_traces_two_layers() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["ucurve", "--variants", "basic", "--depths", "1", "--epochs", "1"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let (_, rows) = parse_csv(&dir.path().join("ucurve.csv"));
    assert_eq!(rows.len(), 2, "input embedding plus one layer");
}
