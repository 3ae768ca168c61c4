use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybrid-ids"))
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/nslkdd_sample.csv")
}

const SMALL: [&str; 10] = [
    "--window-length",
    "4",
    "--indrnn-widths",
    "6",
    "--lstm-width",
    "6",
    "--epochs",
    "3",
    "--batch-size",
    "16",
];

fn run(cmd: &str, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(cmd)
        .args(["--out", out.to_str().unwrap()])
        .args(SMALL)
        .args(extra)
        .output()
        .unwrap()
}

fn trained_run(dir: &Path) {
    let data = fixture();
    for (cmd, extra) in [
        ("prep", vec!["--data", data.to_str().unwrap()]),
        ("select", vec!["--method", "filter", "--k", "6"]),
        ("train", vec![]),
    ] {
        let out = run(cmd, dir, &extra);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn missing_target_column_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("run");
    let data = fixture();
    let out = run("prep", &out_dir, &["--data", data.to_str().unwrap(), "--target", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.join("prepared.csv").exists());
}

#[test]
fn unknown_flag_exits_with_usage_error() {
    let out = bin().args(["train", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sweep"));
}

#[test]
fn malformed_data_file_exits_with_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "1,2,3\n4,5\n").unwrap();
    let out = run("prep", &tmp.path().join("run"), &["--data", bad.to_str().unwrap(), "--target", "col0"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn artifacts_are_not_overwritten_without_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    trained_run(&dir);
    let before = std::fs::read(dir.join("checkpoint.json")).unwrap();
    let again = run("train", &dir, &["--seed", "99"]);
    assert_eq!(again.status.code(), Some(1));
    assert_eq!(std::fs::read(dir.join("checkpoint.json")).unwrap(), before);

    let forced = run("train", &dir, &["--seed", "99", "--overwrite"]);
    assert!(forced.status.success());
    assert_ne!(std::fs::read(dir.join("checkpoint.json")).unwrap(), before);

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    let commands: Vec<&str> = manifest["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["command"].as_str().unwrap())
        .collect();
    assert_eq!(commands, ["prep", "select", "train", "train"]);
}

#[test]
fn eval_reports_both_models_in_both_units() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    trained_run(&dir);
    assert!(run("eval", &dir, &[]).status.success());
    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("metrics.json")).unwrap()).unwrap();
    for model in ["hybrid", "persistence"] {
        let mae = metrics[model]["mae"].as_f64().unwrap();
        let rmse = metrics[model]["rmse"].as_f64().unwrap();
        assert!(rmse >= mae && mae >= 0.0);
        assert!(metrics["raw_units"][model]["mae"].as_f64().is_some());
    }
}

#[test]
fn detect_streams_one_line_per_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    trained_run(&dir);
    let records = std::fs::read_to_string(fixture()).unwrap();
    let mut input: String = records.lines().take(30).map(|l| format!("{l}\n")).collect();
    input.push_str("garbage,line\n");

    let mut child = bin()
        .args(["detect", "--out", dir.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    // window length 4: the first four records only fill the buffer
    assert_eq!(lines.len(), 26 + 1);
    assert_eq!(lines[0]["step"], 4);
    assert_eq!(lines[25]["step"], 29);
    assert!(lines[..26].iter().all(|v| v["is_anomaly"].is_boolean()));
    assert_eq!(lines[26]["line"], 31);

    let stderr = String::from_utf8(out.stderr).unwrap();
    let summary: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(summary["records"], 31);
    assert_eq!(summary["verdicts"], 26);
    assert_eq!(summary["errors"], 1);
}

#[test]
fn detect_on_empty_input_reports_zero_records() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    trained_run(&dir);
    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = bin()
        .args(["detect", "--out", dir.to_str().unwrap(), "--input", empty.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let summary: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(summary["records"], 0);
    assert_eq!(summary["anomaly_rate"], 0.0);
}

#[test]
fn detect_without_a_trained_run_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["detect", "--out", tmp.path().to_str().unwrap(), "--input", "/dev/null"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gradcheck_exit_status_follows_the_verdict() {
    let ok = bin().args(["gradcheck", "--seeds", "2"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS"));

    let bad = bin().args(["gradcheck", "--corrupt", "lstm.w_f"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
}
