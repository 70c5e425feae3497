use std::path::Path;
use std::process::{Command, Output};

fn proxbcd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxbcd")).args(args).output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn blobs_bcd_five_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("metrics.csv");
    let out = proxbcd(&[
        "--dataset", "blobs", "--blobs-per-class", "30", "--optimizer", "bcd", "--epochs", "5",
        "--metrics-out", path_str(&metrics),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&metrics).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines[0], "epoch,F_tilde,F,train_acc,test_acc,seconds");
    assert_eq!(lines.len(), 6);
    for (i, line) in lines[1..].iter().enumerate() {
        assert!(line.starts_with(&format!("{},", i + 1)));
    }
    assert!(String::from_utf8_lossy(&out.stdout).contains("bcd 5 epochs"));
}

#[test]
fn missing_dataset_path_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("metrics.csv");
    let out = proxbcd(&[
        "--dataset", "mnist", "--data-dir", path_str(&dir.path().join("absent")), "--metrics-out",
        path_str(&metrics),
    ]);
    assert!(!out.status.success());
    assert!(!metrics.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent"));
}

#[test]
fn sgd_rejects_bcd_flags() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("metrics.csv");
    let out = proxbcd(&["--optimizer", "sgd", "--alpha-odd", "5", "--metrics-out", path_str(&metrics)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--alpha-odd"), "{err}");
    assert!(!metrics.exists());
    let out = proxbcd(&["--optimizer", "sgd", "--no-momentum", "--metrics-out", path_str(&metrics)]);
    assert!(!out.status.success());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("metrics.csv");
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        format!(
            "# sgd on blobs\noptimizer = sgd\ndataset = blobs\nblobs_per_class = 20\nepochs = 9\nlr = 0.1\nmetrics_out = {}\n",
            metrics.display()
        ),
    )
    .unwrap();
    let out = proxbcd(&["--config", path_str(&conf), "--epochs", "2", "--no-timing"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&metrics).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
    assert!(text.lines().filter(|l| !l.starts_with('#')).skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let metrics = dir.path().join(name);
        let out = proxbcd(&[
            "--blobs-per-class", "25", "--epochs", "3", "--seed", "5", "--no-timing", "--metrics-out",
            path_str(&metrics),
        ]);
        assert!(out.status.success());
        std::fs::read(metrics).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}
