use std::path::{Path, PathBuf};
use std::process::Command;

use adagq::cli::{CONFIG_ECHO_FILE, METRICS_FILE, SUMMARY_FILE, TRACE_FILE};
use adagq::metrics::{RunStatus, Summary};

const SMALL: &str = r#"
strategy = "adagq"
n_clients = 4
round_cap = 5
target_accuracy = 1.0

[dataset]
kind = "synthetic"
n_classes = 4
input_dim = 8
n_train = 400
n_test = 100

[model]
kind = "mlp"
hidden = [8]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adagq"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> i32 {
    bin()
        .args(["run", "--config"])
        .arg(config)
        .args(["--seed", "7", "--out"])
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn run_writes_all_outputs_and_flags_the_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    assert_eq!(run(&cfg, &out, &[]), 2);
    for f in [METRICS_FILE, SUMMARY_FILE, CONFIG_ECHO_FILE, TRACE_FILE] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let summary = Summary::load(&out.join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary.status, RunStatus::CapReached);
    assert_eq!(summary.rounds, 5);

    let csv = std::fs::read_to_string(out.join(METRICS_FILE)).unwrap();
    let golden = include_str!("golden/metrics_header.csv");
    assert_eq!(csv.lines().next().unwrap(), golden.trim_end());
    assert_eq!(csv.lines().count(), 6);
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!(last[1].parse::<f64>().unwrap(), summary.total_time_s);
    assert_eq!(last[16].parse::<u64>().unwrap(), summary.total_uploaded_bytes);
    let per_client: u64 = last[15].split(';').map(|b| b.parse::<u64>().unwrap()).sum();
    assert_eq!(per_client, summary.total_uploaded_bytes);

    let echo = std::fs::read_to_string(out.join(CONFIG_ECHO_FILE)).unwrap();
    assert!(echo.contains(env!("CARGO_PKG_VERSION")));
    assert!(echo.contains("\"seed\": 7"));
}

#[test]
fn reaching_the_target_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    assert_eq!(run(&cfg, &out, &["--override", "target_accuracy=0.0"]), 0);
    let summary = Summary::load(&out.join(SUMMARY_FILE)).unwrap();
    assert_eq!((summary.status, summary.rounds), (RunStatus::Reached, 1));
}

#[test]
fn errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}\nmystery = 3\n"));
    let output = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(tmp.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("mystery"));

    let cfg = write_config(tmp.path(), SMALL);
    assert_eq!(run(&cfg, &tmp.path().join("y"), &["--override", "sigma_r=0.5"]), 1);
}

#[test]
fn same_seed_same_bytes_and_replay_matches() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run(&cfg, &a, &[]);
    run(&cfg, &b, &[]);
    let read = |d: &Path| std::fs::read(d.join(METRICS_FILE)).unwrap();
    assert_eq!(read(&a), read(&b));

    let status = bin().args(["replay", "--from"]).arg(&a).arg("--out").arg(&c).status().unwrap();
    assert_eq!(status.code(), Some(2));
    assert_eq!(read(&a), read(&c));
}

#[test]
fn compare_prints_ratios() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&cfg, &a, &[]);
    run(&cfg, &b, &["--override", "strategy=qsgd"]);
    let output = bin().arg("compare").arg(&a).arg(&b).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().contains("1.00×"));
    assert!(text.contains("qsgd"));

    let missing = tmp.path().join("missing");
    let output = bin().arg("compare").arg(&a).arg(&missing).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains(&*missing.to_string_lossy()));
}

#[test]
fn sweep_runs_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("sweep");
    let output = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--sigma-d", "0.2,0.8", "--sigma-r", "2", "--strategies", "qsgd,topk"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{}", String::from_utf8_lossy(&output.stderr));
    let dirs = std::fs::read_dir(&out).unwrap().count();
    assert_eq!(dirs, 4);
    assert!(out.join("topk_sd0.8_sr2").join(SUMMARY_FILE).is_file());
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = adagq::config::ExperimentConfig::load(&path, &[]).unwrap();
            cfg.validate().unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 2);
}
