//! End-to-end runs of the `rulebench` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rulebench_core::synth::{random_walk, WalkParams};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rulebench"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.env_remove("RULEBENCH_DATA").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn data(dir: &Path, name: &str, seed: u64, len: usize) {
    fs::create_dir_all(dir).unwrap();
    let s = random_walk(name, len, seed, &WalkParams::default());
    fs::write(dir.join(format!("{name}.csv")), s.to_csv_string()).unwrap();
}

const TREND: &str =
    "# trend\nWHEN close > sma_20 EMIT signal=1 position=1.0;\nWHEN close < sma_20 EMIT signal=-1 position=0.0;\n";

#[test]
fn factors_compute_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    data(dir.path(), "A", 1, 40);
    let out = dir.path().join("f.csv");
    let o = run(bin()
        .args(["factors", "compute", "--names", "rsi_14,macd"])
        .arg("--input")
        .arg(dir.path().join("A.csv"))
        .arg("--output")
        .arg(&out));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "timestamp,rsi_14,macd");
    assert_eq!(lines.len(), 41);
    assert!(lines[1].ends_with(",,"));

    let o = run(bin()
        .args(["factors", "compute", "--names", "bogus_3"])
        .arg("--input")
        .arg(dir.path().join("A.csv")));
    assert_eq!(code(&o), 2);
}

#[test]
fn backtest_run_outputs_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    data(dir.path(), "A", 2, 120);
    fs::write(dir.path().join("s.afs"), TREND).unwrap();
    fs::write(dir.path().join("c.json"), r#"{"lookback": 30}"#).unwrap();
    let out = dir.path().join("out");
    let o = run(bin()
        .args(["backtest", "run"])
        .arg("--data")
        .arg(dir.path().join("A.csv"))
        .arg("--strategy")
        .arg(dir.path().join("s.afs"))
        .arg("--config")
        .arg(dir.path().join("c.json"))
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["equity.csv", "actions.csv", "result.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["status"], "SUCCESS");
    assert_eq!(fs::read_to_string(out.join("equity.csv")).unwrap().lines().count(), 92);

    fs::write(dir.path().join("bad.afs"), "WHEN close >> 1 EMIT signal=1 position=1;").unwrap();
    let o = run(bin()
        .args(["backtest", "run", "--lookback", "30"])
        .arg("--data")
        .arg(dir.path().join("A.csv"))
        .arg("--strategy")
        .arg(dir.path().join("bad.afs"))
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&o), 1);

    let o = run(bin()
        .args(["backtest", "run", "--lookback", "30"])
        .arg("--data")
        .arg(dir.path().join("A.csv"))
        .args(["--adapter", r#"read h; echo '{"ok":false,"error":"NameError: x"}'"#])
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&o), 1);
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["status"], "NameError");

    fs::write(dir.path().join("cost.json"), r#"{"cost_rate": 0.001}"#).unwrap();
    let o = run(bin()
        .args(["backtest", "run"])
        .arg("--data")
        .arg(dir.path().join("A.csv"))
        .arg("--strategy")
        .arg(dir.path().join("s.afs"))
        .arg("--config")
        .arg(dir.path().join("cost.json"))
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&o), 2);
}

fn manifest(dir: &Path, strategy: &str) -> std::path::PathBuf {
    let m = serde_json::json!({
        "config": {"lookback": 30},
        "jobs": [{"query": "q1", "model": "m", "temperature": "0.0", "strategy": strategy,
                  "assets": ["A", "B"], "runs": 5}]
    });
    let p = dir.join("m.json");
    fs::write(&p, m.to_string()).unwrap();
    p
}

#[test]
fn eval_resume_report_and_stability() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    data(&data_dir, "A", 3, 100);
    data(&data_dir, "B", 4, 100);
    fs::write(dir.path().join("s.afs"), TREND).unwrap();
    let m = manifest(dir.path(), "s.afs");

    // data directory comes from the environment
    let o = bin()
        .arg("eval")
        .arg("--manifest")
        .arg(&m)
        .env("RULEBENCH_DATA", &data_dir)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let store = dir.path().join("runs");
    let count = |root: &Path| rulebench_core::aggregate::load_records(root).unwrap().len();
    assert_eq!(count(&store), 10);
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("10 written"), "{stderr}");

    let o = run(bin()
        .arg("eval")
        .arg("--manifest")
        .arg(&m)
        .arg("--data-dir")
        .arg(&data_dir)
        .args(["--workers", "2"]));
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("0 written, 10 kept"));

    let report = dir.path().join("report");
    let o = run(bin()
        .arg("report")
        .arg("--records")
        .arg(&store)
        .arg("--out")
        .arg(&report)
        .args(["--group-by", "model,asset"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let overall = fs::read_to_string(report.join("overall.csv")).unwrap();
    assert_eq!(overall.lines().next().unwrap(), "model,asset,SR,ARR,MDD,CR,SoR,VOL");
    assert_eq!(overall.lines().count(), 3);
    let by_level = fs::read_to_string(report.join("by_level.csv")).unwrap();
    assert!(by_level.contains("unstratified"));
    for f in ["by_asset.csv", "pass.csv", "errors.csv", "variance.csv", "summary.json"] {
        assert!(report.join(f).is_file(), "{f} missing");
    }

    let stability = dir.path().join("stab/report.json");
    let o = run(bin()
        .args(["stability", "analyze"])
        .arg("--runs")
        .arg(store.join("m/0.0/q1/A"))
        .arg("--out")
        .arg(&stability));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&stability).unwrap()).unwrap();
    assert_eq!(r["stepwise"]["mean"], 1.0);
    assert_eq!(r["runs"].as_array().unwrap().len(), 5);
    assert!(dir.path().join("stab/matrix.csv").is_file());

    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let o = run(bin()
        .arg("report")
        .arg("--records")
        .arg(&empty)
        .arg("--out")
        .arg(&report));
    assert_eq!(code(&o), 2);
}

#[test]
fn eval_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    data(dir.path(), "A", 5, 60);
    data(dir.path(), "B", 6, 60);
    // missing strategy file: records are written with a failure status
    let m = manifest(dir.path(), "absent{run}.afs");
    let o = run(bin()
        .arg("eval")
        .arg("--manifest")
        .arg(&m)
        .arg("--data-dir")
        .arg(dir.path()));
    assert_eq!(code(&o), 1);
    let records = rulebench_core::aggregate::load_records(&dir.path().join("runs")).unwrap();
    assert_eq!(records.len(), 10);
    assert!(records
        .iter()
        .all(|r| r.status == rulebench_core::ErrorKind::OtherError && r.diagnostic.is_some()));

    fs::write(
        &m,
        r#"{"jobs": [{"query": "q", "model": "m", "temperature": "0", "strategy": "s.afs", "assets": ["ZZZ"]}]}"#,
    )
    .unwrap();
    let o = run(bin()
        .arg("eval")
        .arg("--manifest")
        .arg(&m)
        .arg("--data-dir")
        .arg(dir.path()));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("jobs[0].assets"));
}
