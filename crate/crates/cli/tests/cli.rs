use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "
dataset.classes = 3
dataset.dim = 4
dataset.per_class = 30
dataset.separation = 4.0

oracle.accuracy = 0.9
oracle.embedding_dim = 0

suite.methods = supervised, zeromatch
suite.budgets = 1
suite.seeds = 0, 1

train.stage1_steps = 10
train.stage2_steps = 10
train.warmup = 2
train.batch_labeled = 3
train.batch_unlabeled = 6
train.encoder_widths = 8
train.head_hidden = 8
";

fn zeromatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeromatch")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = zeromatch(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn end_to_end_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let conf = root.join("tiny.conf");
    std::fs::write(&conf, CONFIG).unwrap();
    let suite = root.join("suite");

    let data_dir = root.join("data");
    ok(&["gen-data", "--config", s(&conf), "--out", s(&data_dir)]);
    let data = data_dir.join("dataset.csv");
    assert!(data.exists());

    ok(&["gen-pseudolabels", "--config", s(&conf), "--data", s(&data), "--oracle", "0.8", "--out", s(&data_dir)]);
    let pls = data_dir.join("pseudolabels.tsv");
    assert!(pls.exists());

    let train_dir = root.join("train");
    let stdout = ok(&[
        "train", "--config", s(&conf), "--method", "zeromatch", "--k", "2", "--data", s(&data),
        "--pseudolabels", s(&pls), "--seed", "3", "--out", s(&train_dir),
    ]);
    assert!(stdout.contains("test accuracy"));
    for f in ["model.ckpt", "train_log.csv", "result.json"] {
        assert!(train_dir.join(f).exists(), "{f}");
    }
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(train_dir.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["stage1_steps"], 10);
    assert_eq!(std::fs::read_to_string(train_dir.join("train_log.csv")).unwrap().lines().count(), 21);

    ok(&["run-suite", "--config", s(&conf), "--out", s(&suite)]);
    let results = suite.join("results.jsonl");
    assert_eq!(std::fs::read_to_string(&results).unwrap().lines().count(), 4);
    ok(&["run-suite", "--config", s(&conf), "--out", s(&suite), "--workers", "2"]);
    assert_eq!(std::fs::read_to_string(&results).unwrap().lines().count(), 4);

    let table = ok(&["summarize", "--results", s(&results)]);
    assert!(table.contains("zeromatch") && table.contains("zero_shot"));

    let criteria = root.join("c.criteria");
    std::fs::write(&criteria, "1: zeromatch@a=0.9/1 >= 0\n").unwrap();
    ok(&["check", "--results", s(&results), "--criteria", s(&criteria)]);
    std::fs::write(&criteria, "1: zeromatch@a=0.9/1 > 1\n").unwrap();
    assert_eq!(zeromatch(&["check", "--results", s(&results), "--criteria", s(&criteria)]).status.code(), Some(1));

    let report = root.join("report");
    ok(&["report", "--results", s(&results), "--format", "jsonl", "--out", s(&report)]);
    for f in ["runs.jsonl", "summary.csv", "summary.txt"] {
        assert!(report.join(f).exists(), "{f}");
    }
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "suite.nonsense = 1\n").unwrap();
    let out = zeromatch(&["run-suite", "--config", s(&conf)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));
    let out = zeromatch(&["train", "--method", "nope", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}
