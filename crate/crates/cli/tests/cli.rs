//! End-to-end tests of the `ironydet` binary: artifact layout, replay from
//! run.json, config precedence, and validation failures.

mod common;

use std::fs;

use common::{assert_success, run_cli, small_train_flags, write_toy_dataset, write_toy_glove};
use ironydet_core::metrics::MetricsReport;

#[test]
fn train_writes_all_artifacts_and_learns() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let glove = write_toy_glove(dir.path());
    let out = dir.path().join("run");

    let mut args = vec!["train".to_string()];
    args.extend(small_train_flags(&data, &glove, &out));
    assert_success(&run_cli(&args));

    for artifact in [
        "run.json",
        "vocab.json",
        "model_0.json",
        "model_1.json",
        "history.json",
        "metrics.json",
    ] {
        assert!(out.join(artifact).is_file(), "missing {artifact}");
    }
    let metrics: MetricsReport =
        serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics.accuracy >= 0.9, "dev metrics: {metrics:?}");

    let run_json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run_json["command"], "train");
    assert_eq!(run_json["dim"], 25);
    assert_eq!(run_json["seed"], 11);
}

#[test]
fn replaying_a_run_json_reproduces_metrics_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let glove = write_toy_glove(dir.path());
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");

    let mut args = vec!["train".to_string()];
    args.extend(small_train_flags(&data, &glove, &out1));
    assert_success(&run_cli(&args));

    // Replay purely from run.json; only the output directory changes.
    assert_success(&run_cli([
        "train",
        "--config",
        &out1.join("run.json").display().to_string(),
        "--out",
        &out2.display().to_string(),
    ]));

    let m1 = fs::read(out1.join("metrics.json")).unwrap();
    let m2 = fs::read(out2.join("metrics.json")).unwrap();
    assert_eq!(m1, m2, "replayed metrics.json differs");
    assert_eq!(
        fs::read(out1.join("model_0.json")).unwrap(),
        fs::read(out2.join("model_0.json")).unwrap(),
        "replayed checkpoint differs"
    );
}

#[test]
fn eval_and_predict_run_from_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let glove = write_toy_glove(dir.path());
    let train_out = dir.path().join("train");

    let mut args = vec!["train".to_string()];
    args.extend(small_train_flags(&data, &glove, &train_out));
    assert_success(&run_cli(&args));

    // eval twice; identical metrics both times (whole-file evaluation).
    let eval1 = dir.path().join("eval1");
    let eval2 = dir.path().join("eval2");
    for out in [&eval1, &eval2] {
        assert_success(&run_cli([
            "eval",
            "--checkpoint",
            &train_out.display().to_string(),
            "--data",
            &data.display().to_string(),
            "--embeddings",
            &glove.display().to_string(),
            "--out",
            &out.display().to_string(),
        ]));
    }
    let b1 = fs::read(eval1.join("metrics.json")).unwrap();
    let b2 = fs::read(eval2.join("metrics.json")).unwrap();
    assert_eq!(b1, b2);
    let metrics: MetricsReport = serde_json::from_slice(&b1).unwrap();
    assert!(metrics.accuracy >= 0.9, "{metrics:?}");

    // predict: one JSONL line per tweet, ids in file order.
    let pred_out = dir.path().join("pred");
    assert_success(&run_cli([
        "predict",
        "--checkpoint",
        &train_out.display().to_string(),
        "--data",
        &data.display().to_string(),
        "--embeddings",
        &glove.display().to_string(),
        "--out",
        &pred_out.display().to_string(),
    ]));
    let lines: Vec<serde_json::Value> = fs::read_to_string(pred_out.join("predictions.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 40);
    for (i, line) in lines.iter().enumerate() {
        assert_eq!(line["id"], i as u64);
        let prob = line["prob"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&prob));
    }
}

#[test]
fn prep_writes_tokens_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let out = dir.path().join("prep");
    assert_success(&run_cli([
        "prep",
        "--data",
        &data.display().to_string(),
        "--out",
        &out.display().to_string(),
    ]));
    let text = fs::read_to_string(out.join("tokens.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 40);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["id"], 0);
    let tokens: Vec<String> = first["tokens"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t.as_str().unwrap().to_string())
        .collect();
    // "#irony" is stripped during cleaning; the rest survives tokenization.
    assert!(tokens.contains(&"what".to_string()));
    assert!(tokens.contains(&",".to_string()));
    assert!(!tokens.iter().any(|t| t.contains("irony")));
}

#[test]
fn baseline_and_ablate_write_their_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let glove = write_toy_glove(dir.path());

    let base_out = dir.path().join("baseline");
    assert_success(&run_cli([
        "baseline",
        "--data",
        &data.display().to_string(),
        "--out",
        &base_out.display().to_string(),
        "--seed",
        "11",
    ]));
    let metrics: MetricsReport =
        serde_json::from_str(&fs::read_to_string(base_out.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics.accuracy >= 0.9, "{metrics:?}");

    let ablate_out = dir.path().join("ablate");
    assert_success(&run_cli([
        "ablate",
        "--data",
        &data.display().to_string(),
        "--embeddings",
        &glove.display().to_string(),
        "--out",
        &ablate_out.display().to_string(),
        "--dim",
        "25",
        "--hidden",
        "8",
        "--dropout",
        "0.0",
        "--lr",
        "0.05",
        "--ensemble",
        "1",
        "--seed",
        "11",
        "--max-epochs",
        "4",
        "--patience",
        "4",
    ]));

    let table = fs::read_to_string(ablate_out.join("ablation.txt")).unwrap();
    assert_eq!(table.trim_end().lines().count(), 3, "table:\n{table}");
    assert!(table.contains("Token-level"));
    assert!(table.contains("Sentence-level"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ablate_out.join("ablation.json")).unwrap())
            .unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 4);
}

#[test]
fn config_file_yields_to_cli_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let config_path = dir.path().join("cfg.json");
    fs::write(
        &config_path,
        serde_json::to_string(&serde_json::json!({
            "data": data.display().to_string(),
            "seed": 3,
            "ratio": 0.5,
        }))
        .unwrap(),
    )
    .unwrap();

    let out = dir.path().join("prep");
    assert_success(&run_cli([
        "prep",
        "--config",
        &config_path.display().to_string(),
        "--out",
        &out.display().to_string(),
        "--seed",
        "9",
    ]));
    let run_json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run_json["seed"], 9, "CLI flag must beat the config file");
    assert_eq!(run_json["ratio"], 0.5, "config file must beat the default");
    assert_eq!(run_json["dim"], 100, "untouched fields keep their defaults");
}

#[test]
fn validation_failures_exit_nonzero_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let glove = write_toy_glove(dir.path());
    let out = dir.path().join("bad");

    // Unsupported embedding width.
    let res = run_cli([
        "train",
        "--data",
        &data.display().to_string(),
        "--embeddings",
        &glove.display().to_string(),
        "--out",
        &out.display().to_string(),
        "--dim",
        "300",
    ]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("25, 50, 100"), "stderr: {stderr}");
    assert!(!out.exists(), "no artifacts on validation failure");

    // Missing dataset file.
    let res = run_cli([
        "train",
        "--data",
        "no-such-file.tsv",
        "--embeddings",
        &glove.display().to_string(),
        "--out",
        &out.display().to_string(),
        "--dim",
        "25",
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("no-such-file.tsv"));
    assert!(!out.exists());

    // Unknown flag.
    let res = run_cli(["train", "--what-is-this", "1"]);
    assert!(!res.status.success());
}
