use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn airtime(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airtime")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = airtime(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_train_eval_predict() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run, eval) = (dir.path().join("data"), dir.path().join("run"), dir.path().join("eval"));
    ok(&["synth-gen", "--train-size", "200", "--val-size", "50", "--k", "3", "--seed", "4", "--out", s(&data)]);
    for f in ["train.json", "val.json", "topologies.json", "synth_config.json"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let train = data.join("train.json");
    let val = data.join("val.json");
    ok(&["train", "--train", s(&train), "--val", s(&val), "--hidden", "8", "--epochs", "4", "--out", s(&run)]);
    let history = fs::read_to_string(run.join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_loss\n"));
    assert_eq!(history.lines().count(), 5);

    let checkpoint = run.join("checkpoint.json");
    ok(&["eval", "--checkpoint", s(&checkpoint), "--data", s(&val), "--out", s(&eval)]);
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["count"], 500);
    assert_eq!(fs::read_to_string(eval.join("node_errors.csv")).unwrap().lines().count(), 501);

    let scenario = dir.path().join("scenario.json");
    fs::write(&scenario, r#"{"loads":[0.1,0.2,0.3],"adjacency":[[0,1,0],[1,0,1],[0,1,0]],"ap_ids":["a","b","c"]}"#).unwrap();
    let printed = ok(&["predict", "--checkpoint", s(&checkpoint), "--scenario", s(&scenario), "--out", s(&eval)]);
    assert_eq!(printed.lines().count(), 4);
    let csv = fs::read_to_string(eval.join("whatif.csv")).unwrap();
    let simple_sum: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(simple_sum.len(), 3);
    for (got, want) in simple_sum.iter().zip([0.2, 0.4, 0.2]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn baseline_eval_on_telemetry() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.csv");
    let r = dir.path().join("r.csv");
    fs::write(
        &t,
        "network_id,timestamp,ap_id,tx_time,rx_time,interference\n\
         n,2023-01-01T00:00:00Z,a,0.1,0.1,0.3\n\
         n,2023-01-01T00:00:00Z,b,0.2,0.1,0.2\n",
    )
    .unwrap();
    fs::write(&r, "network_id,timestamp,src_ap,dst_ap,rssi_dbm\nn,2023-01-01T00:00:00Z,a,b,-60\n").unwrap();
    let out = dir.path().join("out");
    ok(&["eval", "--baseline", "simple-sum", "--telemetry", s(&t), "--rssi", s(&r), "--out", s(&out)]);
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    // Estimates 0.3 and 0.2 against labels 0.3 and 0.2.
    assert!(metrics["mae"].as_f64().unwrap() < 1e-12);

    ok(&["sweep-threshold", "--telemetry", s(&t), "--rssi", s(&r), "--thresholds", "-90,-50", "--out", s(&out)]);
    let sweep = fs::read_to_string(out.join("threshold_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
    ok(&["heatmap", "--telemetry", s(&t), "--rssi", s(&r), "--out", s(&out)]);
    assert_eq!(fs::read_to_string(out.join("heatmap.csv")).unwrap().lines().count(), 1 + 2 * 24);
}

#[test]
fn parse_errors_are_json_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.csv");
    fs::write(
        &t,
        "network_id,timestamp,ap_id,tx_time,rx_time,interference\nn,2023-01-01T00:00:00Z,a,1.3,0.1,0.3\n",
    )
    .unwrap();
    let out = airtime(&["eval", "--baseline", "simple-sum", "--telemetry", s(&t), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "parse");
    assert_eq!(err["line"], 2);
    assert_eq!(err["class"], "OutOfRange");
}

#[test]
fn usage_and_missing_file_errors() {
    let out = airtime(&["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "usage");

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = airtime(&["predict", "--checkpoint", s(&missing), "--scenario", s(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["kind"], "io");
}

#[test]
fn version_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    ok(&["synth-gen", "--train-size", "20", "--val-size", "10", "--out", s(&data)]);
    ok(&[
        "train", "--train", s(&data.join("train.json")), "--val", s(&data.join("val.json")), "--hidden", "4",
        "--epochs", "1", "--out", s(&run),
    ]);
    let path = run.join("checkpoint.json");
    let text = fs::read_to_string(&path).unwrap().replacen("\"format_version\": 1", "\"format_version\": 2", 1);
    fs::write(&path, text).unwrap();
    let out = airtime(&["eval", "--checkpoint", s(&path), "--data", s(&data.join("val.json")), "--out", s(&run)]);
    assert_eq!(stderr_json(&out)["kind"], "version");
}

#[test]
fn train_is_seed_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth-gen", "--train-size", "60", "--val-size", "20", "--seed", "2", "--out", s(&data)]);
    let mut checkpoints = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        ok(&[
            "train", "--train", s(&data.join("train.json")), "--val", s(&data.join("val.json")), "--model", "lstm",
            "--hidden", "4", "--epochs", "2", "--seed", "5", "--out", s(&out),
        ]);
        checkpoints.push(fs::read(out.join("checkpoint.json")).unwrap());
    }
    assert_eq!(checkpoints[0], checkpoints[1]);
}
