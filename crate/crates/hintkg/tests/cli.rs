use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hintkg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hintkg")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const CONFIG: &str = r#"
data_dir = "data"
out = "run"
seed = 3

[train]
dim = 8
cos_dim = 8
att_dim = 8
mlp_hidden = 16
user_slots = 4
item_slots = 4
batch_size = 64

[synth]
users = 60
items = 50
values_per_relation = 6
interactions_per_user = 6
taste_groups = 6
"#;

#[test]
fn synth_train_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), CONFIG).unwrap();

    let stats = ok(hintkg(&["synth", "--config", "run.toml"], d));
    assert!(stats.contains("users: 60"), "{stats}");
    let json: serde_json::Value = serde_json::from_str(&ok(hintkg(&["stats", "--json", "--config", "run.toml"], d))).unwrap();
    assert_eq!(json["items"], 50);

    ok(hintkg(&["ingest", "--config", "run.toml"], d));
    assert!(d.join("run/instances_test.jsonl").exists());

    ok(hintkg(&["train", "--config", "run.toml", "--epochs", "1"], d));
    assert!(d.join("run/checkpoint.bin").exists());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("run/train_report.json")).unwrap()).unwrap();
    assert!(report["best_epoch"].as_u64().unwrap() <= 1);

    let eval = ok(hintkg(&["evaluate", "--config", "run.toml", "--backend", "random", "--limit", "20"], d));
    let eval: serde_json::Value = serde_json::from_str(&eval).unwrap();
    assert_eq!(eval["instances"], 20);
    assert_eq!(eval["valid_ratio"], 1.0);
    assert_eq!(fs::read_to_string(d.join("run/transcript_normal.jsonl")).unwrap().lines().count(), 20);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "evaluate");
    assert_eq!(manifest["seed"], 3);
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 5);
    assert!(inputs.iter().all(|i| i["sha256"].as_str().unwrap().len() == 64));

    let ablate = ok(hintkg(&["ablate", "--config", "run.toml", "--modes", "normal,no_cie,random", "--limit", "10"], d));
    assert_eq!(ablate.lines().count(), 3);
    let rows: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(d.join("run/ablation.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);

    ok(hintkg(&["export-prompts", "--config", "run.toml", "--split", "valid", "--limit", "5"], d));
    assert_eq!(fs::read_to_string(d.join("run/prompts_valid_normal.jsonl")).unwrap().lines().count(), 5);
    assert!(d.join("run/prompts_valid_normal.jsonl.manifest.json").exists());

    ok(hintkg(&["discover", "--config", "run.toml", "--mode", "no_ipd", "--limit", "5"], d));
    assert_eq!(fs::read_to_string(d.join("run/hints_no_ipd.jsonl")).unwrap().lines().count(), 5);
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "[train]\ndim = 0\n").unwrap();
    let out = hintkg(&["stats", "--config", "bad.toml"], d);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("train") && err.contains("dim"), "{err}");

    fs::write(d.join("typo.toml"), "[train]\ndimm = 8\n").unwrap();
    let err = String::from_utf8_lossy(&hintkg(&["stats", "--config", "typo.toml"], d).stderr).into_owned();
    assert!(err.contains("dimm"), "{err}");

    let err = String::from_utf8_lossy(&hintkg(&["stats", "--backend", "gpt"], d).stderr).into_owned();
    assert!(err.contains("backend"), "{err}");

    let err = String::from_utf8_lossy(&hintkg(&["stats", "--task", "listwise", "--mode", "all"], d).stderr).into_owned();
    assert!(err.contains("allow_all_listwise"), "{err}");
}

#[test]
fn missing_checkpoint_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), CONFIG).unwrap();
    ok(hintkg(&["synth", "--config", "run.toml"], d));
    let out = hintkg(&["evaluate", "--config", "run.toml", "--checkpoint", "nope.bin"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.bin"));
}
