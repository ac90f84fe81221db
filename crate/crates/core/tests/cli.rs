use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use metaforge::eval::{fixture, write_predictions};
use metaforge::model::write_corpus;

fn metaforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metaforge"))
        .args(args)
        .env_remove("METAFORGE_SEED")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest_seed(out: &Path) -> u64 {
    let text = fs::read_to_string(out.with_file_name(format!("{}.manifest.json", out.file_name().unwrap().to_string_lossy()))).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["seed"].as_u64().unwrap()
}

#[test]
fn eval_prints_the_fixture_table() {
    let dir = tempfile::tempdir().unwrap();
    let (gold, pred, report) = (dir.path().join("gold.jsonl"), dir.path().join("pred.jsonl"), dir.path().join("r.json"));
    let doc = fixture::document();
    write_corpus(&gold, std::slice::from_ref(&doc)).unwrap();
    write_predictions(&pred, &[doc], &[fixture::PRED.to_vec()]).unwrap();
    let out = metaforge(&["eval", "--gold", s(&gold), "--pred", s(&pred), "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), fixture::TABLE);
    assert!(report.exists());
    assert!(dir.path().join("r.json.manifest.json").exists());
}

#[test]
fn missing_input_is_a_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("nowhere.jsonl");
    let out = metaforge(&["eval", "--gold", s(&gold), "--pred", s(&gold)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.jsonl"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(metaforge(&["eval", "--colour", "red"]).status.code(), Some(1));
    assert_eq!(metaforge(&["train", "--corpus", "x"]).status.code(), Some(1));
    assert_eq!(metaforge(&["train", "--method", "svm", "--corpus", "x", "--out", "y"]).status.code(), Some(1));
    assert_eq!(metaforge(&["--version"]).status.code(), Some(0));
}

#[test]
fn seed_comes_from_flag_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "seed = 5\nn = 3\n").unwrap();
    let out = dir.path().join("c.jsonl");
    let base = ["synth", "--config", s(&config), "--out", s(&out)];

    assert!(metaforge(&base).status.success());
    assert_eq!(manifest_seed(&out), 5);
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 3);

    let env = Command::new(env!("CARGO_BIN_EXE_metaforge")).args(base).env("METAFORGE_SEED", "6").output().unwrap();
    assert!(env.status.success());
    assert_eq!(manifest_seed(&out), 6);

    let flagged = Command::new(env!("CARGO_BIN_EXE_metaforge"))
        .args(base)
        .args(["--seed", "7", "--n", "2"])
        .env("METAFORGE_SEED", "6")
        .output()
        .unwrap();
    assert!(flagged.status.success());
    assert_eq!(manifest_seed(&out), 7);
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 2);

    fs::write(&config, "colour = \"red\"\n").unwrap();
    assert_eq!(metaforge(&base).status.code(), Some(1));
}

#[test]
fn train_extract_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let (corpus, model, pred) = (p("c.jsonl"), p("crf.json"), p("pred.jsonl"));
    assert!(metaforge(&["synth", "--n", "8", "--seed", "3", "--out", s(&corpus)]).status.success());
    let train = ["train", "--method", "crf", "--corpus", s(&corpus), "--out", s(&model), "--max-iters", "30"];
    assert!(metaforge(&train).status.success());
    let first = fs::read(&model).unwrap();
    let first_crf = fs::read(p("crf.crf.json")).unwrap();
    assert!(metaforge(&train).status.success());
    assert_eq!(fs::read(&model).unwrap(), first);
    assert_eq!(fs::read(p("crf.crf.json")).unwrap(), first_crf);

    let out = metaforge(&["extract", "--model", s(&model), "--corpus", s(&corpus), "--out", s(&pred)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = metaforge(&["eval", "--gold", s(&corpus), "--pred", s(&pred)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("Macro Average"));
}

#[test]
fn textmap_training_without_rasters_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    assert!(metaforge(&["synth", "--n", "2", "--out", s(&corpus)]).status.success());
    let out = metaforge(&["train", "--method", "textmap-word2vec", "--corpus", s(&corpus), "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
