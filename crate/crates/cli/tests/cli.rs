use std::path::Path;
use std::process::{Command, Output};

fn sric(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sric"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("an error line");
    serde_json::from_str(line).expect("error line is JSON")
}

fn synth(dir: &Path) {
    let out = sric(dir, &["synth", "--seed", "5", "--n-per-class", "12"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_writes_corpus_and_lexicon() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let corpus = std::fs::read_to_string(dir.path().join("corpus.jsonl")).unwrap();
    assert_eq!(corpus.lines().count(), 36);
    for line in corpus.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["id"].is_string() && v["text"].is_string() && v["label"].is_string());
    }
    assert!(dir.path().join("lexicon.tsv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("synth.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 5);
}

#[test]
fn missing_lexicon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out = sric(dir.path(), &["crossval", "--lexicon", "/nonexistent/lexicon.tsv"]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_line(&out);
    assert_eq!(e["error"], "config");
    assert_eq!(e["field"], "lexicon");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"dimm": 32}"#).unwrap();
    let out = sric(dir.path(), &["--config", cfg.to_str().unwrap(), "synth"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["field"], "dimm");
}

#[test]
fn invalid_config_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"k": 1}"#).unwrap();
    synth(dir.path());
    let out = sric(dir.path(), &["--config", cfg.to_str().unwrap(), "crossval"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["field"], "k");
}

#[test]
fn malformed_corpus_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\": \"a\", \"text\": \"x\", \"label\": \"angry\"}\n").unwrap();
    let out = sric(dir.path(), &["train", "--corpus", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_ne!(error_line(&out)["error"], "config");
}

#[test]
fn segment_fills_in_segmentations() {
    let dir = tempfile::tempdir().unwrap();
    let lex = dir.path().join("raw.tsv");
    std::fs::write(&lex, "#stopthehate\tcounterhate\n#chinavirus\thate\n").unwrap();
    let out = sric(dir.path(), &["segment", "--lexicon", lex.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("lexicon.segmented.tsv")).unwrap();
    assert!(text.contains("stop the hate"), "{text}");
    assert!(text.contains("china virus"), "{text}");
}

#[test]
fn train_then_evaluate_and_refuse_incompatible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"grid_search": false, "max_epochs": 3, "dim": 16}"#).unwrap();
    let c = cfg.to_str().unwrap();
    synth(dir.path());
    let out = sric(dir.path(), &["--config", c, "train"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("model.json").exists());
    assert!(dir.path().join("history.jsonl").exists());

    let model = dir.path().join("model.json");
    let m = model.to_str().unwrap();
    let out = sric(dir.path(), &["--config", c, "evaluate", "--checkpoint", m]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("evaluation.json")).unwrap()).unwrap();
    let f1 = eval["weighted_f1"].as_f64().or(eval["metrics"]["weighted_f1"].as_f64()).unwrap();
    assert!((0.0..=1.0).contains(&f1));

    std::fs::write(&cfg, r#"{"grid_search": false, "max_epochs": 3, "dim": 8}"#).unwrap();
    let out = sric(dir.path(), &["--config", c, "evaluate", "--checkpoint", m]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "incompatible");
}
