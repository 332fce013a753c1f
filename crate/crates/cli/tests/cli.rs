#[path = "../../core/tests/common/mock_server.rs"]
mod mock_server;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mock_server::{Behavior, MockServer};
use relscore_core::dataset::{read_manifest, read_scored, write_scored, ScoredRecord};
use relscore_core::relevance_map::MappingTable;
use relscore_core::scorer::load_model;
use relscore_core::synthetic::{cycling_corpus, SyntheticCategory, SyntheticCorpus, SyntheticSpec};

fn relscore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relscore"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = relscore(args);
    assert!(
        out.status.success(),
        "relscore {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_corpus(path: &Path, docs: &[relscore_core::dataset::LabeledDocument]) {
    let body: String = docs
        .iter()
        .map(|d| serde_json::to_string(d).unwrap() + "\n")
        .collect();
    std::fs::write(path, body).unwrap();
}

/// Synthetic corpus over the default table's 18 labels.
fn default_label_corpus(dir: &Path, per_label: usize) -> PathBuf {
    let table = MappingTable::default_table();
    let corpus = SyntheticCorpus::new(SyntheticSpec {
        categories: table
            .entries()
            .iter()
            .map(|e| SyntheticCategory {
                label: e.label.clone(),
                hard_score: e.hard_score,
            })
            .collect(),
        docs_per_category: per_label,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let path = dir.join("corpus.jsonl");
    write_corpus(&path, &corpus.documents());
    path
}

fn build(dir: &Path, corpus: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["build-dataset", "--corpus", p(corpus), "--out", p(&out), "--caps", "none"];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

#[test]
fn build_dataset_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = default_label_corpus(dir.path(), 10);
    let a = build(dir.path(), &corpus, "a", &[]);
    let b = build(dir.path(), &corpus, "b", &[]);
    for f in ["train.jsonl", "eval.jsonl", "test.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let ma = read_manifest(a.join("manifest.jsonl")).unwrap();
    let mb = read_manifest(b.join("manifest.jsonl")).unwrap();
    assert_eq!(ma.config_hash, mb.config_hash);
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.train + ma.eval + ma.test, 180);
    assert_eq!(ma.seed, 3407);
}

#[test]
fn full_size_corpus_splits_to_reference_counts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("big.jsonl");
    write_corpus(&corpus, &cycling_corpus(&MappingTable::default_table(), 78_200));
    let out = build(dir.path(), &corpus, "big", &[]);
    let m = read_manifest(out.join("manifest.jsonl")).unwrap();
    assert_eq!((m.train, m.eval, m.test), (66_470, 7_820, 3_910));
}

#[test]
fn unknown_label_aborts_naming_label_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("bad.jsonl");
    std::fs::write(
        &corpus,
        "{\"text\":\"fine\",\"label\":\"News\"}\n{\"text\":\"odd\",\"label\":\"Astrology\"}\n",
    )
    .unwrap();
    let out = relscore(&["build-dataset", "--corpus", p(&corpus), "--out", p(&dir.path().join("o"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Astrology"), "{err}");
    assert!(err.contains("record 2"), "{err}");
}

#[test]
fn seed_precedence_is_flag_then_file_then_default() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = default_label_corpus(dir.path(), 3);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 11\n[dataset]\ninterval_width = 0.2\n").unwrap();
    let from_file = build(dir.path(), &corpus, "f", &["--config", p(&cfg)]);
    let from_flag = build(dir.path(), &corpus, "g", &["--config", p(&cfg), "--seed", "12"]);
    let mf = read_manifest(from_file.join("manifest.jsonl")).unwrap();
    let mg = read_manifest(from_flag.join("manifest.jsonl")).unwrap();
    assert_eq!(mf.seed, 11);
    assert_eq!(mg.seed, 12);
    assert_eq!(mf.config["interval_width"], 0.2);
    assert_eq!(mf.config["diffusion"]["seed"], 11);

    std::fs::write(&cfg, "sede = 11\n").unwrap();
    let out = relscore(&["--config", p(&cfg), "inspect"]);
    assert!(!out.status.success());
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = default_label_corpus(dir.path(), 20);
    let data = build(dir.path(), &corpus, "data", &[]);
    let fast = ["--learning-rate", "2", "--eval-interval", "10", "--max-epochs", "10", "--hash-bits", "14"];

    let mut args = vec!["train", "--dataset", p(&data), "--variant", "A"];
    args.extend_from_slice(&fast);
    ok(&args);
    let model_a = data.join("model_a.bin");
    assert!(model_a.exists());
    let trace: serde_json::Value =
        serde_json::from_slice(&std::fs::read(data.join("model_a.bin.trace.json")).unwrap()).unwrap();
    let best: Vec<f64> = trace["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["best_eval_mse"].as_f64().unwrap())
        .collect();
    assert!(!best.is_empty());
    assert!(best.windows(2).all(|w| w[1] <= w[0]), "best MSE not monotone: {best:?}");
    assert!(data.join("model_a.bin.manifest.json").exists());

    let mut args = vec!["train", "--dataset", p(&data), "--variant", "B"];
    args.extend_from_slice(&fast);
    ok(&args);
    let b = load_model(data.join("model_b.bin")).unwrap();
    assert_eq!(b.class_head.unwrap().num_classes(), 18);

    // default tolerances give exactly the 0.1 and 0.2 rows
    let stdout = ok(&["eval", "--model", p(&model_a), "--test", p(&data.join("test.jsonl"))]);
    assert!(stdout.contains("(Error Tolerance 0.1)"));
    assert!(stdout.contains("(Error Tolerance 0.2)"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(data.join("model_a.bin.eval.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["rows"].as_array().unwrap().len(), 2);

    // a model evaluated against its own predictions is perfect at every tolerance
    let model = load_model(&model_a).unwrap();
    let oracle: Vec<ScoredRecord> = read_scored(data.join("test.jsonl"))
        .unwrap()
        .into_iter()
        .map(|r| ScoredRecord {
            score: model.predict_score(&r.text),
            ..r
        })
        .collect();
    let oracle_path = dir.path().join("oracle.jsonl");
    write_scored(&oracle_path, &oracle).unwrap();
    let report_path = dir.path().join("oracle.eval.json");
    ok(&["eval", "--model", p(&model_a), "--test", p(&oracle_path), "--report", p(&report_path)]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    for row in report["report"]["rows"].as_array().unwrap() {
        assert_eq!(row["accuracy"], 1.0);
    }

    // baseline anchors from the training file
    let stdout = ok(&[
        "eval",
        "--model",
        p(&model_a),
        "--test",
        p(&data.join("test.jsonl")),
        "--baseline-train",
        p(&data.join("train.jsonl")),
    ]);
    assert!(stdout.contains("Cosine-softmax baseline"));
}

#[test]
fn train_and_eval_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = relscore(&["train", "--dataset", p(&dir.path().join("nowhere"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));

    let corpus = default_label_corpus(dir.path(), 5);
    let data = build(dir.path(), &corpus, "data", &[]);
    ok(&["train", "--dataset", p(&data), "--hash-bits", "10", "--max-epochs", "1"]);
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let out = relscore(&["eval", "--model", p(&data.join("model_a.bin")), "--test", p(&empty)]);
    assert!(!out.status.success());
}

#[test]
fn bench_rerun_hits_cache_and_reproduces_report() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = default_label_corpus(dir.path(), 5);
    let data = build(dir.path(), &corpus, "data", &[]);
    ok(&["train", "--dataset", p(&data), "--hash-bits", "12", "--max-epochs", "2"]);
    let model = data.join("model_a.bin");

    let server = MockServer::start(vec![
        ("one", Behavior::Echo("government notice".into())),
        ("two", Behavior::Echo("film festival".into())),
    ]);
    let endpoints = dir.path().join("endpoints.jsonl");
    std::fs::write(
        &endpoints,
        format!(
            "{{\"name\":\"one\",\"base_url\":\"{}\",\"retries\":0}}\n{{\"name\":\"two\",\"base_url\":\"{}\",\"retries\":0}}\n",
            server.base_url("one"),
            server.base_url("two")
        ),
    )
    .unwrap();
    let out_a = dir.path().join("bench_a");
    let out_b = dir.path().join("bench_b");
    let cache = dir.path().join("cache");
    let args = |out: &Path| {
        vec![
            "bench".to_string(),
            "--endpoints".into(),
            p(&endpoints).into(),
            "--model".into(),
            p(&model).into(),
            "--cache-dir".into(),
            p(&cache).into(),
            "--out".into(),
            p(out).into(),
        ]
    };
    let a: Vec<String> = args(&out_a);
    let stdout = ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(stdout.contains("one") && stdout.contains("two"));
    assert_eq!(server.requests(), 100);

    let b: Vec<String> = args(&out_b);
    ok(&b.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(server.requests(), 100);
    assert_eq!(
        std::fs::read(out_a.join("bench_report.json")).unwrap(),
        std::fs::read(out_b.join("bench_report.json")).unwrap()
    );
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_b.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["cache_hits"], 100);

    let bad = dir.path().join("bad_endpoints.jsonl");
    std::fs::write(&bad, "{\"name\":\"x\",\"base_url\":\"http://h\",\"api_key\":\"secret\"}\n").unwrap();
    let out = relscore(&["bench", "--endpoints", p(&bad), "--model", p(&model), "--out", p(&out_a)]);
    assert!(!out.status.success());
}

#[test]
fn inspect_prints_parameters_and_variance_profile() {
    let stdout = ok(&["inspect"]);
    assert!(stdout.contains("Government Affairs"));
    assert!(stdout.contains("19.0"));
    assert!(stdout.contains("0.011905"));
    let dir = tempfile::tempdir().unwrap();
    let mapping = dir.path().join("m.tsv");
    std::fs::write(&mapping, "civic\t1.0\nsport\t0.2\n").unwrap();
    let stdout = ok(&["inspect", "--mapping", p(&mapping), "--concentration", "10"]);
    assert!(stdout.contains("civic") && stdout.contains("sport"));
    assert!(stdout.contains("h(1-h)/11"));
}
