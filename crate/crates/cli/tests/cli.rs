use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hemfair::corpus::load_manifest;
use hemfair::embeddings::EmbeddingTable;
use hemfair::pipeline::{corpus_hem, HemConfig};
use tempfile::TempDir;

const CONFIG: &str = r#"{
    "embedding_dim": 16,
    "synth": {"n_talks": 40, "duration_secs": [20, 25], "tokens": [80, 120], "embedding_dim": 16},
    "train": {"epochs": 4, "hidden": 16},
    "grid": {"epsilons": [0.1], "lambdas": [1.0]},
    "hem": {"verbal": {"normalize_topics": true}}
}"#;

fn hemfair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hemfair")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = hemfair(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

struct Work {
    _dir: TempDir,
    root: PathBuf,
}

impl Work {
    fn new(config: &str) -> Self {
        let dir = TempDir::new().unwrap();
        let root = dir.path().to_path_buf();
        fs::write(root.join("cfg.json"), config).unwrap();
        Work { _dir: dir, root }
    }

    fn p(&self, name: &str) -> String {
        self.root.join(name).to_str().unwrap().to_string()
    }

    fn synth(&self, out: &str) {
        ok(&["synth", "--out", &self.p(out), "--config", &self.p("cfg.json"), "--seed", "3"]);
    }

    fn stage(&self, cmd: &str, corpus: &str, out: &str, extra: &[&str]) {
        let manifest = self.p(&format!("{corpus}/manifest.jsonl"));
        let emb = self.p(&format!("{corpus}/embeddings.txt"));
        let out = self.p(out);
        let cfg = self.p("cfg.json");
        let mut args = vec![cmd, "--manifest", &manifest, "--out", &out, "--config", &cfg, "--seed", "3"];
        if matches!(cmd, "hem" | "train" | "grid") {
            args.extend(["--embeddings", emb.as_str()]);
        }
        args.extend(extra);
        ok(&args);
    }
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn hem_csv_matches_library() {
    let w = Work::new(&CONFIG.replace("\"n_talks\": 40", "\"n_talks\": 2"));
    w.synth("c");
    w.stage("hem", "c", "c", &[]);
    let corpus = load_manifest(w.root.join("c/manifest.jsonl")).unwrap();
    let table = EmbeddingTable::load_with_dim(w.root.join("c/embeddings.txt"), 16).unwrap();
    let mut cfg = HemConfig::default();
    cfg.verbal.normalize_topics = true;
    let direct = corpus_hem(&corpus, &table, &cfg, 3, 1).unwrap();
    let rows = data_rows(&w.root.join("c/hem.csv"));
    assert_eq!(rows.len(), 2);
    for (row, h) in rows.iter().zip(&direct) {
        assert_eq!(row[0], h.id);
        assert_eq!(row[1].parse::<f64>().unwrap(), h.hem_tr_raw);
        assert_eq!(row[2].parse::<f64>().unwrap(), h.hem_ges_raw);
        assert_eq!(row[7].parse::<usize>().unwrap(), h.segment_eigs.len());
    }
    let eigs = data_rows(&w.root.join("c/segment_eigs.csv"));
    assert_eq!(eigs.len(), direct.iter().map(|h| h.segment_eigs.len()).sum::<usize>());
}

#[test]
fn usage_errors_exit_one() {
    let w = Work::new(CONFIG);
    let out = hemfair(&["hem", "--manifest", "x.jsonl", "--out", &w.p("o")]);
    assert_eq!(out.status.code(), Some(1));
    let out = hemfair(&["synth", "--out", &w.p("o"), "--config", &w.p("missing.json")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_data_exits_two_and_names_the_talk() {
    let w = Work::new(CONFIG);
    w.synth("c");
    let manifest = w.root.join("c/manifest.jsonl");
    let text = fs::read_to_string(&manifest).unwrap();
    let first_id = serde_json::from_str::<serde_json::Value>(text.lines().next().unwrap()).unwrap()["id"]
        .as_str()
        .unwrap()
        .to_string();
    let transcript = w.root.join("c/transcripts").join(format!("{first_id}.txt"));
    fs::write(&transcript, "").unwrap();
    let out = hemfair(&[
        "hem",
        "--manifest",
        &w.p("c/manifest.jsonl"),
        "--embeddings",
        &w.p("c/embeddings.txt"),
        "--out",
        &w.p("c"),
        "--config",
        &w.p("cfg.json"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&first_id));
}

#[test]
fn evaluate_reproduces_train_report() {
    let w = Work::new(CONFIG);
    w.synth("c");
    w.stage("hem", "c", "c", &[]);
    w.stage("train", "c", "c", &["--epsilon", "0.1", "--lambda", "2"]);
    w.stage("evaluate", "c", "c", &[]);
    let strip = |name: &str| data_rows(&w.root.join("c").join(name));
    assert_eq!(strip("report.csv"), strip("evaluation.csv"));
    let a: serde_json::Value = serde_json::from_slice(&fs::read(w.root.join("c/report.json")).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&fs::read(w.root.join("c/evaluation.json")).unwrap()).unwrap();
    assert_eq!(a["report"], b["report"]);
}

#[test]
fn zero_regularizer_equals_baseline() {
    let w = Work::new(CONFIG);
    w.synth("c");
    w.stage("hem", "c", "c", &[]);
    w.stage("train", "c", "a", &["--hem", &w.p("c/hem.csv")]);
    w.stage("train", "c", "b", &["--hem", &w.p("c/hem.csv"), "--epsilon", "0", "--lambda", "0"]);
    for f in ["trace.csv", "predictions.csv", "report.csv"] {
        assert_eq!(fs::read(w.root.join("a").join(f)).unwrap(), fs::read(w.root.join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn default_grid_has_baseline_and_reference_point() {
    let w = Work::new(&CONFIG.replace(r#""grid": {"epsilons": [0.1], "lambdas": [1.0]},"#, ""));
    w.synth("c");
    w.stage("hem", "c", "c", &[]);
    w.stage("grid", "c", "c", &[]);
    let rows = data_rows(&w.root.join("c/grid.csv"));
    let points: std::collections::BTreeSet<(String, String)> =
        rows.iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    assert_eq!(points.len(), 31);
    assert!(points.contains(&("0".into(), "0".into())));
    assert!(points.contains(&("0.017".into(), "5".into())));
    assert_eq!(rows.len(), 31 * 6);
}

#[test]
fn reruns_are_byte_identical() {
    let w = Work::new(CONFIG);
    for out in ["a", "b"] {
        w.synth(out);
        w.stage("hem", out, out, &[]);
        w.stage("analyze", out, out, &[]);
    }
    let mut names: Vec<_> = fs::read_dir(w.root.join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names {
        let a = w.root.join("a").join(&name);
        if a.is_file() {
            assert_eq!(fs::read(&a).unwrap(), fs::read(w.root.join("b").join(&name)).unwrap(), "{name:?}");
        }
    }
}
