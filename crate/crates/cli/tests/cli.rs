use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

const WORDS: [&str; 8] = ["the", "a", "day", "so", "we", "it", "was", "and"];
const KEYS: [(&str, &str); 3] = [("none", "sunny"), ("sexism", "kitchen"), ("racism", "border")];

fn corpus_tsv(n: usize, offset: usize) -> String {
    let mut out = String::from("id\ttext\tlabel\n");
    for i in 0..n {
        let (label, key) = KEYS[i % 3];
        let k = i + offset;
        let filler: Vec<&str> = (0..2 + k % 3).map(|j| WORDS[(k * 7 + j * 3) % WORDS.len()]).collect();
        out.push_str(&format!("t{k}\t{} {key} {}\t{label}\n", filler.join(" "), WORDS[k % 8]));
    }
    out
}

fn binary_tsv() -> String {
    let mut out = String::from("id\ttext\tlabel\n");
    for i in 0..20 {
        let (text, label) = if i % 2 == 0 { ("@user the kitchen \"now\"", "hate") } else { ("#sunny day RT", "nonhate") };
        out.push_str(&format!("b{i}\t{text}\t{label}\n"));
    }
    out
}

fn schedule() -> Value {
    json!({ "initial_rate": 0.3, "decay_rate": 0.01, "max_epochs": 15, "batch_size": 8 })
}

fn config() -> Value {
    json!({
        "experiment": {
            "folds": 2,
            "repetitions": 1,
            "pipeline": {
                "stage1": {
                    "classifiers": 5,
                    "network": { "embedding_dim": 6, "recurrent_units": 6, "dense_units": 6 },
                    "schedules": {
                        "neutral": schedule(), "sexism": schedule(), "racism": schedule(),
                        "racism_bigram": schedule(), "racism_trigram": schedule()
                    },
                    "validation_fraction": 0.25
                },
                "stage2": { "logistic": { "l2": [0.0] } },
                "augmentation": { "per_class": 30 }
            }
        }
    })
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let w = Workspace { dir: tempfile::tempdir().unwrap() };
        fs::write(w.path("corpus.tsv"), corpus_tsv(60, 0)).unwrap();
        fs::write(w.path("binary.tsv"), binary_tsv()).unwrap();
        fs::write(w.path("config.json"), serde_json::to_string_pretty(&config()).unwrap()).unwrap();
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_ovrstack"))
            .current_dir(self.dir.path())
            .args(["--config", "config.json", "--jobs", "2"])
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_pipeline_round_trip() {
    let w = Workspace::new();
    w.ok(&["vocab", "--in", "corpus.tsv", "--order", "2", "--cap", "50", "--out", "bigrams.jsonl"]);
    assert!(fs::read_to_string(w.path("bigrams.jsonl")).unwrap().lines().count() > 1);
    assert!(w.path("bigrams.jsonl.manifest.json").is_file());

    w.ok(&["train", "--in", "corpus.tsv", "--stage2", "lr", "--seed", "3", "--out", "model"]);
    let manifest = read_json(&w.path("model/manifest.json"));
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config"]["experiment"]["pipeline"]["stage2"]["kind"], "lr");

    fs::write(w.path("texts.txt"), "I feel great today\nthe kitchen so\nborder we\n").unwrap();
    let out = w.ok(&["predict", "--model", "model", "--in", "texts.txt"]);
    let lines: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| ["neutral", "sexism", "racism"].contains(&l.as_str())), "{lines:?}");

    w.ok(&["features", "--model", "model", "--in", "corpus.tsv", "--out", "features.csv"]);
    let header = fs::read_to_string(w.path("features.csv")).unwrap();
    assert!(header.starts_with("id,p_n,not_p_n,p_s,not_p_s,p_r,not_p_r,p_r2,not_p_r2,p_r3,not_p_r3,b_s,b_r,b_n"), "{header}");

    w.ok(&["augment", "--in", "features.csv", "--mdv", "0.02", "--per-class", "10", "--out", "generated.csv"]);
    assert_eq!(fs::read_to_string(w.path("generated.csv")).unwrap().lines().count(), 31);

    w.ok(&["stage2", "--in", "generated.csv", "--stage2", "rf", "--out", "combiner.json"]);
    assert_eq!(read_json(&w.path("combiner.json"))["payload"]["model"]["kind"], "random-forest");

    w.ok(&["generalize", "--model", "model", "--in", "binary.tsv", "--rule", "five", "--filtered", "--out", "gen"]);
    let report = read_json(&w.path("gen/report.json"));
    assert_eq!(report["rule"], "five");
    assert_eq!(report["filtered"], true);
    let labels: Vec<&str> = report["metrics"]["classes"].as_array().unwrap().iter().map(|c| c["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["hate", "nonhate"]);
}

#[test]
fn evaluate_is_reproducible() {
    let w = Workspace::new();
    for out in ["a", "b"] {
        w.ok(&["evaluate", "--in", "corpus.tsv", "--stage2", "fixed", "--classifiers", "3", "--seed", "1", "--out", out]);
    }
    for file in ["report.json", "summary.csv", "manifest.json"] {
        assert_eq!(fs::read(w.path("a").join(file)).unwrap(), fs::read(w.path("b").join(file)).unwrap(), "{file}");
    }
    let report = read_json(&w.path("a/report.json"));
    assert_eq!(report["folds"].as_array().unwrap().len(), 2);
    assert!(report["summary"]["total_f"]["mean"].is_number());
    assert!(report["folds"][0]["metrics"]["classes"][2]["f_score"].is_number());
}

#[test]
fn exit_codes() {
    let w = Workspace::new();
    assert_eq!(w.run(&["evaluate", "--stage2", "nope"]).status.code(), Some(1));
    assert_eq!(w.run(&["evaluate", "--in", "corpus.tsv", "--classifiers", "4"]).status.code(), Some(1));
    let out = w.run(&["evaluate", "--in", "missing.tsv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("data"));

    fs::write(w.path("bad.json"), r#"{"experiment": {"foldz": 2}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ovrstack"))
        .current_dir(w.dir.path())
        .args(["--config", "bad.json", "evaluate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("foldz"));

    fs::write(w.path("broken.tsv"), "id\ttext\tlabel\nx\thello\tmaybe\n").unwrap();
    assert_eq!(w.run(&["evaluate", "--in", "broken.tsv"]).status.code(), Some(2));
    assert_eq!(w.run(&["predict", "--model", "nowhere", "--in", "corpus.tsv"]).status.code(), Some(2));
    assert_eq!(w.run(&["--help"]).status.code(), Some(0));
}

#[test]
fn refuses_other_container_versions() {
    let w = Workspace::new();
    w.ok(&["train", "--in", "corpus.tsv", "--classifiers", "3", "--out", "model"]);
    let path = w.path("model/combiner.json");
    let mut container = read_json(&path);
    container["version"] = json!(99);
    fs::write(&path, container.to_string()).unwrap();
    fs::write(w.path("texts.txt"), "hello\n").unwrap();
    let out = w.run(&["predict", "--model", "model", "--in", "texts.txt"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("99") && err.contains('1'), "{err}");

    let out = w.run(&["generalize", "--model", "model", "--in", "binary.tsv", "--rule", "five"]);
    assert_ne!(out.status.code(), Some(0));
}
