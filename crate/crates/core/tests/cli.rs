use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_findings-ir"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// Generated corpus plus an index with and without embeddings.
    fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture { dir };
        ok(&[
            "gen-corpus",
            "--n",
            "150",
            "--clusters",
            "15",
            "--dim",
            "8",
            "--out",
            s(&f.path("gen")),
        ]);
        ok(&[
            "index",
            "--corpus",
            s(&f.path("gen/corpus.jsonl")),
            "--out",
            s(&f.path("plain")),
        ]);
        ok(&[
            "index",
            "--corpus",
            s(&f.path("gen/corpus.jsonl")),
            "--embeddings",
            s(&f.path("gen/embeddings.emb1")),
            "--measures",
            s(&f.path("gen/measures.jsonl")),
            "--out",
            s(&f.path("emb")),
        ]);
        f
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }
}

#[test]
fn missing_input_exits_two() {
    let out = run(&[
        "index",
        "--corpus",
        "/no/such/corpus.jsonl",
        "--out",
        "/tmp/unused-index",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn usage_errors_exit_two_and_help_exits_zero() {
    assert_eq!(run(&["query", "--k", "ten"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn query_behaviour() {
    let f = Fixture::new();
    let plain = f.path("plain");
    let emb = f.path("emb");
    let queries = f.path("gen/corpus.jsonl");

    // hybrid needs embeddings
    let out = run(&[
        "query",
        "--index",
        s(&plain),
        "--text",
        "capital model",
        "--scheme",
        "hybrid",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // default scheme follows the index contents
    let line = ok(&["query", "--index", s(&plain), "--text", "capital model"]);
    assert!(line.contains("\"scheme\":\"bm25lplus\""));
    let lines = ok(&["query", "--index", s(&emb), "--queries", s(&queries), "--k", "3"]);
    assert_eq!(lines.lines().count(), 150);
    assert!(lines.lines().all(|l| l.contains("\"scheme\":\"hybrid\"")));
    assert!(lines.contains("measure_ids"));

    // the top 10 is a prefix of the top 100
    for scheme in ["bm25", "tfidf", "hybrid", "random"] {
        let parse = |k: &str| -> Vec<String> {
            let out = ok(&[
                "query",
                "--index",
                s(&emb),
                "--queries",
                s(&queries),
                "--scheme",
                scheme,
                "--k",
                k,
            ]);
            let v: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
            v["hits"]
                .as_array()
                .unwrap()
                .iter()
                .map(|h| h["id"].as_str().unwrap().to_string())
                .collect()
        };
        let (short, long) = (parse("10"), parse("100"));
        assert_eq!(short.len(), 10);
        assert_eq!(long.len(), 100);
        assert_eq!(short[..], long[..10], "{scheme}");
    }
}

#[test]
fn eval_writes_reports() {
    let f = Fixture::new();
    let labels = f.path("gen/labels.jsonl");
    let plain_out = f.path("eval-plain");
    let stdout = ok(&[
        "eval",
        "--index",
        s(&f.path("emb")),
        "--labels",
        s(&labels),
        "--m",
        "50",
        "--reps",
        "10",
        "--schemes",
        "random,bm25,tfidf",
        "--out",
        s(&plain_out),
    ]);
    assert!(plain_out.join("results.csv").exists());
    assert!(!plain_out.join("results_prefilter.csv").exists());
    assert!(plain_out.join("report.json").exists());
    assert!(stdout.contains("model,MAP@100,MRR@100,avg score"));

    let csv = std::fs::read_to_string(plain_out.join("results.csv")).unwrap();
    let map = |label: &str| -> f64 {
        let line = csv.lines().find(|l| l.starts_with(&format!("{label},"))).unwrap();
        line.split(',').nth(1).unwrap().parse().unwrap()
    };
    assert!(map("Random") < 0.5 * map("BM25"), "{csv}");
    assert!(map("Random") < 0.5 * map("TF-IDF"), "{csv}");

    let pre_out = f.path("eval-pre");
    ok(&[
        "eval",
        "--index",
        s(&f.path("emb")),
        "--labels",
        s(&labels),
        "--m",
        "50",
        "--reps",
        "5",
        "--schemes",
        "bm25",
        "--prefilter",
        "--out",
        s(&pre_out),
    ]);
    assert!(pre_out.join("results.csv").exists());
    assert!(pre_out.join("results_prefilter.csv").exists());
}

#[test]
fn simulate_prints_every_system_and_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "simulate",
        "--mc-runs",
        "4",
        "--reps",
        "20",
        "--db-size",
        "400",
        "--out",
        s(dir.path()),
    ]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "system,g_tilde,map,map_se,mrr,mrr_se");
    assert_eq!(lines.len(), 13);
    assert!(dir.path().join("bounds.csv").exists());
    let plot: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bounds_plot.json")).unwrap()).unwrap();
    assert_eq!(plot.as_array().unwrap().len(), 3);
}

#[test]
fn config_file_fills_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 1\n[simulate]\ng_tilde = \"5,10\"\nmc_runs = 3\nreps = 10\ndb_size = 300\n",
    )
    .unwrap();
    let from_config = ok(&["--config", s(&cfg), "simulate"]);
    assert_eq!(from_config.lines().count(), 1 + 3 * 2);
    let overridden = ok(&["--config", s(&cfg), "simulate", "--g-tilde", "5"]);
    assert_eq!(overridden.lines().count(), 1 + 3);

    std::fs::write(&cfg, "[simulate]\nmc_runs = \"many\"\n").unwrap();
    assert_eq!(run(&["--config", s(&cfg), "simulate"]).status.code(), Some(2));
}

#[test]
fn seed_changes_random_output() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        ok(&[
            "--seed",
            seed,
            "gen-corpus",
            "--n",
            "60",
            "--clusters",
            "6",
            "--dim",
            "4",
            "--out",
            s(&out),
        ]);
        std::fs::read(out.join("corpus.jsonl")).unwrap()
    };
    assert_eq!(gen("1", "a"), gen("1", "b"));
    assert_ne!(gen("1", "c"), gen("2", "d"));
}
