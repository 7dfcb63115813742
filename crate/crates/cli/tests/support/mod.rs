#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn corpus() -> PathBuf {
    fixtures().join("corpus.jsonl")
}

pub fn cache() -> PathBuf {
    fixtures().join("cache")
}

/// The binary with endpoint variables cleared and logging quiet.
pub fn phee(cwd: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_phee"));
    c.current_dir(cwd).env_remove("PHEE_ENDPOINT").env_remove("PHEE_API_KEY").env("RUST_LOG", "error");
    c
}

pub fn run_ok(cwd: &Path, args: &[&str]) -> Output {
    let out = phee(cwd).args(args).output().expect("spawn phee");
    assert!(
        out.status.success(),
        "phee {} failed:\n{}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn read_json(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

/// prepare-data, three cache-only extraction runs, evaluation and the report,
/// all under `dir` with relative paths.
pub fn offline_pipeline(dir: &Path) -> Result<(), String> {
    let corpus = corpus();
    let cache = cache();
    let corpus = corpus.to_str().unwrap();
    let cache = cache.to_str().unwrap();
    let steps: Vec<Vec<&str>> = vec![
        vec!["prepare-data", "--input", corpus, "--out", "data"],
        vec!["extract", "--data", "data", "--out", "zs", "--strategy", "explanation", "--cache-only", "--cache-dir", cache],
        vec![
            "extract", "--data", "data", "--out", "fs", "--strategy", "explanation", "--shots", "5", "--select", "bm25",
            "--cache-only", "--cache-dir", cache,
        ],
        vec!["extract", "--data", "data", "--out", "pl", "--strategy", "pipeline", "--cache-only", "--cache-dir", cache],
        vec!["evaluate", "--gold", "data/test.jsonl", "--pred", "zs/predictions.jsonl", "--out", "eval_zs", "--label", "zero-shot"],
        vec!["evaluate", "--gold", "data/test.jsonl", "--pred", "fs/predictions.jsonl", "--out", "eval_fs", "--label", "bm25-5"],
        vec!["evaluate", "--gold", "data/test.jsonl", "--pred", "pl/predictions.jsonl", "--out", "eval_pl", "--label", "pipeline"],
        vec![
            "report", "--run", "zero-shot=eval_zs/report.json", "--run", "bm25-5=eval_fs/report.json", "--run",
            "pipeline=eval_pl/report.json", "--out", "report",
        ],
    ];
    for args in steps {
        let out = phee(dir).args(&args).output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("phee {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()));
        }
    }
    Ok(())
}

/// Relative path → contents for every file under `root`.
pub fn snapshot(root: &Path) -> std::collections::BTreeMap<PathBuf, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}
