//! Runs the fixture corpus through every CLI subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use super::http_stub;

pub const QUERY: &str = "乙得否請求甲返還借款";
pub const QE_REPLY: &str = "事實：甲向乙借款五十萬元，未約定返還期限，經乙催告後逾期未還。\n爭點：乙得否依消費借貸關係請求甲返還借款及遲延利息。";

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixtures() -> PathBuf {
    manifest_dir().join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    manifest_dir().join("tests/golden")
}

/// The binary with `HCTREE_*` variables from the caller's environment removed.
pub fn hctree() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hctree"));
    for (k, _) in std::env::vars() {
        if k.starts_with("HCTREE_") {
            cmd.env_remove(k);
        }
    }
    cmd.env("RUST_LOG", "warn");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    hctree().args(args).output().unwrap()
}

pub fn stdout_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "hctree {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Every golden output, keyed by golden file name.
pub fn pipeline_outputs(work: &Path) -> BTreeMap<String, String> {
    let fx = fixtures();
    let conf = fx.join("hctree.conf");
    let corpus = fx.join("corpus");
    let idx = work.join("index");
    let cache = work.join("cache");
    let mut out = BTreeMap::new();

    let build = [
        "--config",
        p(&conf),
        "build",
        p(&corpus),
        "--out",
        p(&idx),
        "--cache-dir",
        p(&cache),
    ];
    out.insert("build.txt".into(), stdout_ok(&build));
    out.insert("build_rerun.txt".into(), stdout_ok(&build));

    out.insert(
        "inspect_stats.txt".into(),
        stdout_ok(&["inspect", p(&idx), "--stats"]),
    );
    out.insert(
        "inspect_root.txt".into(),
        stdout_ok(&["inspect", p(&idx), "--node", "21"]),
    );
    out.insert(
        "inspect_leaf.txt".into(),
        stdout_ok(&["inspect", p(&idx), "--node", "3"]),
    );

    out.insert(
        "query_tree.txt".into(),
        stdout_ok(&["query", p(&idx), QUERY]),
    );
    out.insert(
        "query_tree.json".into(),
        stdout_ok(&["query", p(&idx), QUERY, "--json"]),
    );
    out.insert(
        "query_tree_mips.json".into(),
        stdout_ok(&[
            "query",
            p(&idx),
            "lease deposit",
            "--exclude-root",
            "--mips-m",
            "2",
            "--json",
        ]),
    );
    out.insert(
        "query_topk.json".into(),
        stdout_ok(&[
            "query",
            p(&idx),
            QUERY,
            "--mode",
            "topk",
            "--k",
            "3",
            "--json",
        ]),
    );
    out.insert(
        "query_topk_all.txt".into(),
        stdout_ok(&["query", p(&idx), QUERY, "--mode", "topk", "--k", "11"]),
    );

    let server = http_stub::spawn(|_| (200, http_stub::chat_reply(QE_REPLY)));
    let endpoint = format!("qe.endpoint={}/chat/completions", server.url);
    out.insert(
        "query_tree_qe.json".into(),
        stdout_ok(&[
            "query",
            p(&idx),
            QUERY,
            "--mode",
            "tree-qe",
            "--json",
            "--set",
            &endpoint,
            "--set",
            "qe.model=stub-chat",
        ]),
    );
    let sent = server.requests.lock().unwrap().clone();
    assert_eq!(sent.len(), 1);
    let body: serde_json::Value = serde_json::from_str(&sent[0]).unwrap();
    assert_eq!(body["model"], "stub-chat");
    let prompt = body["messages"][0]["content"].as_str().unwrap();
    assert!(prompt.ends_with(&format!("{QUERY}\n")), "prompt: {prompt}");

    let json = work.join("eval.json");
    let csv = work.join("eval.csv");
    let judgments = fx.join("judgments.jsonl");
    out.insert(
        "eval_table.txt".into(),
        stdout_ok(&[
            "eval",
            p(&judgments),
            "--index",
            p(&idx),
            "--methods",
            "origin,tree,tree-qe",
            "--out-json",
            p(&json),
            "--out-csv",
            p(&csv),
        ]),
    );
    out.insert(
        "eval_report.json".into(),
        std::fs::read_to_string(&json).unwrap(),
    );
    out.insert(
        "eval_diffs.csv".into(),
        std::fs::read_to_string(&csv).unwrap(),
    );
    out
}

/// Compares against committed goldens; `UPDATE_GOLDEN=1` rewrites them.
/// Returns the names that differ.
pub fn check_goldens(outputs: &BTreeMap<String, String>) -> Vec<String> {
    let dir = golden_dir();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(&dir).unwrap();
        for (name, text) in outputs {
            std::fs::write(dir.join(name), text).unwrap();
        }
    }
    outputs
        .iter()
        .filter(|(name, text)| {
            std::fs::read_to_string(dir.join(name)).ok().as_deref() != Some(text.as_str())
        })
        .map(|(name, _)| name.clone())
        .collect()
}
