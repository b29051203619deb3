//! Command-level behavior of the binary: outputs, exit codes and diagnostics.

mod common;

use std::path::Path;

use common::*;

fn code(out: &std::process::Output) -> Option<i32> {
    out.status.code()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn group(out: &Path) -> std::process::Output {
    designcoder(&["--out", path_str(out), "group", path_str(&fixture("design.json"))])
}

#[test]
fn group_writes_the_golden_tree() {
    let dir = tempfile::tempdir().unwrap();
    let out = group(dir.path());
    assert_eq!(code(&out), Some(0), "{}", stderr(&out));
    assert_eq!(
        std::fs::read(dir.path().join("tree.json")).unwrap(),
        std::fs::read(fixture("golden/tree.json")).unwrap()
    );
    let log = std::fs::read_to_string(dir.path().join("run.log")).unwrap();
    assert!(log.contains("group: ok"), "{log}");
    assert!(!dir.path().join(".designcoder.lock").exists(), "lock released");
}

#[test]
fn a_missing_transcript_entry_exits_3_with_the_digest() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let out = designcoder(&[
        "--transcript",
        path_str(&empty),
        "--out",
        path_str(&dir.path().join("o")),
        "group",
        path_str(&fixture("design.json")),
    ]);
    assert_eq!(code(&out), Some(3));
    let err = stderr(&out);
    assert!(err.contains("`divide`"), "{err}");
    let digest = err
        .split(|c: char| !c.is_ascii_hexdigit())
        .find(|w| w.len() == 64);
    assert!(digest.is_some(), "no digest in {err}");
}

#[test]
fn a_malformed_document_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("doc.json");
    std::fs::write(&doc, "{\"screen\": ").unwrap();
    let out = designcoder(&["--out", path_str(&dir.path().join("o")), "group", path_str(&doc)]);
    assert_eq!(code(&out), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).starts_with("error: group:"), "{}", stderr(&out));
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let tree = fixture("golden/tree.json");
    let doc = fixture("design.json");
    let mut pages = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = designcoder(&["--out", path_str(&out_dir), "generate", path_str(&doc), path_str(&tree)]);
        assert_eq!(code(&out), Some(0), "{}", stderr(&out));
        pages.push(snapshot_dir(&out_dir.join("page")));
    }
    assert!(diff_dirs(&pages[0], &pages[1]).is_empty());
    assert!(diff_dirs(&pages[0], &snapshot_dir(&fixture("golden/page"))).is_empty());
}

#[test]
fn generate_without_a_tree_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = designcoder(&[
        "--out",
        path_str(&dir.path().join("o")),
        "generate",
        path_str(&fixture("design.json")),
        path_str(&missing),
    ]);
    assert_eq!(code(&out), Some(2), "{}", stderr(&out));
}

#[test]
fn a_tree_for_another_document_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut tree = read_json(&fixture("golden/tree.json"));
    tree["root"]["children"].as_array_mut().unwrap().remove(0);
    let path = dir.path().join("tree.json");
    std::fs::write(&path, tree.to_string()).unwrap();
    let out = designcoder(&[
        "--out",
        path_str(&dir.path().join("o")),
        "generate",
        path_str(&fixture("design.json")),
        path_str(&path),
    ]);
    assert_eq!(code(&out), Some(4), "{}", stderr(&out));
}

#[test]
fn a_malformed_snapshot_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("snap.json");
    std::fs::write(&snap, "{\"screenshot\": \"two.png\", \"elements\": 7}").unwrap();
    let page = fixture("golden/page");
    let out = designcoder(&[
        "--out",
        path_str(&dir.path().join("o")),
        "refine",
        path_str(&page),
        path_str(&page.join("tree.json")),
        path_str(&fixture("design.json")),
        "--snapshot",
        path_str(&snap),
    ]);
    assert_eq!(code(&out), Some(2), "{}", stderr(&out));
}

#[test]
fn evaluating_a_tree_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let truth = fixture("truth_tree.json");
    let screen = fixture("screen.png");
    let report = dir.path().join("r.json");
    let out = designcoder(&[
        "--out",
        path_str(dir.path()),
        "evaluate",
        path_str(&truth),
        path_str(&truth),
        "--pred-image",
        path_str(&screen),
        "--truth-image",
        path_str(&screen),
        "--report",
        path_str(&report),
    ]);
    assert_eq!(code(&out), Some(0), "{}", stderr(&out));
    let r = read_json(&report);
    assert_eq!(r["mse"], 0.0);
    assert_eq!(r["ssim"], 1.0);
    assert_eq!(r["tree_bleu"], 1.0);
    assert_eq!(r["container_match"], 1.0);
    assert_eq!(r["ted"], 0.0);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("MSE"), "{table}");
}

#[test]
fn trees_alone_omit_the_visual_scores() {
    let dir = tempfile::tempdir().unwrap();
    let truth = fixture("truth_tree.json");
    let out = designcoder(&["--out", path_str(dir.path()), "evaluate", path_str(&truth), path_str(&truth)]);
    assert_eq!(code(&out), Some(0), "{}", stderr(&out));
    let r = read_json(&dir.path().join("report.json"));
    let keys: Vec<&str> = r.as_object().unwrap().keys().map(String::as_str).collect();
    for visual in ["mse", "ssim", "clip"] {
        assert!(!keys.contains(&visual), "{keys:?}");
    }
}

#[test]
fn evaluate_reproduces_the_pipeline_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = designcoder(&[
        "--out",
        path_str(dir.path()),
        "evaluate",
        path_str(&fixture("golden/page/tree.json")),
        path_str(&fixture("truth_tree.json")),
        "--pred-image",
        path_str(&fixture("snapshots/two.png")),
        "--truth-image",
        path_str(&fixture("screen.png")),
    ]);
    assert_eq!(code(&out), Some(0), "{}", stderr(&out));
    assert_eq!(
        std::fs::read(dir.path().join("report.json")).unwrap(),
        std::fs::read(fixture("golden/report.json")).unwrap()
    );
}

#[test]
fn a_run_without_snapshots_skips_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let out = designcoder(&["--out", path_str(dir.path()), "run", path_str(&fixture("design.json"))]);
    assert_eq!(code(&out), Some(0), "{}", stderr(&out));
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["refine"], "skipped");
    assert!(manifest.get("report").is_none());
    assert!(!dir.path().join("refined").exists());
}

#[test]
fn live_mode_without_a_key_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = designcoder(&[
        "--backend",
        "live",
        "--base-url",
        "http://127.0.0.1:9",
        "--model",
        "m",
        "--out",
        path_str(dir.path()),
        "group",
        path_str(&fixture("design.json")),
    ]);
    assert_eq!(code(&out), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("DESIGNCODER_API_KEY"), "{}", stderr(&out));
}

#[test]
fn a_held_lock_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(".designcoder.lock"), "").unwrap();
    let out = group(dir.path());
    assert_eq!(code(&out), Some(1), "{}", stderr(&out));
    assert!(!dir.path().join("tree.json").exists());
    assert!(dir.path().join(".designcoder.lock").exists(), "someone else's lock is left alone");
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = designcoder(&["--max-concurrency", "0", "--out", path_str(dir.path()), "group", path_str(&fixture("design.json"))]);
    assert_eq!(code(&out), Some(2), "{}", stderr(&out));
    let out = designcoder(&[
        "--style-mode",
        "llm",
        "--out",
        path_str(dir.path()),
        "generate",
        path_str(&fixture("design.json")),
        path_str(&fixture("golden/tree.json")),
    ]);
    // the fixture transcript holds no per-leaf style answers
    assert_eq!(code(&out), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("`style`"), "{}", stderr(&out));
}
