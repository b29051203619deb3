#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BLESS_ENV: &str = "DESIGNCODER_BLESS";

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/fruit_salad").join(rel)
}

/// Run the CLI with the fixture config, without any credentials or embedding service.
pub fn designcoder(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_designcoder"))
        .arg("--config")
        .arg(fixture("config.json"))
        .args(args)
        .env_remove("DESIGNCODER_API_KEY")
        .env_remove("DESIGNCODER_EMBED_URL")
        .output()
        .expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Every file under `dir` by `/`-separated relative path, run log and lock excluded.
pub fn snapshot_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
                continue;
            }
            let rel: Vec<String> = path
                .strip_prefix(root)
                .unwrap()
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect();
            let rel = rel.join("/");
            if rel != "run.log" && rel != ".designcoder.lock" {
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Names of files that differ or exist on one side only.
pub fn diff_dirs(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).cloned().collect()
}

/// The full fixture run: refinement against the two-defect snapshot plus evaluation.
pub fn full_run(out: &Path) -> Output {
    designcoder(&[
        "--out",
        path_str(out),
        "run",
        path_str(&fixture("design.json")),
        "--snapshot",
        path_str(&fixture("snapshots/two.json")),
        "--truth",
        path_str(&fixture("truth_tree.json")),
    ])
}

/// Replace `golden` with the contents of `out`.
pub fn bless(out: &Path, golden: &Path) {
    let _ = std::fs::remove_dir_all(golden);
    for (rel, bytes) in snapshot_dir(out) {
        let path = golden.join(rel);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, bytes).unwrap();
    }
}
