use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ncity(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncity")).args(args).env_remove("NCITY_SEED").env_remove("NCITY_RUN_DIR").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = ncity(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fixture(dir: &Path, public: &str, indoor: &str) -> std::path::PathBuf {
    let fx = dir.join("fx");
    ok(&[
        "--seed",
        "3",
        "synth",
        "--public",
        public,
        "--indoor",
        indoor,
        "--dim",
        "6",
        "--box-deg",
        "0.01",
        "--pano-width",
        "32",
        "--out",
        p(&fx),
    ]);
    fx
}

fn ingest(fx: &Path, run: &Path) {
    ok(&["--run-dir", p(run), "ingest", "--catalog", p(&fx.join("catalog.csv")), "--embeddings", p(&fx.join("embeddings.emb"))]);
}

fn full_run(dir: &Path, jobs: &str) -> String {
    let fx = fixture(dir, "10", "5");
    let run = dir.join("run");
    ingest(&fx, &run);
    let r = p(&run);
    ok(&["--run-dir", r, "--seed", "3", "locate"]);
    ok(&[
        "--run-dir",
        r,
        "--seed",
        "3",
        "--jobs",
        jobs,
        "fetch",
        "--mock-dir",
        p(&fx.join("streetview")),
        "--fallbacks",
        p(&fx.join("fallbacks")),
    ]);
    let out = ok(&["--run-dir", r, "--seed", "3", "--jobs", jobs, "stylize"]);
    out.split("manifest sha256 ").nth(1).expect("digest line").trim().to_owned()
}

#[test]
fn five_artwork_run_is_reproducible_across_worker_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let da = full_run(a.path(), "1");
    assert_eq!(da.len(), 64);
    assert_eq!(da, full_run(b.path(), "4"));
    let run = a.path().join("run");
    assert_eq!(std::fs::read_to_string(run.join("manifest.jsonl")).unwrap().lines().count(), 5);
    let record: Value = serde_json::from_str(&std::fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    for stage in ["locate", "stylize"] {
        assert!(record["stages"][stage]["seed"].is_u64(), "{stage} seed missing: {record}");
    }
    // second stylize is a no-op on the manifest
    let again = ok(&["--run-dir", p(&run), "--seed", "3", "stylize"]);
    assert!(again.contains(&da));
}

#[test]
fn locate_on_minimal_collection_predicts_the_single_indoor_work() {
    // one public work is held out, leaving exactly three neighbours
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture(dir.path(), "4", "1");
    let run = dir.path().join("run");
    ingest(&fx, &run);
    ok(&["--run-dir", p(&run), "locate", "--method", "similar", "--train-fraction", "0.75"]);
    let csv = std::fs::read_to_string(run.join("predictions.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1, "{csv}");
    assert!(rows[0].starts_with("i0000,"));
}

#[test]
fn identical_panoramas_score_one_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    full_run(dir.path(), "2");
    let run = dir.path().join("run");
    let manifest = run.join("manifest.jsonl");
    let rewritten: Vec<String> = std::fs::read_to_string(&manifest)
        .unwrap()
        .lines()
        .map(|line| {
            let mut v: Value = serde_json::from_str(line).unwrap();
            v["assets"]["art_up"] = v["assets"]["pano"].clone();
            v.to_string()
        })
        .collect();
    std::fs::write(&manifest, rewritten.join("\n") + "\n").unwrap();
    ok(&["--run-dir", p(&run), "evaluate"]);
    let summary = std::fs::read_to_string(run.join("summary.csv")).unwrap();
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let mean: f64 = f[1].parse().unwrap();
        assert!((mean - 1.0).abs() < 1e-9, "{line}");
        assert_eq!(f[2].parse::<f64>().unwrap(), 0.0, "{line}");
    }
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    let out = ok(&["--dry-run", "synth", "--public", "4", "--indoor", "2", "--out", p(&fx)]);
    assert!(!out.is_empty());
    assert!(!fx.exists());

    let fx = fixture(dir.path(), "6", "2");
    let run = dir.path().join("run");
    ok(&[
        "--dry-run",
        "--run-dir",
        p(&run),
        "ingest",
        "--catalog",
        p(&fx.join("catalog.csv")),
        "--embeddings",
        p(&fx.join("embeddings.emb")),
    ]);
    assert!(!run.exists());
    ingest(&fx, &run);
    let before: Vec<_> = std::fs::read_dir(&run).unwrap().map(|e| e.unwrap().file_name()).collect();
    ok(&["--dry-run", "--run-dir", p(&run), "locate"]);
    let after: Vec<_> = std::fs::read_dir(&run).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(before.len(), after.len());
}

#[test]
fn usage_errors_exit_2_and_stage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    for args in [vec!["frobnicate"], vec!["--jobs", "0", "locate"], vec!["--run-dir", p(&run), "locate", "--method", "psychic"]] {
        let out = ncity(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = ncity(&["--run-dir", p(&run), "locate"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error [locate]"), "{err}");

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    assert_eq!(ncity(&["--config", p(&bad), "--run-dir", p(&run), "locate"]).status.code(), Some(2));
}

#[test]
fn changed_stylize_options_are_refused_on_an_existing_manifest() {
    let dir = tempfile::tempdir().unwrap();
    full_run(dir.path(), "2");
    let run = dir.path().join("run");
    let out = ncity(&["--run-dir", p(&run), "--seed", "3", "stylize", "--steps", "7"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error [stylize]"));
}
