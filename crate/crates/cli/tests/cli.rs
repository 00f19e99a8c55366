//! End-to-end tests of the command-line interface, driving the built binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_voxelprune"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    entries
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().to_string(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn gen_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let res = run(&["gen", "--seed", "7", "--noise", "0.1", "--out", out.to_str().unwrap()]);
        assert_ok(&res);
    }
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
}

#[test]
fn prune_eval_export_flow_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = tmp.path().join("bundle");
    assert_ok(&run(&[
        "gen",
        "--seed",
        "3",
        "--noise",
        "0.05",
        "--out",
        bundle.to_str().unwrap(),
    ]));

    let result1 = tmp.path().join("r1.json");
    let result2 = tmp.path().join("r2.json");
    for out in [&result1, &result2] {
        let res = run(&[
            "prune",
            "--bundle",
            bundle.to_str().unwrap(),
            "--budget",
            "64",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_ok(&res);
        assert!(stdout(&res).contains("retained=64"));
    }
    assert_eq!(fs::read(&result1).unwrap(), fs::read(&result2).unwrap());

    let metrics = tmp.path().join("m.json");
    let res = run(&[
        "eval",
        "--bundle",
        bundle.to_str().unwrap(),
        "--result",
        result1.to_str().unwrap(),
        "--out",
        metrics.to_str().unwrap(),
    ]);
    assert_ok(&res);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(&metrics).unwrap()).unwrap();
    assert_eq!(report["retained_count"], 64);
    assert_eq!(report["strategy"], "geo3d");
    assert!(report["coverage"].as_f64().unwrap() > 0.0);

    let before = tmp.path().join("before.ply");
    let after = tmp.path().join("after.ply");
    let res = run(&[
        "export-ply",
        "--bundle",
        bundle.to_str().unwrap(),
        "--result",
        result1.to_str().unwrap(),
        "--out-before",
        before.to_str().unwrap(),
        "--out-after",
        after.to_str().unwrap(),
    ]);
    assert_ok(&res);

    // Vertex counts line up with the voxel counts the eval reported.
    let before_text = fs::read_to_string(&before).unwrap();
    let after_text = fs::read_to_string(&after).unwrap();
    let occupied = report["occupied_voxels"].as_u64().unwrap();
    let covered = report["covered_voxels"].as_u64().unwrap();
    assert!(before_text.contains(&format!("element vertex {occupied}")));
    assert!(after_text.contains(&format!("element vertex {covered}")));
}

/// A 16-view, 14x14-patch bundle has 3136 tokens; pruning at ratio 0.9
/// reports floor(3136 * 0.1) = 313 retained tokens.
#[test]
fn ratio_on_large_grid_reports_exact_count() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = tmp.path().join("bundle");
    assert_ok(&run(&[
        "gen",
        "--seed",
        "1",
        "--views",
        "16",
        "--patch-rows",
        "14",
        "--patch-cols",
        "14",
        "--patch-size",
        "27",
        "--objects",
        "12",
        "--out",
        bundle.to_str().unwrap(),
    ]));
    let result = tmp.path().join("r.json");
    let res = run(&[
        "prune",
        "--bundle",
        bundle.to_str().unwrap(),
        "--ratio",
        "0.9",
        "--out",
        result.to_str().unwrap(),
    ]);
    assert_ok(&res);
    let text = stdout(&res);
    assert!(text.contains("tokens=3136"), "{text}");
    assert!(text.contains("budget=313"), "{text}");
    assert!(text.contains("ratio=0.9"), "{text}");
    assert!(text.contains("retained=313"), "{text}");
}

#[test]
fn config_echo_matches_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = tmp.path().join("bundle");
    assert_ok(&run(&["gen", "--seed", "2", "--out", bundle.to_str().unwrap()]));
    let result = tmp.path().join("r.json");
    let res = run(&[
        "prune",
        "--bundle",
        bundle.to_str().unwrap(),
        "--alpha",
        "0.5",
        "--delta",
        "0.1",
        "--k",
        "8",
        "--budget",
        "51",
        "--out",
        result.to_str().unwrap(),
    ]);
    assert_ok(&res);
    let text = stdout(&res);
    assert!(text.contains("alpha=0.5 delta=0.1 k=8"), "{text}");
    let parsed: serde_json::Value = serde_json::from_slice(&fs::read(&result).unwrap()).unwrap();
    assert_eq!(parsed["config"]["alpha"], 0.5);
    assert_eq!(parsed["config"]["delta"], 0.1);
    assert_eq!(parsed["config"]["k"], 8);
}

#[test]
fn budget_and_ratio_conflict_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = tmp.path().join("bundle");
    assert_ok(&run(&["gen", "--seed", "2", "--out", bundle.to_str().unwrap()]));
    let res = run(&[
        "prune",
        "--bundle",
        bundle.to_str().unwrap(),
        "--budget",
        "10",
        "--ratio",
        "0.5",
        "--out",
        tmp.path().join("r.json").to_str().unwrap(),
    ]);
    assert!(!res.status.success());

    // And omitting both is also rejected.
    let res = run(&[
        "prune",
        "--bundle",
        bundle.to_str().unwrap(),
        "--out",
        tmp.path().join("r.json").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
}

#[test]
fn missing_bundle_fails_with_diagnostic() {
    let res = run(&[
        "prune",
        "--bundle",
        "/nonexistent/bundle",
        "--budget",
        "5",
        "--out",
        "/tmp/unused.json",
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("bundle"));
}

#[test]
fn cosine_relevance_runs_when_features_exist() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = tmp.path().join("bundle");
    assert_ok(&run(&["gen", "--seed", "5", "--out", bundle.to_str().unwrap()]));
    let res = run(&[
        "prune",
        "--bundle",
        bundle.to_str().unwrap(),
        "--relevance",
        "cosine",
        "--budget",
        "32",
        "--out",
        tmp.path().join("r.json").to_str().unwrap(),
    ]);
    assert_ok(&res);
    assert!(stdout(&res).contains("relevance=cosine"));

    // Without features the same request fails cleanly.
    let no_features = tmp.path().join("nofeat");
    assert_ok(&run(&[
        "gen",
        "--seed",
        "5",
        "--feature-dim",
        "0",
        "--out",
        no_features.to_str().unwrap(),
    ]));
    let res = run(&[
        "prune",
        "--bundle",
        no_features.to_str().unwrap(),
        "--relevance",
        "cosine",
        "--budget",
        "32",
        "--out",
        tmp.path().join("r2.json").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("features"));
}
