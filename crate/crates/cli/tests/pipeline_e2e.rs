//! End-to-end runs of the compiled `sgi` binary: artifact sets, exit codes,
//! partial-failure behavior, manifest integrity, and offline enforcement.

use std::path::Path;
use std::process::{Command, Output};

fn sgi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sgi"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    sgi().args(args).current_dir(dir).output().expect("spawn sgi")
}

fn assert_exit(output: &Output, expected: i32) {
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert_eq!(output.status.code(), Some(expected), "stderr:\n{stderr}");
}

/// synth → score with the bundled embeddings, in `dir`; returns the scores path.
fn synth_and_score(dir: &Path, n: usize) -> std::path::PathBuf {
    let out = run(&["--quiet", "synth", "--out", "synth", "--n", &n.to_string()], dir);
    assert_exit(&out, 0);
    let out = run(
        &[
            "--quiet",
            "score",
            "--input",
            "synth/instances.jsonl",
            "--offline-embeddings",
            "synth/embeddings.jsonl",
            "--model",
            "synthetic",
            "--out",
            "score",
        ],
        dir,
    );
    assert_exit(&out, 0);
    dir.join("score/scores-synthetic.jsonl")
}

fn file_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn evaluate_emits_one_report_per_analysis_plus_manifest() {
    let dir = tempfile::tempdir().unwrap();
    synth_and_score(dir.path(), 120);
    let out = run(
        &["--quiet", "evaluate", "--input", "score/scores-synthetic.jsonl", "--out", "eval"],
        dir.path(),
    );
    assert_exit(&out, 0);

    assert_eq!(
        file_names(&dir.path().join("eval")),
        vec![
            "calibration.json",
            "crossmodel.json",
            "decomposition.json",
            "manifest.json",
            "separation.json",
            "stratified.json",
            "subgroups.json",
        ]
    );

    // Single-model runs keep the cross-model slot with an explicit notice.
    let crossmodel = std::fs::read_to_string(dir.path().join("eval/crossmodel.json")).unwrap();
    assert!(crossmodel.contains("\"skipped\""));
    assert!(crossmodel.contains("two models"));

    let separation = std::fs::read_to_string(dir.path().join("eval/separation.json")).unwrap();
    assert!(separation.contains("\"cohens_d\""));
}

#[test]
fn csv_format_adds_companion_tables() {
    let dir = tempfile::tempdir().unwrap();
    synth_and_score(dir.path(), 120);
    let out = run(
        &[
            "--quiet",
            "evaluate",
            "--input",
            "score/scores-synthetic.jsonl",
            "--out",
            "eval",
            "--format",
            "both",
        ],
        dir.path(),
    );
    assert_exit(&out, 0);

    let names = file_names(&dir.path().join("eval"));
    for expected in [
        "separation.csv",
        "stratified.csv",
        "subgroups.csv",
        "decomposition.csv",
        "calibration_bins.csv",
        "calibration_deciles.csv",
    ] {
        assert!(names.contains(&expected.to_string()), "missing {expected} in {names:?}");
    }
    // The skipped cross-model analysis gets no CSV, only its JSON notice.
    assert!(!names.contains(&"crossmodel.csv".to_string()));

    let csv = std::fs::read_to_string(dir.path().join("eval/separation.csv")).unwrap();
    assert!(csv.starts_with("model_id,score_kind,"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn manifest_lists_every_artifact_with_matching_digest() {
    use sgi_cli::report::file_digest;

    let dir = tempfile::tempdir().unwrap();
    synth_and_score(dir.path(), 60);
    let out = run(
        &["--quiet", "evaluate", "--input", "score/scores-synthetic.jsonl", "--out", "eval"],
        dir.path(),
    );
    assert_exit(&out, 0);

    for stage in ["synth", "score", "eval"] {
        let stage_dir = dir.path().join(stage);
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(stage_dir.join("manifest.json")).unwrap())
                .unwrap();
        let artifacts = manifest["artifacts"].as_array().unwrap();

        let mut listed: Vec<String> =
            artifacts.iter().map(|a| a["name"].as_str().unwrap().to_string()).collect();
        listed.sort();
        let mut on_disk: Vec<String> = file_names(&stage_dir)
            .into_iter()
            .filter(|n| n != "manifest.json" && n != "cache")
            .collect();
        on_disk.sort();
        assert_eq!(listed, on_disk, "manifest coverage for {stage}");

        for artifact in artifacts {
            let name = artifact["name"].as_str().unwrap();
            let digest = file_digest(&stage_dir.join(name)).unwrap();
            assert_eq!(digest, artifact["sha256"].as_str().unwrap(), "digest of {stage}/{name}");
            let bytes = std::fs::metadata(stage_dir.join(name)).unwrap().len();
            assert_eq!(bytes, artifact["bytes"].as_u64().unwrap(), "size of {stage}/{name}");
        }
        assert!(manifest["config_digest"].as_str().unwrap().len() == 64);
    }
}

#[test]
fn malformed_lines_skip_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--quiet", "synth", "--out", "synth", "--n", "100"], dir.path());
    assert_exit(&out, 0);

    // Corrupt one line of the 100-line input.
    let instances_path = dir.path().join("synth/instances.jsonl");
    let text = std::fs::read_to_string(&instances_path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 100);
    lines[49] = "this is not json at all";
    std::fs::write(&instances_path, format!("{}\n", lines.join("\n"))).unwrap();

    let out = run(
        &[
            "--quiet",
            "score",
            "--input",
            "synth/instances.jsonl",
            "--offline-embeddings",
            "synth/embeddings.jsonl",
            "--model",
            "synthetic",
            "--out",
            "score",
        ],
        dir.path(),
    );
    assert_exit(&out, 2);

    let scores = std::fs::read_to_string(dir.path().join("score/scores-synthetic.jsonl")).unwrap();
    assert_eq!(scores.lines().count(), 99);
    let skips = std::fs::read_to_string(dir.path().join("score/skips.jsonl")).unwrap();
    assert_eq!(skips.lines().count(), 1);
    let skip: serde_json::Value = serde_json::from_str(skips.lines().next().unwrap()).unwrap();
    assert_eq!(skip["line"], 50);
}

#[test]
fn unlabeled_corpus_scores_and_reports_notices() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--quiet", "synth", "--out", "synth", "--n", "60"], dir.path());
    assert_exit(&out, 0);

    // Strip every label; scoring itself never needs them.
    let instances_path = dir.path().join("synth/instances.jsonl");
    let stripped: String = std::fs::read_to_string(&instances_path)
        .unwrap()
        .lines()
        .map(|line| {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            v["label"] = serde_json::Value::Null;
            format!("{v}\n")
        })
        .collect();
    std::fs::write(&instances_path, stripped).unwrap();

    let out = run(
        &[
            "--quiet",
            "score",
            "--input",
            "synth/instances.jsonl",
            "--offline-embeddings",
            "synth/embeddings.jsonl",
            "--model",
            "synthetic",
            "--out",
            "score",
        ],
        dir.path(),
    );
    assert_exit(&out, 0);

    let out = run(
        &["--quiet", "evaluate", "--input", "score/scores-synthetic.jsonl", "--out", "eval"],
        dir.path(),
    );
    assert_exit(&out, 0);

    // Label-dependent analyses explain themselves instead of failing the run.
    let separation = std::fs::read_to_string(dir.path().join("eval/separation.json")).unwrap();
    assert!(separation.contains("\"skipped\""));
    assert!(separation.to_lowercase().contains("label"));
    assert_eq!(file_names(&dir.path().join("eval")).len(), 7);
}

#[test]
fn no_embedding_source_is_a_fatal_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--quiet", "synth", "--out", "synth", "--n", "10"], dir.path());
    assert_exit(&out, 0);
    let out = run(
        &[
            "--quiet",
            "score",
            "--input",
            "synth/instances.jsonl",
            "--model",
            "synthetic",
            "--out",
            "score",
        ],
        dir.path(),
    );
    assert_exit(&out, 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("embedding source"), "stderr: {stderr}");
}

#[test]
fn no_network_env_blocks_cold_provider_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--quiet", "synth", "--out", "synth", "--n", "10"], dir.path());
    assert_exit(&out, 0);
    let out = sgi()
        .args([
            "--quiet",
            "score",
            "--input",
            "synth/instances.jsonl",
            "--provider-url",
            "http://127.0.0.1:1/embed",
            "--model",
            "anything",
            "--out",
            "score",
        ])
        .current_dir(dir.path())
        .env("NO_NETWORK", "1")
        .output()
        .expect("spawn sgi");
    assert_exit(&out, 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    // The failure names missing embeddings; no connection was attempted.
    assert!(stderr.contains("missing embeddings"), "stderr: {stderr}");
}

#[test]
fn config_file_fields_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--quiet", "synth", "--out", "synth", "--n", "30"], dir.path());
    assert_exit(&out, 0);

    std::fs::write(
        dir.path().join("run.json"),
        serde_json::json!({
            "input": "synth/instances.jsonl",
            "offline_embeddings": "synth/embeddings.jsonl",
            "model_ids": ["synthetic"],
            "out": "wrong-dir"
        })
        .to_string(),
    )
    .unwrap();

    // --out overrides the config file's out.
    let out = run(
        &["--quiet", "score", "--config", "run.json", "--out", "score"],
        dir.path(),
    );
    assert_exit(&out, 0);
    assert!(dir.path().join("score/scores-synthetic.jsonl").exists());
    assert!(!dir.path().join("wrong-dir").exists());
}

#[test]
fn sample_n_draws_a_label_stratified_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--quiet", "synth", "--out", "synth", "--n", "100"], dir.path());
    assert_exit(&out, 0);
    let out = run(
        &[
            "--quiet",
            "score",
            "--input",
            "synth/instances.jsonl",
            "--offline-embeddings",
            "synth/embeddings.jsonl",
            "--model",
            "synthetic",
            "--out",
            "score",
            "--sample-n",
            "40",
        ],
        dir.path(),
    );
    assert_exit(&out, 0);

    let scores = std::fs::read_to_string(dir.path().join("score/scores-synthetic.jsonl")).unwrap();
    let records: Vec<serde_json::Value> =
        scores.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 40);
    let n_halluc =
        records.iter().filter(|r| r["label"].as_str() == Some("hallucinated")).count();
    // The synthetic corpus is half hallucinated; stratification keeps that.
    assert_eq!(n_halluc, 20);
}

#[test]
fn crossmodel_shortcut_produces_a_two_by_two_matrix() {
    let dir = tempfile::tempdir().unwrap();
    synth_and_score(dir.path(), 80);

    // Second "model": same vectors under a different model id, scored again.
    let renamed: String = std::fs::read_to_string(dir.path().join("synth/embeddings.jsonl"))
        .unwrap()
        .lines()
        .map(|line| {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            v["model"] = serde_json::Value::String("synthetic-b".to_string());
            format!("{v}\n")
        })
        .collect();
    std::fs::write(dir.path().join("synth/embeddings-b.jsonl"), renamed).unwrap();
    let out = run(
        &[
            "--quiet",
            "score",
            "--input",
            "synth/instances.jsonl",
            "--offline-embeddings",
            "synth/embeddings-b.jsonl",
            "--model",
            "synthetic-b",
            "--out",
            "score-b",
        ],
        dir.path(),
    );
    assert_exit(&out, 0);

    let out = run(
        &[
            "--quiet",
            "crossmodel",
            "--input",
            "score/scores-synthetic.jsonl",
            "--input",
            "score-b/scores-synthetic-b.jsonl",
            "--out",
            "agree",
        ],
        dir.path(),
    );
    assert_exit(&out, 0);

    assert_eq!(file_names(&dir.path().join("agree")), vec!["crossmodel.json", "manifest.json"]);
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("agree/crossmodel.json")).unwrap(),
    )
    .unwrap();
    let pearson = report["report"]["pearson"].as_array().unwrap();
    assert_eq!(pearson.len(), 2);
    assert_eq!(pearson[0].as_array().unwrap().len(), 2);
    // Identical scores under both ids: perfect agreement off the diagonal.
    assert_eq!(pearson[0][1], 1.0);
    assert_eq!(report["report"]["n_common"], 80);
}
