use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use patchforge::dataset::ArtifactRecord;
use patchforge::evaluation::{benchmark_from_records, Prediction, RegionAnnotation};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_patchforge"))
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn patchforge")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_lines<T: serde::de::DeserializeOwned>(p: &Path) -> Vec<T> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn demo(dir: &Path, images: usize) -> PathBuf {
    ok(&["demo", "--out-dir", s(dir), "--images", &images.to_string()]);
    dir.join("pipeline.toml")
}

#[test]
fn demo_then_run_emits_every_type() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo(dir.path(), 3);
    let out = ok(&["run", "--config", s(&cfg)]);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["images_succeeded"], 3);
    let by_type = summary["emitted_by_type"].as_object().unwrap();
    assert_eq!(by_type.len(), 4, "{summary}");
    let records: Vec<ArtifactRecord> = read_lines(&dir.path().join("out/records.jsonl"));
    assert_eq!(records.len() as u64, summary["emitted"].as_u64().unwrap());
    for r in &records {
        r.validate().unwrap();
        assert!(dir.path().join("out").join(&r.artifact_image).is_file());
    }
}

#[test]
fn run_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo(dir.path(), 2);
    let alt = dir.path().join("alt");
    let out = ok(&[
        "run",
        "--config",
        s(&cfg),
        "--output-dir",
        s(&alt),
        "--seed",
        "9",
        "--parallelism",
        "1",
    ]);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["images_total"], 2);
    assert!(alt.join("summary.json").is_file());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(
        run(&["run", "--config", s(&missing)]).status.code(),
        Some(2)
    );

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "input = \"c.json\"\noutput_dir = \"o\"\nbogus = 1\n").unwrap();
    let out = run(&["run", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid configuration"));

    let cfg = demo(dir.path(), 1);
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("patch_px = 16", "patch_px = 0");
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(run(&["run", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn run_with_no_successful_image_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("corpus.json"),
        r#"{"scenes": ["nowhere/scene.json"]}"#,
    )
    .unwrap();
    let cfg = dir.path().join("p.toml");
    std::fs::write(&cfg, "input = \"corpus.json\"\noutput_dir = \"out\"\n").unwrap();
    let out = run(&["run", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["images_succeeded"], 0);
    assert_eq!(summary["failed"], 0);
}

#[test]
fn stage_commands_chain_into_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    demo(d, 1);
    let scene = d.join("work/scene.json");
    ok(&[
        "perceive",
        "--manifest",
        s(&d.join("img_000/scene.json")),
        "--out",
        s(&scene),
    ]);
    let mapping = d.join("work/fuse.json");
    ok(&[
        "synthesize",
        "--scene",
        s(&scene),
        "--tool",
        "fuse",
        "--seed",
        "4",
        "--out",
        s(&mapping),
    ]);
    let job = d.join("work/fuse.job.json");
    assert!(job.is_file());
    let artifact = d.join("work/fuse.png");
    ok(&[
        "inject",
        "--scene",
        s(&scene),
        "--mapping",
        s(&mapping),
        "--out",
        s(&artifact),
    ]);
    let curation = d.join("work/fuse.curation.json");
    ok(&[
        "curate",
        "--scene",
        s(&scene),
        "--job",
        s(&job),
        "--mapping",
        s(&mapping),
        "--artifact",
        s(&artifact),
        "--out",
        s(&curation),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&curation).unwrap()).unwrap();
    assert_eq!(report["artifact_type"], "fusion");
    let ds = d.join("ds");
    for _ in 0..2 {
        ok(&[
            "emit",
            "--scene",
            s(&scene),
            "--job",
            s(&job),
            "--mapping",
            s(&mapping),
            "--artifact",
            s(&artifact),
            "--curation",
            s(&curation),
            "--out-dir",
            s(&ds),
        ]);
    }
    let records: Vec<ArtifactRecord> = read_lines(&ds.join("records.jsonl"));
    assert_eq!(records.len(), 2);
    records[0].validate().unwrap();
    let clean: Vec<serde_json::Value> = read_lines(&ds.join("vqa_clean.jsonl"));
    assert_eq!(clean.len(), 1, "clean sample is appended once");

    let overlay = d.join("work/overlay.png");
    ok(&[
        "overlay",
        "--run-dir",
        s(&ds),
        "--record-id",
        &records[0].record_id,
        "--out",
        s(&overlay),
    ]);
    assert!(overlay.is_file());
}

#[test]
fn synthesize_rejects_unknown_tool() {
    let out = run(&[
        "synthesize",
        "--scene",
        "x.json",
        "--tool",
        "smudge",
        "--out",
        "y.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("smudge"));
}

#[test]
fn overlay_of_missing_record_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo(dir.path(), 1);
    ok(&["run", "--config", s(&cfg)]);
    let out = run(&[
        "overlay",
        "--run-dir",
        s(&dir.path().join("out")),
        "--record-id",
        "nope",
        "--out",
        "o.png",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn evaluate_perfect_predictions_on_emitted_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo(dir.path(), 2);
    ok(&["run", "--config", s(&cfg)]);
    let records_path = dir.path().join("out/records.jsonl");
    let records: Vec<ArtifactRecord> = read_lines(&records_path);
    let preds: String = benchmark_from_records(&records)
        .iter()
        .map(|e| {
            let p = Prediction {
                image: e.image.clone(),
                label: e.label,
                regions: e
                    .bboxes
                    .iter()
                    .map(|b| RegionAnnotation::bbox(e.width, e.height, *b))
                    .collect(),
                explanation: e.explanation.clone(),
            };
            serde_json::to_string(&p).unwrap() + "\n"
        })
        .collect();
    let preds_path = dir.path().join("preds.jsonl");
    std::fs::write(&preds_path, preds).unwrap();
    let report_path = dir.path().join("report.json");
    for agg in ["per-image-mean", "micro"] {
        ok(&[
            "evaluate",
            "--records",
            s(&records_path),
            "--predictions",
            s(&preds_path),
            "--aggregation",
            agg,
            "--out",
            s(&report_path),
        ]);
        let r: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
        assert_eq!(r["binary"]["accuracy"], 1.0);
        assert_eq!(r["binary"]["macro_f1"], 1.0);
        assert_eq!(r["localization"]["iou"], 1.0);
        assert_eq!(r["localization"]["f1"], 1.0);
        assert_eq!(r["explanation"]["rouge_l"], 1.0);
    }

    // All-"no" predictions: printed to stdout when --out is absent.
    std::fs::write(&preds_path, "").unwrap();
    let out = ok(&[
        "evaluate",
        "--records",
        s(&records_path),
        "--predictions",
        s(&preds_path),
    ]);
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let n = r["n_samples"].as_f64().unwrap();
    assert_eq!(r["binary"]["accuracy"].as_f64().unwrap(), 2.0 / n);
}

#[test]
fn json_logs_go_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo(dir.path(), 1);
    let out = ok(&[
        "--log-format",
        "json",
        "--log-level",
        "info",
        "run",
        "--config",
        s(&cfg),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let first = stderr
        .lines()
        .find(|l| !l.trim().is_empty())
        .expect("log lines");
    let v: serde_json::Value = serde_json::from_str(first).unwrap();
    assert!(v.get("level").is_some());
    serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap();
}
