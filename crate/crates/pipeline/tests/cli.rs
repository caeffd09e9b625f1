//! End-to-end CLI runs: every task through the `toolkit` binary, exit-code
//! contract, and byte-identical reruns under a fixed seed.

mod common;

use std::path::Path;
use std::process::Command;

use common::*;
use sha2::{Digest, Sha256};

fn toolkit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_toolkit"))
}

fn write_config(path: &Path, cfg: &lltext_pipeline::RunConfig) {
    std::fs::write(path, toml::to_string(cfg).unwrap()).unwrap();
}

fn sha(path: &Path) -> String {
    let mut h = Sha256::new();
    h.update(std::fs::read(path).unwrap());
    format!("{:x}", h.finalize())
}

fn dir_hashes(dir: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_string_lossy().to_string(),
                    sha(&p),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn full_cli_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_tiny_dataset(dir.path(), 64);

    // Train a few epochs.
    let mut cfg = desk_enhance_config(manifest.clone(), dir.path().join("run"), 6);
    cfg.train.checkpoint_every = 6;
    let cfg_path = dir.path().join("train.toml");
    write_config(&cfg_path, &cfg);
    let out = toolkit()
        .args(["train-enhance", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "train failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ckpt = dir.path().join("run/checkpoints/latest.ckpt");
    assert!(ckpt.exists());

    // Enhance with the trained checkpoint.
    let mut ecfg = cfg.clone();
    ecfg.infer.checkpoint = ckpt.clone();
    ecfg.infer.write_edges = true;
    ecfg.infer.write_panels = true;
    ecfg.out_dir = dir.path().join("run");
    let ecfg_path = dir.path().join("enhance.toml");
    write_config(&ecfg_path, &ecfg);
    let out = toolkit()
        .args(["enhance", "--config"])
        .arg(&ecfg_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "enhance failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("run/enhanced/t0.png").exists());
    assert!(dir.path().join("run/edges/t0.png").exists());
    assert!(dir.path().join("run/panels/t0.png").exists());

    // Evaluate the enhanced tree (with detections equal to ground truth).
    let det_dir = dir.path().join("det");
    std::fs::create_dir_all(&det_dir).unwrap();
    std::fs::copy(dir.path().join("ann.txt"), det_dir.join("t0.txt")).unwrap();
    let mut vcfg = ecfg.clone();
    vcfg.eval.enhanced_dir = dir.path().join("run/enhanced");
    vcfg.eval.detections_dir = Some(det_dir);
    vcfg.out_dir = dir.path().join("eval");
    let vcfg_path = dir.path().join("eval.toml");
    write_config(&vcfg_path, &vcfg);
    let out = toolkit()
        .args(["evaluate", "--config"])
        .arg(&vcfg_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "evaluate failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(dir.path().join("eval/report.json")).unwrap();
    let report: lltext_metrics::EvalReport = lltext_metrics::EvalReport::from_json(&report).unwrap();
    // Detections identical to ground truth: perfect H-Mean.
    assert_eq!(report.hmean, Some(1.0));
    assert!(dir.path().join("eval/per_image.csv").exists());
    assert!(dir.path().join("eval/report.txt").exists());
}

#[test]
fn evaluate_perfect_enhancement_reports_identity() {
    // Enhanced tree that IS the ground truth: infinite PSNR, SSIM 1.
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_tiny_dataset(dir.path(), 64);
    let enhanced = dir.path().join("perfect");
    std::fs::create_dir_all(&enhanced).unwrap();
    std::fs::copy(dir.path().join("long.png"), enhanced.join("t0.png")).unwrap();
    let mut cfg = desk_enhance_config(manifest, dir.path().join("eval"), 1);
    cfg.eval.enhanced_dir = enhanced;
    let cfg_path = dir.path().join("eval.toml");
    write_config(&cfg_path, &cfg);
    let out = toolkit()
        .args(["evaluate", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let report = std::fs::read_to_string(dir.path().join("eval/report.json")).unwrap();
    let report = lltext_metrics::EvalReport::from_json(&report).unwrap();
    assert!(report.psnr_infinite);
    assert!((report.ssim.unwrap() - 1.0).abs() < 1e-9);
    // No detection/recognition files: fields stay absent, exit success.
    assert_eq!(report.hmean, None);
    assert_eq!(report.word_accuracy, None);
}

#[test]
fn train_synth_then_synthesize_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_tiny_dataset(dir.path(), 64);
    let mut cfg = desk_synth_config(manifest, dir.path().join("run"), 4);
    cfg.train.checkpoint_every = 4;
    let cfg_path = dir.path().join("synth.toml");
    write_config(&cfg_path, &cfg);
    let out = toolkit()
        .args(["train-synth", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "train-synth failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let mut scfg = cfg.clone();
    scfg.infer.checkpoint = dir.path().join("run/checkpoints/latest.ckpt");
    let scfg_path = dir.path().join("do-synth.toml");
    write_config(&scfg_path, &scfg);
    let out = toolkit()
        .args(["synthesize", "--config"])
        .arg(&scfg_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "synthesize failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("run/synth/t0.png").exists());
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/synth/t0.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["clamp"], serde_json::json!(true));
    assert!(sidecar["model_sha256"].as_str().unwrap().len() == 64);
    assert!(sidecar["source"].as_str().unwrap().contains("long.png"));
}

#[test]
fn augment_exports_images_and_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_tiny_dataset(dir.path(), 96);
    let mut cfg = desk_enhance_config(manifest, dir.path().join("run"), 1);
    cfg.textcp.enabled = true;
    cfg.textcp.n_target = 6;
    let cfg_path = dir.path().join("aug.toml");
    write_config(&cfg_path, &cfg);
    let out = toolkit()
        .args(["augment", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "augment failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("run/augmented/t0_long.png").exists());
    assert!(dir.path().join("run/augmented/t0_short.png").exists());
    let ann = std::fs::read_to_string(dir.path().join("run/augmented/t0.txt")).unwrap();
    assert!(ann.lines().count() >= 3, "expected annotations, got: {ann}");
}

#[test]
fn seeded_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_tiny_dataset(dir.path(), 64);
    for sub in ["a", "b"] {
        let mut cfg = desk_enhance_config(manifest.clone(), dir.path().join(sub), 4);
        cfg.train.checkpoint_every = 4;
        let cfg_path = dir.path().join(format!("{sub}.toml"));
        write_config(&cfg_path, &cfg);
        let out = toolkit()
            .args(["train-enhance", "--config"])
            .arg(&cfg_path)
            .args(["--seed", "123"])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    assert_eq!(
        dir_hashes(&dir.path().join("a")),
        dir_hashes(&dir.path().join("b")),
        "seeded reruns produced different bytes"
    );
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    // Malformed TOML: config error, exit 2.
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = [unclosed").unwrap();
    let out = toolkit()
        .args(["train-enhance", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Valid config, missing manifest: data error, exit 3.
    let mut cfg = lltext_pipeline::RunConfig::desk_enhance();
    cfg.dataset.manifest = dir.path().join("missing.toml");
    cfg.out_dir = dir.path().join("out");
    let cfg_path = dir.path().join("nodata.toml");
    write_config(&cfg_path, &cfg);
    let out = toolkit()
        .args(["train-enhance", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // Invalid tile/overlap combination: config error, exit 2.
    let manifest = write_tiny_dataset(dir.path(), 64);
    let mut cfg = desk_enhance_config(manifest, dir.path().join("out2"), 1);
    cfg.infer.tile = 32;
    cfg.infer.overlap = 64;
    let cfg_path = dir.path().join("badtile.toml");
    write_config(&cfg_path, &cfg);
    let out = toolkit()
        .args(["enhance", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn env_override_changes_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_tiny_dataset(dir.path(), 64);
    let mut cfg = desk_enhance_config(manifest, dir.path().join("run"), 10);
    cfg.train.checkpoint_every = 100;
    let cfg_path = dir.path().join("train.toml");
    write_config(&cfg_path, &cfg);
    let out = toolkit()
        .args(["train-enhance", "--config"])
        .arg(&cfg_path)
        .env("LLTEXT_TRAIN__EPOCHS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let log = std::fs::read_to_string(dir.path().join("run/loss_log.csv")).unwrap();
    // Header plus exactly two steps.
    assert_eq!(log.lines().count(), 3, "override ignored: {log}");
}
