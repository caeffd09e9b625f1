//! Training-loop integration: overfit convergence, exact resume,
//! determinism and gradient flow.

mod common;

use common::*;
use lltext_data::{sample_patch, Manifest};
use lltext_pipeline::checkpoint::Checkpoint;
use lltext_pipeline::train_enhance::enhancer_training_step;
use lltext_pipeline::train_synth::synth_training_step;
use lltext_pipeline::{train_enhancer, train_synth};
use lltext_nn::enhancer::Enhancer;
use lltext_nn::scorer::DiffScorer;
use lltext_nn::synthdce::CurveNet;
use lltext_nn::Adam;

#[test]
fn enhancer_overfit_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_tiny_dataset(dir.path(), 64);
    let cfg = desk_enhance_config(manifest, dir.path().join("out"), 300);
    let t0 = std::time::Instant::now();
    let summary = train_enhancer(&cfg).unwrap();
    eprintln!(
        "enhancer overfit: {} steps in {:.1}s, loss {} -> {}",
        summary.steps,
        t0.elapsed().as_secs_f64(),
        summary.first_total,
        summary.final_total
    );
    assert_eq!(summary.steps, 300);
    assert!(
        summary.final_total < 0.5 * summary.first_total,
        "loss {} did not halve from {}",
        summary.final_total,
        summary.first_total
    );
}

#[test]
fn synth_overfit_drives_output_dark() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_tiny_dataset(dir.path(), 64);
    let cfg = desk_synth_config(manifest.clone(), dir.path().join("out"), 300);
    let t0 = std::time::Instant::now();
    let summary = train_synth(&cfg).unwrap();
    eprintln!(
        "synth overfit: {} steps in {:.1}s, loss {} -> {}",
        summary.steps,
        t0.elapsed().as_secs_f64(),
        summary.first_total,
        summary.final_total
    );

    // Reload the checkpoint and check mean(x_hat) against the dark target.
    let ckpt = Checkpoint::load(&summary.checkpoint).unwrap();
    let net_cfg = ckpt.config_as::<lltext_nn::synthdce::CurveNetConfig>().unwrap();
    let net = CurveNet::<f64>::from_params(net_cfg, ckpt.unpack_params());
    let m = Manifest::load(&manifest).unwrap();
    let pair = &m.load_split::<f64>(Some("train"), false).unwrap()[0];
    let out = lltext_nn::synthdce::synthesize(&net, &pair.long).unwrap();
    let mean_out = out.mean();
    let mean_dark = pair.short.mean();
    eprintln!("mean synthesized {mean_out}, mean target {mean_dark}");
    assert!(
        (mean_out - mean_dark).abs() < 0.05,
        "synthesized mean {mean_out} not within 0.05 of dark target {mean_dark}"
    );
}

#[test]
fn synth_identity_init_reproduces_input() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_tiny_dataset(dir.path(), 64);
    let cfg = desk_synth_config(manifest.clone(), dir.path().join("out"), 1);
    let m = Manifest::load(&manifest).unwrap();
    let pair = &m.load_split::<f64>(Some("train"), false).unwrap()[0];
    let patch = sample_patch(pair, &cfg.patch.to_spec(), 0).unwrap();
    let net = CurveNet::<f64>::new(cfg.synth, 5).unwrap();
    let (losses, _) = synth_training_step(&net, &cfg, &patch).unwrap();
    let y_mean = patch.long.mean();
    assert!(
        (losses.mean_output - y_mean).abs() < 1e-12,
        "identity init should reproduce the input exactly"
    );
}

#[test]
fn training_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_tiny_dataset(dir.path(), 64);
    let cfg_a = desk_enhance_config(manifest.clone(), dir.path().join("a"), 4);
    let cfg_b = desk_enhance_config(manifest, dir.path().join("b"), 4);
    train_enhancer(&cfg_a).unwrap();
    train_enhancer(&cfg_b).unwrap();
    let log_a = std::fs::read(dir.path().join("a/loss_log.csv")).unwrap();
    let log_b = std::fs::read(dir.path().join("b/loss_log.csv")).unwrap();
    assert_eq!(log_a, log_b, "loss logs differ across identical-seed runs");
    let ck_a = std::fs::read(dir.path().join("a/checkpoints/latest.ckpt")).unwrap();
    let ck_b = std::fs::read(dir.path().join("b/checkpoints/latest.ckpt")).unwrap();
    assert_eq!(ck_a, ck_b, "checkpoints differ across identical-seed runs");
}

#[test]
fn resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_tiny_dataset(dir.path(), 64);

    // Uninterrupted: 6 epochs.
    let cfg_full = desk_enhance_config(manifest.clone(), dir.path().join("full"), 6);
    train_enhancer(&cfg_full).unwrap();

    // Interrupted: 3 epochs, then resume for the remaining 3.
    let mut cfg_half = desk_enhance_config(manifest.clone(), dir.path().join("half"), 3);
    cfg_half.train.checkpoint_every = 3;
    train_enhancer(&cfg_half).unwrap();
    let mut cfg_rest = desk_enhance_config(manifest, dir.path().join("half"), 6);
    cfg_rest.train.resume = Some(dir.path().join("half/checkpoints/latest.ckpt"));
    train_enhancer(&cfg_rest).unwrap();

    let read_rows = |p: std::path::PathBuf| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .map(str::to_string)
            .collect()
    };
    let full = read_rows(dir.path().join("full/loss_log.csv"));
    let half = read_rows(dir.path().join("half/loss_log.csv"));
    assert_eq!(full.len(), half.len());
    assert_eq!(full, half, "resumed run diverged from uninterrupted run");

    // Final checkpoints carry identical tensors.
    let a = Checkpoint::load(&dir.path().join("full/checkpoints/latest.ckpt")).unwrap();
    let b = Checkpoint::load(&dir.path().join("half/checkpoints/latest.ckpt")).unwrap();
    let pa = a.unpack_params::<f64>();
    let pb = b.unpack_params::<f64>();
    for ((n1, t1), (n2, t2)) in pa.iter().zip(pb.iter()) {
        assert_eq!(n1, n2);
        assert_eq!(t1.data(), t2.data(), "parameter {n1} diverged");
    }
}

#[test]
fn one_step_moves_nearly_all_parameters_with_gradient() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_tiny_dataset(dir.path(), 64);
    let cfg = desk_enhance_config(manifest.clone(), dir.path().join("out"), 1);
    let m = Manifest::load(&manifest).unwrap();
    let pair = &m.load_split::<f64>(Some("train"), false).unwrap()[0];
    let patch = sample_patch(pair, &cfg.patch.to_spec(), 1).unwrap();

    let mut net = Enhancer::<f64>::new(cfg.enhancer.clone(), 3).unwrap();
    let scorer = DiffScorer::<f64>::new(cfg.loss.text_scorer_seed);
    let before: Vec<(String, Vec<f64>)> = net
        .params
        .iter()
        .map(|(n, t)| (n.to_string(), t.data().to_vec()))
        .collect();
    let (_, grads) = enhancer_training_step(&net, &scorer, &cfg, &patch).unwrap();
    let mut adam = Adam::new(&net.params);
    adam.step(&mut net.params, &grads, 1e-4);

    let mut with_grad = 0usize;
    let mut moved = 0usize;
    for (i, (name, old)) in before.iter().enumerate() {
        if let Some(g) = &grads[i] {
            let new = net.params.get(name);
            for (k, gv) in g.data().iter().enumerate() {
                if *gv != 0.0 {
                    with_grad += 1;
                    if new.data()[k] != old[k] {
                        moved += 1;
                    }
                }
            }
        }
    }
    assert!(with_grad > 1000, "suspiciously few gradients: {with_grad}");
    let ratio = moved as f64 / with_grad as f64;
    assert!(
        ratio >= 0.99,
        "only {moved}/{with_grad} parameters with gradient moved"
    );
}
