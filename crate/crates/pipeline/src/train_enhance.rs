//! Enhancement training loop: per-iteration patch sampling (optionally on
//! freshly copy-paste-augmented pairs), the four-term objective, and Adam
//! with the piecewise learning-rate schedule. Deterministic for a fixed
//! seed; checkpoints resume bit-exactly at f64.

use std::path::PathBuf;

use lltext_core::{canny_edges, Scalar};
use lltext_data::{
    build_pool, compute_box_stats, sample_patch, text_cp_augment_pair, Manifest, PatchSample,
    SamplePair, TextCpParams, TextPool,
};
use lltext_nn::enhancer::{Enhancer, EnhancerNodes};
use lltext_nn::graph::Graph;
use lltext_nn::losses::{
    edge_reconstruction_loss_node, ms_ssim_loss_node, smooth_l1_node, text_detection_loss_node,
    total_enhancement_loss_node, EdgeLossParams,
};
use lltext_nn::scorer::DiffScorer;
use lltext_nn::{Adam, ParamSet, Tensor};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{PipelineError, Result};
use crate::logging::CsvLog;
use crate::schedule::lr_schedule;
use crate::seeds::{derive_seed, epoch_order, SeedDomain};

pub const LOG_COLUMNS: [&str; 8] = [
    "step",
    "epoch",
    "loss_recons",
    "loss_text",
    "loss_ssim_ms",
    "loss_edge",
    "total",
    "lr",
];

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub first_total: f64,
    pub final_total: f64,
    pub steps: u64,
}

/// Per-item loss values of one training step.
#[derive(Debug, Clone, Copy)]
pub struct StepLosses {
    pub recons: f64,
    pub text: f64,
    pub ssim_ms: f64,
    pub edge: f64,
    pub total: f64,
}

/// Forward + backward on one patch; returns the loss values and parameter
/// gradients (aligned with the parameter set order).
pub fn enhancer_training_step<T: Scalar>(
    net: &Enhancer<T>,
    scorer: &DiffScorer<T>,
    cfg: &RunConfig,
    patch: &PatchSample<T>,
) -> Result<(StepLosses, Vec<Option<Tensor<T>>>)> {
    let edge_in = lltext_core::sobel_magnitude(&patch.short);
    let gt_edges = canny_edges(&patch.long, cfg.edge.canny_low, cfg.edge.canny_high)?;

    let mut g = Graph::new();
    let binding = net.params.bind(&mut g);
    let x = g.leaf(Tensor::from_image(&patch.short));
    let y = g.leaf(Tensor::from_image(&patch.long));
    let e = g.leaf(Tensor::from_gray(&edge_in));
    let nodes: EnhancerNodes = net.forward_graph(&mut g, &binding, x, e)?;

    let recons = smooth_l1_node(&mut g, nodes.enhanced, y, cfg.loss.delta)?;
    let text = text_detection_loss_node(&mut g, scorer, nodes.enhanced, y)?;
    let ssim = ms_ssim_loss_node(&mut g, nodes.enhanced, y, &cfg.loss.ms_ssim)?;
    let gt_tensor = Tensor::from_gray(&gt_edges);
    let edge = edge_reconstruction_loss_node(
        &mut g,
        &nodes.side_edges,
        nodes.fused_edge,
        &gt_tensor,
        &EdgeLossParams {
            lambda: cfg.loss.lambda,
        },
    )?;
    let total = total_enhancement_loss_node(&mut g, recons, text, ssim, edge, &cfg.loss.weights)?;

    let losses = StepLosses {
        recons: g.scalar_value(recons).dbl(),
        text: g.scalar_value(text).dbl(),
        ssim_ms: g.scalar_value(ssim).dbl(),
        edge: g.scalar_value(edge).dbl(),
        total: g.scalar_value(total).dbl(),
    };
    if !losses.total.is_finite() {
        return Err(PipelineError::numeric(format!(
            "non-finite training loss: recons={} text={} ssim={} edge={}",
            losses.recons, losses.text, losses.ssim_ms, losses.edge
        )));
    }
    g.backward(total);
    let grads = net.params.grads(&g, &binding);
    Ok((losses, grads))
}

pub(crate) fn accumulate_grads(into: &mut Vec<Option<Tensor<f64>>>, grads: Vec<Option<Tensor<f64>>>) {
    if into.is_empty() {
        *into = grads;
        return;
    }
    for (slot, g) in into.iter_mut().zip(grads) {
        match (slot.as_mut(), g) {
            (Some(acc), Some(g)) => {
                for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += *b;
                }
            }
            (None, Some(g)) => *slot = Some(g),
            _ => {}
        }
    }
}

pub(crate) fn scale_grads(grads: &mut [Option<Tensor<f64>>], k: f64) {
    for g in grads.iter_mut().flatten() {
        for v in g.data_mut() {
            *v *= k;
        }
    }
}

/// Runs the full training loop at f64 precision.
pub fn train_enhancer(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let manifest = Manifest::load(&cfg.dataset.manifest)?;
    let pairs: Vec<SamplePair<f64>> =
        manifest.load_split(cfg.dataset.split.as_deref(), cfg.dataset.allow_unlabeled)?;

    let textcp_setup = if cfg.textcp.enabled {
        let stats = compute_box_stats(&pairs, true)?;
        let pool = build_pool(&pairs);
        if pool.is_empty() {
            return Err(PipelineError::config(
                "text-cp enabled but the corpus has no legible boxes".to_string(),
            ));
        }
        Some((stats, pool))
    } else {
        None
    };

    let scorer = DiffScorer::<f64>::new(cfg.loss.text_scorer_seed);

    // Fresh or resumed model/optimizer state.
    let (mut net, mut adam, start_epoch, mut step) = match &cfg.train.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            if ckpt.kind != "enhancer" {
                return Err(PipelineError::data(format!(
                    "checkpoint {} holds a {} model",
                    path.display(),
                    ckpt.kind
                )));
            }
            let net_cfg = ckpt.config_as::<lltext_nn::enhancer::EnhancerConfig>()?;
            let params: ParamSet<f64> = ckpt.unpack_params();
            let adam = ckpt.unpack_adam(&params)?;
            let net = Enhancer::from_params(net_cfg, params)?;
            (net, adam, ckpt.epoch, ckpt.step)
        }
        None => {
            let init_seed = derive_seed(cfg.seed, SeedDomain::ModelInit, 0, 0);
            let net = Enhancer::<f64>::new(cfg.enhancer.clone(), init_seed)?;
            let adam = Adam::new(&net.params);
            (net, adam, 0usize, 0u64)
        }
    };

    let log_path = cfg.out_dir.join("loss_log.csv");
    let mut log = if start_epoch == 0 {
        CsvLog::create(&log_path, &LOG_COLUMNS)?
    } else {
        CsvLog::append(&log_path)?
    };
    let ckpt_dir = cfg.out_dir.join("checkpoints");
    let latest = ckpt_dir.join("latest.ckpt");

    let mut first_total = None;
    let mut final_total = 0.0;
    for epoch in start_epoch..cfg.train.epochs {
        let lr = lr_schedule(epoch, &cfg.train.lr);
        let order = epoch_order(pairs.len(), cfg.seed, epoch);
        for chunk in order.chunks(cfg.train.batch_size) {
            let mut grads: Vec<Option<Tensor<f64>>> = Vec::new();
            let mut sums = StepLosses {
                recons: 0.0,
                text: 0.0,
                ssim_ms: 0.0,
                edge: 0.0,
                total: 0.0,
            };
            for (k, idx) in chunk.iter().enumerate() {
                let pair = &pairs[*idx];
                let item_seed = derive_seed(cfg.seed, SeedDomain::Patch, step, k as u64);
                let pair = match &textcp_setup {
                    Some((stats, pool)) => {
                        let params = TextCpParams {
                            n_target: cfg.textcp.n_target,
                            gamma: cfg.textcp.gamma,
                            max_attempts: cfg.textcp.max_attempts,
                            stats: *stats,
                            seed: derive_seed(cfg.seed, SeedDomain::TextCp, step, k as u64),
                        };
                        augment_or_passthrough(pair, pool, &params)?
                    }
                    None => pair.clone(),
                };
                let patch = sample_patch(&pair, &cfg.patch.to_spec(), item_seed)
                    .map_err(|e| PipelineError::data(format!("sample {}: {e}", pair.id)))?;
                let (losses, item_grads) = enhancer_training_step(&net, &scorer, cfg, &patch)
                    .map_err(|e| match e {
                        PipelineError::Numeric(m) => PipelineError::Numeric(format!(
                            "sample {} at step {step}: {m}; last checkpoint retained at {}",
                            pair.id,
                            latest.display()
                        )),
                        other => other,
                    })?;
                sums.recons += losses.recons;
                sums.text += losses.text;
                sums.ssim_ms += losses.ssim_ms;
                sums.edge += losses.edge;
                sums.total += losses.total;
                accumulate_grads(&mut grads, item_grads);
            }
            let n = chunk.len() as f64;
            scale_grads(&mut grads, 1.0 / n);
            adam.step(&mut net.params, &grads, lr);
            step += 1;
            let avg = [
                sums.recons / n,
                sums.text / n,
                sums.ssim_ms / n,
                sums.edge / n,
                sums.total / n,
                lr,
            ];
            log.row(step, epoch, &avg)?;
            if first_total.is_none() {
                first_total = Some(sums.total / n);
            }
            final_total = sums.total / n;
        }
        let completed = epoch + 1;
        if completed % cfg.train.checkpoint_every == 0 || completed == cfg.train.epochs {
            let ckpt = Checkpoint::pack(
                "enhancer",
                &net.config,
                completed,
                step,
                cfg.seed,
                &net.params,
                Some(&adam),
            )?;
            ckpt.save(&ckpt_dir.join(format!("epoch_{completed:05}.ckpt")))?;
            ckpt.save(&latest)?;
        }
    }

    Ok(TrainSummary {
        checkpoint: latest,
        log: log_path,
        first_total: first_total.unwrap_or(0.0),
        final_total,
        steps: step,
    })
}

fn augment_or_passthrough(
    pair: &SamplePair<f64>,
    pool: &TextPool<f64>,
    params: &TextCpParams,
) -> Result<SamplePair<f64>> {
    let (aug, _) = text_cp_augment_pair(pair, pool, params)?;
    Ok(aug)
}
