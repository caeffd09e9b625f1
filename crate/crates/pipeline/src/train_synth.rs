//! Curve-estimation synthesis training: long-exposure inputs are driven
//! toward their short-exposure counterparts under the four-term objective.


use lltext_core::Scalar;
use lltext_data::{sample_patch, Manifest, PatchSample, SamplePair};
use lltext_nn::graph::Graph;
use lltext_nn::synthdce::{
    apply_curve_node, proximity_loss_node, spatial_consistency_loss_node,
    total_synthesis_loss_node, tv_loss_node, CurveNet,
};
use lltext_nn::{Adam, ParamSet, Tensor};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{PipelineError, Result};
use crate::logging::CsvLog;
use crate::schedule::lr_schedule;
use crate::seeds::{derive_seed, epoch_order, SeedDomain};
use crate::train_enhance::TrainSummary;

pub const LOG_COLUMNS: [&str; 8] = [
    "step",
    "epoch",
    "loss_prox",
    "loss_spa",
    "loss_tv_h",
    "loss_tv_u",
    "total",
    "lr",
];

#[derive(Debug, Clone, Copy)]
pub struct SynthStepLosses {
    pub prox: f64,
    pub spa: f64,
    pub tv_h: f64,
    pub tv_u: f64,
    pub total: f64,
    /// Mean of the synthesized image, for convergence monitoring.
    pub mean_output: f64,
}

/// One forward/backward pass on a patch: long exposure in, short exposure
/// as target.
pub fn synth_training_step<T: Scalar>(
    net: &CurveNet<T>,
    cfg: &RunConfig,
    patch: &PatchSample<T>,
) -> Result<(SynthStepLosses, Vec<Option<Tensor<T>>>)> {
    let mut g = Graph::new();
    let binding = net.params.bind(&mut g);
    let y = g.leaf(Tensor::from_image(&patch.long));
    let x_dark = Tensor::from_image(&patch.short);
    let (h, u) = net.forward_graph(&mut g, &binding, y)?;
    let x_hat = apply_curve_node(&mut g, y, h, u);

    let x_node = g.leaf(x_dark.clone());
    let prox = proximity_loss_node(&mut g, x_hat, x_node)?;
    let y_tensor = Tensor::from_image(&patch.long);
    let spa = spatial_consistency_loss_node(&mut g, x_hat, &y_tensor, &cfg.synth_loss.spa)?;
    let tv_h = tv_loss_node(&mut g, h)?;
    let tv_u = tv_loss_node(&mut g, u)?;
    let total = total_synthesis_loss_node(&mut g, prox, spa, tv_h, tv_u, &cfg.synth_loss.weights);

    let mean_output = {
        let v = g.value(x_hat);
        v.data().iter().map(|x| x.dbl()).sum::<f64>() / v.numel() as f64
    };
    let losses = SynthStepLosses {
        prox: g.scalar_value(prox).dbl(),
        spa: g.scalar_value(spa).dbl(),
        tv_h: g.scalar_value(tv_h).dbl(),
        tv_u: g.scalar_value(tv_u).dbl(),
        total: g.scalar_value(total).dbl(),
        mean_output,
    };
    if !losses.total.is_finite() {
        return Err(PipelineError::numeric(format!(
            "non-finite synthesis loss: prox={} spa={} tv_h={} tv_u={}",
            losses.prox, losses.spa, losses.tv_h, losses.tv_u
        )));
    }
    g.backward(total);
    let grads = net.params.grads(&g, &binding);
    Ok((losses, grads))
}

/// Full synthesis training loop at f64 precision.
pub fn train_synth(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let manifest = Manifest::load(&cfg.dataset.manifest)?;
    let pairs: Vec<SamplePair<f64>> =
        manifest.load_split(cfg.dataset.split.as_deref(), cfg.dataset.allow_unlabeled)?;

    let (mut net, mut adam, start_epoch, mut step) = match &cfg.train.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            if ckpt.kind != "synth" {
                return Err(PipelineError::data(format!(
                    "checkpoint {} holds a {} model",
                    path.display(),
                    ckpt.kind
                )));
            }
            let net_cfg = ckpt.config_as::<lltext_nn::synthdce::CurveNetConfig>()?;
            let params: ParamSet<f64> = ckpt.unpack_params();
            let adam = ckpt.unpack_adam(&params)?;
            (CurveNet::from_params(net_cfg, params), adam, ckpt.epoch, ckpt.step)
        }
        None => {
            let init_seed = derive_seed(cfg.seed, SeedDomain::ModelInit, 1, 0);
            let net = CurveNet::<f64>::new(cfg.synth, init_seed)?;
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
            let mut sums = [0.0f64; 5];
            for (k, idx) in chunk.iter().enumerate() {
                let pair = &pairs[*idx];
                let item_seed = derive_seed(cfg.seed, SeedDomain::Patch, step, k as u64);
                let patch = sample_patch(pair, &cfg.patch.to_spec(), item_seed)
                    .map_err(|e| PipelineError::data(format!("sample {}: {e}", pair.id)))?;
                let (losses, item_grads) =
                    synth_training_step(&net, cfg, &patch).map_err(|e| match e {
                        PipelineError::Numeric(m) => PipelineError::Numeric(format!(
                            "sample {} at step {step}: {m}; last checkpoint retained at {}",
                            pair.id,
                            latest.display()
                        )),
                        other => other,
                    })?;
                sums[0] += losses.prox;
                sums[1] += losses.spa;
                sums[2] += losses.tv_h;
                sums[3] += losses.tv_u;
                sums[4] += losses.total;
                crate::train_enhance::accumulate_grads(&mut grads, item_grads);
            }
            let n = chunk.len() as f64;
            crate::train_enhance::scale_grads(&mut grads, 1.0 / n);
            adam.step(&mut net.params, &grads, lr);
            step += 1;
            log.row(
                step,
                epoch,
                &[
                    sums[0] / n,
                    sums[1] / n,
                    sums[2] / n,
                    sums[3] / n,
                    sums[4] / n,
                    lr,
                ],
            )?;
            if first_total.is_none() {
                first_total = Some(sums[4] / n);
            }
            final_total = sums[4] / n;
        }
        let completed = epoch + 1;
        if completed % cfg.train.checkpoint_every == 0 || completed == cfg.train.epochs {
            let ckpt = Checkpoint::pack(
                "synth",
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
