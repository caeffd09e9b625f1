//! Enhancement training objectives: smooth-L1 reconstruction, multi-scale
//! SSIM, text-detection discrepancy and class-balanced edge reconstruction,
//! combined by a weighted sum. Every loss exists both as a graph op (for
//! training) and as a plain evaluation on tensors.

use lltext_core::{HeatmapProvider, ImageTensor, Scalar};
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::graph::{Graph, NodeRef};
use crate::scorer::DiffScorer;
use crate::tensor::Tensor;

/// Probability clamp applied before logarithms.
pub const PROB_EPS: f64 = 1e-7;

/// Weights of the four enhancement loss terms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct LossWeights {
    pub w_recons: f64,
    pub w_text: f64,
    pub w_ssim_ms: f64,
    pub w_edge: f64,
}

impl Default for LossWeights {
    /// The published training weights.
    fn default() -> Self {
        Self {
            w_recons: 0.2125,
            w_text: 0.425,
            w_ssim_ms: 0.15,
            w_edge: 0.2125,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w_recons", self.w_recons),
            ("w_text", self.w_text),
            ("w_ssim_ms", self.w_ssim_ms),
            ("w_edge", self.w_edge),
        ] {
            if !(v >= 0.0) {
                return Err(NnError::config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Multi-scale SSIM configuration. Defaults follow the common five-scale
/// setting from the SSIM literature (11×11 Gaussian window, sigma 1.5,
/// exponent vector 0.0448/0.2856/0.3001/0.2363/0.1333, C3 = C2/2); they are
/// configuration, not prescribed constants.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct MsSsimConfig {
    pub scales: usize,
    /// Exponent of the coarsest-scale luminance term.
    pub tau: f64,
    /// Per-scale contrast exponents.
    pub phi: Vec<f64>,
    /// Per-scale structure exponents.
    pub psi: Vec<f64>,
    pub window: usize,
    pub sigma: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

pub const MS_SSIM_STANDARD_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

impl Default for MsSsimConfig {
    fn default() -> Self {
        Self::with_scales(5)
    }
}

impl MsSsimConfig {
    /// Standard exponents truncated to `scales` entries and renormalized.
    pub fn with_scales(scales: usize) -> Self {
        let scales = scales.clamp(1, 5);
        let raw = &MS_SSIM_STANDARD_WEIGHTS[..scales];
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let c2 = 0.03f64.powi(2);
        Self {
            scales,
            tau: weights[scales - 1],
            phi: weights.clone(),
            psi: weights,
            window: 11,
            sigma: 1.5,
            c1: 0.01f64.powi(2),
            c2,
            c3: c2 / 2.0,
        }
    }

    fn validate(&self, h: usize, w: usize) -> Result<()> {
        if self.scales < 1 {
            return Err(NnError::config("ms-ssim needs at least one scale"));
        }
        if self.phi.len() != self.scales || self.psi.len() != self.scales {
            return Err(NnError::config(format!(
                "exponent vectors must have {} entries",
                self.scales
            )));
        }
        let feasible = self.max_feasible_scales(h, w);
        if feasible < self.scales {
            return Err(NnError::config(format!(
                "image {h}x{w} supports at most M = {feasible} scale(s) with a {} px window, requested {}",
                self.window, self.scales
            )));
        }
        Ok(())
    }

    /// Largest scale count for which the window still fits (accounting for
    /// the crop-to-even before each dyadic downsample).
    pub fn max_feasible_scales(&self, h: usize, w: usize) -> usize {
        let (mut hs, mut ws) = (h, w);
        let mut m = 0;
        loop {
            if hs.min(ws) < self.window {
                return m;
            }
            m += 1;
            hs = (hs - hs % 2) / 2;
            ws = (ws - ws % 2) / 2;
            if hs == 0 || ws == 0 {
                return m;
            }
        }
    }

    fn window_tensor<T: Scalar>(&self) -> Tensor<T> {
        let k = self.window;
        let c = (k as f64 - 1.0) / 2.0;
        let mut data = Vec::with_capacity(k * k);
        let mut sum = 0.0;
        for y in 0..k {
            for x in 0..k {
                let d2 = (y as f64 - c).powi(2) + (x as f64 - c).powi(2);
                let v = (-d2 / (2.0 * self.sigma * self.sigma)).exp();
                data.push(v);
                sum += v;
            }
        }
        Tensor::new(vec![1, 1, k, k], data.iter().map(|v| T::of(v / sum)).collect())
    }
}

/// Class-balance parameters of the edge loss.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EdgeLossParams {
    /// Positive-class balance multiplier.
    pub lambda: f64,
}

impl Default for EdgeLossParams {
    fn default() -> Self {
        Self { lambda: 1.1 }
    }
}

/// Per-map balance weights: `alpha` scales negative (non-edge) pixels,
/// `beta` scales positive (edge) pixels.
pub fn edge_alpha_beta(positives: usize, negatives: usize, lambda: f64) -> (f64, f64) {
    let total = (positives + negatives) as f64;
    let alpha = lambda * positives as f64 / total;
    let beta = negatives as f64 / total;
    (alpha, beta)
}

fn check_same_shape<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(NnError::shape(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Smooth L1 (Huber) reconstruction loss.
// ---------------------------------------------------------------------------

/// Mean Huber penalty of the difference map.
pub fn smooth_l1_node<T: Scalar>(
    g: &mut Graph<T>,
    x_hat: NodeRef,
    y: NodeRef,
    delta: f64,
) -> Result<NodeRef> {
    check_same_shape(g.value(x_hat), g.value(y), "smooth_l1 inputs")?;
    if delta <= 0.0 {
        return Err(NnError::config(format!("delta must be positive, got {delta}")));
    }
    let d = g.sub(x_hat, y);
    let h = g.huber(d, delta);
    Ok(g.mean_all(h))
}

pub fn smooth_l1<T: Scalar>(x_hat: &Tensor<T>, y: &Tensor<T>, delta: f64) -> Result<T> {
    let mut g = Graph::new();
    let xn = g.leaf(x_hat.clone());
    let yn = g.leaf(y.clone());
    let l = smooth_l1_node(&mut g, xn, yn, delta)?;
    Ok(g.scalar_value(l))
}

// ---------------------------------------------------------------------------
// Multi-scale SSIM.
// ---------------------------------------------------------------------------

/// Product-form multi-scale SSIM: per-scale window means of contrast and
/// structure, the coarsest-scale luminance mean, all exponentiated and
/// multiplied; channels are averaged. Images are downsampled between scales
/// by 2×2 mean pooling (cropped to even size first).
///
/// Power bases are floored at a tiny positive value, so pathological
/// anti-correlated inputs yield a score near 0 rather than NaN.
pub fn ms_ssim_node<T: Scalar>(
    g: &mut Graph<T>,
    x: NodeRef,
    y: NodeRef,
    cfg: &MsSsimConfig,
) -> Result<NodeRef> {
    check_same_shape(g.value(x), g.value(y), "ms_ssim inputs")?;
    let (channels, h, w) = g.value(x).chw();
    cfg.validate(h, w)?;
    let win = g.leaf(cfg.window_tensor());

    let mut channel_scores = Vec::with_capacity(channels);
    for ci in 0..channels {
        let mut xc = g.slice_c(x, ci, ci + 1);
        let mut yc = g.slice_c(y, ci, ci + 1);
        let mut score: Option<NodeRef> = None;
        for s in 0..cfg.scales {
            let mu_x = g.conv2d(xc, win, None, 1, 0);
            let mu_y = g.conv2d(yc, win, None, 1, 0);
            let xx = g.mul(xc, xc);
            let xx = g.conv2d(xx, win, None, 1, 0);
            let yy = g.mul(yc, yc);
            let yy = g.conv2d(yy, win, None, 1, 0);
            let xy = g.mul(xc, yc);
            let xy = g.conv2d(xy, win, None, 1, 0);

            let mu_x2 = g.mul(mu_x, mu_x);
            let mu_y2 = g.mul(mu_y, mu_y);
            let mu_xy = g.mul(mu_x, mu_y);
            let var_x = g.sub(xx, mu_x2);
            let var_x = g.relu(var_x);
            let var_y = g.sub(yy, mu_y2);
            let var_y = g.relu(var_y);
            let cov = g.sub(xy, mu_xy);
            let sx = g.sqrt(var_x);
            let sy = g.sqrt(var_y);
            let sxsy = g.mul(sx, sy);

            // contrast: (2 sx sy + C2) / (var_x + var_y + C2)
            let num_c = g.mul_const(sxsy, 2.0);
            let num_c = g.add_const(num_c, cfg.c2);
            let den_c = g.add(var_x, var_y);
            let den_c = g.add_const(den_c, cfg.c2);
            let c_map = g.div(num_c, den_c);
            // structure: (cov + C3) / (sx sy + C3)
            let num_s = g.add_const(cov, cfg.c3);
            let den_s = g.add_const(sxsy, cfg.c3);
            let s_map = g.div(num_s, den_s);

            let mc = g.mean_all(c_map);
            let ms = g.mean_all(s_map);
            let pc = g.pow_const(mc, cfg.phi[s]);
            let ps = g.pow_const(ms, cfg.psi[s]);
            let cs = g.mul(pc, ps);
            score = Some(match score {
                None => cs,
                Some(prev) => g.mul(prev, cs),
            });

            if s + 1 == cfg.scales {
                // luminance at the coarsest scale
                let num_l = g.mul_const(mu_xy, 2.0);
                let num_l = g.add_const(num_l, cfg.c1);
                let den_l = g.add(mu_x2, mu_y2);
                let den_l = g.add_const(den_l, cfg.c1);
                let l_map = g.div(num_l, den_l);
                let ml = g.mean_all(l_map);
                let pl = g.pow_const(ml, cfg.tau);
                score = Some(g.mul(score.expect("at least one scale"), pl));
            } else {
                let (_, hs, ws) = g.value(xc).chw();
                let (he, we) = (hs - hs % 2, ws - ws % 2);
                if (he, we) != (hs, ws) {
                    xc = g.crop_hw(xc, 0, he, 0, we);
                    yc = g.crop_hw(yc, 0, he, 0, we);
                }
                xc = g.avg_pool(xc, 2);
                yc = g.avg_pool(yc, 2);
            }
        }
        channel_scores.push(score.expect("score accumulated"));
    }
    let mut total = channel_scores[0];
    for cs in &channel_scores[1..] {
        total = g.add(total, *cs);
    }
    Ok(g.mul_const(total, 1.0 / channels as f64))
}

/// `1 - ms_ssim`.
pub fn ms_ssim_loss_node<T: Scalar>(
    g: &mut Graph<T>,
    x: NodeRef,
    y: NodeRef,
    cfg: &MsSsimConfig,
) -> Result<NodeRef> {
    let s = ms_ssim_node(g, x, y, cfg)?;
    let n = g.neg(s);
    Ok(g.add_const(n, 1.0))
}

pub fn ms_ssim<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>, cfg: &MsSsimConfig) -> Result<T> {
    let mut g = Graph::new();
    let xn = g.leaf(x.clone());
    let yn = g.leaf(y.clone());
    let s = ms_ssim_node(&mut g, xn, yn, cfg)?;
    Ok(g.scalar_value(s))
}

pub fn ms_ssim_loss<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>, cfg: &MsSsimConfig) -> Result<T> {
    Ok(T::one() - ms_ssim(x, y, cfg)?)
}

// ---------------------------------------------------------------------------
// Text detection loss.
// ---------------------------------------------------------------------------

/// Mean absolute difference between the provider's region scores of the
/// enhanced and ground-truth images.
pub fn text_detection_loss<T: Scalar>(
    provider: &dyn HeatmapProvider<T>,
    x_hat: &ImageTensor<T>,
    y: &ImageTensor<T>,
) -> Result<T> {
    text_detection_loss_with(provider, provider, x_hat, y)
}

/// Same, with distinct providers per image (e.g. two file-backed maps).
pub fn text_detection_loss_with<T: Scalar>(
    provider_x: &dyn HeatmapProvider<T>,
    provider_y: &dyn HeatmapProvider<T>,
    x_hat: &ImageTensor<T>,
    y: &ImageTensor<T>,
) -> Result<T> {
    let rx = provider_x.region_score(x_hat)?;
    let ry = provider_y.region_score(y)?;
    if rx.height() != ry.height() || rx.width() != ry.width() {
        return Err(NnError::shape(format!(
            "provider contract violated: region scores {}x{} vs {}x{}",
            rx.height(),
            rx.width(),
            ry.height(),
            ry.width()
        )));
    }
    let n = T::of_usize(rx.data().len());
    let sum: T = rx
        .data()
        .iter()
        .zip(ry.data())
        .map(|(a, b)| (*a - *b).abs())
        .sum();
    Ok(sum / n)
}

/// Differentiable training form: both images are scored by the frozen
/// convolutional scorer, and gradients flow into the enhanced image.
pub fn text_detection_loss_node<T: Scalar>(
    g: &mut Graph<T>,
    scorer: &DiffScorer<T>,
    x_hat: NodeRef,
    y: NodeRef,
) -> Result<NodeRef> {
    check_same_shape(g.value(x_hat), g.value(y), "text loss inputs")?;
    let rx = scorer.score_graph(g, x_hat);
    let ry = scorer.score_graph(g, y);
    let d = g.sub(rx, ry);
    let a = g.abs(d);
    Ok(g.mean_all(a))
}

// ---------------------------------------------------------------------------
// Balanced edge cross-entropy (negated log-likelihood form).
// ---------------------------------------------------------------------------

/// Class-balanced binary cross-entropy over an edge map, summed and divided
/// by the pixel count. Predictions are clamped into
/// [PROB_EPS, 1 - PROB_EPS] before the logarithms.
pub fn balanced_edge_bce_node<T: Scalar>(
    g: &mut Graph<T>,
    pred: NodeRef,
    gt: &Tensor<T>,
    params: &EdgeLossParams,
) -> Result<NodeRef> {
    check_same_shape(g.value(pred), gt, "edge bce inputs")?;
    let mut positives = 0usize;
    for v in gt.data() {
        if *v == T::one() {
            positives += 1;
        } else if *v != T::zero() {
            return Err(NnError::config(
                "ground-truth edge map must be binary".to_string(),
            ));
        }
    }
    let n = gt.numel();
    let negatives = n - positives;
    let (alpha, beta) = edge_alpha_beta(positives, negatives, params.lambda);

    let beta_mask = gt.map(|v| if v == T::one() { T::of(beta) } else { T::zero() });
    let alpha_mask = gt.map(|v| if v == T::zero() { T::of(alpha) } else { T::zero() });
    let beta_mask = g.leaf(beta_mask);
    let alpha_mask = g.leaf(alpha_mask);

    let p = g.clamp_unit(pred, PROB_EPS);
    let log_p = g.ln(p);
    let neg_pred = g.neg(pred);
    let one_minus = g.add_const(neg_pred, 1.0);
    let q = g.clamp_unit(one_minus, PROB_EPS);
    let log_q = g.ln(q);

    let pos_term = g.mul(log_p, beta_mask);
    let neg_term = g.mul(log_q, alpha_mask);
    let sum_terms = g.add(pos_term, neg_term);
    let total = g.sum_all(sum_terms);
    Ok(g.mul_const(total, -1.0 / n as f64))
}

pub fn balanced_edge_bce<T: Scalar>(
    pred: &Tensor<T>,
    gt: &Tensor<T>,
    params: &EdgeLossParams,
) -> Result<T> {
    let mut g = Graph::new();
    let p = g.leaf(pred.clone());
    let l = balanced_edge_bce_node(&mut g, p, gt, params)?;
    Ok(g.scalar_value(l))
}

// ---------------------------------------------------------------------------
// Edge reconstruction loss: side outputs plus fused output.
// ---------------------------------------------------------------------------

/// Sum of the balanced edge BCE over the three side outputs and the fused
/// output, each against the same ground truth.
pub fn edge_reconstruction_loss_node<T: Scalar>(
    g: &mut Graph<T>,
    side_edges: &[NodeRef],
    fused: NodeRef,
    gt: &Tensor<T>,
    params: &EdgeLossParams,
) -> Result<NodeRef> {
    if side_edges.len() != 3 {
        return Err(NnError::config(format!(
            "edge reconstruction expects J = 3 side outputs, got {}",
            side_edges.len()
        )));
    }
    let mut total: Option<NodeRef> = None;
    for s in side_edges.iter().chain(std::iter::once(&fused)) {
        let l = balanced_edge_bce_node(g, *s, gt, params)?;
        total = Some(match total {
            None => l,
            Some(prev) => g.add(prev, l),
        });
    }
    Ok(total.expect("at least the fused term"))
}

pub fn edge_reconstruction_loss<T: Scalar>(
    side_edges: &[Tensor<T>],
    fused: &Tensor<T>,
    gt: &Tensor<T>,
    params: &EdgeLossParams,
) -> Result<T> {
    let mut g = Graph::new();
    let sides: Vec<NodeRef> = side_edges.iter().map(|t| g.leaf(t.clone())).collect();
    let f = g.leaf(fused.clone());
    let l = edge_reconstruction_loss_node(&mut g, &sides, f, gt, params)?;
    Ok(g.scalar_value(l))
}

// ---------------------------------------------------------------------------
// Weighted total.
// ---------------------------------------------------------------------------

/// The four per-term scalars of one training step.
#[derive(Debug, Clone, Copy)]
pub struct LossComponents<T> {
    pub recons: T,
    pub text: T,
    pub ssim_ms: T,
    pub edge: T,
}

pub fn total_enhancement_loss<T: Scalar>(
    components: &LossComponents<T>,
    weights: &LossWeights,
) -> Result<T> {
    weights.validate()?;
    for (name, v) in [
        ("recons", components.recons),
        ("text", components.text),
        ("ssim_ms", components.ssim_ms),
        ("edge", components.edge),
    ] {
        if !v.is_finite() {
            return Err(NnError::numeric(format!("loss term {name} is {v}")));
        }
    }
    Ok(T::of(weights.w_recons) * components.recons
        + T::of(weights.w_text) * components.text
        + T::of(weights.w_ssim_ms) * components.ssim_ms
        + T::of(weights.w_edge) * components.edge)
}

pub fn total_enhancement_loss_node<T: Scalar>(
    g: &mut Graph<T>,
    recons: NodeRef,
    text: NodeRef,
    ssim_ms: NodeRef,
    edge: NodeRef,
    weights: &LossWeights,
) -> Result<NodeRef> {
    weights.validate()?;
    let a = g.mul_const(recons, weights.w_recons);
    let b = g.mul_const(text, weights.w_text);
    let c = g.mul_const(ssim_ms, weights.w_ssim_ms);
    let d = g.mul_const(edge, weights.w_edge);
    let ab = g.add(a, b);
    let abc = g.add(ab, c);
    Ok(g.add(abc, d))
}
