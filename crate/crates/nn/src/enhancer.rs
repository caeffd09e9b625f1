//! Dual-encoder / dual-decoder enhancement U-Net.
//!
//! An image encoder and an edge encoder downsample in lockstep; at each
//! skip level an edge-aware attention block re-weights the image features
//! before they are bridged to the image decoder. The edge decoder taps the
//! three deepest image-decoder stages for side edge outputs and fuses them
//! with a 1×1 convolution. Both heads are sigmoid-activated, so outputs are
//! structurally confined to [0, 1].

use std::path::Path;

use lltext_core::{sobel_magnitude, EdgeMap, ImageTensor, Scalar};
use serde::{Deserialize, Serialize};

use crate::attention::EdgeAttention;
use crate::error::{NnError, Result};
use crate::graph::{Graph, NodeRef};
use crate::params::{apply_conv, init_rng, insert_conv, insert_conv_const, ParamBinding, ParamSet};
use crate::tensor::Tensor;

const LRELU_SLOPE: f64 = 0.2;

/// Architecture of the enhancement network.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EnhancerConfig {
    /// Encoder scales; features at level i live at 1/2^i resolution.
    pub levels: usize,
    /// Channel width at level 0, doubling per level.
    pub base_channels: usize,
    /// Cap on the per-level channel width.
    pub max_channels: usize,
    /// Number of side edge outputs J; the edge objective requires 3.
    pub side_outputs: usize,
    /// Skip levels that receive edge-aware attention; `None` means all.
    pub attention_levels: Option<Vec<usize>>,
}

impl Default for EnhancerConfig {
    fn default() -> Self {
        Self {
            levels: 5,
            base_channels: 32,
            max_channels: 512,
            side_outputs: 3,
            attention_levels: None,
        }
    }
}

impl EnhancerConfig {
    /// Small profile that trains in seconds on a CPU.
    pub fn desk() -> Self {
        Self {
            levels: 2,
            base_channels: 16,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(NnError::config(format!(
                "levels must be >= 2, got {}",
                self.levels
            )));
        }
        if self.side_outputs != 3 {
            return Err(NnError::config(format!(
                "side_outputs is fixed at 3 by the edge objective, got {}",
                self.side_outputs
            )));
        }
        if self.base_channels == 0 {
            return Err(NnError::config("base_channels must be positive"));
        }
        Ok(())
    }

    pub fn channels_at(&self, level: usize) -> usize {
        (self.base_channels << level).min(self.max_channels)
    }

    /// Spatial divisibility required of inputs.
    pub fn size_multiple(&self) -> usize {
        1 << (self.levels - 1)
    }

    fn attends_at(&self, level: usize) -> bool {
        match &self.attention_levels {
            None => true,
            Some(levels) => levels.contains(&level),
        }
    }

    /// Image-decoder level tapped by side output j (deepest stages first).
    fn tap_level(&self, j: usize) -> usize {
        (self.levels - 2).saturating_sub(j)
    }
}

/// Full-resolution outputs of one forward pass.
#[derive(Debug, Clone)]
pub struct EnhancerOutput<T> {
    pub enhanced: ImageTensor<T>,
    pub fused_edge: EdgeMap<T>,
    pub side_edges: Vec<EdgeMap<T>>,
}

/// Graph nodes of one forward pass, for loss construction.
#[derive(Debug, Clone)]
pub struct EnhancerNodes {
    pub enhanced: NodeRef,
    pub fused_edge: NodeRef,
    pub side_edges: Vec<NodeRef>,
}

#[derive(Debug, Clone)]
pub struct Enhancer<T> {
    pub config: EnhancerConfig,
    pub params: ParamSet<T>,
    attention: Vec<Option<EdgeAttention>>,
}

impl<T: Scalar> Enhancer<T> {
    /// Builds the network with seeded He initialization. The parameter
    /// creation order is fixed, so a seed fully determines the weights.
    pub fn new(config: EnhancerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::new();
        let mut rng = init_rng(seed);
        let levels = config.levels;

        for (enc, in_ch) in [("img_enc", 3usize), ("edge_enc", 1usize)] {
            for level in 0..levels {
                let c = config.channels_at(level);
                let c_in = if level == 0 {
                    in_ch
                } else {
                    config.channels_at(level - 1)
                };
                insert_conv(&mut params, &mut rng, &format!("{enc}.l{level}.c1"), c, c_in, 3);
                insert_conv(&mut params, &mut rng, &format!("{enc}.l{level}.c2"), c, c, 3);
            }
        }

        let mut attention = Vec::new();
        for level in 0..levels - 1 {
            if config.attends_at(level) {
                let block = EdgeAttention::init(
                    format!("att.l{level}"),
                    config.channels_at(level),
                    &mut params,
                    &mut rng,
                );
                attention.push(Some(block));
            } else {
                attention.push(None);
            }
        }

        for level in (0..levels - 1).rev() {
            let c = config.channels_at(level);
            let c_up = config.channels_at(level + 1);
            insert_conv(&mut params, &mut rng, &format!("dec.l{level}.up"), c, c_up, 3);
            insert_conv(&mut params, &mut rng, &format!("dec.l{level}.c1"), c, 2 * c, 3);
            insert_conv(&mut params, &mut rng, &format!("dec.l{level}.c2"), c, c, 3);
        }

        insert_conv(&mut params, &mut rng, "head.img", 3, config.channels_at(0), 3);
        for j in 0..config.side_outputs {
            let c_tap = config.channels_at(config.tap_level(j));
            insert_conv(&mut params, &mut rng, &format!("edge_dec.side{j}"), 1, c_tap, 1);
        }
        insert_conv_const(
            &mut params,
            "edge_dec.fuse",
            1,
            config.side_outputs,
            1,
            1.0 / config.side_outputs as f64,
        );

        Ok(Self {
            config,
            params,
            attention,
        })
    }

    /// Rebuilds the attention bookkeeping after parameters were loaded.
    pub fn from_params(config: EnhancerConfig, params: ParamSet<T>) -> Result<Self> {
        config.validate()?;
        let mut attention = Vec::new();
        for level in 0..config.levels - 1 {
            if config.attends_at(level) {
                attention.push(Some(EdgeAttention {
                    prefix: format!("att.l{level}"),
                    channels: config.channels_at(level),
                }));
            } else {
                attention.push(None);
            }
        }
        Ok(Self {
            config,
            params,
            attention,
        })
    }

    fn check_inputs(&self, x_shape: (usize, usize, usize), e_shape: (usize, usize, usize)) -> Result<()> {
        let (xc, xh, xw) = x_shape;
        let (ec, eh, ew) = e_shape;
        if xc != 3 {
            return Err(NnError::shape(format!("expected a 3-channel image, got {xc}")));
        }
        if ec != 1 {
            return Err(NnError::shape(format!("expected a 1-channel edge map, got {ec}")));
        }
        if (xh, xw) != (eh, ew) {
            return Err(NnError::shape(format!(
                "image {xh}x{xw} and edge map {eh}x{ew} differ in size"
            )));
        }
        let m = self.config.size_multiple();
        if xh % m != 0 || xw % m != 0 {
            return Err(NnError::shape(format!(
                "input {xh}x{xw} not divisible by {m} (levels = {}); pad or crop the input",
                self.config.levels
            )));
        }
        Ok(())
    }

    fn encode(
        &self,
        g: &mut Graph<T>,
        binding: &ParamBinding,
        prefix: &str,
        input: NodeRef,
    ) -> Vec<NodeRef> {
        let mut features = Vec::with_capacity(self.config.levels);
        let mut cur = input;
        for level in 0..self.config.levels {
            let stride = if level == 0 { 1 } else { 2 };
            let c1 = apply_conv(g, binding, &format!("{prefix}.l{level}.c1"), cur, stride, 1);
            let a1 = g.leaky_relu(c1, LRELU_SLOPE);
            let c2 = apply_conv(g, binding, &format!("{prefix}.l{level}.c2"), a1, 1, 1);
            let a2 = g.leaky_relu(c2, LRELU_SLOPE);
            features.push(a2);
            cur = a2;
        }
        features
    }

    /// Builds the forward graph on existing input nodes.
    pub fn forward_graph(
        &self,
        g: &mut Graph<T>,
        binding: &ParamBinding,
        x: NodeRef,
        e: NodeRef,
    ) -> Result<EnhancerNodes> {
        self.check_inputs(g.value(x).chw(), g.value(e).chw())?;
        let f = self.encode(g, binding, "img_enc", x);
        let ef = self.encode(g, binding, "edge_enc", e);

        // Image decoder; stage outputs recorded deepest-first for the taps.
        let mut d = f[self.config.levels - 1];
        let mut stages = Vec::new();
        for level in (0..self.config.levels - 1).rev() {
            let up = g.upsample2x(d);
            let upc = apply_conv(g, binding, &format!("dec.l{level}.up"), up, 1, 1);
            let upa = g.leaky_relu(upc, LRELU_SLOPE);
            let skip = match &self.attention[level] {
                Some(block) => block.apply(g, binding, f[level], ef[level])?,
                None => f[level],
            };
            let cat = g.concat_c(&[upa, skip]);
            let c1 = apply_conv(g, binding, &format!("dec.l{level}.c1"), cat, 1, 1);
            let a1 = g.leaky_relu(c1, LRELU_SLOPE);
            let c2 = apply_conv(g, binding, &format!("dec.l{level}.c2"), a1, 1, 1);
            let a2 = g.leaky_relu(c2, LRELU_SLOPE);
            stages.push(a2);
            d = a2;
        }

        let head = apply_conv(g, binding, "head.img", d, 1, 1);
        let enhanced = g.sigmoid(head);

        // Edge decoder: side logits from the tapped stages, upsampled to
        // full resolution before the sigmoid.
        let mut side_edges = Vec::with_capacity(self.config.side_outputs);
        for j in 0..self.config.side_outputs {
            let level = self.config.tap_level(j);
            let stage_idx = self.config.levels - 2 - level;
            let tap = stages[stage_idx.min(stages.len() - 1)];
            let mut logit = apply_conv(g, binding, &format!("edge_dec.side{j}"), tap, 1, 0);
            for _ in 0..level {
                logit = g.upsample2x(logit);
            }
            side_edges.push(g.sigmoid(logit));
        }
        let cat = g.concat_c(&side_edges);
        let fused_logit = apply_conv(g, binding, "edge_dec.fuse", cat, 1, 0);
        let fused_edge = g.sigmoid(fused_logit);

        Ok(EnhancerNodes {
            enhanced,
            fused_edge,
            side_edges,
        })
    }

    /// Inference pass on plain tensors.
    pub fn forward(&self, x: &ImageTensor<T>, e: &EdgeMap<T>) -> Result<EnhancerOutput<T>> {
        let mut g = Graph::new();
        let binding = self.params.bind_frozen(&mut g);
        let xn = g.leaf(Tensor::from_image(x));
        let en = g.leaf(Tensor::from_gray(e));
        let nodes = self.forward_graph(&mut g, &binding, xn, en)?;
        Ok(EnhancerOutput {
            enhanced: g.value(nodes.enhanced).to_image(),
            fused_edge: g.value(nodes.fused_edge).to_gray(),
            side_edges: nodes
                .side_edges
                .iter()
                .map(|n| g.value(*n).to_gray())
                .collect(),
        })
    }
}

/// Where the network's input edge maps come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "path")]
pub enum EdgeSource {
    /// Normalized Sobel gradient magnitude computed from the image.
    Classical,
    /// Precomputed edge map (e.g. produced offline by a learned detector).
    File(std::path::PathBuf),
}

/// Produces the input edge map for an image.
pub fn input_edge_provider<T: Scalar>(img: &ImageTensor<T>, source: &EdgeSource) -> Result<EdgeMap<T>> {
    match source {
        EdgeSource::Classical => Ok(sobel_magnitude(img)),
        EdgeSource::File(path) => load_edge_file(img, path),
    }
}

fn load_edge_file<T: Scalar>(img: &ImageTensor<T>, path: &Path) -> Result<EdgeMap<T>> {
    let map = lltext_core::io::load_gray::<T>(path)?;
    if map.height() != img.height() || map.width() != img.width() {
        return Err(NnError::shape(format!(
            "edge file {} is {}x{}, image is {}x{}",
            path.display(),
            map.height(),
            map.width(),
            img.height(),
            img.width()
        )));
    }
    Ok(map)
}
