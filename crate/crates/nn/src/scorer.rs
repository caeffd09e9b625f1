//! Differentiable text-region scorer.
//!
//! A small frozen convolutional network mapping an image to a [0, 1] score
//! map. It stands in for a pretrained detector's region-score head during
//! training, so the text-detection objective stays differentiable and
//! hermetic: gradients flow through the scored image, never into the
//! scorer's own (fixed, seeded) weights.

use lltext_core::{HeatmapProvider, ImageTensor, RegionHeatmap, Scalar};

use crate::graph::{Graph, NodeRef};
use crate::params::{apply_conv, init_rng, insert_conv, ParamSet};
use crate::tensor::Tensor;

const LRELU_SLOPE: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct DiffScorer<T> {
    params: ParamSet<T>,
}

impl<T: Scalar> DiffScorer<T> {
    /// Fixed architecture: two 3×3 convolutions and a 1×1 projection with a
    /// sigmoid head, weights drawn from the seed.
    pub fn new(seed: u64) -> Self {
        let mut params = ParamSet::new();
        let mut rng = init_rng(seed);
        insert_conv(&mut params, &mut rng, "c1", 8, 3, 3);
        insert_conv(&mut params, &mut rng, "c2", 8, 8, 3);
        insert_conv(&mut params, &mut rng, "proj", 1, 8, 1);
        Self { params }
    }

    /// Scores an image node; the scorer weights enter as constants.
    pub fn score_graph(&self, g: &mut Graph<T>, img: NodeRef) -> NodeRef {
        let binding = self.params.bind_frozen(g);
        let a = apply_conv(g, &binding, "c1", img, 1, 1);
        let a = g.leaky_relu(a, LRELU_SLOPE);
        let b = apply_conv(g, &binding, "c2", a, 1, 1);
        let b = g.leaky_relu(b, LRELU_SLOPE);
        let logit = apply_conv(g, &binding, "proj", b, 1, 0);
        g.sigmoid(logit)
    }

    pub fn score(&self, img: &ImageTensor<T>) -> RegionHeatmap<T> {
        let mut g = Graph::new();
        let node = g.leaf(Tensor::from_image(img));
        let out = self.score_graph(&mut g, node);
        g.value(out).to_gray()
    }
}

impl<T: Scalar> HeatmapProvider<T> for DiffScorer<T> {
    fn region_score(&self, img: &ImageTensor<T>) -> lltext_core::Result<RegionHeatmap<T>> {
        Ok(self.score(img))
    }
}
