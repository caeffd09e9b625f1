//! Edge-aware attention: channel attention over image-encoder features plus
//! spatial attention over edge-encoder features, composed additively.

use lltext_core::Scalar;
use rand_chacha::ChaCha20Rng;

use crate::error::{NnError, Result};
use crate::graph::{Graph, NodeRef};
use crate::params::{apply_conv, insert_conv, ParamBinding, ParamSet};

/// Parameter namespace of one edge-aware attention block operating on
/// `channels`-wide feature maps. The internal width is `channels / 2`
/// (minimum 1), mirroring polarized self-attention.
#[derive(Debug, Clone)]
pub struct EdgeAttention {
    pub prefix: String,
    pub channels: usize,
}

impl EdgeAttention {
    pub fn internal_channels(channels: usize) -> usize {
        (channels / 2).max(1)
    }

    /// Registers the five 1×1 convolutions of the block.
    pub fn init<T: Scalar>(
        prefix: impl Into<String>,
        channels: usize,
        params: &mut ParamSet<T>,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        let prefix = prefix.into();
        let cp = Self::internal_channels(channels);
        insert_conv(params, rng, &format!("{prefix}.ch_q"), 1, channels, 1);
        insert_conv(params, rng, &format!("{prefix}.ch_v"), cp, channels, 1);
        insert_conv(params, rng, &format!("{prefix}.ch_z"), channels, cp, 1);
        insert_conv(params, rng, &format!("{prefix}.sp_q"), cp, channels, 1);
        insert_conv(params, rng, &format!("{prefix}.sp_v"), cp, channels, 1);
        Self { prefix, channels }
    }

    /// Channel attention vector `[C,1,1]` with entries in (0,1): the value
    /// branch is aggregated with softmax weights taken over the spatial
    /// positions of the 1-channel query branch.
    pub fn channel_attention<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        binding: &ParamBinding,
        f: NodeRef,
    ) -> NodeRef {
        let q = apply_conv(g, binding, &format!("{}.ch_q", self.prefix), f, 1, 0);
        let attn = g.softmax_all(q);
        let v = apply_conv(g, binding, &format!("{}.ch_v", self.prefix), f, 1, 0);
        let pooled = g.spatial_dot(v, attn);
        let z = apply_conv(g, binding, &format!("{}.ch_z", self.prefix), pooled, 1, 0);
        g.sigmoid(z)
    }

    /// Spatial attention map `[1,H,W]` with entries in (0,1): the value
    /// branch is collapsed over channels with softmax weights taken over the
    /// channels of the globally pooled query branch.
    pub fn spatial_attention<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        binding: &ParamBinding,
        e: NodeRef,
    ) -> NodeRef {
        let q = apply_conv(g, binding, &format!("{}.sp_q", self.prefix), e, 1, 0);
        let pooled = g.global_avg_pool(q);
        let attn = g.softmax_all(pooled);
        let v = apply_conv(g, binding, &format!("{}.sp_v", self.prefix), e, 1, 0);
        let collapsed = g.channel_dot(v, attn);
        g.sigmoid(collapsed)
    }

    /// `A_ch(F) ⊙ F + A_sp(E) ⊙ F`; image features F, edge features E.
    pub fn apply<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        binding: &ParamBinding,
        f: NodeRef,
        e: NodeRef,
    ) -> Result<NodeRef> {
        let (fc, fh, fw) = g.value(f).chw();
        let (_, eh, ew) = g.value(e).chw();
        if (fh, fw) != (eh, ew) {
            return Err(NnError::shape(format!(
                "edge-att spatial mismatch: image features {fh}x{fw}, edge features {eh}x{ew}"
            )));
        }
        if fc != self.channels {
            return Err(NnError::shape(format!(
                "edge-att built for {} channels, got {fc}",
                self.channels
            )));
        }
        let a_ch = self.channel_attention(g, binding, f);
        let a_sp = self.spatial_attention(g, binding, e);
        let ch_term = g.mul(f, a_ch);
        let sp_term = g.mul(f, a_sp);
        Ok(g.add(ch_term, sp_term))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::init_rng;
    use crate::tensor::Tensor;
    use approx::assert_abs_diff_eq;

    /// Attention block with every 1×1 conv set to unit weight, zero bias.
    fn unit_block(channels: usize) -> (EdgeAttention, ParamSet<f64>) {
        let mut params = ParamSet::new();
        let mut rng = init_rng(0);
        let block = EdgeAttention::init("att", channels, &mut params, &mut rng);
        let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
        for n in names {
            if n.ends_with(".w") {
                let t = params.get_mut(&n);
                for v in t.data_mut() {
                    *v = 1.0;
                }
            }
        }
        (block, params)
    }

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn channel_attention_hand_value() {
        // C=1, H=W=1, unit weights: single-element softmax is 1, so the
        // chain reduces to sigmoid(0.3).
        let (block, params) = unit_block(1);
        let mut g = Graph::new();
        let binding = params.bind(&mut g);
        let f = g.leaf(Tensor::new(vec![1, 1, 1], vec![0.3f64]));
        let a = block.channel_attention(&mut g, &binding, f);
        assert_abs_diff_eq!(g.value(a).data()[0], sigmoid(0.3), epsilon = 1e-12);
        assert_abs_diff_eq!(g.value(a).data()[0], 0.5744, epsilon = 1e-4);
    }

    #[test]
    fn spatial_attention_hand_value() {
        let (block, params) = unit_block(1);
        let mut g = Graph::new();
        let binding = params.bind(&mut g);
        let e = g.leaf(Tensor::new(vec![1, 1, 1], vec![0.2f64]));
        let a = block.spatial_attention(&mut g, &binding, e);
        assert_abs_diff_eq!(g.value(a).data()[0], sigmoid(0.2), epsilon = 1e-12);
        assert_abs_diff_eq!(g.value(a).data()[0], 0.5498, epsilon = 1e-4);
    }

    #[test]
    fn edge_att_hand_value() {
        let (block, params) = unit_block(1);
        let mut g = Graph::new();
        let binding = params.bind(&mut g);
        let f = g.leaf(Tensor::new(vec![1, 1, 1], vec![0.3f64]));
        let e = g.leaf(Tensor::new(vec![1, 1, 1], vec![0.2f64]));
        let out = block.apply(&mut g, &binding, f, e).unwrap();
        let expected = sigmoid(0.3) * 0.3 + sigmoid(0.2) * 0.3;
        assert_abs_diff_eq!(g.value(out).data()[0], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(g.value(out).data()[0], 0.3373, epsilon = 1e-4);
    }

    #[test]
    fn attention_ranges_and_softmax_normalization() {
        let mut params = ParamSet::<f64>::new();
        let mut rng = init_rng(7);
        let block = EdgeAttention::init("att", 4, &mut params, &mut rng);
        let mut g = Graph::new();
        let binding = params.bind(&mut g);
        let data: Vec<f64> = (0..4 * 6 * 5).map(|i| ((i * 37 % 101) as f64) / 101.0 - 0.3).collect();
        let f = g.leaf(Tensor::new(vec![4, 6, 5], data.clone()));
        let a_ch = block.channel_attention(&mut g, &binding, f);
        assert_eq!(g.value(a_ch).shape(), &[4, 1, 1]);
        assert!(g.value(a_ch).data().iter().all(|v| *v > 0.0 && *v < 1.0));
        let a_sp = block.spatial_attention(&mut g, &binding, f);
        assert_eq!(g.value(a_sp).shape(), &[1, 6, 5]);
        assert!(g.value(a_sp).data().iter().all(|v| *v > 0.0 && *v < 1.0));

        // Internal softmax vectors sum to 1.
        let q = apply_conv(&mut g, &binding, "att.ch_q", f, 1, 0);
        let sm = g.softmax_all(q);
        let total: f64 = g.value(sm).data().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn spatially_constant_edge_features_give_constant_attention() {
        let mut params = ParamSet::<f64>::new();
        let mut rng = init_rng(3);
        let block = EdgeAttention::init("att", 2, &mut params, &mut rng);
        let mut g = Graph::new();
        let binding = params.bind(&mut g);
        let mut data = vec![0.37f64; 2 * 4 * 4];
        data[16..].iter_mut().for_each(|v| *v = -0.2);
        let e = g.leaf(Tensor::new(vec![2, 4, 4], data));
        let a = block.spatial_attention(&mut g, &binding, e);
        let first = g.value(a).data()[0];
        for v in g.value(a).data() {
            assert_abs_diff_eq!(*v, first, epsilon = 1e-12);
        }
    }

    #[test]
    fn output_is_linear_in_image_features_for_fixed_attention() {
        // Recompose the op from its attention maps: doubling F doubles both
        // terms when the attention values are held fixed.
        let (block, params) = unit_block(2);
        let mut g = Graph::new();
        let binding = params.bind(&mut g);
        let fdata: Vec<f64> = (0..2 * 3 * 3).map(|i| 0.1 + 0.02 * i as f64).collect();
        let edata: Vec<f64> = (0..2 * 3 * 3).map(|i| 0.3 - 0.01 * i as f64).collect();
        let f = g.leaf(Tensor::new(vec![2, 3, 3], fdata.clone()));
        let e = g.leaf(Tensor::new(vec![2, 3, 3], edata));
        let a_ch = block.channel_attention(&mut g, &binding, f);
        let a_sp = block.spatial_attention(&mut g, &binding, e);
        let f2 = g.mul_const(f, 2.0);
        let t1 = g.mul(f, a_ch);
        let t2 = g.mul(f, a_sp);
        let t1d = g.mul(f2, a_ch);
        let t2d = g.mul(f2, a_sp);
        for k in 0..2 * 3 * 3 {
            assert_abs_diff_eq!(g.value(t1d).data()[k], 2.0 * g.value(t1).data()[k], epsilon = 1e-12);
            assert_abs_diff_eq!(g.value(t2d).data()[k], 2.0 * g.value(t2).data()[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_image_features_give_zero_output() {
        let mut params = ParamSet::<f64>::new();
        let mut rng = init_rng(9);
        let block = EdgeAttention::init("att", 2, &mut params, &mut rng);
        let mut g = Graph::new();
        let binding = params.bind(&mut g);
        let f = g.leaf(Tensor::zeros(vec![2, 4, 4]));
        let e = g.leaf(Tensor::new(
            vec![2, 4, 4],
            (0..32).map(|i| i as f64 * 0.01).collect(),
        ));
        let out = block.apply(&mut g, &binding, f, e).unwrap();
        assert!(g.value(out).data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn spatial_size_mismatch_is_an_error() {
        let mut params = ParamSet::<f64>::new();
        let mut rng = init_rng(9);
        let block = EdgeAttention::init("att", 2, &mut params, &mut rng);
        let mut g = Graph::new();
        let binding = params.bind(&mut g);
        let f = g.leaf(Tensor::zeros(vec![2, 4, 4]));
        let e = g.leaf(Tensor::zeros(vec![2, 8, 8]));
        assert!(block.apply(&mut g, &binding, f, e).is_err());
    }
}
