//! Named parameter storage with deterministic ordering, plus seeded
//! initializers. The insertion order defines the serialization and
//! optimizer-state order, so it must be identical across runs.

use std::collections::HashMap;

use lltext_core::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::graph::{Graph, NodeRef};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct ParamSet<T> {
    entries: Vec<(String, Tensor<T>)>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter {name}"
        );
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, value));
    }

    pub fn get(&self, name: &str) -> &Tensor<T> {
        let i = self.index[name];
        &self.entries[i].1
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor<T> {
        let i = self.index[name];
        &mut self.entries[i].1
    }

    pub fn try_get(&self, name: &str) -> Option<&Tensor<T>> {
        self.index.get(name).map(|i| &self.entries[*i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn total_scalars(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        let mut out = ParamSet::new();
        for (n, t) in self.iter() {
            out.insert(n, t.cast());
        }
        out
    }

    /// Inserts every parameter into a graph as a trainable node and returns
    /// the name-to-node binding used by a forward pass.
    pub fn bind(&self, g: &mut Graph<T>) -> ParamBinding {
        let mut nodes = HashMap::new();
        for (name, t) in self.iter() {
            nodes.insert(name.to_string(), g.param(t.clone()));
        }
        ParamBinding { nodes }
    }

    /// Like [`ParamSet::bind`] but as constants, for frozen modules.
    pub fn bind_frozen(&self, g: &mut Graph<T>) -> ParamBinding {
        let mut nodes = HashMap::new();
        for (name, t) in self.iter() {
            nodes.insert(name.to_string(), g.leaf(t.clone()));
        }
        ParamBinding { nodes }
    }

    /// Collects gradients after `backward`, aligned with insertion order.
    pub fn grads(&self, g: &Graph<T>, binding: &ParamBinding) -> Vec<Option<Tensor<T>>> {
        self.entries
            .iter()
            .map(|(name, _)| binding.nodes.get(name).and_then(|n| g.grad(*n).cloned()))
            .collect()
    }
}

/// Name-to-node map for one forward pass.
pub struct ParamBinding {
    nodes: HashMap<String, NodeRef>,
}

impl ParamBinding {
    pub fn node(&self, name: &str) -> NodeRef {
        *self
            .nodes
            .get(name)
            .unwrap_or_else(|| panic!("unbound parameter {name}"))
    }
}

/// Standard normal draw via Box-Muller; deterministic for a seeded RNG.
pub fn normal_draw<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Seeded RNG for parameter initialization.
pub fn init_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// He-normal conv weight `[cout, cin, k, k]`: std = sqrt(2 / fan_in).
pub fn he_conv<T: Scalar>(
    rng: &mut ChaCha20Rng,
    cout: usize,
    cin: usize,
    k: usize,
) -> Tensor<T> {
    let fan_in = (cin * k * k) as f64;
    let std = (2.0 / fan_in).sqrt();
    let n = cout * cin * k * k;
    let data = (0..n).map(|_| T::of(normal_draw(rng) * std)).collect();
    Tensor::new(vec![cout, cin, k, k], data)
}

/// Inserts a conv layer's weight and bias (bias zero-initialized).
pub fn insert_conv<T: Scalar>(
    params: &mut ParamSet<T>,
    rng: &mut ChaCha20Rng,
    name: &str,
    cout: usize,
    cin: usize,
    k: usize,
) {
    params.insert(format!("{name}.w"), he_conv(rng, cout, cin, k));
    params.insert(format!("{name}.b"), Tensor::zeros(vec![cout]));
}

/// Inserts a conv layer with all-zero weights (identity-start heads).
pub fn insert_conv_zero<T: Scalar>(
    params: &mut ParamSet<T>,
    name: &str,
    cout: usize,
    cin: usize,
    k: usize,
) {
    params.insert(format!("{name}.w"), Tensor::zeros(vec![cout, cin, k, k]));
    params.insert(format!("{name}.b"), Tensor::zeros(vec![cout]));
}

/// Inserts a conv layer with constant weights (e.g. side-output fusion).
pub fn insert_conv_const<T: Scalar>(
    params: &mut ParamSet<T>,
    name: &str,
    cout: usize,
    cin: usize,
    k: usize,
    value: f64,
) {
    params.insert(
        format!("{name}.w"),
        Tensor::filled(vec![cout, cin, k, k], T::of(value)),
    );
    params.insert(format!("{name}.b"), Tensor::zeros(vec![cout]));
}

/// Applies a named conv layer inside a graph.
pub fn apply_conv<T: Scalar>(
    g: &mut Graph<T>,
    binding: &ParamBinding,
    name: &str,
    input: NodeRef,
    stride: usize,
    pad: usize,
) -> NodeRef {
    let w = binding.node(&format!("{name}.w"));
    let b = binding.node(&format!("{name}.b"));
    g.conv2d(input, w, Some(b), stride, pad)
}
