//! Trainable networks for low-light text image enhancement, built on a
//! small reverse-mode autodiff engine.
//!
//! - [`graph`]: define-by-run tape with convolution, pooling, attention and
//!   reduction ops.
//! - [`enhancer`]: dual-encoder / dual-decoder U-Net with edge-aware
//!   attention and three side edge outputs.
//! - [`losses`]: the four enhancement objectives and their weighted sum.
//! - [`synthdce`]: supervised curve estimation for synthesizing extremely
//!   low-light images, with its four-term objective.
//!
//! Everything is generic over the scalar type; gradient verification runs
//! at f64.

pub mod adam;
pub mod attention;
pub mod enhancer;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod losses;
pub mod params;
pub mod scorer;
pub mod synthdce;
pub mod tensor;

pub use adam::Adam;
pub use error::{NnError, Result};
pub use graph::{Graph, NodeRef};
pub use params::{ParamBinding, ParamSet};
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Graph32 = Graph<f32>;
pub type Graph64 = Graph<f64>;
