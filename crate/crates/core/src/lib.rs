//! Foundational types for scene-text-aware low-light image enhancement:
//! unit-interval image tensors, quadrilateral text annotations, color
//! conversion, classical edge extraction, and synthetic text-region
//! heatmaps.
//!
//! Everything numeric is generic over the [`Scalar`] floating-point type;
//! concrete aliases for the common instantiations live at the crate root.

pub mod boxes;
pub mod color;
pub mod edges;
pub mod error;
pub mod heatmap;
pub mod image;
pub mod io;
pub mod scalar;

pub use boxes::{box_iou, box_iou_mode, Aabb, IouMode, Point, TextBox, DONT_CARE};
pub use color::{luma_rec601, rgb_to_lightness};
pub use edges::{canny_edges, sobel_magnitude};
pub use error::{CoreError, Result};
pub use heatmap::{gaussian_box_heatmap, FileHeatmapProvider, HeatmapProvider, SyntheticBoxProvider};
pub use image::{EdgeMap, GrayMap, ImageTensor, RegionHeatmap};
pub use scalar::Scalar;

pub type ImageF32 = ImageTensor<f32>;
pub type ImageF64 = ImageTensor<f64>;
pub type GrayMapF32 = GrayMap<f32>;
pub type GrayMapF64 = GrayMap<f64>;
pub type EdgeMapF32 = EdgeMap<f32>;
pub type EdgeMapF64 = EdgeMap<f64>;
pub type RegionHeatmapF32 = RegionHeatmap<f32>;
pub type RegionHeatmapF64 = RegionHeatmap<f64>;
