//! Dataset layer: paired short/long-exposure ingest with IC15 text
//! annotations, corpus box statistics, text-guaranteed patch sampling, and
//! text-aware copy-paste augmentation.

pub mod error;
pub mod icdar;
pub mod manifest;
pub mod patch;
pub mod rng;
pub mod sample;
pub mod stats;
pub mod textcp;

pub use error::{DataError, Result};
pub use icdar::{format_icdar_line, parse_icdar_file, parse_icdar_line, write_icdar_file};
pub use manifest::{Manifest, ManifestEntry};
pub use patch::{sample_patch, PatchSample, PatchSpec};
pub use sample::{load_pair, SamplePair};
pub use stats::{compute_box_stats, BoxStats};
pub use textcp::{
    build_pool, sample_placement, text_cp_augment, text_cp_augment_pair, TextCpOutcome,
    TextCpParams, TextPool,
};

pub type SamplePairF32 = SamplePair<f32>;
pub type SamplePairF64 = SamplePair<f64>;
