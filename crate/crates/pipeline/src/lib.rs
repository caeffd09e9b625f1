//! Batch toolkit tying the stack together: configuration, deterministic
//! training loops with checkpoint/resume, inference trees and evaluation
//! reports. The `toolkit` binary exposes the tasks `train-enhance`,
//! `train-synth`, `enhance`, `synthesize`, `augment` and `evaluate`.

pub mod augment;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod infer;
pub mod logging;
pub mod schedule;
pub mod seeds;
pub mod train_enhance;
pub mod train_synth;

pub use checkpoint::Checkpoint;
pub use config::{Precision, RunConfig};
pub use error::{PipelineError, Result};
pub use schedule::lr_schedule;
pub use train_enhance::{train_enhancer, TrainSummary};
pub use train_synth::train_synth;
