//! Evaluation suite: PSNR/SSIM, corpus darkness statistics, IC15-protocol
//! detection matching with don't-care handling, and two-stage spotting
//! word accuracy.

pub mod detection;
pub mod error;
pub mod quality;
pub mod report;

pub use detection::{
    hmean, match_detections, word_accuracy, DetectionResult, MatchOutcome, PredState,
    SpottingRecord,
};
pub use error::{MetricsError, Result};
pub use quality::{dataset_darkness, psnr, ssim, DarknessSummary, SsimConfig};
pub use report::EvalReport;
