//! Corpus statistics over annotated text boxes: the width/height mean and
//! population standard deviation that drive copy-paste size sampling.

use lltext_core::Scalar;
use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};
use crate::sample::SamplePair;

/// Box-extent statistics of a corpus (population convention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub mu_w: f64,
    pub mu_h: f64,
    pub sigma_w: f64,
    pub sigma_h: f64,
    pub count_legible: usize,
    pub count_illegible: usize,
}

/// Mean and population standard deviation of the axis-aligned box extents.
/// With `legible_only`, don't-care boxes are excluded from the moments
/// (they are still counted).
pub fn compute_box_stats<T: Scalar>(pairs: &[SamplePair<T>], legible_only: bool) -> Result<BoxStats> {
    let mut widths = Vec::new();
    let mut heights = Vec::new();
    let mut count_legible = 0usize;
    let mut count_illegible = 0usize;
    for p in pairs {
        for b in &p.boxes {
            if b.legible {
                count_legible += 1;
            } else {
                count_illegible += 1;
            }
            if legible_only && !b.legible {
                continue;
            }
            let bb = b.aabb();
            widths.push(bb.w);
            heights.push(bb.h);
        }
    }
    if widths.is_empty() {
        return Err(DataError::EmptyCorpus(
            "no boxes available for statistics".to_string(),
        ));
    }
    let (mu_w, sigma_w) = mean_and_population_std(&widths);
    let (mu_h, sigma_h) = mean_and_population_std(&heights);
    Ok(BoxStats {
        mu_w,
        mu_h,
        sigma_w,
        sigma_h,
        count_legible,
        count_illegible,
    })
}

fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
