//! IC15-protocol detection matching, harmonic-mean scoring and two-stage
//! spotting word accuracy.

use lltext_core::{box_iou, TextBox};
use serde::{Deserialize, Serialize};

/// Predicted boxes for one image (confidence optional, unused by matching).
#[derive(Debug, Clone, Default)]
pub struct DetectionResult {
    pub boxes: Vec<TextBox>,
    pub confidence: Option<Vec<f64>>,
}

/// Outcome of matching one image's predictions against its ground truth.
#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub tp: usize,
    pub fp: usize,
    /// Per-ground-truth matched flags (legible boxes only can be matched).
    pub gt_matched: Vec<bool>,
    /// Per-prediction state: index of the matched GT, `Ignored` for
    /// don't-care hits, or `FalsePositive`.
    pub pred_state: Vec<PredState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredState {
    Matched(usize),
    Ignored,
    FalsePositive,
}

/// Greedy one-to-one matching by descending IoU.
///
/// A prediction whose best overlap is with an illegible (don't-care) box at
/// IoU >= threshold is excluded from both true and false positives; every
/// legible ground-truth box is matched at most once.
pub fn match_detections(
    preds: &DetectionResult,
    gts: &[TextBox],
    iou_threshold: f64,
) -> MatchOutcome {
    assert!(
        iou_threshold > 0.0 && iou_threshold < 1.0,
        "iou threshold must be in (0, 1)"
    );
    let n_pred = preds.boxes.len();
    let mut pred_state = vec![PredState::FalsePositive; n_pred];
    let mut gt_matched = vec![false; gts.len()];

    // Don't-care exclusion first: best overlap over all GTs.
    let mut active_pred: Vec<usize> = Vec::new();
    for (pi, p) in preds.boxes.iter().enumerate() {
        let mut best = 0.0;
        let mut best_gt: Option<usize> = None;
        for (gi, g) in gts.iter().enumerate() {
            let iou = box_iou(p, g);
            if iou > best {
                best = iou;
                best_gt = Some(gi);
            }
        }
        match best_gt {
            Some(gi) if !gts[gi].legible && best >= iou_threshold => {
                pred_state[pi] = PredState::Ignored;
            }
            _ => active_pred.push(pi),
        }
    }

    // Candidate pairs against legible GTs, sorted by descending IoU with a
    // deterministic tie order.
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for &pi in &active_pred {
        for (gi, g) in gts.iter().enumerate() {
            if !g.legible {
                continue;
            }
            let iou = box_iou(&preds.boxes[pi], g);
            if iou >= iou_threshold {
                pairs.push((iou, pi, gi));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut pred_taken = vec![false; n_pred];
    let mut tp = 0;
    for (_, pi, gi) in pairs {
        if pred_taken[pi] || gt_matched[gi] {
            continue;
        }
        pred_taken[pi] = true;
        gt_matched[gi] = true;
        pred_state[pi] = PredState::Matched(gi);
        tp += 1;
    }
    let fp = active_pred.iter().filter(|pi| !pred_taken[**pi]).count();
    MatchOutcome {
        tp,
        fp,
        gt_matched,
        pred_state,
    }
}

/// Precision, recall and their harmonic mean from aggregate counts.
///
/// Degenerate conventions, declared: with no predictions, precision is 1
/// when there is also no ground truth (vacuous success) and 0 otherwise;
/// with no ground truth, recall is 1 when nothing was predicted to match;
/// the harmonic mean is 0 whenever precision + recall is 0.
pub fn hmean(tp: usize, fp: usize, total_legible_gt: usize) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 {
        if total_legible_gt == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if total_legible_gt == 0 {
        1.0
    } else {
        tp as f64 / total_legible_gt as f64
    };
    let h = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, h)
}

/// One two-stage spotting record: a predicted box/transcript paired with
/// the ground-truth box/transcript it is claimed to read.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpottingRecord {
    pub pred_box: [[f64; 2]; 4],
    pub pred_text: String,
    pub gt_box: [[f64; 2]; 4],
    pub gt_text: String,
}

/// Case-insensitive two-stage word accuracy: a record counts iff its boxes
/// overlap with IoU > 0.5 and the case-folded transcripts match exactly.
/// The denominator is the number of legible ground-truth words; an empty
/// evaluation (no words) counts as vacuous success.
pub fn word_accuracy(records: &[SpottingRecord], total_legible_gt: usize) -> f64 {
    if total_legible_gt == 0 {
        return 1.0;
    }
    let mut correct = 0usize;
    for r in records {
        let pb = TextBox::new(r.pred_box, true, "");
        let gb = TextBox::new(r.gt_box, true, "");
        let (Ok(pb), Ok(gb)) = (pb, gb) else {
            continue;
        };
        if box_iou(&pb, &gb) > 0.5 && r.pred_text.to_lowercase() == r.gt_text.to_lowercase() {
            correct += 1;
        }
    }
    correct as f64 / total_legible_gt as f64
}
