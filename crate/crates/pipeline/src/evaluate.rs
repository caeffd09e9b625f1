//! `evaluate`: per-image and aggregate PSNR/SSIM/average-lightness against
//! the ground-truth tree, micro-averaged detection H-Mean when detection
//! files are present, and two-stage spotting word accuracy when recognition
//! files are present.

use std::path::{Path, PathBuf};

use lltext_core::{box_iou, rgb_to_lightness, Scalar, TextBox};
use lltext_data::{parse_icdar_file, Manifest};
use lltext_metrics::{
    hmean, match_detections, psnr, ssim, word_accuracy, DetectionResult, EvalReport, SpottingRecord,
    SsimConfig,
};

use crate::config::RunConfig;
use crate::error::{PipelineError, Result};

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub report: EvalReport,
    pub report_json: PathBuf,
    pub report_table: PathBuf,
    pub per_image_csv: PathBuf,
}

pub fn evaluate_command<T: Scalar>(cfg: &RunConfig) -> Result<EvalSummary> {
    cfg.validate()?;
    let manifest = Manifest::load(&cfg.dataset.manifest)?;
    let entries: Vec<_> = manifest.entries(cfg.dataset.split.as_deref()).collect();
    if entries.is_empty() {
        return Err(PipelineError::data("no samples in the requested split".to_string()));
    }

    // The enhanced tree must cover every sample.
    let mut missing = Vec::new();
    for e in &entries {
        if !cfg.eval.enhanced_dir.join(format!("{}.png", e.id)).exists() {
            missing.push(e.id.clone());
        }
    }
    if !missing.is_empty() {
        return Err(PipelineError::data(format!(
            "enhanced tree is missing {} image(s): {}",
            missing.len(),
            missing.join(", ")
        )));
    }

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| PipelineError::io(&cfg.out_dir, e))?;
    let per_image_path = cfg.out_dir.join("per_image.csv");
    let mut per_image = String::from("id,psnr_db,ssim,avg_lightness\n");

    let ssim_cfg = SsimConfig::default();
    let mut psnr_sum = 0.0;
    let mut psnr_inf = false;
    let mut ssim_sum = 0.0;
    let mut light_sum = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut legible_gt = 0usize;
    let mut spotting: Vec<SpottingRecord> = Vec::new();
    let have_detections = cfg.eval.detections_dir.is_some();
    let have_recognition = cfg.eval.recognition_dir.is_some();
    let iou_threshold = cfg.eval.iou_threshold.unwrap_or(0.5);

    for entry in entries.iter() {
        let pair = manifest.load_entry::<T>(entry, true)?;
        let enhanced_path = cfg.eval.enhanced_dir.join(format!("{}.png", entry.id));
        let enhanced = lltext_core::io::load_image::<T>(&enhanced_path)?;
        if !enhanced.same_shape(&pair.long) {
            return Err(PipelineError::data(format!(
                "{}: enhanced image is {}x{}, ground truth is {}x{}",
                entry.id,
                enhanced.height(),
                enhanced.width(),
                pair.long.height(),
                pair.long.width()
            )));
        }
        let p = psnr(&enhanced, &pair.long)?;
        if p.is_infinite() {
            psnr_inf = true;
        } else {
            psnr_sum += p;
        }
        let s = ssim(&enhanced, &pair.long, &ssim_cfg)?;
        ssim_sum += s;
        let light = rgb_to_lightness(&enhanced)?.mean().dbl();
        light_sum += light;
        let psnr_text = if p.is_infinite() { "inf".to_string() } else { format!("{p}") };
        per_image.push_str(&format!("{},{},{},{}\n", entry.id, psnr_text, s, light));

        legible_gt += pair.boxes.iter().filter(|b| b.legible).count();
        if let Some(dir) = &cfg.eval.detections_dir {
            let preds = load_boxes(dir, &entry.id)?;
            let det = DetectionResult {
                boxes: preds,
                confidence: None,
            };
            let m = match_detections(&det, &pair.boxes, iou_threshold);
            tp += m.tp;
            fp += m.fp;
        }
        if let Some(dir) = &cfg.eval.recognition_dir {
            let preds = load_boxes(dir, &entry.id)?;
            for p in preds {
                if let Some(best) = best_legible_match(&p, &pair.boxes) {
                    spotting.push(SpottingRecord {
                        pred_box: p.quad,
                        pred_text: p.transcription.clone(),
                        gt_box: best.quad,
                        gt_text: best.transcription.clone(),
                    });
                }
            }
        }
    }

    let n = entries.len() as f64;
    let mut report = EvalReport {
        dataset: cfg
            .dataset
            .manifest
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "dataset".to_string()),
        image_count: entries.len(),
        psnr_db: if psnr_inf { None } else { Some(psnr_sum / n) },
        psnr_infinite: psnr_inf,
        ssim: Some(ssim_sum / n),
        avg_lightness: Some(light_sum / n),
        ..EvalReport::default()
    };
    if have_detections {
        let (p, r, h) = hmean(tp, fp, legible_gt);
        report.precision = Some(p);
        report.recall = Some(r);
        report.hmean = Some(h);
        report.true_positives = Some(tp);
        report.false_positives = Some(fp);
        report.legible_gt = Some(legible_gt);
    }
    if have_recognition {
        report.word_accuracy = Some(word_accuracy(&spotting, legible_gt));
    }

    let report_json = cfg.out_dir.join("report.json");
    std::fs::write(&report_json, report.to_json()).map_err(|e| PipelineError::io(&report_json, e))?;
    let report_table = cfg.out_dir.join("report.txt");
    std::fs::write(&report_table, report.table()).map_err(|e| PipelineError::io(&report_table, e))?;
    std::fs::write(&per_image_path, per_image).map_err(|e| PipelineError::io(&per_image_path, e))?;
    Ok(EvalSummary {
        report,
        report_json,
        report_table,
        per_image_csv: per_image_path,
    })
}

fn load_boxes(dir: &Path, id: &str) -> Result<Vec<TextBox>> {
    let path = dir.join(format!("{id}.txt"));
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(parse_icdar_file(&path)?)
}

fn best_legible_match<'a>(pred: &TextBox, gts: &'a [TextBox]) -> Option<&'a TextBox> {
    let mut best = None;
    let mut best_iou = 0.0;
    for g in gts.iter().filter(|g| g.legible) {
        let iou = box_iou(pred, g);
        if iou > best_iou {
            best_iou = iou;
            best = Some(g);
        }
    }
    best
}
