//! Aggregate evaluation report with a plain-text table and a JSON form.

use serde::{Deserialize, Serialize};

/// Per-dataset metric bundle. Optional fields stay absent when their input
/// files were not provided; `lpips` is a slot for externally computed values
/// so full table parity can be assembled downstream.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct EvalReport {
    pub dataset: String,
    pub image_count: usize,
    /// Mean PSNR in dB; `None` with `psnr_infinite` set means every pair
    /// was identical.
    pub psnr_db: Option<f64>,
    #[serde(default)]
    pub psnr_infinite: bool,
    pub ssim: Option<f64>,
    pub avg_lightness: Option<f64>,
    pub lpips: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub hmean: Option<f64>,
    pub word_accuracy: Option<f64>,
    pub true_positives: Option<usize>,
    pub false_positives: Option<usize>,
    pub legible_gt: Option<usize>,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3}"),
        None => "-".to_string(),
    }
}

impl EvalReport {
    /// Fixed-width table row mirroring the usual benchmark column layout.
    pub fn table(&self) -> String {
        let psnr = if self.psnr_infinite {
            "inf".to_string()
        } else {
            fmt_opt(self.psnr_db)
        };
        let mut out = String::new();
        out.push_str(&format!(
            "{:<20} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10}\n",
            "Dataset", "PSNR", "SSIM", "LPIPS", "Avg L*", "H-Mean", "WordAcc"
        ));
        out.push_str(&format!(
            "{:<20} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10}\n",
            self.dataset,
            psnr,
            fmt_opt(self.ssim),
            fmt_opt(self.lpips),
            fmt_opt(self.avg_lightness),
            fmt_opt(self.hmean),
            fmt_opt(self.word_accuracy),
        ));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_preserves_absent_fields() {
        let r = EvalReport {
            dataset: "toy".into(),
            image_count: 3,
            psnr_db: Some(21.5),
            ssim: Some(0.9),
            ..EvalReport::default()
        };
        let back = EvalReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back.dataset, "toy");
        assert_eq!(back.hmean, None);
        assert_eq!(back.psnr_db, Some(21.5));
    }

    #[test]
    fn table_marks_infinite_psnr() {
        let r = EvalReport {
            dataset: "black".into(),
            psnr_infinite: true,
            ..EvalReport::default()
        };
        assert!(r.table().contains("inf"));
    }
}
