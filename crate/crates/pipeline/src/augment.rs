//! `augment`: exports copy-paste-augmented samples as image + annotation
//! file pairs for inspection.

use std::path::PathBuf;

use lltext_core::io::save_image;
use lltext_data::{
    build_pool, compute_box_stats, text_cp_augment_pair, write_icdar_file, Manifest, TextCpParams,
};

use crate::config::RunConfig;
use crate::error::{PipelineError, Result};
use crate::seeds::{derive_seed, SeedDomain};

#[derive(Debug, Clone)]
pub struct AugmentSummary {
    pub out_dir: PathBuf,
    pub samples: usize,
    pub total_pasted: usize,
}

pub fn augment_command(cfg: &RunConfig) -> Result<AugmentSummary> {
    cfg.validate()?;
    let manifest = Manifest::load(&cfg.dataset.manifest)?;
    let pairs =
        manifest.load_split::<f64>(cfg.dataset.split.as_deref(), cfg.dataset.allow_unlabeled)?;
    let stats = compute_box_stats(&pairs, true)?;
    let pool = build_pool(&pairs);
    if pool.is_empty() {
        return Err(PipelineError::config(
            "corpus has no legible boxes to build a paste pool from".to_string(),
        ));
    }

    let out_dir = cfg.out_dir.join("augmented");
    std::fs::create_dir_all(&out_dir).map_err(|e| PipelineError::io(&out_dir, e))?;
    let mut total_pasted = 0usize;
    for (i, pair) in pairs.iter().enumerate() {
        let params = TextCpParams {
            n_target: cfg.textcp.n_target,
            gamma: cfg.textcp.gamma,
            max_attempts: cfg.textcp.max_attempts,
            stats,
            seed: derive_seed(cfg.seed, SeedDomain::TextCp, i as u64, 0),
        };
        let (aug, pasted) = text_cp_augment_pair(pair, &pool, &params)?;
        total_pasted += pasted;
        save_image(&aug.long, &out_dir.join(format!("{}_long.png", pair.id)))?;
        save_image(&aug.short, &out_dir.join(format!("{}_short.png", pair.id)))?;
        write_icdar_file(&out_dir.join(format!("{}.txt", pair.id)), &aug.boxes)?;
    }
    Ok(AugmentSummary {
        out_dir,
        samples: pairs.len(),
        total_pasted,
    })
}
