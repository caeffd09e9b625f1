//! Run configuration: a TOML file with nested sections, plus environment
//! overrides under the `LLTEXT_` prefix (`LLTEXT_TRAIN__EPOCHS=5` sets
//! `train.epochs`; double underscores separate nesting levels).

use std::path::{Path, PathBuf};

use lltext_nn::enhancer::EnhancerConfig;
use lltext_nn::losses::{LossWeights, MsSsimConfig};
use lltext_nn::synthdce::{CurveNetConfig, SpaConfig, SynthLossWeights};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

pub const ENV_PREFIX: &str = "LLTEXT_";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Numeric precision: "f32" or "f64".
    pub precision: Precision,
    pub dataset: DatasetConfig,
    pub patch: PatchConfig,
    pub enhancer: EnhancerConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub edge: EdgeConfig,
    pub textcp: TextCpConfig,
    pub synth: CurveNetConfig,
    pub synth_loss: SynthLossConfig,
    pub infer: InferConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            precision: Precision::F64,
            dataset: DatasetConfig::default(),
            patch: PatchConfig::default(),
            enhancer: EnhancerConfig::default(),
            train: TrainConfig::default(),
            loss: LossConfig::default(),
            edge: EdgeConfig::default(),
            textcp: TextCpConfig::default(),
            synth: CurveNetConfig::default(),
            synth_loss: SynthLossConfig::default(),
            infer: InferConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct DatasetConfig {
    pub manifest: PathBuf,
    pub split: Option<String>,
    pub allow_unlabeled: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PatchConfig {
    pub size: usize,
    pub require_legible_text: bool,
    pub random_flips: bool,
    pub random_transpose: bool,
    pub clipped_to_dont_care: bool,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            size: 512,
            require_legible_text: true,
            random_flips: true,
            random_transpose: true,
            clipped_to_dont_care: false,
        }
    }
}

impl PatchConfig {
    pub fn to_spec(&self) -> lltext_data::PatchSpec {
        lltext_data::PatchSpec {
            size: self.size,
            require_legible_text: self.require_legible_text,
            random_flips: self.random_flips,
            random_transpose: self.random_transpose,
            clipped_to_dont_care: self.clipped_to_dont_care,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Checkpoint interval in epochs.
    pub checkpoint_every: usize,
    pub resume: Option<PathBuf>,
    pub lr: LrSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 4000,
            batch_size: 2,
            checkpoint_every: 100,
            resume: None,
            lr: LrSchedule::default(),
        }
    }
}

/// Piecewise-constant learning rate: `initial` until `drop_after_epochs`,
/// then `drop_to`. Leaving the drop fields unset keeps the rate fixed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct LrSchedule {
    pub initial: f64,
    // Field-level defaults: an explicit [train.lr] with only `initial`
    // means a fixed rate.
    #[serde(default)]
    pub drop_to: Option<f64>,
    #[serde(default)]
    pub drop_after_epochs: Option<usize>,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial: 1e-4,
            drop_to: Some(1e-5),
            drop_after_epochs: Some(2000),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct LossConfig {
    pub weights: LossWeights,
    /// Smooth-L1 transition point.
    pub delta: f64,
    /// Edge-loss class-balance multiplier.
    pub lambda: f64,
    pub ms_ssim: MsSsimConfig,
    /// Seed of the frozen text-region scorer.
    pub text_scorer_seed: u64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            delta: 1.0,
            lambda: 1.1,
            ms_ssim: MsSsimConfig::default(),
            text_scorer_seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EdgeConfig {
    /// Input edge maps: "classical" Sobel, or "file" with per-sample maps
    /// under `file_dir/<id>.png`.
    pub mode: EdgeMode,
    pub file_dir: Option<PathBuf>,
    /// Canny thresholds for ground-truth edges, fractions of max gradient.
    pub canny_low: f64,
    pub canny_high: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    Classical,
    File,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self {
            mode: EdgeMode::Classical,
            file_dir: None,
            canny_low: 0.1,
            canny_high: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TextCpConfig {
    pub enabled: bool,
    pub n_target: usize,
    pub gamma: f64,
    pub max_attempts: usize,
}

impl Default for TextCpConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            n_target: 10,
            gamma: 1.0,
            max_attempts: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SynthLossConfig {
    pub weights: SynthLossWeights,
    pub spa: SpaConfig,
}

impl Default for SynthLossConfig {
    fn default() -> Self {
        Self {
            weights: SynthLossWeights::default(),
            spa: SpaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct InferConfig {
    pub checkpoint: PathBuf,
    /// 0 disables tiling (full-frame inference with reflect padding).
    pub tile: usize,
    pub overlap: usize,
    pub write_edges: bool,
    pub write_panels: bool,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self {
            checkpoint: PathBuf::new(),
            tile: 0,
            overlap: 64,
            write_edges: false,
            write_panels: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct EvalConfig {
    /// Directory of enhanced images named `<id>.png`.
    pub enhanced_dir: PathBuf,
    /// Optional per-image detection files `<id>.txt` (IC15 format).
    pub detections_dir: Option<PathBuf>,
    /// Optional per-image recognition files `<id>.txt` (IC15 format with
    /// predicted transcriptions).
    pub recognition_dir: Option<PathBuf>,
    pub iou_threshold: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut value: toml::Value = text
            .parse()
            .map_err(|e| PipelineError::config(format!("{}: {e}", path.display())))?;
        apply_env_overrides(&mut value, std::env::vars())?;
        let cfg: RunConfig = value
            .try_into()
            .map_err(|e| PipelineError::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.epochs == 0 {
            return Err(PipelineError::config("train.epochs must be >= 1"));
        }
        if self.train.batch_size == 0 {
            return Err(PipelineError::config("train.batch_size must be >= 1"));
        }
        if self.infer.tile != 0 && self.infer.tile <= self.infer.overlap {
            return Err(PipelineError::config(format!(
                "tile ({}) must exceed overlap ({})",
                self.infer.tile, self.infer.overlap
            )));
        }
        self.enhancer
            .validate()
            .map_err(|e| PipelineError::config(e.to_string()))?;
        Ok(())
    }

    /// Desk-scale training profile: tiny network, 64-pixel patches, a few
    /// hundred steps; finishes in minutes on a CPU.
    pub fn desk_enhance() -> Self {
        Self {
            enhancer: EnhancerConfig::desk(),
            patch: PatchConfig {
                size: 64,
                ..PatchConfig::default()
            },
            train: TrainConfig {
                epochs: 300,
                batch_size: 1,
                checkpoint_every: 50,
                resume: None,
                // Desk-scale rate; the published schedule lives in the
                // paper profiles.
                lr: LrSchedule {
                    initial: 1e-3,
                    drop_to: None,
                    drop_after_epochs: None,
                },
            },
            loss: LossConfig {
                ms_ssim: MsSsimConfig {
                    window: 5,
                    ..MsSsimConfig::with_scales(2)
                },
                ..LossConfig::default()
            },
            ..Self::default()
        }
    }

    /// Desk-scale synthesis profile.
    pub fn desk_synth() -> Self {
        Self {
            synth: CurveNetConfig::desk(),
            patch: PatchConfig {
                size: 64,
                require_legible_text: false,
                ..PatchConfig::default()
            },
            train: TrainConfig {
                epochs: 300,
                batch_size: 1,
                checkpoint_every: 50,
                resume: None,
                lr: LrSchedule {
                    initial: 1.5e-2,
                    drop_to: None,
                    drop_after_epochs: None,
                },
            },
            ..Self::default()
        }
    }

    /// The published full-scale training recipe (not exercised by tests).
    pub fn paper_enhance() -> Self {
        Self {
            precision: Precision::F32,
            textcp: TextCpConfig {
                enabled: true,
                ..TextCpConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn paper_synth() -> Self {
        Self {
            precision: Precision::F32,
            patch: PatchConfig {
                size: 256,
                require_legible_text: false,
                ..PatchConfig::default()
            },
            train: TrainConfig {
                epochs: 200,
                batch_size: 8,
                checkpoint_every: 100,
                resume: None,
                lr: LrSchedule {
                    initial: 1e-4,
                    drop_to: None,
                    drop_after_epochs: None,
                },
            },
            ..Self::default()
        }
    }
}

/// Applies `LLTEXT_SECTION__KEY=value` overrides onto the parsed TOML tree.
/// Values are parsed as TOML literals, falling back to strings.
fn apply_env_overrides(
    value: &mut toml::Value,
    vars: impl Iterator<Item = (String, String)>,
) -> Result<()> {
    let mut overrides: Vec<(String, String)> = vars
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    overrides.sort();
    for (key, raw) in overrides {
        let path: Vec<String> = key[ENV_PREFIX.len()..]
            .split("__")
            .map(|s| s.to_lowercase())
            .collect();
        if path.iter().any(|s| s.is_empty()) {
            return Err(PipelineError::config(format!(
                "malformed override variable {key}"
            )));
        }
        // Interpret the value as a TOML literal (number, bool, array...)
        // and fall back to a plain string.
        let parsed: toml::Value = format!("v = {raw}")
            .parse::<toml::Value>()
            .ok()
            .and_then(|t| t.get("v").cloned())
            .unwrap_or(toml::Value::String(raw.clone()));
        let mut cursor = &mut *value;
        for (i, part) in path.iter().enumerate() {
            if i + 1 == path.len() {
                let table = cursor.as_table_mut().ok_or_else(|| {
                    PipelineError::config(format!("override {key} does not address a table"))
                })?;
                table.insert(part.clone(), parsed.clone());
            } else {
                let table = cursor.as_table_mut().ok_or_else(|| {
                    PipelineError::config(format!("override {key} does not address a table"))
                })?;
                cursor = table
                    .entry(part.clone())
                    .or_insert(toml::Value::Table(toml::map::Map::new()));
            }
        }
    }
    Ok(())
}
