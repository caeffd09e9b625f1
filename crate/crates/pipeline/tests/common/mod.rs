#![allow(dead_code)]

//! Shared fixtures: a tiny paired dataset written to disk.

use std::path::{Path, PathBuf};

use lltext_core::io::save_image;
use lltext_core::ImageTensor;
use lltext_pipeline::config::{PatchConfig, RunConfig, TrainConfig};

/// Bright structured image with box-like "text" strokes.
pub fn bright_image(h: usize, w: usize) -> ImageTensor<f64> {
    ImageTensor::from_fn(h, w, 3, |y, x, c| {
        let base = 0.55 + 0.25 * (((x * 7 + y * 3) % 23) as f64 / 22.0);
        let stroke = if (8..16).contains(&(y % 24)) && (x % 16) < 10 {
            0.25
        } else {
            0.0
        };
        (base - stroke + 0.05 * c as f64).clamp(0.02, 0.98)
    })
    .unwrap()
}

/// Darkened counterpart: 0.1x intensity plus mild structure.
pub fn dark_image(bright: &ImageTensor<f64>) -> ImageTensor<f64> {
    ImageTensor::from_fn(bright.height(), bright.width(), 3, |y, x, c| {
        (bright.get(y, x, c) * 0.1).clamp(0.0, 1.0)
    })
    .unwrap()
}

/// Writes a one-sample paired dataset and returns the manifest path.
pub fn write_tiny_dataset(dir: &Path, size: usize) -> PathBuf {
    let bright = bright_image(size, size);
    let dark = dark_image(&bright);
    save_image(&dark, &dir.join("short.png")).unwrap();
    save_image(&bright, &dir.join("long.png")).unwrap();
    // Two legible words and one don't-care region.
    let s = size as f64;
    let ann = format!(
        "{},{},{},{},{},{},{},{},word\n{},{},{},{},{},{},{},{},mark\n{},{},{},{},{},{},{},{},###\n",
        s * 0.1, s * 0.15, s * 0.4, s * 0.15, s * 0.4, s * 0.3, s * 0.1, s * 0.3,
        s * 0.55, s * 0.55, s * 0.85, s * 0.55, s * 0.85, s * 0.7, s * 0.55, s * 0.7,
        s * 0.1, s * 0.75, s * 0.3, s * 0.75, s * 0.3, s * 0.9, s * 0.1, s * 0.9,
    );
    std::fs::write(dir.join("ann.txt"), ann).unwrap();
    let manifest = format!(
        "[[sample]]\nid = \"t0\"\nshort = \"short.png\"\nlong = \"long.png\"\nannotation = \"ann.txt\"\nsplit = \"train\"\n"
    );
    let path = dir.join("manifest.toml");
    std::fs::write(&path, manifest).unwrap();
    path
}

/// Desk-scale enhancer run configuration bound to a dataset directory.
pub fn desk_enhance_config(manifest: PathBuf, out_dir: PathBuf, epochs: usize) -> RunConfig {
    let mut cfg = RunConfig::desk_enhance();
    cfg.dataset.manifest = manifest;
    cfg.dataset.split = Some("train".to_string());
    cfg.out_dir = out_dir;
    cfg.train = TrainConfig {
        epochs,
        batch_size: 1,
        checkpoint_every: 1000,
        resume: None,
        ..cfg.train
    };
    cfg.patch = PatchConfig {
        size: 64,
        require_legible_text: true,
        random_flips: false,
        random_transpose: false,
        clipped_to_dont_care: false,
    };
    cfg.seed = 7;
    cfg
}

/// Desk-scale synthesis run configuration.
pub fn desk_synth_config(manifest: PathBuf, out_dir: PathBuf, epochs: usize) -> RunConfig {
    let mut cfg = RunConfig::desk_synth();
    cfg.dataset.manifest = manifest;
    cfg.dataset.split = Some("train".to_string());
    cfg.out_dir = out_dir;
    cfg.train = TrainConfig {
        epochs,
        batch_size: 1,
        checkpoint_every: 1000,
        resume: None,
        ..cfg.train
    };
    cfg.patch = PatchConfig {
        size: 64,
        require_legible_text: false,
        random_flips: false,
        random_transpose: false,
        clipped_to_dont_care: false,
    };
    cfg.seed = 11;
    cfg
}
