//! Batch inference: full-frame enhancement with reflect padding for
//! non-divisible sizes, optional overlap-blended tiling, and single-pass
//! low-light synthesis with provenance sidecars.

use std::path::{Path, PathBuf};

use lltext_core::io::{load_gray, save_gray, save_image};
use lltext_core::{EdgeMap, GrayMap, ImageTensor, Scalar};
use lltext_data::Manifest;
use lltext_nn::enhancer::Enhancer;
use lltext_nn::synthdce::{synthesize, CurveNet};
use sha2::{Digest, Sha256};

use crate::checkpoint::Checkpoint;
use crate::config::{EdgeMode, RunConfig};
use crate::error::{PipelineError, Result};

/// Mirror index for reflect padding (period 2n-2, no edge repetition).
fn mirror(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * n - 2;
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

fn reflect_pad<T: Scalar>(img: &ImageTensor<T>, new_h: usize, new_w: usize) -> ImageTensor<T> {
    ImageTensor::from_fn(new_h, new_w, img.channels(), |y, x, c| {
        img.get(mirror(y, img.height()), mirror(x, img.width()), c)
    })
    .expect("padded values stay in range")
}

fn reflect_pad_gray<T: Scalar>(map: &GrayMap<T>, new_h: usize, new_w: usize) -> GrayMap<T> {
    GrayMap::from_fn(new_h, new_w, |y, x| {
        map.get(mirror(y, map.height()), mirror(x, map.width()))
    })
    .expect("padded values stay in range")
}

/// Enhances one frame: pads to the network's size multiple, runs either a
/// single pass or overlap-blended tiles, and crops back to the input size.
pub fn enhance_frame<T: Scalar>(
    net: &Enhancer<T>,
    image: &ImageTensor<T>,
    edge: &EdgeMap<T>,
    tile: usize,
    overlap: usize,
) -> Result<(ImageTensor<T>, EdgeMap<T>)> {
    let m = net.config.size_multiple();
    let (h, w) = (image.height(), image.width());
    let ph = h.div_ceil(m) * m;
    let pw = w.div_ceil(m) * m;
    let padded = if (ph, pw) != (h, w) {
        reflect_pad(image, ph, pw)
    } else {
        image.clone()
    };
    let padded_edge = if (ph, pw) != (h, w) {
        reflect_pad_gray(edge, ph, pw)
    } else {
        edge.clone()
    };

    let (enhanced, fused) = if tile == 0 || (ph <= tile && pw <= tile) {
        let out = net.forward(&padded, &padded_edge)?;
        (out.enhanced, out.fused_edge)
    } else {
        enhance_tiled(net, &padded, &padded_edge, tile, overlap)?
    };

    let enhanced = enhanced.crop(0, 0, h, w)?;
    let fused = GrayMap::from_fn(h, w, |y, x| fused.get(y, x))?;
    Ok((enhanced, fused))
}

fn enhance_tiled<T: Scalar>(
    net: &Enhancer<T>,
    image: &ImageTensor<T>,
    edge: &EdgeMap<T>,
    tile: usize,
    overlap: usize,
) -> Result<(ImageTensor<T>, EdgeMap<T>)> {
    let m = net.config.size_multiple();
    if tile % m != 0 {
        return Err(PipelineError::config(format!(
            "tile size {tile} must be a multiple of {m}"
        )));
    }
    if tile <= overlap {
        return Err(PipelineError::config(format!(
            "tile ({tile}) must exceed overlap ({overlap})"
        )));
    }
    let (h, w) = (image.height(), image.width());
    let stride = tile - overlap;
    let origins = |n: usize| -> Vec<usize> {
        if n <= tile {
            return vec![0];
        }
        let mut out = Vec::new();
        let mut at = 0usize;
        loop {
            if at + tile >= n {
                out.push(n - tile);
                break;
            }
            out.push(at);
            at += stride;
        }
        out
    };
    // Linear ramp over the overlap keeps seams smooth; tiles are averaged
    // by their accumulated weights.
    let ramp: Vec<f64> = (0..tile)
        .map(|i| {
            let up = (i + 1) as f64 / (overlap + 1) as f64;
            let down = (tile - i) as f64 / (overlap + 1) as f64;
            up.min(down).min(1.0)
        })
        .collect();

    let mut acc = vec![0.0f64; h * w * 3];
    let mut acc_edge = vec![0.0f64; h * w];
    let mut wsum = vec![0.0f64; h * w];
    for &y0 in &origins(h) {
        for &x0 in &origins(w) {
            let img_tile = image.crop(y0, x0, tile.min(h), tile.min(w))?;
            let edge_tile = GrayMap::from_fn(tile.min(h), tile.min(w), |y, x| edge.get(y0 + y, x0 + x))?;
            let out = net.forward(&img_tile, &edge_tile)?;
            for ty in 0..img_tile.height() {
                for tx in 0..img_tile.width() {
                    let wgt = ramp[ty] * ramp[tx];
                    let at = (y0 + ty) * w + (x0 + tx);
                    wsum[at] += wgt;
                    acc_edge[at] += wgt * out.fused_edge.get(ty, tx).dbl();
                    for c in 0..3 {
                        acc[at * 3 + c] += wgt * out.enhanced.get(ty, tx, c).dbl();
                    }
                }
            }
        }
    }
    let enhanced = ImageTensor::from_fn(h, w, 3, |y, x, c| {
        let at = y * w + x;
        T::of((acc[at * 3 + c] / wsum[at]).clamp(0.0, 1.0))
    })?;
    let fused = GrayMap::from_fn(h, w, |y, x| {
        let at = y * w + x;
        T::of((acc_edge[at] / wsum[at]).clamp(0.0, 1.0))
    })?;
    Ok((enhanced, fused))
}

/// Produces the input edge map per the configured mode.
pub fn input_edges<T: Scalar>(cfg: &RunConfig, id: &str, image: &ImageTensor<T>) -> Result<EdgeMap<T>> {
    match cfg.edge.mode {
        EdgeMode::Classical => Ok(lltext_core::sobel_magnitude(image)),
        EdgeMode::File => {
            let dir = cfg.edge.file_dir.as_ref().ok_or_else(|| {
                PipelineError::config("edge.mode = \"file\" requires edge.file_dir".to_string())
            })?;
            let path = dir.join(format!("{id}.png"));
            let map = load_gray::<T>(&path)
                .map_err(|e| PipelineError::data(format!("edge map for {id}: {e}")))?;
            if map.height() != image.height() || map.width() != image.width() {
                return Err(PipelineError::data(format!(
                    "edge map {} is {}x{}, image is {}x{}",
                    path.display(),
                    map.height(),
                    map.width(),
                    image.height(),
                    image.width()
                )));
            }
            Ok(map)
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub outputs: Vec<PathBuf>,
    pub out_dir: PathBuf,
}

/// `enhance`: restores every sample of the configured split and writes the
/// output tree (plus optional fused-edge maps and side-by-side panels).
pub fn enhance_command<T: Scalar>(cfg: &RunConfig) -> Result<BatchSummary> {
    cfg.validate()?;
    let ckpt = Checkpoint::load(&cfg.infer.checkpoint)?;
    if ckpt.kind != "enhancer" {
        return Err(PipelineError::data(format!(
            "checkpoint {} holds a {} model",
            cfg.infer.checkpoint.display(),
            ckpt.kind
        )));
    }
    let net_cfg = ckpt.config_as::<lltext_nn::enhancer::EnhancerConfig>()?;
    let net = Enhancer::<T>::from_params(net_cfg, ckpt.unpack_params())?;

    let manifest = Manifest::load(&cfg.dataset.manifest)?;
    let enhanced_dir = cfg.out_dir.join("enhanced");
    std::fs::create_dir_all(&enhanced_dir).map_err(|e| PipelineError::io(&enhanced_dir, e))?;
    let mut outputs = Vec::new();
    for entry in manifest.entries(cfg.dataset.split.as_deref()) {
        let pair = manifest.load_entry::<T>(entry, true)?;
        let edges = input_edges(cfg, &entry.id, &pair.short)?;
        let (enhanced, fused) =
            enhance_frame(&net, &pair.short, &edges, cfg.infer.tile, cfg.infer.overlap)?;
        let out_path = enhanced_dir.join(format!("{}.png", entry.id));
        save_image(&enhanced, &out_path)?;
        outputs.push(out_path);
        if cfg.infer.write_edges {
            let dir = cfg.out_dir.join("edges");
            std::fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
            save_gray(&fused, &dir.join(format!("{}.png", entry.id)))?;
        }
        if cfg.infer.write_panels {
            let dir = cfg.out_dir.join("panels");
            std::fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
            let panel = side_by_side(&[&pair.short, &enhanced, &pair.long]);
            save_image(&panel, &dir.join(format!("{}.png", entry.id)))?;
        }
    }
    Ok(BatchSummary {
        outputs,
        out_dir: enhanced_dir,
    })
}

fn side_by_side<T: Scalar>(images: &[&ImageTensor<T>]) -> ImageTensor<T> {
    let h = images.iter().map(|i| i.height()).max().unwrap_or(1);
    let w: usize = images.iter().map(|i| i.width()).sum();
    ImageTensor::from_fn(h, w, 3, |y, x, c| {
        let mut off = 0usize;
        for img in images {
            if x < off + img.width() {
                if y < img.height() {
                    return img.get(y, x - off, c.min(img.channels() - 1));
                }
                return T::zero();
            }
            off += img.width();
        }
        T::zero()
    })
    .expect("panel values in range")
}

/// `synthesize`: darkens every long exposure of the split through the
/// trained curve model, mirroring the tree with provenance sidecars.
pub fn synthesize_command<T: Scalar>(cfg: &RunConfig) -> Result<BatchSummary> {
    cfg.validate()?;
    let ckpt = Checkpoint::load(&cfg.infer.checkpoint)?;
    if ckpt.kind != "synth" {
        return Err(PipelineError::data(format!(
            "checkpoint {} holds a {} model",
            cfg.infer.checkpoint.display(),
            ckpt.kind
        )));
    }
    let net_cfg = ckpt.config_as::<lltext_nn::synthdce::CurveNetConfig>()?;
    let net = CurveNet::<T>::from_params(net_cfg, ckpt.unpack_params());
    let model_hash = file_sha256(&cfg.infer.checkpoint)?;

    let manifest = Manifest::load(&cfg.dataset.manifest)?;
    let out_dir = cfg.out_dir.join("synth");
    std::fs::create_dir_all(&out_dir).map_err(|e| PipelineError::io(&out_dir, e))?;
    let mut outputs = Vec::new();
    for entry in manifest.entries(cfg.dataset.split.as_deref()) {
        let pair = manifest.load_entry::<T>(entry, true)?;
        let dark = synthesize(&net, &pair.long)?;
        let out_path = out_dir.join(format!("{}.png", entry.id));
        save_image(&dark, &out_path)?;
        let sidecar = serde_json::json!({
            "source": entry.long,
            "model_sha256": model_hash,
            "clamp": true,
        });
        let sidecar_path = out_dir.join(format!("{}.json", entry.id));
        std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar).expect("json"))
            .map_err(|e| PipelineError::io(&sidecar_path, e))?;
        outputs.push(out_path);
    }
    Ok(BatchSummary { outputs, out_dir })
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_indexing_reflects_without_edge_repeat() {
        // n = 4: 0 1 2 3 2 1 0 1 2 3 ...
        let expect = [0, 1, 2, 3, 2, 1, 0, 1, 2, 3];
        for (i, e) in expect.iter().enumerate() {
            assert_eq!(mirror(i, 4), *e, "index {i}");
        }
        assert_eq!(mirror(5, 1), 0);
    }

    #[test]
    fn reflect_pad_preserves_top_left_window() {
        let img = ImageTensor::<f64>::from_fn(3, 5, 1, |y, x, _| (y * 5 + x) as f64 / 20.0).unwrap();
        let padded = reflect_pad(&img, 8, 8);
        for y in 0..3 {
            for x in 0..5 {
                assert_eq!(padded.get(y, x, 0), img.get(y, x, 0));
            }
        }
        // Reflection just past the right edge.
        assert_eq!(padded.get(0, 5, 0), img.get(0, 3, 0));
    }
}
