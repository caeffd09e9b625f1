//! Reference image-quality metrics: PSNR, windowed SSIM and the corpus
//! darkness summary (PSNR/SSIM against pure black plus average perceptual
//! lightness).

use lltext_core::{rgb_to_lightness, ImageTensor, Scalar};
use serde::{Deserialize, Serialize};

use crate::error::{MetricsError, Result};

/// Single-scale SSIM configuration (Gaussian window, valid placement).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        let c2 = 0.03f64.powi(2);
        Self {
            window: 11,
            sigma: 1.5,
            c1: 0.01f64.powi(2),
            c2,
            c3: c2 / 2.0,
        }
    }
}

/// Peak signal-to-noise ratio in dB at peak value 1.0; identical images
/// yield positive infinity.
pub fn psnr<T: Scalar>(a: &ImageTensor<T>, b: &ImageTensor<T>) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(MetricsError::shape("psnr inputs differ in shape"));
    }
    let mut acc = 0.0f64;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = x.dbl() - y.dbl();
        acc += d * d;
    }
    let mse = acc / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Mean SSIM over valid Gaussian-window placements, averaged over channels.
pub fn ssim<T: Scalar>(a: &ImageTensor<T>, b: &ImageTensor<T>, cfg: &SsimConfig) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(MetricsError::shape("ssim inputs differ in shape"));
    }
    let (h, w) = (a.height(), a.width());
    let k = cfg.window;
    if h < k || w < k {
        return Err(MetricsError::config(format!(
            "image {h}x{w} smaller than the {k}x{k} ssim window"
        )));
    }
    let win = gaussian_window(k, cfg.sigma);
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut total = 0.0f64;
    for c in 0..a.channels() {
        let mut acc = 0.0f64;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut mx = 0.0;
                let mut my = 0.0;
                let mut xx = 0.0;
                let mut yy = 0.0;
                let mut xy = 0.0;
                for ky in 0..k {
                    for kx in 0..k {
                        let wgt = win[ky * k + kx];
                        let va = a.get(oy + ky, ox + kx, c).dbl();
                        let vb = b.get(oy + ky, ox + kx, c).dbl();
                        mx += wgt * va;
                        my += wgt * vb;
                        xx += wgt * va * va;
                        yy += wgt * vb * vb;
                        xy += wgt * va * vb;
                    }
                }
                let var_x = (xx - mx * mx).max(0.0);
                let var_y = (yy - my * my).max(0.0);
                let cov = xy - mx * my;
                let l = (2.0 * mx * my + cfg.c1) / (mx * mx + my * my + cfg.c1);
                let cc = (2.0 * var_x.sqrt() * var_y.sqrt() + cfg.c2) / (var_x + var_y + cfg.c2);
                let s = (cov + cfg.c3) / (var_x.sqrt() * var_y.sqrt() + cfg.c3);
                acc += l * cc * s;
            }
        }
        total += acc / (oh * ow) as f64;
    }
    Ok(total / a.channels() as f64)
}

fn gaussian_window(k: usize, sigma: f64) -> Vec<f64> {
    let c = (k as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(k * k);
    let mut sum = 0.0;
    for y in 0..k {
        for x in 0..k {
            let d2 = (y as f64 - c).powi(2) + (x as f64 - c).powi(2);
            let v = (-d2 / (2.0 * sigma * sigma)).exp();
            out.push(v);
            sum += v;
        }
    }
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Corpus darkness summary following the pure-black comparison procedure:
/// per-image PSNR and SSIM against an all-zero image of matching size, plus
/// the mean perceptual lightness, each averaged over the corpus.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DarknessSummary {
    /// `None` encodes an infinite average (some image was exactly black).
    pub avg_psnr_vs_black_db: Option<f64>,
    pub avg_ssim_vs_black: f64,
    pub avg_lightness: f64,
}

pub fn dataset_darkness<T: Scalar>(
    images: &[ImageTensor<T>],
    ssim_cfg: &SsimConfig,
) -> Result<DarknessSummary> {
    if images.is_empty() {
        return Err(MetricsError::EmptyCorpus(
            "darkness summary needs at least one image".to_string(),
        ));
    }
    let mut psnr_sum = 0.0f64;
    let mut any_inf = false;
    let mut ssim_sum = 0.0f64;
    let mut light_sum = 0.0f64;
    for img in images {
        let black = ImageTensor::<T>::zeros(img.height(), img.width(), img.channels());
        let p = psnr(img, &black)?;
        if p.is_infinite() {
            any_inf = true;
        } else {
            psnr_sum += p;
        }
        ssim_sum += ssim(img, &black, ssim_cfg)?;
        light_sum += rgb_to_lightness(img)?.mean().dbl();
    }
    let n = images.len() as f64;
    Ok(DarknessSummary {
        avg_psnr_vs_black_db: if any_inf { None } else { Some(psnr_sum / n) },
        avg_ssim_vs_black: ssim_sum / n,
        avg_lightness: light_sum / n,
    })
}
