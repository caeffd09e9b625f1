//! Text-aware copy-paste augmentation: paste resized text crops at
//! dataset-statistics-driven positions and sizes, rejecting any candidate
//! that would overlap an existing box, leave the image, or fall under the
//! minimum aspect ratio. Pasting is direct (no blending), so pixels outside
//! the pasted rectangles are bit-identical to the input.

use lltext_core::{Aabb, ImageTensor, Scalar, TextBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};
use crate::rng::normal_draw;
use crate::sample::SamplePair;
use crate::stats::BoxStats;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TextCpParams {
    /// Target number of text instances per image.
    pub n_target: usize,
    /// Minimum width-to-height ratio of pasted instances.
    pub gamma: f64,
    /// Total candidate draws before returning a partial augmentation.
    pub max_attempts: usize,
    pub stats: BoxStats,
    pub seed: u64,
}

impl TextCpParams {
    pub fn new(stats: BoxStats, seed: u64) -> Self {
        Self {
            n_target: 10,
            gamma: 1.0,
            max_attempts: 100,
            stats,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 {
            return Err(DataError::Config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.max_attempts == 0 {
            return Err(DataError::Config("max_attempts must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// One poolable text instance: its pixels from the long exposure (and the
/// matching short-exposure crop when the source sample was paired).
#[derive(Debug, Clone)]
pub struct PoolEntry<T> {
    pub long_crop: ImageTensor<T>,
    pub short_crop: Option<ImageTensor<T>>,
    pub transcription: String,
    pub source_id: String,
}

/// The global set of legible text crops available for pasting.
#[derive(Debug, Clone, Default)]
pub struct TextPool<T> {
    pub entries: Vec<PoolEntry<T>>,
}

impl<T: Scalar> TextPool<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Collects every legible box of the corpus with its pixel content.
pub fn build_pool<T: Scalar>(pairs: &[SamplePair<T>]) -> TextPool<T> {
    let mut entries = Vec::new();
    for p in pairs {
        for b in p.legible_boxes() {
            let bb = b.aabb();
            let x0 = bb.u.floor().max(0.0) as usize;
            let y0 = bb.v.floor().max(0.0) as usize;
            let x1 = ((bb.u + bb.w).ceil() as usize).min(p.long.width());
            let y1 = ((bb.v + bb.h).ceil() as usize).min(p.long.height());
            if x1 <= x0 || y1 <= y0 {
                continue;
            }
            let long_crop = match p.long.crop(y0, x0, y1 - y0, x1 - x0) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let short_crop = p.short.crop(y0, x0, y1 - y0, x1 - x0).ok();
            entries.push(PoolEntry {
                long_crop,
                short_crop,
                transcription: b.transcription.clone(),
                source_id: p.id.clone(),
            });
        }
    }
    TextPool { entries }
}

/// Raw placement draws: position uniform over the image extent, size
/// Gaussian from the corpus statistics. No validity filtering here.
pub fn sample_placement(
    params: &TextCpParams,
    image_w: f64,
    image_h: f64,
    rng: &mut ChaCha20Rng,
) -> (f64, f64, f64, f64) {
    let u = rng.gen_range(0.0..image_w);
    let v = rng.gen_range(0.0..image_h);
    let w = params.stats.mu_w + params.stats.sigma_w * normal_draw(rng);
    let h = params.stats.mu_h + params.stats.sigma_h * normal_draw(rng);
    (u, v, w, h)
}

/// Result of one augmentation run.
#[derive(Debug, Clone)]
pub struct TextCpOutcome<T> {
    pub image: ImageTensor<T>,
    pub boxes: Vec<TextBox>,
    /// Boxes actually pasted (partial augmentation is success, not error).
    pub pasted: usize,
    pub attempts: usize,
}

/// Augments one image. Candidate rectangles are quantized to whole pixels
/// before the acceptance checks, so the recorded boxes match the pasted
/// pixels exactly.
pub fn text_cp_augment<T: Scalar>(
    image: &ImageTensor<T>,
    existing: &[TextBox],
    pool: &TextPool<T>,
    params: &TextCpParams,
) -> Result<TextCpOutcome<T>> {
    augment_impl(image, None, existing, pool, params).map(|(long, _, boxes, pasted, attempts)| {
        TextCpOutcome {
            image: long,
            boxes,
            pasted,
            attempts,
        }
    })
}

/// Paired augmentation: the long-exposure crop is pasted on the long
/// exposure and the matching short-exposure crop at the same rectangle on
/// the short exposure. Pool entries without a short crop are skipped.
pub fn text_cp_augment_pair<T: Scalar>(
    pair: &SamplePair<T>,
    pool: &TextPool<T>,
    params: &TextCpParams,
) -> Result<(SamplePair<T>, usize)> {
    let (long, short, boxes, pasted, _) =
        augment_impl(&pair.long, Some(&pair.short), &pair.boxes, pool, params)?;
    let short = short.expect("paired mode returns a short image");
    Ok((
        SamplePair::new(short, long, boxes, pair.id.clone())?,
        pasted,
    ))
}

#[allow(clippy::type_complexity)]
fn augment_impl<T: Scalar>(
    long: &ImageTensor<T>,
    short: Option<&ImageTensor<T>>,
    existing: &[TextBox],
    pool: &TextPool<T>,
    params: &TextCpParams,
) -> Result<(ImageTensor<T>, Option<ImageTensor<T>>, Vec<TextBox>, usize, usize)> {
    params.validate()?;
    let mut boxes = existing.to_vec();
    if boxes.len() >= params.n_target {
        return Ok((long.clone(), short.cloned(), boxes, 0, 0));
    }
    if pool.is_empty() {
        return Err(DataError::Config(
            "text pool is empty but augmentation was requested".to_string(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    let mut long_img = long.clone();
    let mut short_img = short.cloned();
    let (img_w, img_h) = (long.width(), long.height());
    let mut used = vec![false; pool.len()];
    let mut pasted = 0usize;
    let mut attempts = 0usize;

    while boxes.len() < params.n_target && attempts < params.max_attempts {
        attempts += 1;
        // Candidate crop not yet pasted on this image.
        let available: Vec<usize> = (0..pool.len())
            .filter(|i| !used[*i] && (short.is_none() || pool.entries[*i].short_crop.is_some()))
            .collect();
        if available.is_empty() {
            break;
        }
        let entry_idx = available[rng.gen_range(0..available.len())];
        let (u, v, w, h) = sample_placement(params, img_w as f64, img_h as f64, &mut rng);

        let pu = u.round() as i64;
        let pv = v.round() as i64;
        let pw = w.round() as i64;
        let ph = h.round() as i64;
        if pw < 1 || ph < 1 || pu < 0 || pv < 0 {
            continue;
        }
        let (pu, pv, pw, ph) = (pu as usize, pv as usize, pw as usize, ph as usize);
        if (pw as f64) / (ph as f64) < params.gamma {
            continue;
        }
        if pu + pw > img_w || pv + ph > img_h {
            continue;
        }
        let candidate = Aabb::new(pu as f64, pv as f64, pw as f64, ph as f64);
        if boxes.iter().any(|b| b.aabb().intersection_area(&candidate) > 0.0) {
            continue;
        }

        let entry = &pool.entries[entry_idx];
        paste(&mut long_img, &entry.long_crop, pv, pu, ph, pw)?;
        if let Some(simg) = short_img.as_mut() {
            let crop = entry.short_crop.as_ref().expect("filtered above");
            paste(simg, crop, pv, pu, ph, pw)?;
        }
        boxes.push(TextBox::from_rect(
            pu as f64,
            pv as f64,
            pw as f64,
            ph as f64,
            entry.transcription.clone(),
        )?);
        used[entry_idx] = true;
        pasted += 1;
    }
    Ok((long_img, short_img, boxes, pasted, attempts))
}

fn paste<T: Scalar>(
    target: &mut ImageTensor<T>,
    crop: &ImageTensor<T>,
    y0: usize,
    x0: usize,
    h: usize,
    w: usize,
) -> Result<()> {
    let resized = crop.resize_bilinear(h, w)?;
    for y in 0..h {
        for x in 0..w {
            for c in 0..target.channels() {
                let v = if resized.channels() == target.channels() {
                    resized.get(y, x, c)
                } else {
                    resized.get(y, x, 0)
                };
                target.set(y0 + y, x0 + x, c, v);
            }
        }
    }
    Ok(())
}
