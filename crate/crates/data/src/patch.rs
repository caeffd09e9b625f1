//! Text-guaranteed patch sampling with seed-deterministic geometry
//! augmentation (flips and transpose applied identically to both exposures
//! and to box coordinates).

use lltext_core::{Aabb, Scalar, TextBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};
use crate::sample::SamplePair;

/// Rejection draws before falling back to constructive placement.
const REJECTION_DRAWS: usize = 100;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PatchSpec {
    /// Square patch edge, pixels.
    pub size: usize,
    /// Require at least one legible box fully inside the patch.
    pub require_legible_text: bool,
    /// Random horizontal/vertical flips, each with probability 1/2.
    pub random_flips: bool,
    /// Random spatial transpose with probability 1/2.
    pub random_transpose: bool,
    /// Keep clipped legible boxes as don't-care when they lose >= 50% area
    /// (otherwise they are dropped).
    #[serde(default)]
    pub clipped_to_dont_care: bool,
}

impl PatchSpec {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            require_legible_text: true,
            random_flips: true,
            random_transpose: true,
            clipped_to_dont_care: false,
        }
    }
}

/// A sampled training patch: both exposures cut at identical coordinates,
/// with boxes mapped into patch coordinates.
#[derive(Debug, Clone)]
pub struct PatchSample<T> {
    pub short: lltext_core::ImageTensor<T>,
    pub long: lltext_core::ImageTensor<T>,
    pub boxes: Vec<TextBox>,
}

/// Draws a patch from the pair. Deterministic for a fixed seed.
pub fn sample_patch<T: Scalar>(
    pair: &SamplePair<T>,
    spec: &PatchSpec,
    seed: u64,
) -> Result<PatchSample<T>> {
    let (h, w) = (pair.long.height(), pair.long.width());
    if spec.size < 32 {
        return Err(DataError::Config(format!(
            "patch size must be >= 32, got {}",
            spec.size
        )));
    }
    if spec.size > h || spec.size > w {
        return Err(DataError::Size(format!(
            "patch {0}x{0} does not fit a {h}x{w} image",
            spec.size
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let s = spec.size;
    let (y0, x0) = pick_origin(pair, spec, h, w, &mut rng)?;

    let short = pair.short.crop(y0, x0, s, s)?;
    let long = pair.long.crop(y0, x0, s, s)?;
    let mut boxes = clip_boxes(&pair.boxes, x0 as f64, y0 as f64, s as f64, spec);

    let mut short = short;
    let mut long = long;
    if spec.random_flips {
        if rng.gen::<bool>() {
            short = short.flip_horizontal();
            long = long.flip_horizontal();
            let sz = s as f64;
            boxes = boxes.iter().map(|b| b.map_points(|p| [sz - p[0], p[1]])).collect();
        }
        if rng.gen::<bool>() {
            short = short.flip_vertical();
            long = long.flip_vertical();
            let sz = s as f64;
            boxes = boxes.iter().map(|b| b.map_points(|p| [p[0], sz - p[1]])).collect();
        }
    }
    if spec.random_transpose && rng.gen::<bool>() {
        short = short.transpose();
        long = long.transpose();
        boxes = boxes.iter().map(|b| b.map_points(|p| [p[1], p[0]])).collect();
    }
    Ok(PatchSample { short, long, boxes })
}

fn pick_origin<T: Scalar>(
    pair: &SamplePair<T>,
    spec: &PatchSpec,
    h: usize,
    w: usize,
    rng: &mut ChaCha20Rng,
) -> Result<(usize, usize)> {
    let s = spec.size;
    let max_y = h - s;
    let max_x = w - s;
    if !spec.require_legible_text {
        return Ok((rng.gen_range(0..=max_y), rng.gen_range(0..=max_x)));
    }
    let contains_legible = |y0: usize, x0: usize| {
        let window = Aabb::new(x0 as f64, y0 as f64, s as f64, s as f64);
        pair.legible_boxes().any(|b| {
            let bb = b.aabb();
            bb.u >= window.u
                && bb.v >= window.v
                && bb.u + bb.w <= window.u + window.w
                && bb.v + bb.h <= window.v + window.h
        })
    };
    for _ in 0..REJECTION_DRAWS {
        let y0 = rng.gen_range(0..=max_y);
        let x0 = rng.gen_range(0..=max_x);
        if contains_legible(y0, x0) {
            return Ok((y0, x0));
        }
    }
    // Constructive fallback: window around a random placeable legible box.
    let fitting: Vec<&TextBox> = pair
        .legible_boxes()
        .filter(|b| {
            let bb = b.aabb();
            bb.w <= s as f64 && bb.h <= s as f64
        })
        .collect();
    if fitting.is_empty() {
        return Err(DataError::SamplingExhausted(format!(
            "no legible box fits a {s}x{s} patch in sample {}",
            pair.id
        )));
    }
    let b = fitting[rng.gen_range(0..fitting.len())].aabb();
    let x_lo = (b.u + b.w - s as f64).ceil().max(0.0) as usize;
    let x_hi = (b.u.floor() as usize).min(max_x);
    let y_lo = (b.v + b.h - s as f64).ceil().max(0.0) as usize;
    let y_hi = (b.v.floor() as usize).min(max_y);
    let x0 = if x_lo >= x_hi { x_lo.min(max_x) } else { rng.gen_range(x_lo..=x_hi) };
    let y0 = if y_lo >= y_hi { y_lo.min(max_y) } else { rng.gen_range(y_lo..=y_hi) };
    Ok((y0, x0))
}

/// Maps boxes into patch coordinates; a box survives when at least half of
/// its area remains inside the window.
fn clip_boxes(boxes: &[TextBox], x0: f64, y0: f64, size: f64, spec: &PatchSpec) -> Vec<TextBox> {
    let window = Aabb::new(x0, y0, size, size);
    let mut out = Vec::new();
    for b in boxes {
        let bb = b.aabb();
        let inter = bb.intersection_area(&window);
        if inter <= 0.0 {
            continue;
        }
        let keep_whole = inter >= 0.5 * bb.area();
        if !keep_whole && !(spec.clipped_to_dont_care && b.legible) {
            continue;
        }
        let shifted = b.translate(-x0, -y0);
        let mut quad = shifted.quad;
        for p in &mut quad {
            p[0] = p[0].clamp(0.0, size);
            p[1] = p[1].clamp(0.0, size);
        }
        let legible = if keep_whole { b.legible } else { false };
        let transcription = if keep_whole { b.transcription.clone() } else { String::new() };
        if let Ok(clipped) = TextBox::new(quad, legible, transcription) {
            out.push(clipped);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use lltext_core::ImageTensor;

    /// Image whose pixel values encode their coordinates.
    fn coord_image(h: usize, w: usize, offset: f64) -> ImageTensor<f64> {
        ImageTensor::from_fn(h, w, 1, |y, x, _| {
            ((y * w + x) as f64 + offset) / (2 * h * w) as f64
        })
        .unwrap()
    }

    fn pair_with(boxes: Vec<TextBox>, h: usize, w: usize) -> SamplePair<f64> {
        SamplePair::new(
            coord_image(h, w, 0.0).cast(),
            coord_image(h, w, (h * w) as f64 / 2.0),
            boxes,
            "p",
        )
        .map(|mut p| {
            // Short side gets a distinct but aligned encoding.
            p.short = coord_image(h, w, 0.0);
            p
        })
        .unwrap()
    }

    fn rgbify(p: &SamplePair<f64>) -> SamplePair<f64> {
        p.clone()
    }

    #[test]
    fn forced_box_is_inside_patch() {
        let b = TextBox::from_rect(10.0, 12.0, 20.0, 8.0, "w").unwrap();
        let pair = pair_with(vec![b.clone()], 64, 64);
        let pair = rgbify(&pair);
        let spec = PatchSpec {
            random_flips: false,
            random_transpose: false,
            ..PatchSpec::new(64)
        };
        let patch = sample_patch(&pair, &spec, 3).unwrap();
        assert_eq!(patch.boxes.len(), 1);
        let bb = patch.boxes[0].aabb();
        assert!(bb.u >= 0.0 && bb.u + bb.w <= 64.0);
    }

    #[test]
    fn undersized_image_is_a_size_error() {
        let pair = pair_with(vec![], 40, 40);
        let spec = PatchSpec::new(64);
        match sample_patch(&pair, &spec, 0) {
            Err(DataError::Size(_)) => {}
            other => panic!("expected size error, got {other:?}"),
        }
    }

    #[test]
    fn same_seed_reproduces_patch_and_boxes() {
        let boxes = vec![
            TextBox::from_rect(5.0, 5.0, 12.0, 6.0, "a").unwrap(),
            TextBox::from_rect(40.0, 50.0, 10.0, 10.0, "b").unwrap(),
        ];
        let pair = pair_with(boxes, 96, 96);
        let spec = PatchSpec::new(64);
        let a = sample_patch(&pair, &spec, 77).unwrap();
        let b = sample_patch(&pair, &spec, 77).unwrap();
        assert_eq!(a.long.data(), b.long.data());
        assert_eq!(a.boxes, b.boxes);
    }

    #[test]
    fn short_and_long_crops_share_the_window() {
        // Both exposures encode coordinates with a constant offset; the
        // same window keeps pixel-wise differences constant.
        let pair = pair_with(vec![TextBox::from_rect(30.0, 30.0, 10.0, 10.0, "x").unwrap()], 96, 96);
        let spec = PatchSpec {
            random_flips: false,
            random_transpose: false,
            ..PatchSpec::new(64)
        };
        let p = sample_patch(&pair, &spec, 5).unwrap();
        // Identical windows mean the coordinate encodings line up exactly.
        let expected_delta = pair.long.get(0, 0, 0) - pair.short.get(0, 0, 0);
        for (s, l) in p.short.data().iter().zip(p.long.data()) {
            assert!((l - s - expected_delta).abs() < 1e-12);
        }
    }

    #[test]
    fn box_transforms_commute_with_image_transforms() {
        // Sum of pixel values inside each box region is invariant under the
        // flip/transpose chain when boxes track the same pixels.
        let b = TextBox::from_rect(8.0, 16.0, 12.0, 6.0, "t").unwrap();
        let pair = pair_with(vec![b], 64, 64);
        let box_mass = |img: &ImageTensor<f64>, bb: &Aabb| {
            let mut acc = 0.0;
            for y in bb.v as usize..(bb.v + bb.h) as usize {
                for x in bb.u as usize..(bb.u + bb.w) as usize {
                    acc += img.get(y, x, 0);
                }
            }
            acc
        };
        for seed in 0..16u64 {
            let spec = PatchSpec::new(64);
            let p = sample_patch(&pair, &spec, seed).unwrap();
            assert_eq!(p.boxes.len(), 1);
            let before = box_mass(&pair.long, &pair.boxes[0].aabb());
            let after = box_mass(&p.long, &p.boxes[0].aabb());
            assert!(
                (before - after).abs() < 1e-9,
                "box lost pixel alignment at seed {seed}: {before} vs {after}"
            );
        }
    }

    #[test]
    fn half_clipped_boxes_are_dropped() {
        // Box hangs 75% outside every possible 64x64 window.
        let b = TextBox::from_rect(0.0, 0.0, 16.0, 16.0, "gone").unwrap();
        let keep = TextBox::from_rect(40.0, 40.0, 10.0, 10.0, "keep").unwrap();
        let pair = pair_with(vec![b, keep], 128, 128);
        let spec = PatchSpec {
            random_flips: false,
            random_transpose: false,
            ..PatchSpec::new(64)
        };
        // Force a window that clips the first box to a quarter: origin (12, 12)
        // leaves [12,16)x[12,16).
        let clipped = clip_boxes(&pair.boxes, 12.0, 12.0, 64.0, &spec);
        assert_eq!(clipped.len(), 1);
        assert_eq!(clipped[0].transcription, "keep");
    }

    #[test]
    fn clipped_legible_can_become_dont_care() {
        let b = TextBox::from_rect(0.0, 0.0, 16.0, 16.0, "gone").unwrap();
        let spec = PatchSpec {
            clipped_to_dont_care: true,
            ..PatchSpec::new(64)
        };
        let clipped = clip_boxes(&[b], 12.0, 12.0, 64.0, &spec);
        assert_eq!(clipped.len(), 1);
        assert!(!clipped[0].legible);
    }

    #[test]
    fn sampling_exhausted_when_no_box_fits() {
        // Legible box larger than the patch; requirement cannot be met.
        let b = TextBox::from_rect(0.0, 0.0, 90.0, 90.0, "big").unwrap();
        let pair = pair_with(vec![b], 128, 128);
        let spec = PatchSpec {
            random_flips: false,
            random_transpose: false,
            ..PatchSpec::new(64)
        };
        match sample_patch(&pair, &spec, 0) {
            Err(DataError::SamplingExhausted(_)) => {}
            other => panic!("expected sampling-exhausted, got {other:?}"),
        }
    }
}
