//! Classical edge extraction: Sobel gradient maps and the Canny detector.

use crate::color::luma_rec601;
use crate::error::{CoreError, Result};
use crate::image::{EdgeMap, GrayMap, ImageTensor};
use crate::scalar::Scalar;

/// Default Gaussian smoothing width for [`canny_edges`].
pub const CANNY_SIGMA: f64 = 1.4;
/// Default hysteresis thresholds as fractions of the max gradient magnitude.
pub const CANNY_DEFAULT_THRESHOLDS: (f64, f64) = (0.1, 0.2);

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable Gaussian blur with edge replication; radius = ceil(3 sigma).
pub fn gaussian_blur<T: Scalar>(map: &GrayMap<T>, sigma: f64) -> GrayMap<T> {
    if sigma <= 0.0 {
        return map.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let mut sum = 0.0f64;
    for i in -radius..=radius {
        let w = (-((i * i) as f64) / (2.0 * sigma * sigma)).exp();
        kernel.push(w);
        sum += w;
    }
    for w in &mut kernel {
        *w /= sum;
    }

    let (h, w) = (map.height(), map.width());
    let mut horiz = vec![T::zero(); h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for (k, wk) in kernel.iter().enumerate() {
                let xi = clamp_idx(x as isize + k as isize - radius, w);
                acc = acc + map.get(y, xi) * T::of(*wk);
            }
            horiz[y * w + x] = acc;
        }
    }
    let mut out = GrayMap::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for (k, wk) in kernel.iter().enumerate() {
                let yi = clamp_idx(y as isize + k as isize - radius, h);
                acc = acc + horiz[yi * w + x] * T::of(*wk);
            }
            out.set(y, x, acc.clamp(T::zero(), T::one()));
        }
    }
    out
}

/// Sobel x/y gradients of a grayscale map with edge replication.
fn sobel_gradients<T: Scalar>(map: &GrayMap<T>) -> (Vec<T>, Vec<T>) {
    let (h, w) = (map.height(), map.width());
    let mut gx = vec![T::zero(); h * w];
    let mut gy = vec![T::zero(); h * w];
    let at = |y: isize, x: isize| map.get(clamp_idx(y, h), clamp_idx(x, w));
    for y in 0..h as isize {
        for x in 0..w as isize {
            let tl = at(y - 1, x - 1);
            let tc = at(y - 1, x);
            let tr = at(y - 1, x + 1);
            let ml = at(y, x - 1);
            let mr = at(y, x + 1);
            let bl = at(y + 1, x - 1);
            let bc = at(y + 1, x);
            let br = at(y + 1, x + 1);
            let two = T::of(2.0);
            gx[(y as usize) * w + x as usize] = (tr + mr * two + br) - (tl + ml * two + bl);
            gy[(y as usize) * w + x as usize] = (bl + bc * two + br) - (tl + tc * two + tr);
        }
    }
    (gx, gy)
}

/// Normalized Sobel gradient-magnitude map in [0, 1].
///
/// The default "classical" input-edge provider for the enhancer. A uniform
/// image yields an all-zero map; otherwise the maximum response is 1.
pub fn sobel_magnitude<T: Scalar>(img: &ImageTensor<T>) -> EdgeMap<T> {
    let gray = luma_rec601(img);
    let (h, w) = (gray.height(), gray.width());
    let (gx, gy) = sobel_gradients(&gray);
    let mut mag = vec![T::zero(); h * w];
    let mut max = T::zero();
    for i in 0..h * w {
        let m = (gx[i] * gx[i] + gy[i] * gy[i]).sqrt();
        mag[i] = m;
        max = max.max(m);
    }
    let mut out = GrayMap::zeros(h, w);
    if max > T::zero() {
        for y in 0..h {
            for x in 0..w {
                out.set(y, x, (mag[y * w + x] / max).clamp(T::zero(), T::one()));
            }
        }
    }
    out
}

/// Classical Canny detector: Gaussian smoothing, Sobel gradients,
/// non-maximum suppression and hysteresis. Thresholds are fractions of the
/// maximum gradient magnitude, so the result is robust to affine intensity
/// changes that avoid clamping. Returns a binary map.
pub fn canny_edges<T: Scalar>(
    img: &ImageTensor<T>,
    low_threshold: f64,
    high_threshold: f64,
) -> Result<EdgeMap<T>> {
    if !(0.0 <= low_threshold && low_threshold < high_threshold && high_threshold <= 1.0) {
        return Err(CoreError::invalid(format!(
            "thresholds must satisfy 0 <= low < high <= 1, got ({low_threshold}, {high_threshold})"
        )));
    }
    let gray = luma_rec601(img);
    let (h, w) = (gray.height(), gray.width());
    if h < 3 || w < 3 {
        // Too small for a gradient neighborhood; no edges by definition.
        return Ok(GrayMap::zeros(h, w));
    }
    let smooth = gaussian_blur(&gray, CANNY_SIGMA);
    let (gx, gy) = sobel_gradients(&smooth);
    let mut mag = vec![0.0f64; h * w];
    let mut max = 0.0f64;
    for i in 0..h * w {
        let m = (gx[i].dbl().powi(2) + gy[i].dbl().powi(2)).sqrt();
        mag[i] = m;
        max = max.max(m);
    }
    if max <= 0.0 {
        return Ok(GrayMap::zeros(h, w));
    }

    // Non-maximum suppression along the quantized gradient direction. Ties
    // are compared with a relative slack so symmetric profiles keep both
    // ridge pixels regardless of floating-point rounding.
    let tie = 1e-9 * max;
    let mut thin = vec![0.0f64; h * w];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            if mag[i] == 0.0 {
                continue;
            }
            let angle = gy[i].dbl().atan2(gx[i].dbl()).to_degrees();
            let angle = if angle < 0.0 { angle + 180.0 } else { angle };
            let (n1, n2) = if !(22.5..157.5).contains(&angle) {
                (mag[i - 1], mag[i + 1]) // horizontal gradient
            } else if angle < 67.5 {
                (mag[i - w + 1], mag[i + w - 1]) // diagonal /
            } else if angle < 112.5 {
                (mag[i - w], mag[i + w]) // vertical gradient
            } else {
                (mag[i - w - 1], mag[i + w + 1]) // diagonal \
            };
            if mag[i] >= n1 - tie && mag[i] >= n2 - tie {
                thin[i] = mag[i];
            }
        }
    }

    // Double threshold plus hysteresis: grow strong edges through weak ones.
    let low = low_threshold * max;
    let high = high_threshold * max;
    let mut state = vec![0u8; h * w]; // 0 none, 1 weak, 2 strong
    let mut stack = Vec::new();
    for i in 0..h * w {
        if thin[i] >= high {
            state[i] = 2;
            stack.push(i);
        } else if thin[i] >= low {
            state[i] = 1;
        }
    }
    let mut out = GrayMap::zeros(h, w);
    while let Some(i) = stack.pop() {
        let y = i / w;
        let x = i % w;
        out.set(y, x, T::one());
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let ny = y as isize + dy;
                let nx = x as isize + dx;
                if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if state[j] == 1 {
                    state[j] = 2;
                    stack.push(j);
                }
            }
        }
    }
    Ok(out)
}
