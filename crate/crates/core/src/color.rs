//! Color conversions: sRGB linearization, Rec.601 luma, CIELAB lightness.

use crate::error::{CoreError, Result};
use crate::image::{GrayMap, ImageTensor};
use crate::scalar::Scalar;

// Luminance row of the sRGB-to-XYZ matrix (D65 white point), at full
// precision so the weights sum to 1 within one ulp.
const Y_R: f64 = 0.212_639_005_871_510_3;
const Y_G: f64 = 0.715_168_678_767_755_9;
const Y_B: f64 = 0.072_192_315_360_733_7;

/// Inverse sRGB gamma: standard-gamma value in [0, 1] to linear light.
pub fn srgb_to_linear<T: Scalar>(v: T) -> T {
    if v <= T::of(0.04045) {
        v / T::of(12.92)
    } else {
        ((v + T::of(0.055)) / T::of(1.055)).powf(T::of(2.4))
    }
}

/// CIE L* from relative luminance (Yn = 1), scaled by 1/100 into [0, 1].
pub fn luminance_to_lightness<T: Scalar>(y: T) -> T {
    let delta = 6.0 / 29.0;
    let f = if y > T::of(delta * delta * delta) {
        y.powf(T::of(1.0 / 3.0))
    } else {
        y / T::of(3.0 * delta * delta) + T::of(4.0 / 29.0)
    };
    ((T::of(116.0) * f - T::of(16.0)) / T::of(100.0)).clamp(T::zero(), T::one())
}

/// Per-pixel CIELAB perceptual lightness L*/100 of a standard-gamma RGB image.
///
/// Uses the D65 white point and the standard sRGB linearization, so a pure
/// black image maps to 0 and pure white to 1.
pub fn rgb_to_lightness<T: Scalar>(img: &ImageTensor<T>) -> Result<GrayMap<T>> {
    if img.channels() != 3 {
        return Err(CoreError::invalid(format!(
            "rgb_to_lightness needs a 3-channel image, got {} channel(s)",
            img.channels()
        )));
    }
    GrayMap::from_fn(img.height(), img.width(), |y, x| {
        let r = srgb_to_linear(img.get(y, x, 0));
        let g = srgb_to_linear(img.get(y, x, 1));
        let b = srgb_to_linear(img.get(y, x, 2));
        let lum = T::of(Y_R) * r + T::of(Y_G) * g + T::of(Y_B) * b;
        luminance_to_lightness(lum)
    })
}

/// Rec.601 luma of a gamma-encoded image; 1-channel input passes through.
///
/// This is the declared grayscale convention for edge extraction.
pub fn luma_rec601<T: Scalar>(img: &ImageTensor<T>) -> GrayMap<T> {
    if img.channels() == 1 {
        return GrayMap::from_fn(img.height(), img.width(), |y, x| img.get(y, x, 0))
            .expect("shape preserved");
    }
    GrayMap::from_fn(img.height(), img.width(), |y, x| {
        T::of(0.299) * img.get(y, x, 0) + T::of(0.587) * img.get(y, x, 1) + T::of(0.114) * img.get(y, x, 2)
    })
    .expect("luma of unit-interval image stays in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent colorimetry oracle: the reference formula chain written
    /// out directly in f64, kept separate from the generic implementation.
    fn lightness_oracle(gray: f64) -> f64 {
        let lin = if gray <= 0.04045 {
            gray / 12.92
        } else {
            ((gray + 0.055) / 1.055).powf(2.4)
        };
        let y = lin; // equal channels; luminance weights sum to 1
        let d = 6.0f64 / 29.0;
        let f = if y > d.powi(3) {
            y.cbrt()
        } else {
            y / (3.0 * d * d) + 4.0 / 29.0
        };
        (116.0 * f - 16.0) / 100.0
    }

    #[test]
    fn black_maps_to_zero() {
        let img = ImageTensor::<f64>::zeros(3, 3, 3);
        let l = rgb_to_lightness(&img).unwrap();
        assert_abs_diff_eq!(l.mean(), 0.0);
    }

    #[test]
    fn white_maps_to_one() {
        let img = ImageTensor::<f64>::filled(3, 3, 3, 1.0);
        let l = rgb_to_lightness(&img).unwrap();
        assert_abs_diff_eq!(l.mean(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mid_gray_matches_oracle() {
        let img = ImageTensor::<f64>::filled(2, 2, 3, 0.5);
        let l = rgb_to_lightness(&img).unwrap();
        assert_abs_diff_eq!(l.mean(), lightness_oracle(0.5), epsilon = 1e-12);
        // Sanity anchor for the oracle itself.
        assert_abs_diff_eq!(lightness_oracle(0.5), 0.533, epsilon = 2e-3);
    }

    #[test]
    fn monotone_in_gray_level() {
        let mut prev = -1.0f64;
        for i in 0..=20 {
            let g = i as f64 / 20.0;
            let img = ImageTensor::<f64>::filled(1, 1, 3, g);
            let m = rgb_to_lightness(&img).unwrap().mean();
            assert!(m > prev, "lightness not monotone at gray {g}");
            prev = m;
        }
    }

    #[test]
    fn rejects_single_channel() {
        let img = ImageTensor::<f64>::zeros(2, 2, 1);
        assert!(rgb_to_lightness(&img).is_err());
    }
}
