//! 8-bit PNG/JPEG image I/O with /255 unit-interval conversion.

use std::path::Path;

use crate::error::{CoreError, Result};
use crate::image::{GrayMap, ImageTensor};
use crate::scalar::Scalar;

fn codec_err(path: &Path, source: image::ImageError) -> CoreError {
    CoreError::Codec {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads an image file as a 3-channel unit-interval tensor.
pub fn load_image<T: Scalar>(path: &Path) -> Result<ImageTensor<T>> {
    let img = image::open(path).map_err(|e| codec_err(path, e))?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .flat_map(|p| p.0)
        .map(|v| T::of(v as f64 / 255.0))
        .collect();
    ImageTensor::new(h, w, 3, data)
}

/// Loads a single-channel map (edge map / heatmap) from an image file.
pub fn load_gray<T: Scalar>(path: &Path) -> Result<GrayMap<T>> {
    let img = image::open(path).map_err(|e| codec_err(path, e))?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .map(|p| T::of(p.0[0] as f64 / 255.0))
        .collect();
    GrayMap::new(h, w, data)
}

fn quantize<T: Scalar>(v: T) -> u8 {
    (v.dbl() * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Writes an image as 8-bit PNG/JPEG (decided by extension), via round(v*255).
pub fn save_image<T: Scalar>(img: &ImageTensor<T>, path: &Path) -> Result<()> {
    let (h, w) = (img.height() as u32, img.width() as u32);
    if img.channels() == 1 {
        let buf = image::GrayImage::from_fn(w, h, |x, y| {
            image::Luma([quantize(img.get(y as usize, x as usize, 0))])
        });
        buf.save(path).map_err(|e| codec_err(path, e))
    } else {
        let buf = image::RgbImage::from_fn(w, h, |x, y| {
            image::Rgb([
                quantize(img.get(y as usize, x as usize, 0)),
                quantize(img.get(y as usize, x as usize, 1)),
                quantize(img.get(y as usize, x as usize, 2)),
            ])
        });
        buf.save(path).map_err(|e| codec_err(path, e))
    }
}

/// Writes a single-channel map as 8-bit grayscale PNG.
pub fn save_gray<T: Scalar>(map: &GrayMap<T>, path: &Path) -> Result<()> {
    save_image(&map.to_image(), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_round_trip_is_exact_after_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let map = GrayMap::<f64>::from_fn(5, 7, |y, x| ((y * 7 + x) % 256) as f64 / 255.0).unwrap();
        save_gray(&map, &path).unwrap();
        let back = load_gray::<f64>(&path).unwrap();
        for (a, b) in map.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn rgb_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let img =
            ImageTensor::<f64>::from_fn(4, 6, 3, |y, x, c| ((y + 2 * x + 5 * c) % 11) as f64 / 10.0)
                .unwrap();
        save_image(&img, &path).unwrap();
        let back = load_image::<f64>(&path).unwrap();
        assert!(back.same_shape(&img));
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn missing_file_is_an_error() {
        assert!(load_image::<f64>(Path::new("/nonexistent/x.png")).is_err());
    }
}
