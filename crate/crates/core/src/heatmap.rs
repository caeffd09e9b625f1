//! Synthetic text-region heatmaps and the region-score provider interface.
//!
//! The provider abstraction stands in for a trained text detector's region
//! score: the default implementation warps an isotropic 2D Gaussian into
//! each legible text quad (the same construction style detectors use for
//! their ground truth), and a file-backed implementation serves precomputed
//! maps produced offline by a real detector.

use crate::boxes::TextBox;
use crate::error::{CoreError, Result};
use crate::image::{ImageTensor, RegionHeatmap};
use crate::scalar::Scalar;

/// Gaussian width relative to the unit square a quad is warped from.
const UNIT_SIGMA: f64 = 0.175;
/// Support cutoff: contributions beyond 3 sigma are dropped.
const SUPPORT_RADIUS: f64 = 3.0 * UNIT_SIGMA;

/// Max-composites one isotropic Gaussian per legible box, warped into the
/// box's quad. The center of each box reaches exactly `peak`; background is
/// zero, and illegible boxes contribute nothing.
///
/// Pixel (r, c) samples the continuous field at (c, r). Values beyond the
/// 3-sigma support of a box are exactly zero.
pub fn gaussian_box_heatmap<T: Scalar>(
    boxes: &[TextBox],
    height: usize,
    width: usize,
    peak: f64,
) -> RegionHeatmap<T> {
    assert!(
        peak > 0.0 && peak <= 1.0,
        "heatmap peak must lie in (0, 1], got {peak}"
    );
    let mut out = RegionHeatmap::zeros(height, width);
    for b in boxes {
        if !b.legible {
            continue;
        }
        let Some(inv) = quad_to_unit_square(&b.quad) else {
            continue; // numerically degenerate quad
        };
        // Only pixels near the box can respond; scan its dilated aabb.
        let bb = b.aabb();
        let margin_x = bb.w * (SUPPORT_RADIUS - 0.5) + 1.0;
        let margin_y = bb.h * (SUPPORT_RADIUS - 0.5) + 1.0;
        let x0 = (bb.u - margin_x).floor().max(0.0) as usize;
        let x1 = ((bb.u + bb.w + margin_x).ceil() as usize).min(width.saturating_sub(1));
        let y0 = (bb.v - margin_y).floor().max(0.0) as usize;
        let y1 = ((bb.v + bb.h + margin_y).ceil() as usize).min(height.saturating_sub(1));
        for y in y0..=y1.min(height - 1) {
            for x in x0..=x1 {
                let (u, v) = apply_homography(&inv, x as f64, y as f64);
                let d2 = (u - 0.5).powi(2) + (v - 0.5).powi(2);
                if d2 > SUPPORT_RADIUS * SUPPORT_RADIUS {
                    continue;
                }
                let g = peak * (-d2 / (2.0 * UNIT_SIGMA * UNIT_SIGMA)).exp();
                let g = T::of(g);
                if g > out.get(y, x) {
                    out.set(y, x, g);
                }
            }
        }
    }
    out
}

/// Homography mapping image coordinates back into the unit square of a quad
/// (corners clockwise from top-left: (0,0), (1,0), (1,1), (0,1)).
fn quad_to_unit_square(quad: &[[f64; 2]; 4]) -> Option<[f64; 9]> {
    let fwd = unit_square_to_quad(quad)?;
    invert3(&fwd)
}

fn unit_square_to_quad(quad: &[[f64; 2]; 4]) -> Option<[f64; 9]> {
    let [p0, p1, p2, p3] = *quad;
    let dx1 = p1[0] - p2[0];
    let dx2 = p3[0] - p2[0];
    let dx3 = p0[0] - p1[0] + p2[0] - p3[0];
    let dy1 = p1[1] - p2[1];
    let dy2 = p3[1] - p2[1];
    let dy3 = p0[1] - p1[1] + p2[1] - p3[1];
    if dx3 == 0.0 && dy3 == 0.0 {
        // Affine case.
        return Some([
            p1[0] - p0[0],
            p3[0] - p0[0],
            p0[0],
            p1[1] - p0[1],
            p3[1] - p0[1],
            p0[1],
            0.0,
            0.0,
            1.0,
        ]);
    }
    let den = dx1 * dy2 - dx2 * dy1;
    if den.abs() < 1e-12 {
        return None;
    }
    let g = (dx3 * dy2 - dx2 * dy3) / den;
    let h = (dx1 * dy3 - dx3 * dy1) / den;
    Some([
        p1[0] - p0[0] + g * p1[0],
        p3[0] - p0[0] + h * p3[0],
        p0[0],
        p1[1] - p0[1] + g * p1[1],
        p3[1] - p0[1] + h * p3[1],
        p0[1],
        g,
        h,
        1.0,
    ])
}

fn invert3(m: &[f64; 9]) -> Option<[f64; 9]> {
    let det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6]);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv_det = 1.0 / det;
    Some([
        (m[4] * m[8] - m[5] * m[7]) * inv_det,
        (m[2] * m[7] - m[1] * m[8]) * inv_det,
        (m[1] * m[5] - m[2] * m[4]) * inv_det,
        (m[5] * m[6] - m[3] * m[8]) * inv_det,
        (m[0] * m[8] - m[2] * m[6]) * inv_det,
        (m[2] * m[3] - m[0] * m[5]) * inv_det,
        (m[3] * m[7] - m[4] * m[6]) * inv_det,
        (m[1] * m[6] - m[0] * m[7]) * inv_det,
        (m[0] * m[4] - m[1] * m[3]) * inv_det,
    ])
}

fn apply_homography(m: &[f64; 9], x: f64, y: f64) -> (f64, f64) {
    let w = m[6] * x + m[7] * y + m[8];
    if w.abs() < 1e-12 {
        return (f64::INFINITY, f64::INFINITY);
    }
    ((m[0] * x + m[1] * y + m[2]) / w, (m[3] * x + m[4] * y + m[5]) / w)
}

/// Region-score source: maps an image to a text-region heatmap at a declared
/// downscale factor (1 = full resolution).
pub trait HeatmapProvider<T: Scalar> {
    /// Spatial downscale between input image and heatmap, applied identically
    /// to every image this provider scores.
    fn scale_factor(&self) -> usize {
        1
    }

    fn region_score(&self, img: &ImageTensor<T>) -> Result<RegionHeatmap<T>>;

    /// Heatmap dimensions for an input of the given size.
    fn output_dims(&self, height: usize, width: usize) -> (usize, usize) {
        let s = self.scale_factor().max(1);
        ((height / s).max(1), (width / s).max(1))
    }
}

/// Annotation-driven provider: ignores pixel content and renders the
/// Gaussian heatmap of its stored boxes at the provider's scale.
#[derive(Debug, Clone)]
pub struct SyntheticBoxProvider {
    pub boxes: Vec<TextBox>,
    pub peak: f64,
    pub scale: usize,
}

impl SyntheticBoxProvider {
    pub fn new(boxes: Vec<TextBox>, peak: f64) -> Self {
        Self {
            boxes,
            peak,
            scale: 1,
        }
    }
}

impl<T: Scalar> HeatmapProvider<T> for SyntheticBoxProvider {
    fn scale_factor(&self) -> usize {
        self.scale
    }

    fn region_score(&self, img: &ImageTensor<T>) -> Result<RegionHeatmap<T>> {
        let (h, w) = <Self as HeatmapProvider<T>>::output_dims(self, img.height(), img.width());
        let s = self.scale.max(1) as f64;
        let boxes: Vec<TextBox> = self
            .boxes
            .iter()
            .map(|b| b.map_points(|p| [p[0] / s, p[1] / s]))
            .collect();
        Ok(gaussian_box_heatmap(&boxes, h, w, self.peak))
    }
}

/// Serves one precomputed heatmap (e.g. written offline by a real detector),
/// validating that its size matches the declared scale of the input image.
#[derive(Debug, Clone)]
pub struct FileHeatmapProvider<T> {
    pub map: RegionHeatmap<T>,
    pub scale: usize,
}

impl<T: Scalar> HeatmapProvider<T> for FileHeatmapProvider<T> {
    fn scale_factor(&self) -> usize {
        self.scale
    }

    fn region_score(&self, img: &ImageTensor<T>) -> Result<RegionHeatmap<T>> {
        let (h, w) = <Self as HeatmapProvider<T>>::output_dims(self, img.height(), img.width());
        if self.map.height() != h || self.map.width() != w {
            return Err(CoreError::shape(format!(
                "precomputed heatmap is {}x{}, expected {}x{} for a {}x{} image at scale {}",
                self.map.height(),
                self.map.width(),
                h,
                w,
                img.height(),
                img.width(),
                self.scale
            )));
        }
        Ok(self.map.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empty_box_list_gives_zero_map() {
        let m = gaussian_box_heatmap::<f64>(&[], 8, 8, 1.0);
        assert_eq!(m.max(), 0.0);
    }

    #[test]
    fn axis_aligned_box_peaks_at_center() {
        // Even extents put the center on integer coordinates, so the sampled
        // maximum equals `peak` exactly.
        let b = TextBox::from_rect(10.0, 10.0, 20.0, 16.0, "x").unwrap();
        let m = gaussian_box_heatmap::<f64>(&[b], 40, 48, 0.9);
        let mut best = (0usize, 0usize, 0.0f64);
        for y in 0..40 {
            for x in 0..48 {
                if m.get(y, x) > best.2 {
                    best = (y, x, m.get(y, x));
                }
            }
        }
        assert_abs_diff_eq!(best.2, 0.9, epsilon = 1e-12);
        assert!((best.1 as f64 - 20.0).abs() <= 1.0);
        assert!((best.0 as f64 - 18.0).abs() <= 1.0);
    }

    #[test]
    fn illegible_boxes_contribute_nothing() {
        let b = TextBox::dont_care_rect(4.0, 4.0, 8.0, 8.0).unwrap();
        let m = gaussian_box_heatmap::<f64>(&[b], 16, 16, 1.0);
        assert_eq!(m.max(), 0.0);
    }

    #[test]
    fn disjoint_boxes_compose_by_pointwise_max() {
        let a = TextBox::from_rect(2.0, 2.0, 8.0, 6.0, "a").unwrap();
        let b = TextBox::from_rect(30.0, 20.0, 10.0, 8.0, "b").unwrap();
        let both = gaussian_box_heatmap::<f64>(&[a.clone(), b.clone()], 40, 50, 0.8);
        let ma = gaussian_box_heatmap::<f64>(&[a], 40, 50, 0.8);
        let mb = gaussian_box_heatmap::<f64>(&[b], 40, 50, 0.8);
        for y in 0..40 {
            for x in 0..50 {
                assert_abs_diff_eq!(both.get(y, x), ma.get(y, x).max(mb.get(y, x)));
            }
        }
    }

    #[test]
    fn values_capped_at_peak_and_zero_outside_dilated_box() {
        let b = TextBox::from_rect(16.0, 16.0, 12.0, 8.0, "x").unwrap();
        let m = gaussian_box_heatmap::<f64>(&[b.clone()], 48, 48, 0.7);
        assert!(m.data().iter().all(|v| *v <= 0.7 + 1e-12));
        // 3-sigma support in pixels, measured from the box center.
        let bb = b.aabb();
        let (cx, cy) = (bb.u + bb.w / 2.0, bb.v + bb.h / 2.0);
        let rx = SUPPORT_RADIUS * bb.w + 1.0;
        let ry = SUPPORT_RADIUS * bb.h + 1.0;
        for y in 0..48 {
            for x in 0..48 {
                let outside =
                    (x as f64 - cx).abs() > rx || (y as f64 - cy).abs() > ry;
                if outside {
                    assert_eq!(m.get(y, x), 0.0, "support leaked to ({y},{x})");
                }
            }
        }
    }

    #[test]
    fn synthetic_provider_honors_scale_factor() {
        let b = TextBox::from_rect(8.0, 8.0, 16.0, 8.0, "x").unwrap();
        let p = SyntheticBoxProvider {
            boxes: vec![b],
            peak: 1.0,
            scale: 2,
        };
        let img = ImageTensor::<f64>::zeros(32, 32, 3);
        let m = p.region_score(&img).unwrap();
        assert_eq!((m.height(), m.width()), (16, 16));
        assert!(m.max() > 0.9);
    }

    #[test]
    fn file_provider_validates_dims() {
        let p = FileHeatmapProvider {
            map: RegionHeatmap::<f64>::zeros(8, 8),
            scale: 1,
        };
        let img = ImageTensor::<f64>::zeros(16, 16, 3);
        assert!(p.region_score(&img).is_err());
        let ok = FileHeatmapProvider {
            map: RegionHeatmap::<f64>::zeros(16, 16),
            scale: 1,
        };
        assert!(HeatmapProvider::<f64>::region_score(&ok, &img).is_ok());
    }
}
