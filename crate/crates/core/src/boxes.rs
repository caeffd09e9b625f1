//! Quadrilateral text annotations and box geometry.

use crate::error::{CoreError, Result};

/// Don't-care transcription marker of the IC15 annotation format.
pub const DONT_CARE: &str = "###";

/// One corner point in pixel coordinates (x, y).
pub type Point = [f64; 2];

/// Axis-aligned bounding rectangle: top-left position plus extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub h: f64,
}

impl Aabb {
    pub fn new(u: f64, v: f64, w: f64, h: f64) -> Self {
        Self { u, v, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn intersection_area(&self, other: &Aabb) -> f64 {
        let x0 = self.u.max(other.u);
        let y0 = self.v.max(other.v);
        let x1 = (self.u + self.w).min(other.u + other.w);
        let y1 = (self.v + self.h).min(other.v + other.h);
        (x1 - x0).max(0.0) * (y1 - y0).max(0.0)
    }

    pub fn iou(&self, other: &Aabb) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// Quadrilateral text annotation with legibility flag and transcription.
///
/// Corners are stored clockwise from the top-left, in pixel coordinates of
/// the owning image. Illegible boxes carry an empty transcription and are
/// serialized with the [`DONT_CARE`] marker.
#[derive(Debug, Clone, PartialEq)]
pub struct TextBox {
    pub quad: [Point; 4],
    pub legible: bool,
    pub transcription: String,
}

impl TextBox {
    /// Validates that the quad spans a rectangle with positive extent.
    pub fn new(quad: [Point; 4], legible: bool, transcription: impl Into<String>) -> Result<Self> {
        let b = aabb_of(&quad);
        if !(b.w > 0.0 && b.h > 0.0) {
            return Err(CoreError::invalid(format!(
                "degenerate text box: aabb {}x{}",
                b.w, b.h
            )));
        }
        let transcription = if legible { transcription.into() } else { String::new() };
        Ok(Self {
            quad,
            legible,
            transcription,
        })
    }

    /// Legible box from an axis-aligned rectangle.
    pub fn from_rect(u: f64, v: f64, w: f64, h: f64, transcription: impl Into<String>) -> Result<Self> {
        Self::new(
            [[u, v], [u + w, v], [u + w, v + h], [u, v + h]],
            true,
            transcription,
        )
    }

    /// Illegible (don't-care) box from an axis-aligned rectangle.
    pub fn dont_care_rect(u: f64, v: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(
            [[u, v], [u + w, v], [u + w, v + h], [u, v + h]],
            false,
            "",
        )
    }

    /// Derived axis-aligned bounding rectangle of the quad.
    pub fn aabb(&self) -> Aabb {
        aabb_of(&self.quad)
    }

    /// True when every corner lies inside [0, width] × [0, height].
    pub fn in_bounds(&self, width: f64, height: f64) -> bool {
        self.quad
            .iter()
            .all(|p| p[0] >= 0.0 && p[0] <= width && p[1] >= 0.0 && p[1] <= height)
    }

    /// Applies a point transform to each corner and re-canonicalizes the
    /// corner order (clockwise from the corner nearest the top-left).
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Self {
        let mut quad = self.quad.map(&f);
        canonicalize_quad(&mut quad);
        Self {
            quad,
            legible: self.legible,
            transcription: self.transcription.clone(),
        }
    }

    /// Shifts the box by (-dx, -dy), e.g. into patch coordinates.
    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        let mut quad = self.quad;
        for p in &mut quad {
            p[0] += dx;
            p[1] += dy;
        }
        Self {
            quad,
            legible: self.legible,
            transcription: self.transcription.clone(),
        }
    }
}

fn aabb_of(quad: &[Point; 4]) -> Aabb {
    let xs = quad.iter().map(|p| p[0]);
    let ys = quad.iter().map(|p| p[1]);
    let xmin = xs.clone().fold(f64::INFINITY, f64::min);
    let xmax = xs.fold(f64::NEG_INFINITY, f64::max);
    let ymin = ys.clone().fold(f64::INFINITY, f64::min);
    let ymax = ys.fold(f64::NEG_INFINITY, f64::max);
    Aabb::new(xmin, ymin, xmax - xmin, ymax - ymin)
}

/// Reorders corners clockwise (in image coordinates, y down) starting from
/// the corner closest to the top-left. Flips reverse orientation, so this
/// restores the stored-corner convention after a geometric transform.
fn canonicalize_quad(quad: &mut [Point; 4]) {
    let cx = quad.iter().map(|p| p[0]).sum::<f64>() / 4.0;
    let cy = quad.iter().map(|p| p[1]).sum::<f64>() / 4.0;
    // Clockwise with y pointing down == ascending atan2 at (cy, cx).
    quad.sort_by(|a, b| {
        let aa = (a[1] - cy).atan2(a[0] - cx);
        let ab = (b[1] - cy).atan2(b[0] - cx);
        aa.partial_cmp(&ab).expect("finite corner angles")
    });
    let start = quad
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            let ka = a[0] + a[1];
            let kb = b[0] + b[1];
            ka.partial_cmp(&kb).expect("finite corners")
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    quad.rotate_left(start);
}

/// IoU computation mode: axis-aligned rectangles (default) or the
/// quadrilaterals themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IouMode {
    #[default]
    Aabb,
    Quad,
}

/// Intersection-over-union of the axis-aligned bounding rectangles.
pub fn box_iou(a: &TextBox, b: &TextBox) -> f64 {
    a.aabb().iou(&b.aabb())
}

/// IoU under an explicit mode; `Quad` treats both quads as convex polygons.
pub fn box_iou_mode(a: &TextBox, b: &TextBox, mode: IouMode) -> f64 {
    match mode {
        IouMode::Aabb => box_iou(a, b),
        IouMode::Quad => {
            let inter = convex_intersection_area(&a.quad, &b.quad);
            let union = polygon_area(&a.quad) + polygon_area(&b.quad) - inter;
            if union <= 0.0 {
                0.0
            } else {
                inter / union
            }
        }
    }
}

fn polygon_area(points: &[Point]) -> f64 {
    let n = points.len();
    let mut s = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        s += points[i][0] * points[j][1] - points[j][0] * points[i][1];
    }
    s.abs() / 2.0
}

/// Sutherland–Hodgman clip of `subject` against convex `clip`.
fn convex_intersection_area(subject: &[Point; 4], clip: &[Point; 4]) -> f64 {
    let mut clip = *clip;
    // The clipper needs a consistent winding; normalize to counterclockwise
    // in (x, y) terms.
    if signed_area(&clip) < 0.0 {
        clip.reverse();
    }
    let mut output: Vec<Point> = subject.to_vec();
    for i in 0..4 {
        if output.is_empty() {
            return 0.0;
        }
        let a = clip[i];
        let b = clip[(i + 1) % 4];
        let input = std::mem::take(&mut output);
        let inside = |p: Point| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0;
        for k in 0..input.len() {
            let cur = input[k];
            let prev = input[(k + input.len() - 1) % input.len()];
            let cur_in = inside(cur);
            let prev_in = inside(prev);
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(a, b, prev, cur));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(a, b, prev, cur));
            }
        }
    }
    polygon_area(&output)
}

fn signed_area(points: &[Point; 4]) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        let j = (i + 1) % 4;
        s += points[i][0] * points[j][1] - points[j][0] * points[i][1];
    }
    s / 2.0
}

fn line_intersection(a: Point, b: Point, p: Point, q: Point) -> Point {
    let a1 = b[1] - a[1];
    let b1 = a[0] - b[0];
    let c1 = a1 * a[0] + b1 * a[1];
    let a2 = q[1] - p[1];
    let b2 = p[0] - q[0];
    let c2 = a2 * p[0] + b2 * p[1];
    let det = a1 * b2 - a2 * b1;
    if det.abs() < 1e-12 {
        return p;
    }
    [(b2 * c1 - b1 * c2) / det, (a1 * c2 - a2 * c1) / det]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_boxes_have_unit_iou() {
        let a = TextBox::from_rect(3.0, 4.0, 10.0, 5.0, "a").unwrap();
        assert_abs_diff_eq!(box_iou(&a, &a), 1.0);
        assert_abs_diff_eq!(box_iou_mode(&a, &a, IouMode::Quad), 1.0);
    }

    #[test]
    fn disjoint_boxes_have_zero_iou() {
        let a = TextBox::from_rect(0.0, 0.0, 4.0, 4.0, "a").unwrap();
        let b = TextBox::from_rect(10.0, 10.0, 4.0, 4.0, "b").unwrap();
        assert_abs_diff_eq!(box_iou(&a, &b), 0.0);
    }

    #[test]
    fn hand_geometry_overlap() {
        // (0,0,10,10) vs (5,0,10,10): intersection 5*10, union 200-50.
        let a = TextBox::from_rect(0.0, 0.0, 10.0, 10.0, "a").unwrap();
        let b = TextBox::from_rect(5.0, 0.0, 10.0, 10.0, "b").unwrap();
        assert_abs_diff_eq!(box_iou(&a, &b), 50.0 / 150.0, epsilon = 1e-12);
    }

    #[test]
    fn iou_is_symmetric() {
        let a = TextBox::from_rect(1.0, 2.0, 7.0, 3.0, "a").unwrap();
        let b = TextBox::from_rect(4.0, 1.0, 5.0, 6.0, "b").unwrap();
        assert_abs_diff_eq!(box_iou(&a, &b), box_iou(&b, &a));
    }

    #[test]
    fn quad_iou_matches_aabb_for_rectangles() {
        let a = TextBox::from_rect(0.0, 0.0, 10.0, 10.0, "a").unwrap();
        let b = TextBox::from_rect(5.0, 0.0, 10.0, 10.0, "b").unwrap();
        assert_abs_diff_eq!(
            box_iou_mode(&a, &b, IouMode::Quad),
            box_iou(&a, &b),
            epsilon = 1e-9
        );
    }

    #[test]
    fn degenerate_quad_rejected() {
        let err = TextBox::new([[0.0, 0.0], [0.0, 0.0], [0.0, 5.0], [0.0, 5.0]], true, "x");
        assert!(err.is_err());
    }

    proptest::proptest! {
        #[test]
        fn iou_symmetric_and_bounded(
            u1 in 0.0..50.0f64, v1 in 0.0..50.0f64, w1 in 1.0..30.0f64, h1 in 1.0..30.0f64,
            u2 in 0.0..50.0f64, v2 in 0.0..50.0f64, w2 in 1.0..30.0f64, h2 in 1.0..30.0f64,
        ) {
            let a = TextBox::from_rect(u1, v1, w1, h1, "a").unwrap();
            let b = TextBox::from_rect(u2, v2, w2, h2, "b").unwrap();
            let ab = box_iou(&a, &b);
            let ba = box_iou(&b, &a);
            proptest::prop_assert!((ab - ba).abs() < 1e-12);
            proptest::prop_assert!((0.0..=1.0).contains(&ab));
            proptest::prop_assert!((box_iou(&a, &a) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn map_points_recanonicalizes_order() {
        let b = TextBox::from_rect(2.0, 3.0, 6.0, 4.0, "x").unwrap();
        // Horizontal flip in a width-20 image.
        let f = b.map_points(|p| [20.0 - p[0], p[1]]);
        let bb = f.aabb();
        assert_abs_diff_eq!(bb.u, 12.0);
        assert_abs_diff_eq!(bb.v, 3.0);
        assert_abs_diff_eq!(bb.w, 6.0);
        assert_abs_diff_eq!(bb.h, 4.0);
        // Top-left corner first again.
        assert_abs_diff_eq!(f.quad[0][0], 12.0);
        assert_abs_diff_eq!(f.quad[0][1], 3.0);
    }
}
