//! Paired short/long-exposure samples with their text annotations.

use std::path::Path;

use lltext_core::{ImageTensor, Scalar, TextBox};

use crate::error::{DataError, Result};
use crate::icdar::parse_icdar_file;

/// One training/evaluation sample: the dark capture, its well-lit
/// reference, and text boxes annotated on the reference.
#[derive(Debug, Clone)]
pub struct SamplePair<T> {
    pub short: ImageTensor<T>,
    pub long: ImageTensor<T>,
    pub boxes: Vec<TextBox>,
    pub id: String,
}

impl<T: Scalar> SamplePair<T> {
    pub fn new(
        short: ImageTensor<T>,
        long: ImageTensor<T>,
        boxes: Vec<TextBox>,
        id: impl Into<String>,
    ) -> Result<Self> {
        if !short.same_shape(&long) {
            return Err(DataError::Data(format!(
                "short {}x{} and long {}x{} exposures differ in size",
                short.height(),
                short.width(),
                long.height(),
                long.width()
            )));
        }
        let (w, h) = (long.width() as f64, long.height() as f64);
        for b in &boxes {
            if !b.in_bounds(w, h) {
                return Err(DataError::Data(format!(
                    "box {:?} outside the {w}x{h} image",
                    b.aabb()
                )));
            }
        }
        Ok(Self {
            short,
            long,
            boxes,
            id: id.into(),
        })
    }

    pub fn legible_boxes(&self) -> impl Iterator<Item = &TextBox> {
        self.boxes.iter().filter(|b| b.legible)
    }
}

/// Loads a sample from image files plus an IC15 annotation file.
///
/// With `allow_unlabeled`, a missing annotation file yields an empty box
/// list instead of an error.
pub fn load_pair<T: Scalar>(
    short_path: &Path,
    long_path: &Path,
    annotation_path: Option<&Path>,
    allow_unlabeled: bool,
    id: impl Into<String>,
) -> Result<SamplePair<T>> {
    let short = lltext_core::io::load_image::<T>(short_path)?;
    let long = lltext_core::io::load_image::<T>(long_path)?;
    if !short.same_shape(&long) {
        return Err(DataError::Data(format!(
            "dimension mismatch: {} is {}x{}, {} is {}x{}",
            short_path.display(),
            short.height(),
            short.width(),
            long_path.display(),
            long.height(),
            long.width()
        )));
    }
    let boxes = match annotation_path {
        Some(p) if p.exists() => parse_icdar_file(p)?,
        Some(p) => {
            if allow_unlabeled {
                Vec::new()
            } else {
                return Err(DataError::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "annotation file missing"),
                ));
            }
        }
        None => Vec::new(),
    };
    SamplePair::new(short, long, boxes, id)
}
